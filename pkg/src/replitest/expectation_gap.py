"""Expectation-gap statistics and the two replicable estimators built on them.

A statistic ``Z(m)`` computed from ``m`` samples has expectation at most
``tau0(m)`` under the null and at least ``tau1(m)`` under the alternative.
Its standard deviation is bounded by ``sigma(m)``, growing linearly with the
expectation's distance outside ``[tau0, tau1]``. Both estimators threshold
repeated evaluations against ``tau0 + r * Delta`` with a shared random ``r``,
so two runs on independent data usually agree.

All estimators are deterministic functions of (samples, r). The data each
one consumes is a fixed prefix of the stream that does not depend on ``r``,
so the acceptance probability of a fixed sample set, averaged over ``r``,
has a closed form. ``*_acceptance_probability`` computes it.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    ContractError,
    ParameterError,
    PreconditionError,
    SamplingError,
    UnreachableBreakpointError,
)
from .rng import uniform_threshold

MAX_BREAKPOINT = 2**60
R_LOW, R_HIGH = 0.25, 0.75
# relative slack when comparing f(m) to t/2, absorbs float rounding only
_RATIO_SLACK = 1e-12


class Decision(str, enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"

    def __bool__(self):
        return self is Decision.ACCEPT


ACCEPT = Decision.ACCEPT
REJECT = Decision.REJECT


@dataclass(frozen=True)
class TesterVerdict:
    decision: Decision
    r_used: float
    samples_used: int
    stage: str
    statistic_trace: tuple = ()

    @property
    def output(self):
        return self.decision

    def __post_init__(self):
        if self.samples_used < 0:
            raise ParameterError("samples_used must be nonnegative")


def _default_draw(spec, stream, m, reps):
    return np.array([spec.evaluate(stream.draw(m)) for _ in range(reps)], dtype=float)


@dataclass(frozen=True, eq=False)
class StatisticSpec:
    """An expectation-gap statistic.

    ``evaluate(samples)`` maps one batch to ``Z``. ``draw(stream, m, reps)``
    returns ``reps`` independent evaluations on fresh batches of size ``m``.
    Specs override ``draw`` to work from histograms; the default calls
    ``evaluate`` on raw draws.
    """

    name: str
    evaluate: Callable
    tau0: Callable
    tau1: Callable
    sigma: Callable
    m_min: int = 1
    size_invariant: bool = False
    draw: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m_min < 1:
            raise ParameterError("m_min must be positive")
        self.__dict__["_breakpoints"] = {}
        self.validate()

    def grid(self, top=2**40):
        m = self.m_min
        while m <= top:
            yield m
            m = 2 * m + 1

    def validate(self):
        """Checks ``tau1 >= tau0`` and, for size-invariant specs, constant thresholds on a grid."""
        ref0 = ref1 = None
        for m in self.grid():
            a, b = self.tau0(m), self.tau1(m)
            if b < a:
                raise ParameterError(f"{self.name}: tau1({m}) < tau0({m})")
            if self.size_invariant:
                if ref0 is None:
                    ref0, ref1 = a, b
                elif not (math.isclose(a, ref0, rel_tol=1e-12, abs_tol=1e-15) and math.isclose(b, ref1, rel_tol=1e-12, abs_tol=1e-15)):
                    raise ParameterError(f"{self.name}: thresholds vary with m but spec is size-invariant")

    def values(self, stream, m, reps) -> np.ndarray:
        if self.draw is None:
            return _default_draw(self, stream, m, reps)
        return np.asarray(self.draw(stream, m, reps), dtype=float)


@dataclass(frozen=True)
class EstimatorConfig:
    """Parameters shared by both estimators.

    ``t`` is used by the general estimator and defaults to ``min(rho, 1/16)``.
    ``t_schedule`` (``t_1..t_K``) is used by the size-invariant estimator.
    When it is unset every level uses ``1/8``.
    """

    rho: float
    delta: float
    t: Optional[float] = None
    t_schedule: Optional[tuple] = None
    rep_constant: float = 64.0
    strict_scan: bool = False

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise ParameterError("rho must lie in (0, 1]")
        if not 0 < self.delta <= self.rho:
            raise ParameterError("delta must lie in (0, rho]")
        if self.rep_constant <= 0:
            raise ParameterError("rep_constant must be positive")
        if self.t is not None and not min(self.rho, 1 / 16) <= self.t <= 1 / 16:
            raise ParameterError("t must lie in [min(rho, 1/16), 1/16]")
        if self.t_schedule is not None:
            sched = tuple(float(x) for x in self.t_schedule)
            if len(sched) != self.levels:
                raise ParameterError(f"t_schedule needs {self.levels} entries")
            if any(not 0 < x <= 0.5 for x in sched):
                raise ParameterError("t_schedule entries must lie in (0, 1/2]")
            object.__setattr__(self, "t_schedule", sched)

    @property
    def levels(self) -> int:
        """``K = ceil(lg(1/rho))``."""
        return max(0, math.ceil(math.log2(1.0 / self.rho) - 1e-12))

    @property
    def general_t(self) -> float:
        return self.t if self.t is not None else min(self.rho, 1 / 16)

    def schedule(self) -> tuple:
        if self.t_schedule is not None:
            return self.t_schedule
        return (1 / 8,) * self.levels

    def repetitions(self) -> int:
        """``L = ceil(C' t^2 / rho^2)`` for the general estimator."""
        t = self.general_t
        return max(1, math.ceil(self.rep_constant * t * t / (self.rho * self.rho) - 1e-9))

    def stage_one_repetitions(self) -> int:
        return max(1, math.ceil(8 * math.log(1.0 / self.delta) - 1e-9))


def delta_gap(spec: StatisticSpec, m) -> float:
    if m < spec.m_min:
        raise PreconditionError(f"m={m} below m_min={spec.m_min}")
    return spec.tau1(m) - spec.tau0(m)


def noise_ratio(spec: StatisticSpec, m) -> float:
    """``f(m) = sigma(m) / Delta(m)``; infinite when the gap vanishes."""
    gap = delta_gap(spec, m)
    if gap <= 0:
        return math.inf
    return spec.sigma(m) / gap


def _reaches(spec, m, t):
    return noise_ratio(spec, m) <= (t / 2) * (1 + _RATIO_SLACK)


def breakpoint(spec: StatisticSpec, t, strict_scan=False, scan_limit=10**7) -> int:
    """Smallest ``m >= m_min`` with ``f(m) <= t/2``.

    Uses doubling then bisection, assuming ``f`` is nonincreasing. With
    ``strict_scan`` it scans every ``m`` up to ``scan_limit`` instead.
    """
    if not 0 < t <= 1:
        raise PreconditionError("t must lie in (0, 1]")
    key = (float(t), bool(strict_scan))
    cache = spec.__dict__["_breakpoints"]
    if key in cache:
        return cache[key]
    lo = spec.m_min
    if strict_scan:
        for m in range(lo, scan_limit + 1):
            if _reaches(spec, m, t):
                cache[key] = m
                return m
        raise UnreachableBreakpointError(f"{spec.name}: no m <= {scan_limit} reaches t={t}")
    if _reaches(spec, lo, t):
        cache[key] = lo
        return lo
    hi = lo
    while not _reaches(spec, hi, t):
        lo = hi
        hi *= 2
        if hi > MAX_BREAKPOINT:
            raise UnreachableBreakpointError(f"{spec.name}: no m <= 2^60 reaches t={t}")
    # invariant: f(lo) > t/2 >= f(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _reaches(spec, mid, t):
            hi = mid
        else:
            lo = mid
    cache[key] = hi
    return hi


def chebyshev_bound(spec: StatisticSpec, m, alpha) -> float:
    """``f(m)^2 / alpha^2``: Chebyshev bound on a deviation of ``alpha * Delta``."""
    if not 0 < alpha <= 1:
        raise ParameterError("alpha must lie in (0, 1]")
    return noise_ratio(spec, m) ** 2 / alpha**2


def _draw_r(randomness_seed, r):
    if r is not None:
        return float(r)
    if randomness_seed is None:
        raise ParameterError("either randomness_seed or r is required")
    return uniform_threshold(randomness_seed, R_LOW, R_HIGH)


def _take(spec, stream, m, reps):
    try:
        return spec.values(stream, m, reps)
    except SamplingError:
        raise
    except (MemoryError, OverflowError) as exc:
        raise SamplingError(str(exc)) from exc


# ---------------------------------------------------------------- general


@dataclass(frozen=True)
class _GeneralPlan:
    m: int
    reps: int
    tau0: float
    gap: float


def _general_plan(spec, config):
    t = config.general_t
    m = breakpoint(spec, t, strict_scan=config.strict_scan)
    return _GeneralPlan(m, config.repetitions(), spec.tau0(m), delta_gap(spec, m))


def _general_gate(plan, values):
    med = float(np.median(values))
    if med < plan.tau0 + plan.gap / 8:
        return med, ACCEPT
    if med > plan.tau0 + plan.gap - plan.gap / 8:
        return med, REJECT
    return med, None


def general_estimate(spec, config, stream, randomness_seed=None, r=None) -> TesterVerdict:
    """Median gate, then mean versus ``tau0 + r * Delta`` on the same ``L`` estimates."""
    r = _draw_r(randomness_seed, r)
    plan = _general_plan(spec, config)
    start = stream.count_drawn
    values = _take(spec, stream, plan.m, plan.reps)
    used = stream.count_drawn - start
    med, gate = _general_gate(plan, values)
    trace = [("median", med)]
    if gate is not None:
        return TesterVerdict(gate, r, used, "median", tuple(trace))
    mean = math.fsum(values) / len(values)
    trace.append(("mean", mean))
    decision = ACCEPT if mean <= plan.tau0 + r * plan.gap else REJECT
    return TesterVerdict(decision, r, used, "mean", tuple(trace))


def general_acceptance_probability(spec, config, stream) -> float:
    """``Pr_r[accept]`` for the data the general estimator reads from ``stream``."""
    plan = _general_plan(spec, config)
    values = _take(spec, stream, plan.m, plan.reps)
    _, gate = _general_gate(plan, values)
    if gate is not None:
        return 1.0 if gate is ACCEPT else 0.0
    u = (math.fsum(values) / len(values) - plan.tau0) / plan.gap
    # accept iff r >= u
    return _interval_measure(max(u, R_LOW), R_HIGH) / (R_HIGH - R_LOW)


def _interval_measure(lo, hi):
    return max(0.0, hi - lo)


# --------------------------------------------------------- size invariant


def _require_size_invariant(spec):
    if not spec.size_invariant:
        raise ContractError(f"{spec.name} is not size-invariant")


@dataclass(frozen=True)
class _Level:
    k: int
    m: int
    inner: int
    outer: int


def size_invariant_plan(spec, config):
    """Stage-one size/repetitions and the per-level ``(m_{t_k}, J_k, L_k)``."""
    _require_size_invariant(spec)
    m1 = breakpoint(spec, 1 / 8, strict_scan=config.strict_scan)
    levels = []
    K = config.levels
    for k, tk in enumerate(config.schedule(), start=1):
        inner = max(1, math.ceil(tk * tk * 4**k - 1e-9))
        outer = 16 * (K - k + 1)
        levels.append(_Level(k, breakpoint(spec, tk, strict_scan=config.strict_scan), inner, outer))
    return m1, config.stage_one_repetitions(), tuple(levels)


def _stage_one(spec, m1, reps, stream):
    values = _take(spec, stream, m1, reps)
    med = float(np.median(values))
    tau0 = spec.tau0(m1)
    gap = delta_gap(spec, m1)
    if med < tau0 + gap / 8:
        return med, ACCEPT
    if med > spec.tau1(m1) - gap / 8:
        return med, REJECT
    return med, None


def _level_value(spec, level, stream):
    vals = _take(spec, stream, level.m, level.inner * level.outer)
    means = vals.reshape(level.outer, level.inner).mean(axis=1)
    return float(np.median(means))


def size_invariant_estimate(spec, config, stream, randomness_seed=None, r=None) -> TesterVerdict:
    """Stage-one median gate, then levels of median-of-means with shrinking bands around ``r``."""
    m1, reps, levels = size_invariant_plan(spec, config)
    r = _draw_r(randomness_seed, r)
    start = stream.count_drawn
    med, gate = _stage_one(spec, m1, reps, stream)
    trace = [("stage1", med)]
    if gate is not None:
        return TesterVerdict(gate, r, stream.count_drawn - start, "stage1", tuple(trace))
    tau0 = spec.tau0(m1)
    gap = delta_gap(spec, m1)
    for level in levels:
        v = _level_value(spec, level, stream)
        name = f"level{level.k}"
        trace.append((name, v))
        band = 2.0**-level.k
        if v <= tau0 + (r - band) * gap:
            return TesterVerdict(ACCEPT, r, stream.count_drawn - start, name, tuple(trace))
        if v >= tau0 + (r + band) * gap:
            return TesterVerdict(REJECT, r, stream.count_drawn - start, name, tuple(trace))
    return TesterVerdict(ACCEPT, r, stream.count_drawn - start, "fallthrough", tuple(trace))


def size_invariant_acceptance_probability(spec, config, stream) -> float:
    """``Pr_r[accept]`` for the size-invariant estimator, reading every level's data."""
    m1, reps, levels = size_invariant_plan(spec, config)
    _, gate = _stage_one(spec, m1, reps, stream)
    if gate is not None:
        return 1.0 if gate is ACCEPT else 0.0
    tau0 = spec.tau0(m1)
    gap = delta_gap(spec, m1)
    lo, hi = R_LOW, R_HIGH
    accepted = 0.0
    for level in levels:
        u = (_level_value(spec, level, stream) - tau0) / gap
        band = 2.0**-level.k
        # accept for r >= u + band, reject for r <= u - band
        accepted += _interval_measure(max(lo, u + band), hi)
        lo, hi = max(lo, u - band), min(hi, u + band)
        if hi <= lo:
            break
    accepted += _interval_measure(lo, hi)
    return min(1.0, accepted / (R_HIGH - R_LOW))


def worst_case_samples(spec, config) -> int:
    """Samples consumed when the size-invariant estimator runs every level."""
    m1, reps, levels = size_invariant_plan(spec, config)
    return m1 * reps + sum(lv.m * lv.inner * lv.outer for lv in levels)


def midpoint_estimate(spec, stream, t=1 / 8) -> TesterVerdict:
    """Non-replicable baseline: one evaluation at ``m_t`` against the gap midpoint."""
    m = breakpoint(spec, t)
    start = stream.count_drawn
    z = float(_take(spec, stream, m, 1)[0])
    decision = ACCEPT if z <= spec.tau0(m) + delta_gap(spec, m) / 2 else REJECT
    return TesterVerdict(decision, 0.5, stream.count_drawn - start, "midpoint", (("value", z),))


# ------------------------------------------------------------ sample caps


class BudgetExhausted(SamplingError):
    """Raised inside a capped tester once its sample budget would be exceeded."""


class _Budget:
    def __init__(self, limit):
        self.limit = limit
        self.used = 0

    def charge(self, k):
        if self.used + k > self.limit:
            self.used = min(self.limit, self.used + k)
            raise BudgetExhausted(f"sample budget {self.limit} exhausted")
        self.used += k


class CappedStream:
    """Stream wrapper that refuses requests beyond a shared budget."""

    def __init__(self, base, budget: _Budget):
        self._base = base
        self._budget = budget

    def __getattr__(self, name):
        return getattr(self._base, name)

    def draw(self, m):
        self._budget.charge(int(m))
        return self._base.draw(m)

    def draw_counts(self, m, reps=None):
        self._budget.charge(int(m) * (1 if reps is None else int(reps)))
        return self._base.draw_counts(m, reps)

    def draw_poissonized_counts(self, m, reps=None):
        before = self._base.count_drawn
        out = self._base.draw_poissonized_counts(m, reps)
        self._budget.charge(self._base.count_drawn - before)
        return out


class CappedSource:
    """Source wrapper whose streams all draw from one budget."""

    def __init__(self, base, budget: _Budget):
        self._base = base
        self._budget = budget

    def __getattr__(self, name):
        return getattr(self._base, name)

    def open_stream(self, seed):
        return CappedStream(self._base.open_stream(seed), self._budget)

    def open_streams(self, seed):
        return tuple(CappedStream(s, self._budget) for s in self._base.open_streams(seed))


class CappedTester:
    """Runs ``tester`` with at most ``budget`` samples.

    If the budget runs out, it runs ``fallback`` on fresh samples under a
    fresh budget of the same size.
    """

    def __init__(self, tester, budget, fallback):
        if not budget >= 1:
            raise ParameterError("budget must be at least 1")
        self.tester = tester
        self.budget = budget
        self.fallback = fallback
        self.name = f"capped({getattr(tester, 'name', 'tester')})"

    def run(self, source, seeds, r=None) -> TesterVerdict:
        budget = _Budget(self.budget)
        try:
            return self.tester.run(CappedSource(source, budget), seeds, r)
        except BudgetExhausted:
            cut = budget.used
        fresh = _Budget(self.budget)
        fb = self.fallback.run(CappedSource(source, fresh), seeds.child("fallback"))
        return TesterVerdict(
            fb.decision,
            fb.r_used,
            cut + fb.samples_used,
            f"fallback:{fb.stage}",
            (("truncated_at", float(cut)),) + tuple(fb.statistic_trace),
        )


def cap_samples(tester, budget, fallback) -> CappedTester:
    """Wrap ``tester`` so it stops after ``budget`` samples and answers with ``fallback``."""
    return CappedTester(tester, budget, fallback)
