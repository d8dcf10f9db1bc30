"""Coin, uniformity and closeness testers built on expectation-gap statistics.

Each problem gets a ``*_spec`` factory (the statistic and its thresholds),
a functional ``*_test`` entry point, and a tester object. The harness uses
the tester object, which knows how to open streams from a source and also
exposes the exact per-sample-set acceptance probability.
"""

import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from . import expectation_gap as eg
from .errors import ParameterError, PreconditionError, SupportError
from .rng import Seeds

# ------------------------------------------------------------ spec pieces
# Module-level functions combined with functools.partial keep specs picklable.


def _const(value, m):
    return value


def _coin_sigma(q0, m):
    return math.sqrt(q0 / m)


def _coin_evaluate(samples):
    samples = np.asarray(samples)
    if samples.size == 0:
        raise PreconditionError("empty sample")
    return float(np.count_nonzero(samples == 1)) / samples.size


def _coin_draw(stream, m, reps):
    return stream.draw_counts(m, reps)[:, 1] / m


def collision_statistic(counts, m=None):
    """Colliding pairs divided by ``C(m, 2)``, from a histogram (last axis = bins)."""
    counts = np.asarray(counts)
    if m is None:
        m = counts.sum(axis=-1)
    m = np.asarray(m, dtype=float)
    if np.any(m < 2):
        raise PreconditionError("collision statistic needs at least two samples")
    c = counts.astype(float)
    pairs = (c * (c - 1.0)).sum(axis=-1) / 2.0
    return pairs / (m * (m - 1.0) / 2.0)


def _uniformity_evaluate(n, samples):
    samples = np.asarray(samples)
    return float(collision_statistic(np.bincount(samples, minlength=n)))


def _uniformity_draw(stream, m, reps):
    return collision_statistic(stream.draw_counts(m, reps), m)


def _uniformity_sigma(n, eps, c1, c2, m):
    return c1 / (m * math.sqrt(n)) + (c2 / math.sqrt(m)) * (eps / n + eps**1.5 / n**0.75)


def closeness_statistic(hist_x, hist_y):
    """``sum ((X_i - Y_i)^2 - X_i - Y_i) / (X_i + Y_i)``; empty bins contribute 0.

    Works on a single pair of histograms or on stacked histograms (last axis = bins).
    """
    x = np.asarray(hist_x)
    y = np.asarray(hist_y)
    if x.shape != y.shape:
        raise SupportError("histograms must have equal shapes")
    if np.any(x < 0) or np.any(y < 0):
        raise SupportError("counts must be nonnegative")
    x = x.astype(float)
    y = y.astype(float)
    den = x + y
    num = (x - y) ** 2 - x - y
    safe = np.where(den > 0, den, 1.0)
    out = np.where(den > 0, num / safe, 0.0).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def _closeness_evaluate(data):
    hx, hy = data
    return closeness_statistic(hx, hy)


def _closeness_draw(poissonized, stream, m, reps):
    hx, hy = stream.draw_pair(m, reps, poissonized)
    return closeness_statistic(hx, hy)


def _closeness_tau1(n, eps, m):
    return m * m * eps * eps / (4 * n + 2 * m)


def _closeness_sigma(n, eps, m):
    if m < n:
        return math.sqrt(20 * m)
    return math.sqrt(10 * n + 5 * m * eps * eps)


# ---------------------------------------------------------------- problems


@dataclass(frozen=True)
class CoinProblem:
    """Null ``p = p0`` against ``p >= q0``."""

    p0: float
    q0: float
    rho: float
    delta: float

    def __post_init__(self):
        if not 0 <= self.p0 < self.q0 <= 1:
            raise ParameterError("need 0 <= p0 < q0 <= 1")
        eg.EstimatorConfig(self.rho, self.delta)

    @property
    def eps(self):
        return self.q0 - self.p0


@dataclass(frozen=True)
class UniformityProblem:
    n: int
    eps: float
    rho: float
    delta: float
    c1: float = 2.0
    c2: float = 2.0

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError("n must be at least 2")
        if not 0 < self.eps <= 1:
            raise ParameterError("eps must lie in (0, 1]")
        eg.EstimatorConfig(self.rho, self.delta)


@dataclass(frozen=True)
class ClosenessProblem:
    n: int
    eps: float
    rho: float
    poissonized: bool = True
    delta_exponent: float = 2.0

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError("n must be at least 2")
        if not 0 < self.eps <= 1:
            raise ParameterError("eps must lie in (0, 1]")
        if not 0 < self.rho <= 1:
            raise ParameterError("rho must lie in (0, 1]")
        if self.delta_exponent < 1:
            raise ParameterError("delta exponent must be at least 1")

    @property
    def delta(self):
        return self.rho**self.delta_exponent


# ------------------------------------------------------------------- specs


def coin_spec(problem: CoinProblem) -> eg.StatisticSpec:
    return eg.StatisticSpec(
        name="coin",
        evaluate=_coin_evaluate,
        tau0=partial(_const, problem.p0),
        tau1=partial(_const, problem.q0),
        sigma=partial(_coin_sigma, problem.q0),
        m_min=1,
        size_invariant=True,
        draw=_coin_draw,
        params={"p0": problem.p0, "q0": problem.q0},
    )


def uniformity_spec(problem: UniformityProblem) -> eg.StatisticSpec:
    n, eps = problem.n, problem.eps
    return eg.StatisticSpec(
        name="uniformity",
        evaluate=partial(_uniformity_evaluate, n),
        tau0=partial(_const, 1.0 / n),
        tau1=partial(_const, (1.0 + eps * eps) / n),
        sigma=partial(_uniformity_sigma, n, eps, problem.c1, problem.c2),
        m_min=2,
        size_invariant=True,
        draw=_uniformity_draw,
        params={"n": n, "eps": eps, "c1": problem.c1, "c2": problem.c2},
    )


def closeness_spec(problem: ClosenessProblem) -> eg.StatisticSpec:
    n, eps = problem.n, problem.eps
    return eg.StatisticSpec(
        name="closeness",
        evaluate=_closeness_evaluate,
        tau0=partial(_const, 0.0),
        tau1=partial(_closeness_tau1, n, eps),
        sigma=partial(_closeness_sigma, n, eps),
        m_min=1,
        size_invariant=False,
        draw=partial(_closeness_draw, problem.poissonized),
        params={"n": n, "eps": eps, "poissonized": problem.poissonized},
    )


STATISTICS = {"coin": coin_spec, "uniformity": uniformity_spec, "closeness": closeness_spec}


def register_statistic(name, factory):
    """Make a spec factory available by name (used by the CLI)."""
    if name in STATISTICS:
        raise ParameterError(f"statistic {name!r} already registered")
    STATISTICS[name] = factory


# ----------------------------------------------------------------- configs


def coin_config(problem: CoinProblem) -> eg.EstimatorConfig:
    """Every level uses ``t_k = 1/8`` and the failure target is ``min(delta, exp(-1/rho))``."""
    delta = min(problem.delta, math.exp(-1.0 / problem.rho))
    K = eg.EstimatorConfig(problem.rho, delta).levels
    return eg.EstimatorConfig(problem.rho, delta, t_schedule=(1 / 8,) * K)


def uniformity_config(problem: UniformityProblem) -> eg.EstimatorConfig:
    K = eg.EstimatorConfig(problem.rho, problem.delta).levels
    return eg.EstimatorConfig(problem.rho, problem.delta, t_schedule=tuple(2.0**-k for k in range(1, K + 1)))


def closeness_config(problem: ClosenessProblem) -> eg.EstimatorConfig:
    return eg.EstimatorConfig(problem.rho, problem.delta, t=min(problem.rho, 1 / 16))


# ------------------------------------------------------ functional entries


def _randomness(seeds):
    return seeds.randomness_seed if isinstance(seeds, Seeds) else int(seeds)


def coin_test(problem, stream, seeds, r=None) -> eg.TesterVerdict:
    return eg.size_invariant_estimate(coin_spec(problem), coin_config(problem), stream, _randomness(seeds), r)


def uniformity_test(problem, stream, seeds, r=None) -> eg.TesterVerdict:
    return eg.size_invariant_estimate(uniformity_spec(problem), uniformity_config(problem), stream, _randomness(seeds), r)


class PairStream:
    """Two independent discrete streams read together."""

    def __init__(self, stream_p, stream_q):
        if stream_p.n != stream_q.n:
            raise ParameterError("streams must share a domain")
        self.p = stream_p
        self.q = stream_q

    @property
    def n(self):
        return self.p.n

    @property
    def count_drawn(self):
        return self.p.count_drawn + self.q.count_drawn

    def draw_pair(self, m, reps, poissonized=True):
        if poissonized:
            return self.p.draw_poissonized_counts(m, reps), self.q.draw_poissonized_counts(m, reps)
        return self.p.draw_counts(m, reps), self.q.draw_counts(m, reps)


def closeness_test(problem, stream_p, stream_q, seeds, r=None) -> eg.TesterVerdict:
    return eg.general_estimate(
        closeness_spec(problem), closeness_config(problem), PairStream(stream_p, stream_q), _randomness(seeds), r
    )


def closeness_reference_bound(n, eps, rho) -> float:
    """``n^(2/3)/(eps^(4/3) rho^(2/3)) + sqrt(n)/(eps^2 rho) + 1/(eps^2 rho^2)``."""
    return n ** (2 / 3) / (eps ** (4 / 3) * rho ** (2 / 3)) + math.sqrt(n) / (eps**2 * rho) + 1 / (eps**2 * rho**2)


# ---------------------------------------------------------- tester objects


class SpecTester:
    """Runs a spec under one of the two estimators.

    ``run(source, seeds)`` opens a stream from ``source`` with the sample
    seed and draws ``r`` from the randomness seed.
    ``acceptance_probability(source, sample_seed)`` is the exact probability
    over ``r`` for that sample set.
    """

    def __init__(self, spec, config, estimator="size_invariant", name=None):
        if estimator not in ("size_invariant", "general"):
            raise ParameterError(f"unknown estimator {estimator!r}")
        if estimator == "size_invariant" and not spec.size_invariant:
            raise ParameterError("size-invariant estimator needs a size-invariant spec")
        self.spec = spec
        self.config = config
        self.estimator = estimator
        self.name = name or f"{spec.name}-{estimator}"

    def open(self, source, sample_seed):
        return source.open_stream(sample_seed)

    def run(self, source, seeds, r=None) -> eg.TesterVerdict:
        stream = self.open(source, seeds.sample_seed)
        fn = eg.size_invariant_estimate if self.estimator == "size_invariant" else eg.general_estimate
        return fn(self.spec, self.config, stream, seeds.randomness_seed, r)

    def acceptance(self, source, sample_seed):
        """``(Pr_r[accept], samples read)`` for the sample set fixed by ``sample_seed``."""
        stream = self.open(source, sample_seed)
        if self.estimator == "size_invariant":
            prob = eg.size_invariant_acceptance_probability(self.spec, self.config, stream)
        else:
            prob = eg.general_acceptance_probability(self.spec, self.config, stream)
        return prob, stream.count_drawn

    def acceptance_probability(self, source, sample_seed) -> float:
        return self.acceptance(source, sample_seed)[0]

    def worst_case_samples(self) -> int:
        if self.estimator == "size_invariant":
            return eg.worst_case_samples(self.spec, self.config)
        m = eg.breakpoint(self.spec, self.config.general_t)
        return m * self.config.repetitions()


class CoinTester(SpecTester):
    def __init__(self, problem: CoinProblem):
        super().__init__(coin_spec(problem), coin_config(problem), "size_invariant", "coin")
        self.problem = problem

    def predicted_expected_samples(self) -> float:
        """``q0/(eps^2 rho) + q0 ln(1/delta)/eps^2`` with unit constants."""
        p = self.problem
        return p.q0 / (p.eps**2 * p.rho) + p.q0 * math.log(1 / p.delta) / p.eps**2

    def predicted_worst_samples(self) -> float:
        p = self.problem
        return p.q0 / (p.eps**2 * p.rho**2) + p.q0 * math.log(1 / p.delta) / p.eps**2


class UniformityTester(SpecTester):
    def __init__(self, problem: UniformityProblem):
        super().__init__(uniformity_spec(problem), uniformity_config(problem), "size_invariant", "uniformity")
        self.problem = problem

    def predicted_expected_samples(self) -> float:
        p = self.problem
        rn = math.sqrt(p.n)
        return rn * math.log(1 / p.delta) / p.eps**2 + rn / (p.eps * p.rho) + 1 / (p.eps**2 * p.rho)

    def predicted_worst_samples(self) -> float:
        p = self.problem
        rn = math.sqrt(p.n)
        return (
            rn * math.log(1 / p.delta) / p.eps**2
            + rn / (p.eps**2 * p.rho)
            + rn / (p.eps * p.rho**2)
            + 1 / (p.eps**2 * p.rho**2)
        )


class ClosenessTester(SpecTester):
    """Source must be a ``DistributionPair``."""

    def __init__(self, problem: ClosenessProblem):
        super().__init__(closeness_spec(problem), closeness_config(problem), "general", "closeness")
        self.problem = problem

    def open(self, source, sample_seed):
        return PairStream(*source.open_streams(sample_seed))

    def predicted_expected_samples(self) -> float:
        p = self.problem
        return closeness_reference_bound(p.n, p.eps, p.rho)

    predicted_worst_samples = predicted_expected_samples


class MidpointTester:
    """Non-replicable single-shot threshold test, used as a sample-cap fallback."""

    def __init__(self, spec, t=1 / 8, opener=None, name=None):
        self.spec = spec
        self.t = t
        self.opener = opener
        self.name = name or f"{spec.name}-midpoint"

    def run(self, source, seeds, r=None):
        stream = self.opener(source, seeds.sample_seed) if self.opener else source.open_stream(seeds.sample_seed)
        return eg.midpoint_estimate(self.spec, stream, self.t)
