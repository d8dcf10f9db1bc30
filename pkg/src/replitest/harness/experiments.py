"""Paired-trial replicability, accuracy, chain certificates and sample sweeps."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Optional

import numpy as np

from ..distributions import kl_divergence
from ..errors import ParameterError, TrialError
from ..expectation_gap import ACCEPT, Decision
from ..rng import Seeds, derive_seed

MIN_TRIALS = 100
Z95 = 1.959963984540054


def wilson_interval(successes, trials, z=Z95):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ParameterError("trials must be positive")
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


def binomial_stderr(p, trials, continuity=True):
    """Normal-approximation standard error, optionally with the ``1/(2n)`` continuity term."""
    se = math.sqrt(max(p * (1 - p), 0.0) / trials)
    return se + (0.5 / trials if continuity else 0.0)


def run_ordered(fn, items, jobs=1):
    """``[fn(x) for x in items]``, optionally in a process pool; order is always preserved."""
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def trial_seeds(master, trial):
    """Shared randomness with two independent sample seeds for one paired trial."""
    randomness = derive_seed(master, trial, "randomness")
    return (
        Seeds(derive_seed(master, trial, "samples1"), randomness),
        Seeds(derive_seed(master, trial, "samples2"), randomness),
    )


def _samples(v):
    return int(getattr(v, "samples_used", 0))


def _paired_trial(tester, source, source2, master, trial):
    s1, s2 = trial_seeds(master, trial)
    try:
        v1 = tester.run(source, s1)
        v2 = tester.run(source2, s2)
    except Exception as exc:  # surfaced with the trial index
        raise TrialError(trial, exc) from exc
    return v1.output, v2.output, _samples(v1), _samples(v2)


def _single_trial(tester, source, master, trial):
    s1, _ = trial_seeds(master, trial)
    try:
        v = tester.run(source, s1)
    except Exception as exc:
        raise TrialError(trial, exc) from exc
    return v.output, _samples(v)


def _encode(output):
    return output.value if isinstance(output, Decision) else output


@dataclass
class ReplicabilityReport:
    tester_id: str
    distribution_id: str
    trials: int
    disagreements: int
    disagreement_rate: float
    wilson_lo: float
    wilson_hi: float
    accept_rate_run1: Optional[float]
    accept_rate_run2: Optional[float]
    mean_samples: float
    max_samples: int
    master_seed: int
    seed_derivation: str = "blake2b(master, trial, role)"
    outputs1: list = field(default_factory=list, repr=False)
    outputs2: list = field(default_factory=list, repr=False)

    @property
    def wilson_ci(self):
        return (self.wilson_lo, self.wilson_hi)

    def stderr(self, rate=None):
        return binomial_stderr(self.disagreement_rate if rate is None else rate, self.trials)

    def accuracy(self, expected) -> float:
        """Fraction of all ``2 * trials`` runs whose output matches ``expected`` (or satisfies it, if callable)."""
        ok = expected if callable(expected) else (lambda o: o == expected)
        outs = self.outputs1 + self.outputs2
        return sum(1 for o in outs if ok(o)) / len(outs)

    def row(self) -> dict:
        d = asdict(self)
        d.pop("outputs1")
        d.pop("outputs2")
        return d


def estimate_replicability(tester, source, trials, master_seed, source2=None, jobs=1, tester_id=None, distribution_id=None):
    """Run ``trials`` paired trials with a shared randomness seed and fresh samples on each side.

    If ``source2`` is given, the second run samples from it (e.g. a relabeled
    distribution for permutation-robust checks).
    """
    if trials < MIN_TRIALS:
        raise ParameterError(f"at least {MIN_TRIALS} trials are required")
    fn = partial(_paired_trial, tester, source, source if source2 is None else source2, int(master_seed))
    results = run_ordered(fn, range(int(trials)), jobs)
    out1 = [r[0] for r in results]
    out2 = [r[1] for r in results]
    samples = np.array([[r[2], r[3]] for r in results], dtype=np.int64)
    dis = sum(1 for a, b in zip(out1, out2) if a != b)
    lo, hi = wilson_interval(dis, trials)
    decisions = all(isinstance(o, Decision) for o in out1 + out2)
    rate1 = sum(1 for o in out1 if o is ACCEPT) / trials if decisions else None
    rate2 = sum(1 for o in out2 if o is ACCEPT) / trials if decisions else None
    return ReplicabilityReport(
        tester_id=tester_id or getattr(tester, "name", type(tester).__name__),
        distribution_id=distribution_id or type(source).__name__,
        trials=int(trials),
        disagreements=dis,
        disagreement_rate=dis / trials,
        wilson_lo=lo,
        wilson_hi=hi,
        accept_rate_run1=rate1,
        accept_rate_run2=rate2,
        mean_samples=float(samples.mean()),
        max_samples=int(samples.max()),
        master_seed=int(master_seed),
        outputs1=[_encode(o) if not decisions else o for o in out1],
        outputs2=[_encode(o) if not decisions else o for o in out2],
    )


@dataclass
class AccuracyReport:
    tester_id: str
    distribution_id: str
    expected: str
    trials: int
    successes: int
    rate: float
    wilson_lo: float
    wilson_hi: float
    mean_samples: float
    max_samples: int
    master_seed: int

    @property
    def wilson_ci(self):
        return (self.wilson_lo, self.wilson_hi)

    def row(self) -> dict:
        return asdict(self)


def estimate_accuracy(tester, source, expected, trials, seed, jobs=1, tester_id=None, distribution_id=None):
    """Fraction of independent runs whose output equals ``expected`` (or satisfies it, if callable)."""
    if trials < MIN_TRIALS:
        raise ParameterError(f"at least {MIN_TRIALS} trials are required")
    fn = partial(_single_trial, tester, source, int(seed))
    results = run_ordered(fn, range(int(trials)), jobs)
    ok = expected if callable(expected) else (lambda o: o == expected)
    hits = sum(1 for o, _ in results if ok(o))
    samples = np.array([s for _, s in results], dtype=np.int64)
    lo, hi = wilson_interval(hits, trials)
    label = getattr(expected, "__name__", None) if callable(expected) else _encode(expected)
    return AccuracyReport(
        tester_id=tester_id or getattr(tester, "name", type(tester).__name__),
        distribution_id=distribution_id or type(source).__name__,
        expected=str(label),
        trials=int(trials),
        successes=hits,
        rate=hits / trials,
        wilson_lo=lo,
        wilson_hi=hi,
        mean_samples=float(samples.mean()),
        max_samples=int(samples.max()),
        master_seed=int(seed),
    )


# ------------------------------------------------------------ chain report


@dataclass
class ChainPairRow:
    index: int
    kl: float
    tv_bound: float
    below_half: bool


@dataclass
class ChainReport:
    kind: str
    t: int
    eps: float
    m: int
    rows: list

    @property
    def all_below_half(self) -> bool:
        return all(r.below_half for r in self.rows)

    @property
    def max_bound(self) -> float:
        return max(r.tv_bound for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "t": self.t,
            "eps": self.eps,
            "m": self.m,
            "all_below_half": self.all_below_half,
            "max_bound": self.max_bound,
            "pairs": [asdict(r) for r in self.rows],
        }


def chain_report(chain, m) -> ChainReport:
    """Per consecutive pair: ``KL(p_i || p_{i-1})`` and the Pinsker bound ``sqrt(m KL / 2)`` on m-sample TV.

    For closeness chains the first member of each pair is shared, so the
    divergence is that of the second members. Shifted supports make it
    infinite, and ``kl_divergence`` raises.
    """
    if m < 1:
        raise ParameterError("m must be positive")
    rows = []
    for i in range(1, len(chain)):
        a, b = chain[i], chain[i - 1]
        if chain.kind == "closeness":
            kl = kl_divergence(a.p, b.p) + kl_divergence(a.q, b.q)
        else:
            kl = kl_divergence(a, b)
        bound = math.sqrt(m * kl / 2.0)
        rows.append(ChainPairRow(i, kl, bound, bound < 0.5))
    return ChainReport(chain.kind, chain.t, chain.eps, int(m), rows)


# ----------------------------------------------------------- sample sweeps


@dataclass
class SweepRow:
    point: dict
    trials: int
    mean_samples: float
    max_samples: int
    accept_rate: float
    predicted_expected: float
    predicted_worst: float
    mean_ratio: float
    max_ratio: float
    master_seed: int

    def row(self) -> dict:
        d = asdict(self)
        point = d.pop("point")
        return {**{f"param_{k}": v for k, v in sorted(point.items())}, **d}


def sample_complexity_sweep(tester_factory, grid, trials, source, master_seed, jobs=1):
    """Mean and max samples per grid point next to the tester's predicted bounds.

    ``tester_factory(point)`` builds the tester for a grid point. ``source`` is
    a fixed source or a callable ``source(point)``. The ``*_ratio`` columns
    are ``observed / predicted``.
    """
    grid = list(grid)
    if not grid:
        raise ParameterError("grid must be nonempty")
    rows = []
    for point in grid:
        tester = tester_factory(point)
        src = source(point) if callable(source) else source
        fn = partial(_single_trial, tester, src, int(master_seed))
        results = run_ordered(fn, range(int(trials)), jobs)
        samples = np.array([s for _, s in results], dtype=np.int64)
        acc = sum(1 for o, _ in results if o is ACCEPT) / len(results)
        pe = float(tester.predicted_expected_samples()) if hasattr(tester, "predicted_expected_samples") else math.nan
        pw = float(tester.predicted_worst_samples()) if hasattr(tester, "predicted_worst_samples") else math.nan
        mean = float(samples.mean())
        rows.append(SweepRow(dict(point), int(trials), mean, int(samples.max()), acc, pe, pw, mean / pe, float(samples.max()) / pw, int(master_seed)))
    return rows


def successive_ratios(values):
    return [b / a for a, b in zip(values, values[1:])]
