"""Canonical threshold wrappers and small-domain label symmetrization.

Any tester can be rewritten as "compute a score ``f(X)`` in ``[0, 1]`` from
the samples, then accept iff a uniform threshold ``r <= f(X)``", where
``f(X)`` is the tester's acceptance probability over its own randomness. The
built-in testers expose ``f`` in closed form. For others it is estimated by
replaying the tester on the same samples with fresh internal randomness.
"""

import itertools
import math

import numpy as np

from ..distributions import RelabeledStream
from ..errors import CapacityError, ParameterError
from ..expectation_gap import ACCEPT, REJECT, TesterVerdict
from ..rng import Seeds, derive_seed, make_rng

MAX_SYMMETRIZE = 8


def _canonical_threshold(randomness_seed):
    return float(make_rng(randomness_seed, "canonical-threshold").random())


class CanonicalTester:
    """Accept iff ``r <= f(X)`` with ``r ~ U[0, 1]`` from the randomness seed."""

    def __init__(self, base, mc_rounds=1000):
        if mc_rounds < 1:
            raise ParameterError("mc_rounds must be at least 1")
        self.base = base
        self.mc_rounds = int(mc_rounds)
        self.exact = hasattr(base, "acceptance")
        self.name = f"canonical({getattr(base, 'name', 'tester')})"

    def score(self, source, seeds):
        """``(f(X), samples read)``. Exact when the base tester exposes it, else a replay average."""
        if self.exact:
            return self.base.acceptance(source, seeds.sample_seed)
        hits = 0
        samples = 0
        for k in range(self.mc_rounds):
            replay = Seeds(seeds.sample_seed, derive_seed(seeds.randomness_seed, "replay", k))
            v = self.base.run(source, replay)
            hits += v.output is ACCEPT
            samples = max(samples, int(getattr(v, "samples_used", 0)))
        return hits / self.mc_rounds, samples

    def run(self, source, seeds, r=None) -> TesterVerdict:
        f, used = self.score(source, seeds)
        r = _canonical_threshold(seeds.randomness_seed) if r is None else float(r)
        return TesterVerdict(ACCEPT if r <= f else REJECT, r, used, "canonical", (("f", f),))


def canonicalize(tester, mc_rounds=1000) -> CanonicalTester:
    return CanonicalTester(tester, mc_rounds)


class PermutedSource:
    """Source whose samples are relabeled ``x -> perm[x]``; nested relabelings are composed."""

    def __init__(self, base, perm):
        perm = np.asarray(perm, dtype=np.intp)
        if isinstance(base, PermutedSource):
            perm = perm[base.perm]
            base = base.base
        self.base = base
        self.perm = perm

    @property
    def n(self):
        return self.base.n

    def open_stream(self, seed):
        return RelabeledStream(self.base.open_stream(seed), self.perm)

    def open_streams(self, seed):
        return tuple(RelabeledStream(s, self.perm) for s in self.base.open_streams(seed))


class SymmetrizedTester:
    """Canonical tester with score ``h(X) = (1/n!) sum_pi f(pi(X))``."""

    def __init__(self, base, n, mc_rounds=1000):
        if n > MAX_SYMMETRIZE:
            raise CapacityError(f"label symmetrization is limited to n <= {MAX_SYMMETRIZE}")
        if n < 1:
            raise ParameterError("n must be positive")
        self.inner = base if isinstance(base, CanonicalTester) else CanonicalTester(base, mc_rounds)
        self.n = int(n)
        self.perms = [np.array(p) for p in itertools.permutations(range(self.n))]
        self.name = f"symmetrized({getattr(base, 'name', 'tester')})"

    def score(self, source, seeds):
        vals = []
        used = 0
        for perm in self.perms:
            f, s = self.inner.score(PermutedSource(source, perm), seeds)
            vals.append(f)
            used = max(used, s)
        # fsum is exactly rounded, so the result does not depend on summation order
        return math.fsum(vals) / len(vals), used

    def acceptance(self, source, sample_seed):
        if not self.inner.exact:
            raise ParameterError("exact acceptance needs a base tester with closed-form acceptance")
        return self.score(source, Seeds(sample_seed, 0))

    def acceptance_probability(self, source, sample_seed):
        return self.acceptance(source, sample_seed)[0]

    def run(self, source, seeds, r=None) -> TesterVerdict:
        h, used = self.score(source, seeds)
        r = _canonical_threshold(seeds.randomness_seed) if r is None else float(r)
        return TesterVerdict(ACCEPT if r <= h else REJECT, r, used, "symmetrized", (("h", h),))


def symmetrize_small(tester, n, mc_rounds=1000) -> SymmetrizedTester:
    return SymmetrizedTester(tester, n, mc_rounds)
