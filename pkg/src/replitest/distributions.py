"""Sample sources, seeded sample streams and exact divergences.

Testers never see a pmf. They pull data through a stream opened from a
source with an explicit seed, and the stream counts every sample handed
out. Streams of discrete sources can return raw samples, histograms of
``m`` samples, or Poissonized histograms. The histogram calls draw the
multinomial directly, which matches the distribution of histogramming
``m`` alias draws but costs O(n) instead of O(m).
"""

import math

import numpy as np

from .errors import DimensionError, ParameterError, SamplingError, SupportError
from .rng import derive_seed, make_rng


def _alias_tables(pmf):
    """Vose's alias tables (prob, alias) for O(1) sampling."""
    n = len(pmf)
    scaled = np.asarray(pmf, dtype=float) * n
    prob = np.ones(n)
    alias = np.arange(n)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        if scaled[g] < 1.0:
            small.append(g)
        else:
            large.append(g)
    # leftovers are 1 up to rounding
    for i in small + large:
        prob[i] = 1.0
        alias[i] = i
    return prob, alias


class DiscreteDistribution:
    """A probability mass function over the domain ``{0, ..., n-1}``.

    The pmf is normalized on construction. Inputs whose total differs from 1
    by more than ``1e-9`` are rejected unless ``normalize=True``.
    """

    def __init__(self, pmf, normalize=False):
        arr = np.array(pmf, dtype=float).ravel()
        if arr.size < 1:
            raise ParameterError("domain size must be at least 1")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ParameterError("pmf entries must be finite and nonnegative")
        total = math.fsum(arr)
        if total <= 0:
            raise ParameterError("pmf has zero total mass")
        if not normalize and abs(total - 1.0) > 1e-9:
            raise ParameterError(f"pmf sums to {total}, expected 1")
        arr = arr / total
        arr.setflags(write=False)
        self._pmf = arr
        self._alias = None

    @classmethod
    def uniform(cls, n):
        return cls(np.full(int(n), 1.0 / int(n)))

    @property
    def pmf(self) -> np.ndarray:
        return self._pmf

    @property
    def n(self) -> int:
        return self._pmf.size

    def alias_tables(self):
        if self._alias is None:
            self._alias = _alias_tables(self._pmf)
        return self._alias

    def relabel(self, perm) -> "DiscreteDistribution":
        """Distribution of ``perm[X]`` for ``X`` drawn from this one."""
        perm = np.asarray(perm)
        out = np.empty_like(self._pmf)
        out[perm] = self._pmf
        return DiscreteDistribution(out)

    def open_stream(self, seed) -> "DiscreteStream":
        return DiscreteStream(self, seed)

    def __eq__(self, other):
        return isinstance(other, DiscreteDistribution) and np.array_equal(self._pmf, other._pmf)

    def __hash__(self):
        return hash(self._pmf.tobytes())

    def __repr__(self):
        return f"DiscreteDistribution(n={self.n})"


class DiscreteStream:
    """Single-owner seeded stream of i.i.d. draws from a discrete source."""

    def __init__(self, source: DiscreteDistribution, seed):
        self.source = source
        self.seed = int(seed)
        self.count_drawn = 0
        self._rng = make_rng(self.seed)

    @property
    def n(self) -> int:
        return self.source.n

    def _charge(self, k):
        if k < 0:
            raise SamplingError("negative sample request")
        self.count_drawn += int(k)

    def draw(self, m) -> np.ndarray:
        """``m`` raw samples via the alias method."""
        m = int(m)
        self._charge(m)
        prob, alias = self.source.alias_tables()
        idx = self._rng.integers(0, prob.size, size=m)
        u = self._rng.random(m)
        return np.where(u < prob[idx], idx, alias[idx])

    def draw_counts(self, m, reps=None) -> np.ndarray:
        """Histogram of ``m`` samples; shape ``(reps, n)`` when ``reps`` is given."""
        m = int(m)
        k = 1 if reps is None else int(reps)
        self._charge(m * k)
        size = None if reps is None else k
        return self._rng.multinomial(m, self.source.pmf, size=size)

    def draw_poissonized_counts(self, m, reps=None) -> np.ndarray:
        """Histogram of ``N ~ Poi(m)`` samples, so bin counts are independent Poi(m p_i)."""
        k = 1 if reps is None else int(reps)
        sizes = self._rng.poisson(float(m), size=k)
        self._charge(int(sizes.sum()))
        counts = self._rng.multinomial(sizes, self.source.pmf)
        return counts[0] if reps is None else counts


class RelabeledStream:
    """Wraps a discrete stream and applies the label map ``x -> perm[x]``."""

    def __init__(self, base, perm):
        self.base = base
        self.perm = np.asarray(perm)

    @property
    def n(self):
        return self.base.n

    @property
    def count_drawn(self):
        return self.base.count_drawn

    def _relabel_counts(self, counts):
        out = np.empty_like(counts)
        out[..., self.perm] = counts
        return out

    def draw(self, m):
        return self.perm[self.base.draw(m)]

    def draw_counts(self, m, reps=None):
        return self._relabel_counts(self.base.draw_counts(m, reps))

    def draw_poissonized_counts(self, m, reps=None):
        return self._relabel_counts(self.base.draw_poissonized_counts(m, reps))


class DistributionPair:
    """Two discrete distributions on a common domain, sampled independently."""

    def __init__(self, p: DiscreteDistribution, q: DiscreteDistribution):
        if p.n != q.n:
            raise DimensionError("pair members must share a domain")
        self.p = p
        self.q = q

    @property
    def n(self):
        return self.p.n

    def open_streams(self, seed):
        return (self.p.open_stream(derive_seed(seed, "p")), self.q.open_stream(derive_seed(seed, "q")))


class GaussianSource:
    """``N(mean, I)``."""

    def __init__(self, mean):
        mean = np.array(mean, dtype=float).ravel()
        if mean.size < 1:
            raise ParameterError("dimension must be at least 1")
        mean.setflags(write=False)
        self.mean = mean

    @classmethod
    def standard(cls, d):
        return cls(np.zeros(int(d)))

    @property
    def d(self) -> int:
        return self.mean.size

    def open_stream(self, seed) -> "VectorStream":
        return VectorStream(self, seed)

    def _sample(self, rng, m):
        return rng.standard_normal((m, self.d)) + self.mean


class SpikedGaussianSource:
    """Mixture ``(1-w) N(mean, I) + w * (spike + spike_noise * N(0, I))``.

    With ``spike_noise = 0`` the second component is a point mass.
    """

    def __init__(self, mean, spike, weight, spike_noise=0.0):
        self.base = GaussianSource(mean)
        spike = np.array(spike, dtype=float).ravel()
        if spike.size != self.base.d:
            raise DimensionError("spike and mean dimensions differ")
        if not 0.0 <= weight <= 1.0:
            raise ParameterError("mixture weight must lie in [0, 1]")
        self.spike = spike
        self.weight = float(weight)
        self.spike_noise = float(spike_noise)

    @property
    def d(self):
        return self.base.d

    def open_stream(self, seed) -> "VectorStream":
        return VectorStream(self, seed)

    def _sample(self, rng, m):
        x = self.base._sample(rng, m)
        hit = rng.random(m) < self.weight
        k = int(hit.sum())
        spikes = np.broadcast_to(self.spike, (k, self.d)).copy()
        if self.spike_noise > 0:
            spikes += self.spike_noise * rng.standard_normal((k, self.d))
        x[hit] = spikes
        return x


class PointCloudSource:
    """Draws uniformly (with replacement) from a fixed set of points."""

    def __init__(self, points):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))

    @property
    def d(self):
        return self.points.shape[1]

    def open_stream(self, seed):
        return VectorStream(self, seed)

    def _sample(self, rng, m):
        return self.points[rng.integers(0, len(self.points), size=m)]


class VectorStream:
    """Seeded stream of i.i.d. vectors; ``draw(m)`` returns an ``(m, d)`` array."""

    def __init__(self, source, seed):
        self.source = source
        self.seed = int(seed)
        self.count_drawn = 0
        self._rng = make_rng(self.seed)

    @property
    def d(self):
        return self.source.d

    def draw(self, m) -> np.ndarray:
        m = int(m)
        if m < 0:
            raise SamplingError("negative sample request")
        self.count_drawn += m
        return self.source._sample(self._rng, m)


def _as_pmf(p):
    return p.pmf if isinstance(p, DiscreteDistribution) else np.asarray(p, dtype=float)


def _pair(p, q):
    a, b = _as_pmf(p), _as_pmf(q)
    if a.shape != b.shape:
        raise DimensionError(f"domain sizes differ: {a.shape} vs {b.shape}")
    return a, b


def l1_distance(p, q) -> float:
    a, b = _pair(p, q)
    return math.fsum(np.abs(a - b))


def tv_distance(p, q) -> float:
    return 0.5 * l1_distance(p, q)


def kl_divergence(p, q) -> float:
    """``sum p_i ln(p_i / q_i)`` in nats. Raises ``SupportError`` if p is not dominated by q."""
    a, b = _pair(p, q)
    mask = a > 0
    if np.any(b[mask] <= 0):
        raise SupportError("KL divergence undefined: q vanishes where p is positive")
    terms = a[mask] * np.log(a[mask] / b[mask])
    return max(0.0, math.fsum(terms))


def bernoulli(p) -> DiscreteDistribution:
    """Coin over ``{0, 1}`` with heads (label 1) probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError("bias must lie in [0, 1]")
    return DiscreteDistribution([1.0 - p, p])
