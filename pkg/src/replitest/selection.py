"""Replicable hypothesis selection via Scheffe sets and a binary tree of coin tests.

The non-replicable base step picks the hypothesis with the smallest maximum
semi-distance ``W_i = max_j |H_i(S_ij) - P_hat(S_ij)|``. The replicable
procedure descends a binary tree over the hypotheses. At each node it treats
"the base step's winner lies in the left half" as a coin. It tests the coin
twice with a replicable coin tester, once per side as heads, and moves to
the half that wins clearly (left when neither does).
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .distributions import DiscreteDistribution, tv_distance
from .errors import DimensionError, ParameterError, PreconditionError
from .expectation_gap import REJECT, size_invariant_estimate
from .rng import Seeds, derive_seed
from .testers import CoinProblem, coin_config, coin_spec


class HypothesisSet:
    """Hypotheses over a common domain, padded to a power of two by repeating the last one."""

    def __init__(self, hypotheses):
        hyps = [h if isinstance(h, DiscreteDistribution) else DiscreteDistribution(h, normalize=True) for h in hypotheses]
        if not hyps:
            raise ParameterError("need at least one hypothesis")
        dsize = hyps[0].n
        if any(h.n != dsize for h in hyps):
            raise DimensionError("hypotheses must share a domain")
        self.original_count = len(hyps)
        size = max(2, 1 << (len(hyps) - 1).bit_length())
        hyps = hyps + [hyps[-1]] * (size - len(hyps))
        self.hypotheses = tuple(hyps)
        self.matrix = np.vstack([h.pmf for h in hyps])

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        if isinstance(data, dict):
            data = data["hypotheses"]
        return cls(data)

    def to_json(self) -> str:
        return json.dumps([h.pmf.tolist() for h in self.hypotheses[: self.original_count]])

    @property
    def n(self) -> int:
        return len(self.hypotheses)

    @property
    def depth(self) -> int:
        return self.n.bit_length() - 1

    @property
    def dsize(self) -> int:
        return self.matrix.shape[1]

    def original_index(self, i) -> int:
        return min(int(i), self.original_count - 1)


@dataclass(frozen=True, eq=False)
class ScheffeTable:
    """``sets[i, j, x] = H_i(x) <= H_j(x)`` and ``values[i, j] = H_i(S_ij)``."""

    sets: np.ndarray
    values: np.ndarray

    @property
    def n(self):
        return self.values.shape[0]

    def pairs(self):
        n = self.n
        return [(i, j) for i in range(n) for j in range(n) if i != j]

    def semi_distances(self, p_hat) -> np.ndarray:
        """``w[..., i, j] = |H_i(S_ij) - P_hat(S_ij)|`` with the diagonal set to 0.

        ``p_hat`` is a probability vector or a stack of them (last axis = domain).
        """
        p_hat = np.asarray(p_hat, dtype=float)
        n, _, dsize = self.sets.shape
        mass = (p_hat.reshape(-1, dsize) @ self.sets.reshape(n * n, dsize).T.astype(float)).reshape(p_hat.shape[:-1] + (n, n))
        w = np.abs(self.values - mass)
        idx = np.arange(n)
        w[..., idx, idx] = 0.0
        return w

    def max_semi_distances(self, p_hat) -> np.ndarray:
        """``W_i = max_{j != i} w_j(H_i)``."""
        return self.semi_distances(p_hat).max(axis=-1)


def scheffe_table(hset: HypothesisSet) -> ScheffeTable:
    H = hset.matrix
    sets = H[:, None, :] <= H[None, :, :]
    values = np.einsum("ix,ijx->ij", H, sets.astype(float))
    # S_ii is the whole domain; pin H_i(S_ii) to exactly 1
    np.fill_diagonal(values, 1.0)
    sets.setflags(write=False)
    values.setflags(write=False)
    return ScheffeTable(sets, values)


def _winners(table, counts, lo, hi):
    """Index in ``[lo, hi)`` minimizing ``W_i`` for each row of ``counts``; ties go to the smallest index."""
    counts = np.atleast_2d(counts)
    m = counts.sum(axis=1, keepdims=True)
    if np.any(m <= 0):
        raise PreconditionError("empty sample")
    n, _, dsize = table.sets.shape
    k = hi - lo
    sets = table.sets[lo:hi].reshape(k * n, dsize).T.astype(float)
    # compare m * w_j(H_i) = |m H_i(S_ij) - count(S_ij)|; the diagonal is exactly 0
    scaled = np.abs(m * table.values[lo:hi].reshape(1, k * n) - counts @ sets)
    W = scaled.reshape(-1, k, n).max(axis=2)
    return lo + np.argmin(W, axis=1)


def min_distance_select(hset, table, samples=None, counts=None, candidates=None) -> int:
    """Index minimizing the empirical maximum semi-distance.

    Pass raw ``samples`` (labels) or a histogram ``counts``. ``candidates`` is
    a ``(lo, hi)`` range of eligible indices and defaults to all of them.
    ``W_i`` is always a max over the full set.
    """
    if counts is None:
        samples = np.asarray(samples)
        if samples.size == 0:
            raise PreconditionError("empty sample")
        counts = np.bincount(samples, minlength=hset.dsize)
    lo, hi = (0, hset.n) if candidates is None else candidates
    return int(_winners(table, np.asarray(counts), lo, hi)[0])


def selection_sample_size(n, eps, c_m=16.0) -> int:
    """Samples per base-step run: ``ceil(c_m ln n / eps0^2)`` with ``eps0 = eps / lg n``."""
    depth = max(1, int(math.log2(n)))
    eps0 = eps / depth
    return math.ceil(c_m * math.log(n) / eps0**2)


class _FlipBuffer:
    """Lazily generated base-step outcomes at one tree node (True = left half wins)."""

    def __init__(self, stream, table, m_sel, lo, mid, hi, dsize):
        self.stream = stream
        self.table = table
        self.m_sel = m_sel
        self.lo, self.mid, self.hi = lo, mid, hi
        self.dsize = dsize
        self.flips = np.zeros(0, dtype=bool)

    def ensure(self, k, chunk=1 << 16):
        while self.flips.size < k:
            need = min(chunk, k - self.flips.size)
            counts = self.stream.draw_counts(self.m_sel, need)
            win = _winners(self.table, counts, self.lo, self.hi)
            self.flips = np.concatenate([self.flips, win < self.mid])
        return self.flips


class _CoinView:
    """Coin stream over a flip buffer; heads means the chosen side won."""

    def __init__(self, buffer, heads_left):
        self.buffer = buffer
        self.heads_left = heads_left
        self.count_drawn = 0

    @property
    def n(self):
        return 2

    def draw_counts(self, m, reps=None):
        k = 1 if reps is None else int(reps)
        start = self.count_drawn
        flips = self.buffer.ensure(start + m * k)[start : start + m * k]
        self.count_drawn += m * k
        heads = flips if self.heads_left else ~flips
        h = heads.reshape(k, m).sum(axis=1)
        out = np.stack([m - h, h], axis=1)
        return out[0] if reps is None else out


@dataclass(frozen=True)
class SelectionResult:
    index: int
    samples_used: int
    levels: tuple

    @property
    def output(self):
        return self.index


def replicable_select(hset, stream, rho, eps, seeds, c_m=16.0, delta=None, share_flips=True) -> SelectionResult:
    """Descend ``lg n`` levels and return the (original) index of the surviving hypothesis.

    Each level runs two coin tests at ``p0 = 1/2, q0 = 3/4`` with
    ``rho0 = rho / lg n`` and ``delta = n^-3``. One test treats "left half
    wins" as heads, the other "right half wins". With ``share_flips`` both
    tests read the same sequence of base-step outcomes. The samples charged
    are the flips actually used times the batch size.
    """
    if not 0 < rho <= 1 or not 0 < eps <= 1:
        raise ParameterError("rho and eps must lie in (0, 1]")
    table = scheffe_table(hset)
    n, depth = hset.n, hset.depth
    rho0 = rho / depth
    delta = float(n) ** -3 if delta is None else delta
    problem = CoinProblem(0.5, 0.75, rho0, min(delta, rho0))
    spec, config = coin_spec(problem), coin_config(problem)
    m_sel = selection_sample_size(n, eps, c_m)
    randomness = seeds.randomness_seed if isinstance(seeds, Seeds) else int(seeds)
    lo, hi = 0, n
    used = 0
    record = []
    for level in range(depth):
        mid = (lo + hi) // 2
        left_buf = _FlipBuffer(stream, table, m_sel, lo, mid, hi, hset.dsize)
        right_buf = left_buf if share_flips else _FlipBuffer(stream, table, m_sel, lo, mid, hi, hset.dsize)
        views = (_CoinView(left_buf, True), _CoinView(right_buf, False))
        left = size_invariant_estimate(spec, config, views[0], derive_seed(randomness, "level", level, "left"))
        right = size_invariant_estimate(spec, config, views[1], derive_seed(randomness, "level", level, "right"))
        if share_flips:
            flips = max(views[0].count_drawn, views[1].count_drawn)
        else:
            flips = views[0].count_drawn + views[1].count_drawn
        used += flips * m_sel
        go_left = left.decision is REJECT or right.decision is not REJECT
        record.append((level, lo, hi, left.decision.value, right.decision.value, flips))
        lo, hi = (lo, mid) if go_left else (mid, hi)
    return SelectionResult(hset.original_index(lo), used, tuple(record))


class SelectionTester:
    """Harness wrapper; ``source`` is the unknown discrete distribution P."""

    def __init__(self, hset, rho, eps, c_m=16.0, share_flips=True):
        self.hset = hset
        self.rho = rho
        self.eps = eps
        self.c_m = c_m
        self.share_flips = share_flips
        self.name = "select"

    def run(self, source, seeds, r=None):
        return replicable_select(
            self.hset, source.open_stream(seeds.sample_seed), self.rho, self.eps, seeds, self.c_m, share_flips=self.share_flips
        )

    def batch_size(self):
        return selection_sample_size(self.hset.n, self.eps, self.c_m)


def approximation_ok(hset, index, truth, eps, factor=3.0) -> bool:
    """``d_TV(H_index, P) <= factor * min_j d_TV(H_j, P) + eps``."""
    dists = [tv_distance(h, truth) for h in hset.hypotheses[: hset.original_count]]
    return dists[index] <= factor * min(dists) + eps + 1e-12
