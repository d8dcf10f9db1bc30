"""Replicable mean testing for identity-covariance Gaussians.

Samples are first projected into the ball of radius ``L*sqrt(d)``. Three
stages follow on fresh batches:

* A: reject when the empirical second-moment operator norm is large.
* B: reject when many cross pairs have a large inner product, measured by
  a maximum bipartite matching.
* C: threshold ``<sum X, sum Y>`` with the general expectation-gap estimator.

Stages A and B are randomized threshold gates: with
``a = (3T - h)/T`` they accept iff ``r <= a`` for ``r ~ U[0, 1]``.
"""

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from . import expectation_gap as eg
from .errors import ConvergenceError, DimensionError, ParameterError, SupportError
from .rng import Seeds, derive_seed, make_rng

# norms within this relative slack of the radius count as inside, which makes
# projection exactly idempotent under rounding
_BALL_SLACK = 1e-12


def project_to_ball(x, radius):
    """Scale ``x`` (or each row of ``x``) down to norm ``radius`` if it lies outside."""
    if radius <= 0:
        raise ParameterError("radius must be positive")
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        nrm = float(np.linalg.norm(x))
        return x if nrm <= radius * (1 + _BALL_SLACK) else x * (radius / nrm)
    nrm = np.linalg.norm(x, axis=1)
    scale = np.where(nrm <= radius * (1 + _BALL_SLACK), 1.0, radius / np.where(nrm > 0, nrm, 1.0))
    return x * scale[:, None]


def threshold_accept(h_value, T, r) -> eg.Decision:
    """Accept iff ``r <= (3T - h)/T``: always for ``h <= 2T``, never for ``h >= 3T``."""
    if T <= 0:
        raise ParameterError("T must be positive")
    a = (3 * T - h_value) / T
    return eg.ACCEPT if r <= a else eg.REJECT


def threshold_acceptance(h_value, T) -> float:
    """``Pr_r[threshold_accept(h, T, r)]`` for ``r ~ U[0, 1]``."""
    if T <= 0:
        raise ParameterError("T must be positive")
    return float(min(1.0, max(0.0, (3 * T - h_value) / T)))


def operator_norm(points, tol=1e-6, restarts=3, max_iter=None, seed=0) -> float:
    """Top eigenvalue of ``(1/m) sum x_i x_i^T`` by block power iteration.

    The ``restarts`` random start vectors are iterated together as an
    orthonormal block under ``V -> X^T (X V) / m``. Each step takes the
    largest Ritz value of the block. The ``d x d`` matrix is never formed.
    Start vectors come from ``seed``, so the result is a deterministic
    function of the points. The iteration stops once the Ritz value changes
    by at most ``tol`` (relative). If that has not happened within
    ``max_iter`` (default ``10 d``) steps, ``ConvergenceError`` is raised
    carrying the last estimate.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    m, d = X.shape
    if m < 1:
        raise ParameterError("need at least one point")
    max_iter = 10 * d if max_iter is None else int(max_iter)
    k = max(1, min(int(restarts), d))
    V, _ = np.linalg.qr(make_rng(seed, "power-iteration").standard_normal((d, k)))
    lam = None
    for _ in range(max(1, max_iter)):
        W = X.T @ (X @ V) / m
        ritz = float(np.linalg.eigvalsh(V.T @ W)[-1])
        if lam is not None and abs(ritz - lam) <= tol * max(abs(ritz), 1e-300):
            return max(ritz, 0.0)
        lam = ritz
        if not np.any(W):
            return 0.0
        V, _ = np.linalg.qr(W)
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps", max(lam, 0.0))


@dataclass(frozen=True)
class GaussianTesterConfig:
    """Thresholds for the Gaussian mean tester.

    The defaults follow ``K = c_K ln^2(m d/(alpha rho))``, ``L = K``,
    ``S = K sqrt(d)``, ``T1 = (1 + d/(m rho^2)) L^2 K`` and ``T2 = K/rho^2``.
    Any of ``K, L, S, T1, T2`` may be given explicitly; the rest are derived
    from the resolved values. ``sigma_const`` multiplies the step-C noise bound.
    """

    d: int
    alpha: float
    rho: float
    m: int
    c_K: float = 4.0
    sigma_const: float = 8.0
    rep_constant: float = 64.0
    K: Optional[float] = None
    L: Optional[float] = None
    S: Optional[float] = None
    T1: Optional[float] = None
    T2: Optional[float] = None
    overrides: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ParameterError("d and m must be positive")
        if self.alpha <= 0:
            raise ParameterError("alpha must be positive")
        if not 0 < self.rho <= 1:
            raise ParameterError("rho must lie in (0, 1]")
        given = tuple(k for k in ("K", "L", "S", "T1", "T2") if getattr(self, k) is not None)
        K = self.K if self.K is not None else self.c_K * math.log(self.m * self.d / (self.alpha * self.rho)) ** 2
        L = self.L if self.L is not None else K
        S = self.S if self.S is not None else K * math.sqrt(self.d)
        T1 = self.T1 if self.T1 is not None else (1 + self.d / (self.m * self.rho**2)) * L * L * K
        T2 = self.T2 if self.T2 is not None else K / self.rho**2
        for name, value in (("K", K), ("L", L), ("S", S), ("T1", T1), ("T2", T2), ("sigma_const", self.sigma_const)):
            if not value > 0:
                raise ParameterError(f"{name} must be positive")
        for name, value in (("K", K), ("L", L), ("S", S), ("T1", T1), ("T2", T2)):
            object.__setattr__(self, name, float(value))
        if not self.overrides:
            object.__setattr__(self, "overrides", given)

    @classmethod
    def desk_scale(cls, d, alpha, rho, m=2000, K=8.0, T1=2.0, sigma_const=1.0, **kw):
        """Small-sample preset: constant ``K``, a tight operator-norm threshold and unit noise constant."""
        return cls(d=d, alpha=alpha, rho=rho, m=m, K=K, T1=T1, sigma_const=sigma_const, **kw)

    @property
    def radius(self) -> float:
        return self.L * math.sqrt(self.d)

    def to_dict(self) -> dict:
        keys = ("d", "alpha", "rho", "m", "c_K", "sigma_const", "rep_constant", "K", "L", "S", "T1", "T2")
        return {k: getattr(self, k) for k in keys}


class MatchingGraph:
    """Bipartite graph joining ``X_i`` to ``Y_j`` when ``|<X_i, Y_j>| >= S``."""

    def __init__(self, left, right, S):
        left = np.atleast_2d(np.asarray(left, dtype=float))
        right = np.atleast_2d(np.asarray(right, dtype=float))
        if left.shape[1] != right.shape[1]:
            raise DimensionError("point dimensions differ")
        self.left = left
        self.right = right
        self.S = float(S)
        self.adjacency = np.abs(left @ right.T) >= self.S
        self._size = None

    @classmethod
    def from_adjacency(cls, adjacency):
        g = cls.__new__(cls)
        g.left = g.right = None
        g.S = math.nan
        g.adjacency = np.asarray(adjacency, dtype=bool)
        g._size = None
        return g

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.sum())

    def matching_size(self) -> int:
        if self._size is None:
            self._size = max_matching(self)
        return self._size


def max_matching(graph: MatchingGraph) -> int:
    """Maximum matching size (Hopcroft-Karp, via scipy)."""
    adj = graph.adjacency
    if adj.size == 0 or not adj.any():
        return 0
    match = maximum_bipartite_matching(csr_matrix(adj.astype(np.int8)), perm_type="column")
    return int(np.count_nonzero(match >= 0))


def step_a_statistic(points) -> float:
    try:
        return operator_norm(points)
    except ConvergenceError as exc:
        # the gate only needs the value to within its threshold band
        return exc.estimate


def step_a_gate(points, config: GaussianTesterConfig, r) -> eg.Decision:
    return threshold_accept(step_a_statistic(points), config.T1, r)


def step_b_statistic(points_x, points_y, config: GaussianTesterConfig) -> int:
    return MatchingGraph(points_x, points_y, config.S).matching_size()


def step_b_gate(points_x, points_y, config: GaussianTesterConfig, r) -> eg.Decision:
    return threshold_accept(step_b_statistic(points_x, points_y, config), config.T2, r)


def step_c_statistic(points_x, points_y) -> float:
    """``<sum X, sum Y>``."""
    X = np.atleast_2d(np.asarray(points_x, dtype=float))
    Y = np.atleast_2d(np.asarray(points_y, dtype=float))
    if X.shape != Y.shape:
        raise SupportError("batches must have equal shapes")
    return float(X.sum(axis=0) @ Y.sum(axis=0))


def _step_c_evaluate(data):
    return step_c_statistic(*data)


def _step_c_draw(stream, m, reps):
    out = np.empty(reps)
    for i in range(reps):
        out[i] = step_c_statistic(stream.draw(m), stream.draw(m))
    return out


def _zero(m):
    return 0.0


def _step_c_tau1(alpha, m):
    return m * m * alpha * alpha / 4.0


def _step_c_sigma(c, alpha, T1, S, L, d, T2, m):
    return c * (m**1.5 * alpha * math.sqrt(T1) + m * S + L * math.sqrt(m * d * T1 * T2))


def step_c_spec(config: GaussianTesterConfig) -> eg.StatisticSpec:
    return eg.StatisticSpec(
        name="gaussian-step-c",
        evaluate=_step_c_evaluate,
        tau0=_zero,
        tau1=partial(_step_c_tau1, config.alpha),
        sigma=partial(_step_c_sigma, config.sigma_const, config.alpha, config.T1, config.S, config.L, config.d, config.T2),
        m_min=1,
        size_invariant=False,
        draw=_step_c_draw,
    )


def step_c_config(config: GaussianTesterConfig) -> eg.EstimatorConfig:
    return eg.EstimatorConfig(config.rho, config.rho, t=min(config.rho, 1 / 16), rep_constant=config.rep_constant)


class ProjectedStream:
    """Vector stream whose draws are projected into the tester's ball."""

    def __init__(self, base, radius):
        self.base = base
        self.radius = radius

    @property
    def count_drawn(self):
        return self.base.count_drawn

    def draw(self, m):
        return project_to_ball(self.base.draw(m), self.radius)


def gate_thresholds(randomness_seed):
    """Independent ``U[0, 1]`` thresholds for gates A and B."""
    ra = float(make_rng(randomness_seed, "gate-A").random())
    rb = float(make_rng(randomness_seed, "gate-B").random())
    return ra, rb


def gaussian_mean_test(stream, config: GaussianTesterConfig, seeds, r=None) -> eg.TesterVerdict:
    """Run gates A and B, then the step-C estimator. ``r`` may force ``(rA, rB, rC)``."""
    randomness = seeds.randomness_seed if isinstance(seeds, Seeds) else int(seeds)
    if r is None:
        ra, rb = gate_thresholds(randomness)
        rc = None
    else:
        ra, rb, rc = r
    src = ProjectedStream(stream, config.radius)
    start = stream.count_drawn
    m = config.m
    h_a = step_a_statistic(src.draw(m))
    trace = [("A", h_a)]
    if threshold_accept(h_a, config.T1, ra) is eg.REJECT:
        return eg.TesterVerdict(eg.REJECT, ra, stream.count_drawn - start, "A", tuple(trace))
    h_b = step_b_statistic(src.draw(m), src.draw(m), config)
    trace.append(("B", float(h_b)))
    if threshold_accept(h_b, config.T2, rb) is eg.REJECT:
        return eg.TesterVerdict(eg.REJECT, rb, stream.count_drawn - start, "B", tuple(trace))
    v = eg.general_estimate(step_c_spec(config), step_c_config(config), src, derive_seed(randomness, "C"), rc)
    trace.extend(v.statistic_trace)
    return eg.TesterVerdict(v.decision, v.r_used, stream.count_drawn - start, f"C:{v.stage}", tuple(trace))


class GaussianMeanTester:
    """Harness wrapper; the source is any vector source (Gaussian, mixture, point cloud)."""

    def __init__(self, config: GaussianTesterConfig):
        self.config = config
        self.name = "gaussian"

    def run(self, source, seeds, r=None):
        return gaussian_mean_test(source.open_stream(seeds.sample_seed), self.config, seeds, r)

    def acceptance(self, source, sample_seed):
        """Product of the two gate probabilities and the step-C probability, plus samples read."""
        c = self.config
        src = ProjectedStream(source.open_stream(sample_seed), c.radius)
        pa = threshold_acceptance(step_a_statistic(src.draw(c.m)), c.T1)
        pb = threshold_acceptance(step_b_statistic(src.draw(c.m), src.draw(c.m), c), c.T2)
        pc = eg.general_acceptance_probability(step_c_spec(c), step_c_config(c), src)
        return pa * pb * pc, src.count_drawn

    def acceptance_probability(self, source, sample_seed) -> float:
        return self.acceptance(source, sample_seed)[0]

    def step_c_breakpoint(self) -> int:
        return eg.breakpoint(step_c_spec(self.config), step_c_config(self.config).general_t)
