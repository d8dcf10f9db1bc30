import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from replitest import expectation_gap as eg
from replitest.chains import uniformity_chain
from replitest.distributions import DiscreteDistribution, DistributionPair, bernoulli
from replitest.errors import ParameterError, PreconditionError, SupportError
from replitest.rng import Seeds, make_rng
from replitest.testers import (
    ClosenessProblem,
    ClosenessTester,
    CoinProblem,
    CoinTester,
    UniformityProblem,
    UniformityTester,
    closeness_reference_bound,
    closeness_spec,
    closeness_statistic,
    closeness_test,
    coin_spec,
    coin_test,
    collision_statistic,
    register_statistic,
    uniformity_spec,
    uniformity_test,
)


def test_coin_spec_examples():
    spec = coin_spec(CoinProblem(0.5, 0.75, 0.2, 0.05))
    assert spec.evaluate(np.ones(10, dtype=int)) == 1.0
    assert eg.delta_gap(spec, 9) == 0.25
    assert spec.sigma(12) == pytest.approx(math.sqrt(3) / (2 * math.sqrt(12)))
    with pytest.raises(PreconditionError):
        spec.evaluate([])


def test_coin_statistic_mean():
    spec = coin_spec(CoinProblem(0.5, 0.7, 0.2, 0.05))
    z = spec.values(bernoulli(0.6).open_stream(3), 40, 100_000)
    assert abs(z.mean() - 0.6) <= 4 * math.sqrt(0.24 / 40 / z.size)


def test_coin_problem_validation():
    with pytest.raises(ParameterError):
        CoinProblem(0.7, 0.5, 0.2, 0.05)
    with pytest.raises(ParameterError):
        CoinProblem(0.5, 0.7, 0.2, 0.5)


def test_collision_examples():
    spec = uniformity_spec(UniformityProblem(10, 0.5, 0.25, 0.05))
    assert spec.evaluate(np.arange(10)) == 0.0
    assert spec.evaluate(np.full(5, 3)) == 1.0
    with pytest.raises(PreconditionError):
        spec.evaluate(np.array([1]))
    assert collision_statistic([2, 1, 1]) == pytest.approx(1 / 6)


def test_collision_mean_hand_computed():
    p = DiscreteDistribution([0.5, 0.3, 0.2])
    counts = p.open_stream(4).draw_counts(30, reps=40_000)
    z = collision_statistic(counts, 30)
    assert abs(z.mean() - 0.38) <= 4 * z.std() / math.sqrt(z.size)


def test_collision_histogram_matches_pairwise():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.integers(0, 6, size=int(rng.integers(2, 30)))
        pairs = sum(x[i] == x[j] for i in range(len(x)) for j in range(i))
        expected = pairs / math.comb(len(x), 2)
        assert collision_statistic(np.bincount(x, minlength=6)) == pytest.approx(expected, abs=1e-15)


def test_closeness_statistic_examples():
    assert closeness_statistic([2, 1], [2, 1]) == -2.0
    assert closeness_statistic([1, 0], [0, 1]) == 0.0
    assert closeness_statistic([0, 0, 3], [0, 0, 3]) == -1.0
    with pytest.raises(SupportError):
        closeness_statistic([-1, 0], [0, 1])
    with pytest.raises(SupportError):
        closeness_statistic([1, 0], [0, 1, 2])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=1, max_size=15))
def test_closeness_statistic_properties(bins):
    x = np.array([a for a, _ in bins])
    y = np.array([b for _, b in bins])
    z = closeness_statistic(x, y)
    assert z == pytest.approx(closeness_statistic(y, x))
    # each term is at least -1, so Z >= -(number of occupied bins)
    assert z >= -np.count_nonzero(x + y) - 1e-9
    stacked = closeness_statistic(np.stack([x, y]), np.stack([y, x]))
    assert stacked.tolist() == pytest.approx([z, z])


def test_closeness_zero_mean_under_null():
    p = DiscreteDistribution(np.random.default_rng(2).dirichlet(np.ones(10)))
    a = p.open_stream(1).draw_poissonized_counts(50.0, reps=10_000)
    b = p.open_stream(2).draw_poissonized_counts(50.0, reps=10_000)
    z = closeness_statistic(a, b)
    assert abs(z.mean()) <= 4 * z.std() / math.sqrt(z.size)


def test_uniformity_sigma_formula():
    spec = uniformity_spec(UniformityProblem(16, 0.5, 0.25, 0.05, c1=3.0, c2=1.5))
    m = 100
    expected = 3.0 / (m * 4) + (1.5 / 10) * (0.5 / 16 + 0.5**1.5 / 16**0.75)
    assert spec.sigma(m) == pytest.approx(expected)


def test_closeness_thresholds():
    spec = closeness_spec(ClosenessProblem(30, 0.6, 0.25))
    assert spec.tau0(100) == 0.0
    assert spec.tau1(100) == pytest.approx(100**2 * 0.36 / (120 + 200))
    assert spec.sigma(10) == pytest.approx(math.sqrt(200))
    assert spec.sigma(30) == pytest.approx(math.sqrt(300 + 5 * 30 * 0.36))
    assert ClosenessProblem(30, 0.6, 0.25).delta == pytest.approx(0.0625)


@pytest.mark.parametrize("n", [100, 1000, 10_000])
@pytest.mark.parametrize("eps", [0.25, 0.5, 1.0])
@pytest.mark.parametrize("rho", [0.05, 0.25])
def test_closeness_breakpoint_scale(n, eps, rho):
    problem = ClosenessProblem(n, eps, rho)
    m = eg.breakpoint(closeness_spec(problem), rho)
    ratio = m / closeness_reference_bound(n, eps, rho)
    assert 1 / 64 <= ratio <= 64


def test_register_statistic_rejects_duplicates():
    with pytest.raises(ParameterError):
        register_statistic("coin", coin_spec)


def test_functional_entries_match_testers():
    problem = CoinProblem(0.5, 0.7, 0.2, 0.05)
    seeds = Seeds(5, 6)
    stream = bernoulli(0.6).open_stream(5)
    assert coin_test(problem, stream, seeds) == CoinTester(problem).run(bernoulli(0.6), seeds)

    up = UniformityProblem(20, 0.5, 0.25, 0.05)
    u = DiscreteDistribution.uniform(20)
    assert uniformity_test(up, u.open_stream(5), seeds) == UniformityTester(up).run(u, seeds)

    cp = ClosenessProblem(20, 0.6, 0.25)
    pair = DistributionPair(u, u)
    sp, sq = pair.open_streams(5)
    assert closeness_test(cp, sp, sq, seeds) == ClosenessTester(cp).run(pair, seeds)


def _rate(tester, source, trials, want, seed=0):
    return sum(tester.run(source, Seeds.for_trial(seed, k)).decision is want for k in range(trials)) / trials


def test_coin_correctness_at_endpoints():
    problem = CoinProblem(0.5, 0.7, 0.2, 0.05)
    tester = CoinTester(problem)
    assert _rate(tester, bernoulli(0.5), 200, eg.ACCEPT) >= 0.95 - 3 * math.sqrt(0.05 * 0.95 / 200)
    assert _rate(tester, bernoulli(0.7), 200, eg.REJECT) >= 0.95 - 3 * math.sqrt(0.05 * 0.95 / 200)


def test_uniformity_correctness():
    problem = UniformityProblem(20, 0.5, 0.25, 0.05)
    tester = UniformityTester(problem)
    chain = uniformity_chain(20, 0.5, 4)
    assert _rate(tester, chain[0], 150, eg.ACCEPT) >= 0.9
    assert _rate(tester, chain[4], 150, eg.REJECT) >= 0.9


def test_sample_predictions_are_positive():
    c = CoinTester(CoinProblem(0.5, 0.7, 0.2, 0.05))
    assert 0 < c.predicted_expected_samples() < c.predicted_worst_samples()
    u = UniformityTester(UniformityProblem(50, 0.5, 0.25, 0.05))
    assert 0 < u.predicted_expected_samples() < u.predicted_worst_samples()
