"""Desk-scale acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line in the terminal summary with the measured
values and the runtime against its target.
"""

import itertools
import math
import os
import subprocess
import sys

import numpy as np

from oracles import gaussian_acceptance, spec_tester_acceptance
from replitest import expectation_gap as eg
from replitest.chains import coin_chain, uniformity_chain
from replitest.distributions import DiscreteDistribution, DistributionPair, GaussianSource, bernoulli
from replitest.gaussian_mean import GaussianMeanTester, GaussianTesterConfig, MatchingGraph, max_matching
from replitest.harness.canonical import PermutedSource, canonicalize, symmetrize_small
from replitest.harness.config import build_distribution
from replitest.harness.experiments import (
    binomial_stderr,
    chain_report,
    estimate_accuracy,
    estimate_replicability,
    sample_complexity_sweep,
    successive_ratios,
)
from replitest.rng import Seeds
from replitest.selection import HypothesisSet, SelectionTester, approximation_ok
from replitest.testers import (
    ClosenessProblem,
    ClosenessTester,
    CoinProblem,
    CoinTester,
    UniformityProblem,
    UniformityTester,
    closeness_statistic,
    collision_statistic,
)
from test_gaussian_mean import brute_matching

JOBS = os.cpu_count() or 1
COIN = CoinProblem(0.5, 0.7, 0.2, 0.05)


def test_c01_coin_correctness(criterion):
    with criterion(1, "coin correctness", 30) as c:
        tester = CoinTester(COIN)
        acc = estimate_accuracy(tester, bernoulli(0.5), eg.ACCEPT, 500, 101, jobs=JOBS)
        rej = estimate_accuracy(tester, bernoulli(0.7), eg.REJECT, 500, 102, jobs=JOBS)
        c.check(acc.rate >= 0.9, f"accept Ber(0.5) {acc.rate:.3f} >= 0.90")
        c.check(rej.rate >= 0.9, f"reject Ber(0.7) {rej.rate:.3f} >= 0.90")


def test_c02_coin_replicability(criterion):
    with criterion(2, "coin replicability", 60) as c:
        rep = estimate_replicability(CoinTester(COIN), bernoulli(0.6), 2000, 202, jobs=JOBS)
        limit = 0.2 + 3 * binomial_stderr(0.2, 2000, continuity=False)
        c.check(rep.disagreement_rate <= limit, f"disagreement at p=0.6 {rep.disagreement_rate:.4f} <= {limit:.4f}")


def test_c03_coin_sample_scaling(criterion):
    with criterion(3, "coin sample scaling", 120) as c:
        grid = [{"rho": r} for r in (0.4, 0.2, 0.1)]
        rows = sample_complexity_sweep(
            lambda pt: CoinTester(CoinProblem(0.5, 0.7, pt["rho"], min(0.05, pt["rho"]))), grid, 200, bernoulli(0.6), 303, jobs=JOBS
        )
        means = successive_ratios([r.mean_samples for r in rows])
        maxes = successive_ratios([r.max_samples for r in rows])
        c.check(all(1.2 <= x <= 3.5 for x in means), "mean ratios " + ", ".join(f"{x:.2f}" for x in means) + " in [1.2, 3.5]")
        c.check(all(1.5 <= x <= 7 for x in maxes), "max ratios " + ", ".join(f"{x:.2f}" for x in maxes) + " in [1.5, 7]")


def test_c04_collision_unbiased(criterion):
    with criterion(4, "collision statistic unbiasedness", 30) as c:
        rng = np.random.default_rng(404)
        worst = 0.0
        for k in range(20):
            n = int(rng.integers(2, 11))
            p = DiscreteDistribution(rng.dirichlet(np.ones(n)))
            z = collision_statistic(p.open_stream(k).draw_counts(50, 10_000), 50)
            se = z.std(ddof=1) / math.sqrt(z.size)
            worst = max(worst, abs(z.mean() - float(p.pmf @ p.pmf)) / se)
        c.check(worst <= 4, f"max |mean - ||p||^2| / stderr over 20 pmfs {worst:.2f} <= 4")


def test_c05_uniformity(criterion):
    with criterion(5, "uniformity correctness and replicability", 120) as c:
        tester = UniformityTester(UniformityProblem(50, 0.5, 0.25, 0.05))
        chain = uniformity_chain(50, 0.5, 2)
        acc = estimate_accuracy(tester, chain[0], eg.ACCEPT, 300, 501, jobs=JOBS)
        rej = estimate_accuracy(tester, chain[2], eg.REJECT, 300, 502, jobs=JOBS)
        rep = estimate_replicability(tester, chain[1], 300, 503, jobs=JOBS)
        limit = 0.25 + 3 * binomial_stderr(0.25, 300, continuity=False)
        c.check(acc.rate >= 0.9, f"accept uniform {acc.rate:.3f}")
        c.check(rej.rate >= 0.9, f"reject chain end {rej.rate:.3f}")
        c.check(rep.disagreement_rate <= limit, f"midpoint disagreement {rep.disagreement_rate:.3f} <= {limit:.3f}")


def test_c06_closeness_moments(criterion):
    with criterion(6, "closeness statistic moments", 60) as c:
        n, m, trials = 20, 200.0, 10_000
        rng = np.random.default_rng(606)
        p = DiscreteDistribution(rng.dirichlet(np.ones(n)))
        z = closeness_statistic(p.open_stream(1).draw_poissonized_counts(m, trials), p.open_stream(2).draw_poissonized_counts(m, trials))
        se = z.std(ddof=1) / math.sqrt(trials)
        c.check(abs(z.mean()) <= 4 * se, f"p=q |mean| {abs(z.mean()):.3f} <= 4 stderr {4 * se:.3f}")
        worst = math.inf
        for k in range(5):
            a = DiscreteDistribution(rng.dirichlet(np.ones(n)))
            b = DiscreteDistribution(rng.dirichlet(np.ones(n)))
            l1 = float(np.abs(a.pmf - b.pmf).sum())
            za = closeness_statistic(a.open_stream(10 + k).draw_poissonized_counts(m, trials), b.open_stream(20 + k).draw_poissonized_counts(m, trials))
            worst = min(worst, za.mean() / (m * m * l1 * l1 / (4 * n + 2 * m)))
        c.check(worst >= 0.9, f"far pairs min mean / lower bound {worst:.3f} >= 0.9")


def test_c07_closeness_end_to_end(criterion):
    with criterion(7, "closeness end to end", 120) as c:
        tester = ClosenessTester(ClosenessProblem(30, 0.6, 0.25))
        _, same, _ = build_distribution({"kind": "identical_pair", "n": 30})
        _, apart, _ = build_distribution({"kind": "disjoint_halves", "n": 30})
        acc = estimate_accuracy(tester, same, eg.ACCEPT, 200, 701, jobs=JOBS)
        rej = estimate_accuracy(tester, apart, eg.REJECT, 200, 702, jobs=JOBS)
        c.check(acc.rate >= 0.9, f"accept p=q {acc.rate:.3f}")
        c.check(rej.rate >= 0.9, f"reject disjoint halves {rej.rate:.3f}")


def test_c08_gaussian(criterion):
    with criterion(8, "gaussian mean tester", 180) as c:
        tester = GaussianMeanTester(GaussianTesterConfig.desk_scale(16, 1.0, 0.2))
        acc = estimate_accuracy(tester, GaussianSource.standard(16), eg.ACCEPT, 200, 801, jobs=JOBS)
        rej = estimate_accuracy(tester, GaussianSource(np.eye(16)[0]), eg.REJECT, 200, 802, jobs=JOBS)
        _, spike, _ = build_distribution({"kind": "spiked_gaussian", "d": 16, "weight": 0.1})
        rep = estimate_replicability(tester, spike, 200, 803, jobs=JOBS)
        c.check(acc.rate >= 0.9, f"accept N(0,I) {acc.rate:.3f}")
        c.check(rej.rate >= 0.9, f"reject N(e1,I) {rej.rate:.3f}")
        c.check(rep.disagreement_rate <= 0.35, f"spike mixture disagreement {rep.disagreement_rate:.3f} <= 0.35")


def test_c09_matching_oracle(criterion):
    with criterion(9, "matching oracle", 5) as c:
        rng = np.random.default_rng(909)
        bad = 0
        for _ in range(500):
            r, k = rng.integers(1, 9, size=2)
            adj = rng.random((r, k)) < rng.uniform(0.05, 0.8)
            bad += max_matching(MatchingGraph.from_adjacency(adj)) != brute_matching(adj)
        c.check(bad == 0, f"mismatches {bad}/500")


def _separated_hypotheses(n=8, dsize=20, beta=0.3):
    base = np.full(dsize, (1 - beta) / dsize)
    hyps = []
    for k in range(n):
        h = base.copy()
        h[2 * k : 2 * k + 2] += beta / 2
        hyps.append(h)
    return HypothesisSet(hyps)


def test_c10_hypothesis_selection(criterion):
    # about 3 s per selection run on one core; 100 paired trials are 200 runs
    with criterion(10, "hypothesis selection", 180) as c:
        hset = _separated_hypotheses()
        seps = [float(np.abs(a.pmf - b.pmf).sum()) for a, b in itertools.combinations(hset.hypotheses, 2)]
        c.check(min(seps) >= 0.4, f"min pairwise L1 {min(seps):.2f} >= 0.4")
        truth = hset.hypotheses[5]
        tester = SelectionTester(hset, 0.2, 0.2)
        rep = estimate_replicability(tester, truth, 100, 1001, jobs=JOBS)
        ok = rep.accuracy(lambda i: approximation_ok(hset, i, truth, 0.2))
        c.check(ok >= 0.9, f"approximation holds in {ok:.3f} of runs")
        c.check(1 - rep.disagreement_rate >= 0.75, f"rerun agreement {1 - rep.disagreement_rate:.3f} >= 0.75")


def test_c11_chain_indistinguishability(criterion):
    with criterion(11, "chain indistinguishability report", 5) as c:
        t, eps = 83, 0.25
        rho = 1 / (300 * t)
        m = math.ceil(0.005 / (rho * eps) ** 2)
        rep = chain_report(coin_chain(eps, t), m)
        c.check(rep.all_below_half, f"m={m}, max Pinsker bound {rep.max_bound:.3f} < 0.5 for all {len(rep.rows)} pairs")


def test_c12_canonicalization(criterion):
    with criterion(12, "canonicalization fidelity", 10) as c:
        worst = 0.0
        cases = [
            (CoinTester(COIN), bernoulli(0.6), spec_tester_acceptance),
            (UniformityTester(UniformityProblem(50, 0.5, 0.25, 0.05)), uniformity_chain(50, 0.5, 7)[5], spec_tester_acceptance),
            (ClosenessTester(ClosenessProblem(30, 0.6, 0.25)), DistributionPair(uniformity_chain(30, 0.4, 1)[0], uniformity_chain(30, 0.4, 1)[1]), spec_tester_acceptance),
            (
                GaussianMeanTester(GaussianTesterConfig.desk_scale(8, 1.0, 0.25, m=200)),
                GaussianSource(np.full(8, 0.3 / math.sqrt(8))),
                gaussian_acceptance,
            ),
        ]
        for tester, source, oracle in cases:
            canon = canonicalize(tester)
            for seed in range(5):
                f, _ = canon.score(source, Seeds(seed, 0))
                worst = max(worst, abs(f - oracle(tester, source, seed)))
        c.check(worst <= 1e-12, f"max |f - replay oracle| over 4 testers x 5 sample sets {worst:.1e}")
        tester = UniformityTester(UniformityProblem(4, 0.5, 0.25, 0.05))
        sym = symmetrize_small(tester, 4)
        src = DiscreteDistribution([0.4, 0.3, 0.2, 0.1])
        values = {sym.acceptance_probability(PermutedSource(src, p), 7) for p in itertools.permutations(range(4))}
        c.check(len(values) == 1, f"distinct h values over 24 relabelings: {len(values)}")


CLI_RUNS = [
    ["coin", "--trials", "100"],
    ["uniformity", "--n", "20", "--trials", "100"],
    ["closeness", "--trials", "100"],
    ["gaussian", "--d", "4", "--m", "100", "--alpha", "4", "--trials", "100"],
    ["select", "--rho", "0.5", "--eps", "0.5", "--trials", "100"],
    ["replicability"],
    ["sweep", "--trials", "100"],
    ["chain-report"],
    ["calibrate", "--trials", "300"],
]


def test_c13_cli_determinism(criterion, tmp_path):
    with criterion(13, "CLI determinism", 30) as c:
        hyp = tmp_path / "h.json"
        hyp.write_text("[[0.7, 0.1, 0.1, 0.1], [0.1, 0.1, 0.1, 0.7]]")
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"tester": "uniformity", "params": {"n": 20}, "trials": 100, '
                       '"distributions": [{"kind": "uniform", "n": 20, "expect": "accept"}]}')
        differing = []
        bad_exit = []
        for argv in CLI_RUNS:
            extra = ["--hypotheses", str(hyp)] if argv[0] == "select" else ["--config", str(cfg)] if argv[0] == "replicability" else []
            outs = []
            for k in range(2):
                out = tmp_path / f"{argv[0]}-{k}.out"
                cmd = [sys.executable, "-m", "replitest.harness.cli", *argv, *extra, "--seed", "13", "--out", str(out)]
                proc = subprocess.run(cmd, capture_output=True, text=True)
                if proc.returncode not in (0, 2):
                    bad_exit.append(f"{argv[0]}={proc.returncode}")
                outs.append(out.read_bytes() if out.exists() else b"")
            if outs[0] != outs[1] or not outs[0]:
                differing.append(argv[0])
        c.check(not bad_exit, f"unexpected exit codes: {bad_exit or 'none'}")
        c.check(not differing, f"{len(CLI_RUNS)} subcommands, byte-identical reruns; differing: {differing or 'none'}")
