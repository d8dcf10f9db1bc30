"""Gaussian mean tester at desk scale: accuracy on N(0, I) and N(e1, I), replicability on a spike mixture."""

import argparse

import numpy as np

from replitest.distributions import GaussianSource, SpikedGaussianSource
from replitest.expectation_gap import ACCEPT, REJECT
from replitest.gaussian_mean import GaussianMeanTester, GaussianTesterConfig
from replitest.harness.experiments import estimate_accuracy, estimate_replicability
from replitest.harness.reports import to_json, write_text


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=16)
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--rho", type=float, default=0.2)
    ap.add_argument("--m", type=int, default=2000)
    ap.add_argument("--spike-weight", type=float, default=0.1)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out")
    args = ap.parse_args()

    cfg = GaussianTesterConfig.desk_scale(args.d, args.alpha, args.rho, m=args.m)
    tester = GaussianMeanTester(cfg)
    shift = np.zeros(args.d)
    shift[0] = args.alpha
    spike = np.zeros(args.d)
    spike[0] = 5 * np.sqrt(args.d)
    mixture = SpikedGaussianSource(np.zeros(args.d), spike, args.spike_weight)

    acc = estimate_accuracy(tester, GaussianSource.standard(args.d), ACCEPT, args.trials, args.seed, args.jobs, "gaussian", "null")
    rej = estimate_accuracy(tester, GaussianSource(shift), REJECT, args.trials, args.seed + 1, args.jobs, "gaussian", "shifted")
    rep = estimate_replicability(tester, mixture, args.trials, args.seed + 2, jobs=args.jobs, tester_id="gaussian", distribution_id="spike")
    payload = {
        "config": cfg.to_dict(),
        "step_c_breakpoint": tester.step_c_breakpoint(),
        "accuracy": [acc.row(), rej.row()],
        "replicability": rep.row(),
    }
    write_text(args.out, to_json(payload))


if __name__ == "__main__":
    main()
