"""Mean and max samples of the coin tester as rho shrinks.

Mean samples should grow roughly like 1/rho and the worst case like 1/rho^2.
"""

import argparse

from replitest.distributions import bernoulli
from replitest.harness.experiments import sample_complexity_sweep, successive_ratios
from replitest.harness.reports import rows_to_csv, write_text
from replitest.testers import CoinProblem, CoinTester


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rho", type=float, nargs="+", default=[0.4, 0.2, 0.1, 0.05])
    ap.add_argument("--p", type=float, default=0.6, help="bias of the coin being sampled")
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out")
    args = ap.parse_args()

    def factory(point):
        return CoinTester(CoinProblem(0.5, 0.7, point["rho"], min(0.05, point["rho"])))

    rows = sample_complexity_sweep(factory, [{"rho": r} for r in args.rho], args.trials, bernoulli(args.p), args.seed, args.jobs)
    out = [r.row() for r in rows]
    for row, g_mean, g_max in zip(out[1:], successive_ratios([r.mean_samples for r in rows]), successive_ratios([r.max_samples for r in rows])):
        row["mean_growth"] = g_mean
        row["max_growth"] = g_max
    write_text(args.out, rows_to_csv(out))


if __name__ == "__main__":
    main()
