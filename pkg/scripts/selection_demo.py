"""Replicable hypothesis selection on well-separated hypotheses with the truth planted at one of them."""

import argparse

import numpy as np

from replitest.harness.experiments import estimate_replicability
from replitest.harness.reports import to_json, write_text
from replitest.selection import HypothesisSet, SelectionTester, approximation_ok


def separated(n, dsize, beta):
    """Uniform background plus ``beta`` extra mass on a private pair of labels (pairwise L1 = 2 beta)."""
    if 2 * n > dsize:
        raise SystemExit("domain must have at least two labels per hypothesis")
    base = np.full(dsize, (1 - beta) / dsize)
    hyps = []
    for k in range(n):
        h = base.copy()
        h[2 * k : 2 * k + 2] += beta / 2
        hyps.append(h)
    return HypothesisSet(hyps)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--dsize", type=int, default=20)
    ap.add_argument("--beta", type=float, default=0.3)
    ap.add_argument("--planted", type=int, default=5)
    ap.add_argument("--rho", type=float, default=0.2)
    ap.add_argument("--eps", type=float, default=0.2)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out")
    args = ap.parse_args()

    hset = separated(args.n, args.dsize, args.beta)
    truth = hset.hypotheses[args.planted]
    tester = SelectionTester(hset, args.rho, args.eps)
    rep = estimate_replicability(tester, truth, args.trials, args.seed, jobs=args.jobs, tester_id="select", distribution_id=f"planted-{args.planted}")
    payload = {
        "batch_size": tester.batch_size(),
        "approximation_rate": rep.accuracy(lambda i: approximation_ok(hset, i, truth, args.eps)),
        "agreement": 1 - rep.disagreement_rate,
        "report": rep.row(),
    }
    write_text(args.out, to_json(payload))


if __name__ == "__main__":
    main()
