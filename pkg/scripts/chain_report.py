"""Pinsker bounds along a coin chain for a range of sample budgets.

Prints the largest budget under which every consecutive pair stays below 1/2,
next to the budget ``c / (rho eps)^2`` with ``rho = 1/(300 t)``.
"""

import argparse
import math

from replitest.chains import coin_chain
from replitest.harness.experiments import chain_report
from replitest.harness.reports import to_json, write_text


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=0.25)
    ap.add_argument("--t", type=int, default=83)
    ap.add_argument("--budget-constant", type=float, default=0.005)
    ap.add_argument("--out")
    args = ap.parse_args()

    chain = coin_chain(args.eps, args.t)
    rho = 1 / (300 * args.t)
    m_target = math.ceil(args.budget_constant / (rho * args.eps) ** 2)
    rows = []
    for m in (10**k for k in range(1, 9)):
        rep = chain_report(chain, m)
        rows.append({"m": m, "max_bound": rep.max_bound, "all_below_half": rep.all_below_half})
    # largest budget with every bound below 1/2, by bisection on m
    lo, hi = 1, m_target
    while hi - lo > 1:
        mid = (lo + hi) // 2
        lo, hi = (mid, hi) if chain_report(chain, mid).all_below_half else (lo, mid)
    target = chain_report(chain, m_target)
    payload = {
        "eps": args.eps,
        "t": args.t,
        "rho": rho,
        "target_budget": m_target,
        "target_max_bound": target.max_bound,
        "target_all_below_half": target.all_below_half,
        "largest_safe_budget": lo,
        "scan": rows,
    }
    write_text(args.out, to_json(payload))


if __name__ == "__main__":
    main()
