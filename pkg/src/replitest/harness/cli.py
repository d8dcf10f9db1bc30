"""``replitest`` command line entry point."""

import argparse
import math
import sys

import numpy as np

from ..chains import closeness_chain, coin_chain, uniformity_chain
from ..distributions import DiscreteDistribution, bernoulli, l1_distance
from ..errors import ReplitestError
from ..expectation_gap import ACCEPT, breakpoint, delta_gap
from ..rng import make_rng
from ..selection import approximation_ok
from ..testers import CoinProblem, CoinTester, UniformityProblem, uniformity_spec
from .config import DEFAULT_GRIDS, DEFAULT_PARAMS, ExperimentConfig, build_distribution, build_tester
from .experiments import binomial_stderr, chain_report, estimate_replicability, sample_complexity_sweep
from .reports import rows_to_csv, to_json, write_text

EXIT_CHECK_FAILED = 2


def _global_flags(p):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--trials", type=int, help="number of (paired) trials")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--check", action="store_true", help="exit with status 2 if an acceptance check fails")


def build_parser():
    parser = argparse.ArgumentParser(prog="replitest", description="Replicable distribution testers: experiments and reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coin", help="coin tester replicability/accuracy grid (CSV)")
    _global_flags(p)
    p.add_argument("--p0", type=float)
    p.add_argument("--q0", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--p", type=float, action="append", dest="biases", help="coin bias to test (repeatable)")

    p = sub.add_parser("uniformity", help="uniformity tester grid (CSV)")
    _global_flags(p)
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)

    p = sub.add_parser("closeness", help="closeness tester grid (CSV)")
    _global_flags(p)
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--rho", type=float)

    p = sub.add_parser("gaussian", help="Gaussian mean tester grid (CSV)")
    _global_flags(p)
    p.add_argument("--d", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--preset", choices=["desk", "theory"])

    p = sub.add_parser("select", help="replicable hypothesis selection (CSV)")
    _global_flags(p)
    p.add_argument("--hypotheses", help="JSON array of pmfs")
    p.add_argument("--rho", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--c-m", type=float, dest="c_m")
    p.add_argument("--planted", type=int, action="append", help="index of the true hypothesis (repeatable)")

    p = sub.add_parser("replicability", help="paired-trial replicability reports from a config (JSON)")
    _global_flags(p)

    p = sub.add_parser("sweep", help="sample-complexity sweep (CSV)")
    _global_flags(p)
    p.add_argument("--rho", type=float, action="append", dest="rhos", help="grid value of rho (repeatable)")
    p.add_argument("--p", type=float, dest="bias", help="coin bias the sweep samples from")

    p = sub.add_parser("chain-report", help="Pinsker indistinguishability of a chain (JSON)")
    _global_flags(p)
    p.add_argument("--kind", choices=["coin", "uniformity", "closeness"], default="coin")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--t", type=int, default=83)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--m", type=int, help="sample budget (default from --budget-constant)")
    p.add_argument("--budget-constant", type=float, default=0.005, help="m = constant/(rho eps)^2")
    p.add_argument("--rho", type=float, help="default 1/(300 t)")
    p.add_argument("--dump-chain", help="also write the chain family as JSON to this path")

    p = sub.add_parser("calibrate", help="empirical check of the uniformity variance constants (JSON)")
    _global_flags(p)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--c1", type=float, default=2.0)
    p.add_argument("--c2", type=float, default=2.0)
    return parser


def _load_config(args, tester):
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    else:
        cfg = ExperimentConfig(tester=tester, params=dict(DEFAULT_PARAMS.get(tester, {})))
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        cfg.trials = args.trials
    if args.out is not None:
        cfg.out = args.out
    if args.jobs is not None:
        cfg.jobs = args.jobs
    return cfg


def _override(cfg, args, *names):
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            cfg.params[name] = value


def _check_limits(cfg, rho, trials):
    checks = cfg.params.get("check", {}) if isinstance(cfg.params.get("check"), dict) else {}
    min_acc = float(checks.get("min_accuracy", 0.9))
    max_dis = float(checks.get("max_disagreement", rho + 3 * binomial_stderr(rho, trials)))
    return min_acc, max_dis


def _tester_params(cfg):
    return {k: v for k, v in cfg.params.items() if k != "check"}


def run_grid(cfg, distributions):
    """Paired trials on every distribution; returns CSV rows and whether all checks passed."""
    tester = build_tester(cfg.tester, _tester_params(cfg))
    rho = float(cfg.params.get("rho", DEFAULT_PARAMS.get(cfg.tester, {}).get("rho", 0.2)))
    min_acc, max_dis = _check_limits(cfg, rho, cfg.trials)
    rows = []
    all_ok = True
    for spec in distributions:
        did, source, expected = build_distribution(spec, tester)
        rep = estimate_replicability(tester, source, cfg.trials, cfg.seed, jobs=cfg.jobs, tester_id=cfg.tester, distribution_id=did)
        row = rep.row()
        if expected is None:
            row.update(expected="", accuracy=None, accuracy_ok=None)
        else:
            if cfg.tester == "select":
                pred = lambda o, src=source: approximation_ok(tester.hset, o, src, tester.eps)  # noqa: E731
                acc = rep.accuracy(pred)
                label = f"index~{expected}"
            else:
                acc = rep.accuracy(expected)
                label = expected.value
            ok = acc >= min_acc
            all_ok &= ok
            row.update(expected=label, accuracy=acc, accuracy_ok=ok)
        dis_ok = rep.disagreement_rate <= max_dis
        all_ok &= dis_ok
        row.update(disagreement_limit=max_dis, disagreement_ok=dis_ok)
        rows.append(row)
    return rows, all_ok


def _cmd_grid(args):
    cfg = _load_config(args, args.command)
    if args.command == "coin":
        _override(cfg, args, "p0", "q0", "rho", "delta")
        dists = cfg.distributions or DEFAULT_GRIDS["coin"]
        if args.biases:
            dists = [{"id": f"p={b!r}", "kind": "bernoulli", "p": b} for b in args.biases]
    elif args.command == "uniformity":
        _override(cfg, args, "n", "eps", "rho", "delta", "c1", "c2")
        n = int(cfg.params.get("n", 50))
        eps = float(cfg.params.get("eps", 0.5))
        dists = cfg.distributions or [
            {"id": "uniform", "kind": "uniform", "n": n, "expect": "accept"},
            {"id": "chain-mid", "kind": "chain", "chain": "uniformity", "n": n, "eps": min(eps, 0.5), "t": 2, "index": "mid"},
            {"id": "chain-end", "kind": "chain", "chain": "uniformity", "n": n, "eps": min(eps, 0.5), "t": 2, "index": "end", "expect": "reject"},
        ]
    elif args.command == "closeness":
        _override(cfg, args, "n", "eps", "rho")
        n = int(cfg.params.get("n", 30))
        dists = cfg.distributions or [
            {"id": "equal", "kind": "identical_pair", "n": n, "expect": "accept"},
            {"id": "disjoint", "kind": "disjoint_halves", "n": n, "expect": "reject"},
        ]
    elif args.command == "gaussian":
        _override(cfg, args, "d", "alpha", "rho", "m", "preset")
        d = int(cfg.params.get("d", 16))
        alpha = float(cfg.params.get("alpha", 1.0))
        dists = cfg.distributions or [
            {"id": "null", "kind": "gaussian", "d": d, "mean_norm": 0.0, "expect": "accept"},
            {"id": "shifted", "kind": "gaussian", "d": d, "mean_norm": alpha, "expect": "reject"},
            {"id": "spike", "kind": "spiked_gaussian", "d": d, "weight": 0.1},
        ]
    else:  # select
        _override(cfg, args, "rho", "eps", "c_m", "hypotheses")
        if "hypotheses" not in cfg.params:
            raise ReplitestError("select needs --hypotheses or a config with 'hypotheses'")
        planted = args.planted or [0]
        dists = cfg.distributions or [{"id": f"planted-{k}", "kind": "planted", "index": k} for k in planted]
    rows, ok = run_grid(cfg, dists)
    write_text(cfg.out, rows_to_csv(rows))
    return ok


def _cmd_replicability(args):
    if not args.config:
        raise ReplitestError("replicability needs --config")
    cfg = _load_config(args, None)
    rows, ok = run_grid(cfg, cfg.distributions)
    write_text(cfg.out, to_json({"tester": cfg.tester, "params": _tester_params(cfg), "reports": rows}))
    return ok


def _cmd_sweep(args):
    cfg = _load_config(args, "coin")
    if not args.config:
        cfg.grid = {"rho": [0.4, 0.2, 0.1]}
    if args.rhos:
        cfg.grid = {"rho": args.rhos}
    if cfg.tester != "coin":
        raise ReplitestError("sweep currently supports the coin tester")
    bias = args.bias if args.bias is not None else float(cfg.params.get("p", 0.6))
    base = {k: v for k, v in _tester_params(cfg).items() if k != "p"}
    keys = sorted(cfg.grid)
    points = [dict(zip(keys, vals)) for vals in zip(*(cfg.grid[k] for k in keys))]

    def factory(point):
        params = {**DEFAULT_PARAMS["coin"], **base, **point}
        params["delta"] = min(params["delta"], params["rho"])
        return CoinTester(CoinProblem(params["p0"], params["q0"], params["rho"], params["delta"]))

    rows = sample_complexity_sweep(factory, points, cfg.trials, bernoulli(bias), cfg.seed, jobs=cfg.jobs)
    out = []
    for i, r in enumerate(rows):
        row = r.row()
        row["source_bias"] = bias
        if i:
            row["mean_growth"] = r.mean_samples / rows[i - 1].mean_samples
            row["max_growth"] = r.max_samples / rows[i - 1].max_samples
        out.append(row)
    ok = all(1.2 <= row.get("mean_growth", 2) <= 3.5 and 1.5 <= row.get("max_growth", 2) <= 7 for row in out)
    write_text(cfg.out, rows_to_csv(out))
    return ok


def _cmd_chain_report(args):
    rho = args.rho if args.rho is not None else 1.0 / (300 * args.t)
    m = args.m if args.m is not None else math.ceil(args.budget_constant / (rho * args.eps) ** 2)
    if args.kind == "coin":
        chain = coin_chain(args.eps, args.t)
    elif args.kind == "uniformity":
        chain = uniformity_chain(args.n, args.eps, args.t)
    else:
        chain = closeness_chain(args.n, args.eps, args.t)
    if args.dump_chain:
        write_text(args.dump_chain, chain.to_json() + "\n")
    report = chain_report(chain, m)
    payload = {"rho": rho, "budget_constant": args.budget_constant, **report.to_dict()}
    write_text(args.out, to_json(payload))
    return report.all_below_half


def _cmd_calibrate(args):
    trials = args.trials or 2000
    seed = args.seed or 0
    problem = UniformityProblem(args.n, args.eps, 0.25, 0.05, args.c1, args.c2)
    spec = uniformity_spec(problem)
    chain = uniformity_chain(args.n if args.n % 2 == 0 else args.n + 1, min(args.eps, 0.5), 2)
    cases = {"uniform": DiscreteDistribution.uniform(args.n)}
    if chain[0].n == args.n:
        cases["chain-mid"] = chain[1]
        cases["chain-end"] = chain[2]
    rows = []
    worst = 0.0
    for t in (0.5, 0.25, 0.125):
        m = breakpoint(spec, t)
        gap = delta_gap(spec, m)
        for name, dist in cases.items():
            z = float(np.sum(dist.pmf**2))
            stream = dist.open_stream(make_rng(seed, "calibrate", name, t).integers(2**63))
            vals = spec.values(stream, m, trials)
            inflate = 1 + max(0.0, (z - spec.tau1(m)) / gap, (spec.tau0(m) - z) / gap)
            ratio = float(np.std(vals, ddof=1)) / (spec.sigma(m) * inflate)
            worst = max(worst, ratio)
            rows.append({"t": t, "m": m, "distribution": name, "l1_from_uniform": l1_distance(dist, DiscreteDistribution.uniform(args.n)), "std_over_bound": ratio})
    safe = worst <= 1.0
    if not safe:
        print(f"warning: empirical std exceeds the variance bound (ratio {worst:.3f}); raise c1/c2", file=sys.stderr)
    write_text(args.out, to_json({"n": args.n, "eps": args.eps, "c1": args.c1, "c2": args.c2, "trials": trials, "worst_ratio": worst, "safe": safe, "rows": rows}))
    return safe


COMMANDS = {
    "coin": _cmd_grid,
    "uniformity": _cmd_grid,
    "closeness": _cmd_grid,
    "gaussian": _cmd_grid,
    "select": _cmd_grid,
    "replicability": _cmd_replicability,
    "sweep": _cmd_sweep,
    "chain-report": _cmd_chain_report,
    "calibrate": _cmd_calibrate,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        ok = COMMANDS[args.command](args)
    except (ReplitestError, OSError, KeyError) as exc:
        print(f"replitest: error: {exc}", file=sys.stderr)
        return 1
    if args.check and not ok:
        return EXIT_CHECK_FAILED
    return 0


if __name__ == "__main__":
    sys.exit(main())
