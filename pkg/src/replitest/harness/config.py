"""Experiment configuration: JSON files naming a tester and a grid of distributions."""

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..chains import closeness_chain, coin_chain, uniformity_chain
from ..distributions import (
    DiscreteDistribution,
    DistributionPair,
    GaussianSource,
    SpikedGaussianSource,
    bernoulli,
)
from ..errors import ParameterError
from ..expectation_gap import ACCEPT, REJECT
from ..gaussian_mean import GaussianMeanTester, GaussianTesterConfig
from ..selection import HypothesisSet, SelectionTester
from ..testers import (
    ClosenessProblem,
    ClosenessTester,
    CoinProblem,
    CoinTester,
    UniformityProblem,
    UniformityTester,
)


@dataclass
class ExperimentConfig:
    tester: str
    params: dict = field(default_factory=dict)
    distributions: list = field(default_factory=list)
    trials: int = 200
    seed: int = 0
    out: Optional[str] = None
    jobs: int = 1
    grid: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data):
        known = {"tester", "params", "distributions", "trials", "seed", "out", "jobs", "grid"}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        if "tester" not in data:
            raise ParameterError("config needs a 'tester' entry")
        return cls(**data)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _pick(params, *keys, **defaults):
    out = {}
    for k in keys:
        if k in params:
            out[k] = params[k]
        elif k in defaults:
            out[k] = defaults[k]
        else:
            raise ParameterError(f"missing tester parameter {k!r}")
    return out


def load_hypotheses(spec):
    if isinstance(spec, str):
        with open(spec, encoding="utf-8") as fh:
            return HypothesisSet.from_json(fh.read())
    return HypothesisSet(spec)


def build_tester(name, params):
    if name == "coin":
        return CoinTester(CoinProblem(**_pick(params, "p0", "q0", "rho", "delta", p0=0.5, q0=0.7, rho=0.2, delta=0.05)))
    if name == "uniformity":
        p = _pick(params, "n", "eps", "rho", "delta", "c1", "c2", eps=0.5, rho=0.25, delta=0.05, c1=2.0, c2=2.0)
        return UniformityTester(UniformityProblem(**p))
    if name == "closeness":
        p = _pick(params, "n", "eps", "rho", "poissonized", "delta_exponent", eps=0.6, rho=0.25, poissonized=True, delta_exponent=2.0)
        return ClosenessTester(ClosenessProblem(**p))
    if name == "gaussian":
        p = dict(params)
        preset = p.pop("preset", "desk")
        base = _pick(p, "d", "alpha", "rho", "m", d=16, alpha=1.0, rho=0.2, m=2000)
        extra = {k: v for k, v in p.items() if k not in base}
        if preset == "desk":
            cfg = GaussianTesterConfig.desk_scale(**base, **extra)
        elif preset == "theory":
            cfg = GaussianTesterConfig(**base, **extra)
        else:
            raise ParameterError(f"unknown gaussian preset {preset!r}")
        return GaussianMeanTester(cfg)
    if name == "select":
        hset = load_hypotheses(params["hypotheses"])
        p = _pick(params, "rho", "eps", "c_m", rho=0.2, eps=0.2, c_m=16.0)
        return SelectionTester(hset, p["rho"], p["eps"], p["c_m"])
    raise ParameterError(f"unknown tester {name!r}")


def _chain_member(spec):
    kind = spec["chain"]
    t = int(spec.get("t", 2))
    if kind == "coin":
        chain = coin_chain(spec["eps"], t)
    elif kind == "uniformity":
        chain = uniformity_chain(spec["n"], spec["eps"], t)
    elif kind == "closeness":
        chain = closeness_chain(spec["n"], spec["eps"], t, spec.get("a"), spec.get("b"), spec.get("rho"))
    else:
        raise ParameterError(f"unknown chain {kind!r}")
    index = spec.get("index", "mid")
    if index == "mid":
        index = t // 2
    elif index == "end":
        index = t
    return chain[int(index)]


def _expected(value):
    if value is None:
        return None
    if value in ("accept", ACCEPT):
        return ACCEPT
    if value in ("reject", REJECT):
        return REJECT
    return value


def build_distribution(spec, tester=None):
    """Return ``(id, source, expected)`` for one distribution entry of a config."""
    kind = spec["kind"]
    did = spec.get("id", kind)
    expected = _expected(spec.get("expect"))
    if kind == "bernoulli":
        src = bernoulli(spec["p"])
    elif kind == "pmf":
        src = DiscreteDistribution(spec["pmf"], normalize=True)
    elif kind == "uniform":
        src = DiscreteDistribution.uniform(spec["n"])
    elif kind == "chain":
        src = _chain_member(spec)
    elif kind == "pair":
        src = DistributionPair(DiscreteDistribution(spec["p"], normalize=True), DiscreteDistribution(spec["q"], normalize=True))
    elif kind == "identical_pair":
        p = DiscreteDistribution(spec["pmf"], normalize=True) if "pmf" in spec else DiscreteDistribution.uniform(spec["n"])
        src = DistributionPair(p, p)
    elif kind == "disjoint_halves":
        n = int(spec["n"])
        half = n // 2
        a = np.zeros(n)
        b = np.zeros(n)
        a[:half] = 1.0 / half
        b[half:] = 1.0 / (n - half)
        src = DistributionPair(DiscreteDistribution(a), DiscreteDistribution(b))
    elif kind == "gaussian":
        if "mean" in spec:
            mean = np.asarray(spec["mean"], dtype=float)
        else:
            mean = np.zeros(int(spec["d"]))
            mean[0] = float(spec.get("mean_norm", 0.0))
        src = GaussianSource(mean)
    elif kind == "spiked_gaussian":
        d = int(spec["d"])
        spike = np.zeros(d)
        spike[0] = float(spec.get("spike_norm", 5 * math.sqrt(d)))
        src = SpikedGaussianSource(np.zeros(d), spike, float(spec.get("weight", 0.1)), float(spec.get("spike_noise", 0.0)))
    elif kind == "planted":
        if tester is None or not hasattr(tester, "hset"):
            raise ParameterError("'planted' distributions need a selection tester")
        k = int(spec["index"])
        src = tester.hset.hypotheses[k]
        if expected is None:
            expected = k
    else:
        raise ParameterError(f"unknown distribution kind {kind!r}")
    return did, src, expected


DEFAULT_GRIDS = {
    "coin": [
        {"id": "null", "kind": "bernoulli", "p": 0.5, "expect": "accept"},
        {"id": "mid", "kind": "bernoulli", "p": 0.6},
        {"id": "alt", "kind": "bernoulli", "p": 0.7, "expect": "reject"},
    ],
    "uniformity": [
        {"id": "uniform", "kind": "uniform", "n": 50, "expect": "accept"},
        {"id": "chain-mid", "kind": "chain", "chain": "uniformity", "n": 50, "eps": 0.5, "t": 2, "index": "mid"},
        {"id": "chain-end", "kind": "chain", "chain": "uniformity", "n": 50, "eps": 0.5, "t": 2, "index": "end", "expect": "reject"},
    ],
    "closeness": [
        {"id": "equal", "kind": "identical_pair", "n": 30, "expect": "accept"},
        {"id": "disjoint", "kind": "disjoint_halves", "n": 30, "expect": "reject"},
    ],
    "gaussian": [
        {"id": "null", "kind": "gaussian", "d": 16, "mean_norm": 0.0, "expect": "accept"},
        {"id": "shifted", "kind": "gaussian", "d": 16, "mean_norm": 1.0, "expect": "reject"},
        {"id": "spike", "kind": "spiked_gaussian", "d": 16, "weight": 0.1},
    ],
}

DEFAULT_PARAMS = {
    "coin": {"p0": 0.5, "q0": 0.7, "rho": 0.2, "delta": 0.05},
    "uniformity": {"n": 50, "eps": 0.5, "rho": 0.25, "delta": 0.05},
    "closeness": {"n": 30, "eps": 0.6, "rho": 0.25},
    "gaussian": {"d": 16, "alpha": 1.0, "rho": 0.2, "m": 2000},
    "select": {"rho": 0.2, "eps": 0.2},
}
