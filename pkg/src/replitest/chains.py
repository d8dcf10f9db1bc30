"""Chains of distributions linking a null instance to a far one.

Each chain ``p_0, ..., p_t`` starts inside the property and ends eps-far
from it, with small steps between neighbours. The harness uses chains as
adversarial inputs (midpoints have no correct answer) and to certify how
indistinguishable consecutive members are.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .distributions import DiscreteDistribution, DistributionPair, bernoulli, l1_distance
from .errors import ParameterError

KINDS = ("coin", "uniformity", "closeness")


@dataclass(frozen=True)
class ChainFamily:
    """Ordered members ``p_0..p_t``. For ``kind="closeness"`` every member is a DistributionPair."""

    kind: str
    eps: float
    members: tuple
    params: dict = field(default_factory=dict)
    label_0: str = "in-property"
    label_t: str = "eps-far"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown chain kind {self.kind!r}")
        if len(self.members) < 2:
            raise ParameterError("a chain needs at least two members")

    @property
    def t(self) -> int:
        return len(self.members) - 1

    def __getitem__(self, i):
        return self.members[i]

    def __len__(self):
        return len(self.members)

    def far_distance(self, i) -> float:
        """L1 distance of member ``i`` from the property (exact)."""
        x = self.members[i]
        if self.kind == "coin":
            base = self.params.get("p0", 0.5)
            return l1_distance(x, bernoulli(base))
        if self.kind == "uniformity":
            return l1_distance(x, DiscreteDistribution.uniform(x.n))
        return l1_distance(x.p, x.q)

    def verify(self, tol=1e-9) -> bool:
        """Endpoint membership: ``p_0`` in the property and ``p_t`` eps-far (L1)."""
        start_ok = self.far_distance(0) <= tol
        threshold = 2 * self.eps if self.kind == "coin" else self.eps
        end_ok = self.far_distance(self.t) >= threshold * (1 - tol) - tol
        return bool(start_ok and end_ok)

    def to_json(self) -> str:
        if self.kind == "closeness":
            body = [[m.p.pmf.tolist(), m.q.pmf.tolist()] for m in self.members]
        else:
            body = [m.pmf.tolist() for m in self.members]
        return json.dumps(
            {
                "kind": self.kind,
                "eps": self.eps,
                "t": self.t,
                "params": self.params,
                "label_0": self.label_0,
                "label_t": self.label_t,
                "pmfs": body,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text) -> "ChainFamily":
        data = json.loads(text)
        if data["kind"] == "closeness":
            members = tuple(
                DistributionPair(DiscreteDistribution(p, normalize=True), DiscreteDistribution(q, normalize=True))
                for p, q in data["pmfs"]
            )
        else:
            members = tuple(DiscreteDistribution(p, normalize=True) for p in data["pmfs"])
        return cls(
            kind=data["kind"],
            eps=float(data["eps"]),
            members=members,
            params=data.get("params", {}),
            label_0=data.get("label_0", "in-property"),
            label_t=data.get("label_t", "eps-far"),
        )


def _check_t(t):
    if int(t) != t or t < 1:
        raise ParameterError("chain length t must be a positive integer")
    return int(t)


def coin_chain(eps, t) -> ChainFamily:
    """Coins with heads probability ``1/2 + i*eps/t`` for ``i = 0..t``."""
    t = _check_t(t)
    if not 0 < eps <= 0.25:
        raise ParameterError("coin chain needs 0 < eps <= 1/4")
    members = tuple(bernoulli(0.5 + i * eps / t) for i in range(t + 1))
    return ChainFamily("coin", float(eps), members, {"t": t, "p0": 0.5})


def uniformity_chain(n, eps, t) -> ChainFamily:
    """Even labels get ``(1 + i*eps/t)/n`` and odd labels ``(1 - i*eps/t)/n``."""
    t = _check_t(t)
    if int(n) != n or n < 2 or n % 2:
        raise ParameterError("uniformity chain needs an even domain size n >= 2")
    if not 0 < eps <= 0.5:
        raise ParameterError("uniformity chain needs 0 < eps <= 1/2")
    n = int(n)
    sign = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    members = tuple(DiscreteDistribution((1.0 + sign * (i * eps / t)) / n) for i in range(t + 1))
    return ChainFamily("uniformity", float(eps), members, {"n": n, "t": t})


def closeness_chain(n, eps, t, a=None, b=None, rho=None) -> ChainFamily:
    """Pairs ``(p, q_i)`` sharing a heavy set A and moving light mass between blocks.

    ``p`` puts mass ``b`` on each element of A and ``eps*a`` on each element
    of ``B = B_1 u ... u B_t``. ``q_i`` keeps A and moves the light mass to
    ``B_{i+1} u ... u B_t u D_1 u ... u D_i``, so ``q_0 = p`` and
    ``TV(p, q_i) = (i/t) * eps * a * |B|``.

    Rounding: each block has ``floor(1/(a t))`` elements. The default ``a = 4/n``
    gives ``a|B|`` close to 1, so ``p_t`` is about ``2 eps`` apart in L1. If neither
    ``b`` nor ``rho`` is given, A fills the rest of the domain. Given ``rho``,
    ``b = eps^(4/3) rho^(2/3) / n^(2/3)``. A then holds ``floor((1 - light)/b)``
    elements and unused labels get mass 0. Leftover mass is spread uniformly
    over A.
    """
    t = _check_t(t)
    if int(n) != n or n < 2:
        raise ParameterError("closeness chain needs n >= 2")
    if not 0 < eps <= 1:
        raise ParameterError("closeness chain needs 0 < eps <= 1")
    n = int(n)
    a = 4.0 / n if a is None else float(a)
    if a <= 0:
        raise ParameterError("a must be positive")
    block = int(np.floor(1.0 / (a * t) + 1e-12))
    if block < 1:
        raise ParameterError("domain too small: block size rounds to zero")
    size_b = block * t
    light = eps * a * size_b
    if light >= 1:
        raise ParameterError("light mass eps*a*|B| must be below 1")
    room = n - 2 * size_b
    if room < 1:
        raise ParameterError("domain too small for sets A, B and D")
    if rho is not None and b is None:
        b = eps ** (4 / 3) * rho ** (2 / 3) / n ** (2 / 3)
    if b is None:
        size_a = room
    else:
        if b <= 0:
            raise ParameterError("b must be positive")
        size_a = min(room, int(np.floor((1.0 - light) / b)))
        if size_a < 1:
            raise ParameterError("b too large for the remaining mass")
    heavy = (1.0 - light) / size_a

    a_idx = np.arange(size_a)
    b_start = size_a
    d_start = size_a + size_b

    def pmf_for(i):
        v = np.zeros(n)
        v[a_idx] = heavy
        v[b_start + i * block : b_start + size_b] = eps * a
        v[d_start : d_start + i * block] = eps * a
        return v

    p = DiscreteDistribution(pmf_for(0), normalize=True)
    members = tuple(DistributionPair(p, DiscreteDistribution(pmf_for(i), normalize=True)) for i in range(t + 1))
    params = {"n": n, "t": t, "a": a, "b": heavy, "block": block, "size_a": size_a}
    return ChainFamily("closeness", float(eps), members, params)
