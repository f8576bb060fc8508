"""The one-round perfectly secure protocol for certified full-support instances.

Alice and Bob agree on a reference input ``y1``.  Alice sends class index
``i`` with probability ``sum_{z in Z_i^(y1)} p(z|x,y1)``; Bob, holding ``y``,
picks the first ``x'`` with ``alpha_i^(y)(x') > 0`` and outputs ``z`` with
probability ``p(z|x',y) / sum_{z' in Z_i^(y)} p(z'|x',y)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import charact
from .instance import Instance
from .probcore import (
    Alphabet,
    JointDistribution,
    cond_mutual_info,
    draw_rows,
    empirical_from_codes,
    plugin_cmi,
    sample_indices,
    seed_stream,
    tv_distance,
)


@dataclass(frozen=True)
class ProtocolSpec:
    instance: Instance
    rounds: int = 1
    seed: int = 0
    agreed_y1: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not 0 <= self.agreed_y1 < self.instance.y.size:
            raise ValueError(f"agreed_y1={self.agreed_y1} is not an index of Y")


@dataclass(frozen=True)
class Rules:
    """Alice's table p(u|x) (|X| x k) and Bob's table p(z|u,y) (k x |Y| x |Z|)."""

    cert: charact.SecurityCertificate
    alice: np.ndarray
    bob: np.ndarray
    class_of: np.ndarray  # (|Y|, |Z|) -> class index, -1 outside Z^(y)


@dataclass
class Transcript:
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    z: np.ndarray

    def __len__(self) -> int:
        return len(self.x)

    def counts(self, shape) -> np.ndarray:
        flat = np.ravel_multi_index((self.x, self.y, self.u, self.z), shape)
        return np.bincount(flat, minlength=int(np.prod(shape))).reshape(shape)

    def write(self, path, inst: Instance):
        """One record per line: ``x y u z`` with symbol labels; u is the class index."""
        with Path(path).open("w") as fh:
            for x, y, u, z in zip(self.x, self.y, self.u, self.z):
                fh.write(f"{inst.x.symbols[x]} {inst.y.symbols[y]} {u} {inst.z.symbols[z]}\n")


@dataclass
class SimulationReport:
    blocklength: int
    rounds: int
    seed: int
    empirical_tv: float
    leakage_estimate: float
    decode_error_rate: float = 0.0
    rates: dict = field(default_factory=dict)
    agreed_y1: str | None = None
    sample_size: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def protocol_rules(inst: Instance, agreed_y1: int = 0) -> Rules:
    cert = charact.check_computable(inst)
    if not cert.computable:
        raise charact.ContractViolation(
            f"instance is not securely computable: {cert.refutation.detail}"
        )
    nx, ny, nz = inst.shape
    k = cert.k
    alice = np.zeros((nx, k))
    for c in cert.matched_classes[agreed_y1]:
        alice[:, c.index] = inst.p_z_given_xy[:, agreed_y1, list(c.members)].sum(axis=1)
    bob = np.zeros((k, ny, nz))
    class_of = np.full((ny, nz), -1, dtype=int)
    for y, row in enumerate(cert.matched_classes):
        for c in row:
            xp = int(np.flatnonzero(c.alpha > 0)[0])
            m = list(c.members)
            bob[c.index, y, m] = inst.p_z_given_xy[xp, y, m] / inst.p_z_given_xy[xp, y, m].sum()
            class_of[y, m] = c.index
    return Rules(cert, alice, bob, class_of)


def _axes(inst: Instance, k: int):
    return (inst.x, inst.y, Alphabet.range("U", k), inst.z)


def induced_distribution(spec: ProtocolSpec) -> JointDistribution:
    """Exact joint of (X, Y, U, Z) produced by the protocol."""
    inst = spec.instance
    r = protocol_rules(inst, spec.agreed_y1)
    mass = inst.p_xy[:, :, None, None] * r.alice[:, None, :, None] * r.bob.transpose(1, 0, 2)[None]
    return JointDistribution(_axes(inst, r.cert.k), mass)


def analytic_leakage(spec: ProtocolSpec) -> float:
    """I(U; X | Y, Z) on the exact induced joint, in bits."""
    return cond_mutual_info(induced_distribution(spec), "U", "X", ("Y", "Z"))


def run_protocol(spec: ProtocolSpec) -> tuple[Transcript, SimulationReport]:
    """Simulate ``spec.rounds`` i.i.d. protocol executions."""
    inst = spec.instance
    r = protocol_rules(inst, spec.agreed_y1)
    nx, ny, nz = inst.shape
    n = spec.rounds
    # one sub-stream per protocol role
    xy = sample_indices(inst.p_xy, seed_stream(spec.seed, 0), n)
    x, y = np.unravel_index(xy, (nx, ny))
    alice_cdf = np.cumsum(r.alice, axis=1)
    u = draw_rows(alice_cdf[x], seed_stream(spec.seed, 1).random(n))
    bob_cdf = np.cumsum(r.bob, axis=2)
    z = draw_rows(bob_cdf[u, y], seed_stream(spec.seed, 2).random(n))
    transcript = Transcript(np.asarray(x), np.asarray(y), u, z)
    if np.any(r.class_of[y, z] != u):
        raise AssertionError("protocol emitted an output outside the announced class")
    emp = empirical_from_codes((x, y, z), (inst.x, inst.y, inst.z))
    report = SimulationReport(
        blocklength=1,
        rounds=n,
        seed=spec.seed,
        empirical_tv=tv_distance(emp, inst.joint_xyz()),
        leakage_estimate=plugin_cmi(u, x, y * nz + z),
        rates={"message_bits": float(np.log2(r.cert.k))},
        agreed_y1=inst.y.symbols[spec.agreed_y1],
        sample_size=n,
    )
    return transcript, report
