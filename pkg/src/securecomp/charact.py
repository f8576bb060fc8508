"""Perfect-security computability for full-support inputs.

For each Bob input ``y`` the outputs that can occur are grouped into classes
of mutually proportional channel columns ``(p(z|x,y))_x``.  Each class is a
rank-one block ``alpha (x) gamma``.  The instance is securely computable iff
every ``y`` produces the same set of alpha-vectors and, after matching classes
by alpha, the per-class output mass ``sum_{z in class} p(z|x,y)`` does not
depend on ``y``.  The class index ``W`` then yields the optimal one-shot
message with rate ``H(W|Y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .instance import AuxPair, Instance
from .probcore import Alphabet, Channel, JointDistribution, compose, entropy

PROP_TOL = 1e-9
MATCH_TOL = 1e-9


class PreconditionError(ValueError):
    """The input distribution does not have full support."""


class DegenerateInstanceError(ValueError):
    """Two classes of the same ``y`` have alpha-vectors equal within tolerance."""


class ContractViolation(ValueError):
    """An operation was called with an input its contract excludes."""


@dataclass(frozen=True)
class SupportSet:
    y: int
    members: tuple[int, ...]


@dataclass(frozen=True)
class EquivalenceClass:
    y: int
    index: int
    members: tuple[int, ...]
    alpha: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    class_sum: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class Refutation:
    kind: str  # "class_count" | "alpha_mismatch" | "class_sum_mismatch"
    y: int
    y_other: int
    k_y: int
    k_other: int
    class_index: int | None = None
    x: int | None = None
    detail: str = ""


@dataclass(frozen=True)
class SecurityCertificate:
    computable: bool
    k: int | None = None
    matched_classes: tuple[tuple[EquivalenceClass, ...], ...] | None = None
    refutation: Refutation | None = None

    def to_dict(self, inst: Instance | None = None) -> dict:
        zs = inst.z.symbols if inst else None
        ys = inst.y.symbols if inst else None
        if not self.computable:
            r = self.refutation
            out = {"computable": False, "refutation": {
                "kind": r.kind,
                "y": ys[r.y] if ys else r.y,
                "y_other": ys[r.y_other] if ys else r.y_other,
                "k_y": r.k_y,
                "k_other": r.k_other,
                "class_index": r.class_index,
                "x": (inst.x.symbols[r.x] if inst and r.x is not None else r.x),
                "detail": r.detail,
            }}
            return out
        classes = []
        for y, row in enumerate(self.matched_classes):
            for c in row:
                classes.append({
                    "y": ys[y] if ys else y,
                    "index": c.index,
                    "members": [zs[z] for z in c.members] if zs else list(c.members),
                    "alpha": c.alpha.tolist(),
                    "gamma": c.gamma.tolist(),
                    "class_sum": c.class_sum.tolist(),
                })
        return {"computable": True, "k": self.k, "classes": classes}


def _require_full_support(inst: Instance):
    zeros = inst.zero_cells()
    if zeros:
        x, y = zeros[0]
        raise PreconditionError(f"p_XY has no full support: p_XY(x={x!r}, y={y!r}) = 0")


def _y_index(inst: Instance, y) -> int:
    if isinstance(y, str):
        return inst.y.index(y)
    if not 0 <= int(y) < inst.y.size:
        raise IndexError(f"y index {y} out of range")
    return int(y)


def support_sets(inst: Instance) -> list[SupportSet]:
    _require_full_support(inst)
    out = []
    for y in range(inst.y.size):
        cols = inst.p_z_given_xy[:, y, :]
        out.append(SupportSet(y, tuple(int(z) for z in np.flatnonzero(cols.max(axis=0) > 0))))
    return out


def proportional(u: np.ndarray, v: np.ndarray, tol: float = PROP_TOL) -> bool:
    """Cross-ratio test ``|u(x)v(x') - u(x')v(x)| <= tol * max(u) * max(v)``."""
    cross = np.outer(u, v)
    return bool(np.all(np.abs(cross - cross.T) <= tol * u.max() * v.max()))


def _factor(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rank-one factors of the |X| x |class| block ``a``."""
    s = a.sum(axis=1)
    alpha = s / s.sum()
    x0 = int(np.flatnonzero(alpha > 0)[0])
    gamma = a[x0] / alpha[x0]
    return alpha, gamma, s


def partition_classes(inst: Instance, y) -> list[EquivalenceClass]:
    """Classes of proportional columns of ``p(.|., y)`` restricted to Z^(y)."""
    _require_full_support(inst)
    yi = _y_index(inst, y)
    cols = inst.p_z_given_xy[:, yi, :]
    groups: list[list[int]] = []
    for z in np.flatnonzero(cols.max(axis=0) > 0):
        for g in groups:
            if proportional(cols[:, g[0]], cols[:, z]):
                g.append(int(z))
                break
        else:
            groups.append([int(z)])
    out = []
    for i, g in enumerate(groups):
        alpha, gamma, s = _factor(cols[:, g])
        out.append(EquivalenceClass(yi, i, tuple(g), alpha, gamma, s))
    return out


def _alpha_close(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.all(np.abs(a - b) <= MATCH_TOL))


def _check_distinct(classes: list[EquivalenceClass], inst: Instance):
    for i, c in enumerate(classes):
        for d in classes[i + 1:]:
            if _alpha_close(c.alpha, d.alpha):
                raise DegenerateInstanceError(
                    f"y={inst.y.symbols[c.y]!r}: classes {c.index} and {d.index} have alpha-vectors "
                    f"within {MATCH_TOL} of each other"
                )


def check_computable(inst: Instance) -> SecurityCertificate:
    """Decide perfect-security computability; return classes matched across y or a refutation."""
    _require_full_support(inst)
    per_y = [partition_classes(inst, y) for y in range(inst.y.size)]
    for classes in per_y:
        _check_distinct(classes, inst)
    ref = per_y[0]
    k = len(ref)
    matched = [tuple(ref)]
    for y in range(1, inst.y.size):
        cur = per_y[y]
        if len(cur) != k:
            return SecurityCertificate(False, refutation=Refutation(
                "class_count", 0, y, k, len(cur),
                detail=f"k({inst.y.symbols[0]})={k} != k({inst.y.symbols[y]})={len(cur)}"))
        ok = np.array([[_alpha_close(a.alpha, b.alpha) for b in cur] for a in ref])
        rows, cols = linear_sum_assignment(~ok)
        unmatched = [int(r) for r, c in zip(rows, cols) if not ok[r, c]]
        if unmatched:
            i = unmatched[0]
            return SecurityCertificate(False, refutation=Refutation(
                "alpha_mismatch", 0, y, k, k, class_index=i,
                detail=f"alpha of class {i} at y={inst.y.symbols[0]!r} has no match at y={inst.y.symbols[y]!r}"))
        order = [int(c) for c in cols[np.argsort(rows)]]
        row = tuple(
            EquivalenceClass(y, i, cur[j].members, cur[j].alpha, cur[j].gamma, cur[j].class_sum)
            for i, j in enumerate(order)
        )
        for i, c in enumerate(row):
            diff = np.abs(c.class_sum - ref[i].class_sum)
            if np.any(diff > MATCH_TOL):
                x = int(np.argmax(diff > MATCH_TOL))
                return SecurityCertificate(False, refutation=Refutation(
                    "class_sum_mismatch", 0, y, k, k, class_index=i, x=x,
                    detail=f"class {i} mass at x={inst.x.symbols[x]!r}: {ref[i].class_sum[x]!r} "
                           f"(y={inst.y.symbols[0]!r}) vs {c.class_sum[x]!r} (y={inst.y.symbols[y]!r})"))
        matched.append(row)
    return SecurityCertificate(True, k=k, matched_classes=tuple(matched))


@dataclass(frozen=True)
class AuxiliaryChannel:
    """The class-index variable W with its encoder and decoder."""

    k: int
    p_w_given_x: Channel
    p_z_given_wy: Channel
    w_of_yz: np.ndarray = field(repr=False)  # class index of z at y, -1 outside Z^(y)

    def as_pair(self) -> AuxPair:
        return AuxPair(self.p_w_given_x.table, self.p_z_given_wy.table)


def build_w(inst: Instance, cert: SecurityCertificate) -> AuxiliaryChannel:
    if not cert.computable:
        raise ContractViolation("build_w requires a certificate of computability")
    nx, ny, nz = inst.shape
    k = cert.k
    w = Alphabet("W", tuple(range(k)))
    enc = np.stack([c.class_sum for c in cert.matched_classes[0]], axis=1)
    dec = np.zeros((k, ny, nz))
    w_of_yz = np.full((ny, nz), -1, dtype=int)
    for y, row in enumerate(cert.matched_classes):
        for c in row:
            xt = int(np.flatnonzero(c.class_sum > 0)[0])
            members = list(c.members)
            dec[c.index, y, members] = inst.p_z_given_xy[xt, y, members] / c.class_sum[xt]
            w_of_yz[y, members] = c.index
    enc = enc / enc.sum(axis=1, keepdims=True)
    return AuxiliaryChannel(
        k,
        Channel((inst.x,), (w,), enc),
        Channel((w, inst.y), (inst.z,), dec),
        w_of_yz,
    )


def w_joint(inst: Instance, aux: AuxiliaryChannel) -> JointDistribution:
    """Joint over (X, Y, W, Z)."""
    return compose(compose(inst.joint_xy(), aux.p_w_given_x), aux.p_z_given_wy)


def optimal_rate_full_support(inst: Instance) -> float:
    """H(W|Y) in bits, or ``math.inf`` when the instance is not securely computable."""
    cert = check_computable(inst)
    if not cert.computable:
        return math.inf
    aux = build_w(inst, cert)
    return entropy(compose(inst.joint_xy(), aux.p_w_given_x), "W", "Y")
