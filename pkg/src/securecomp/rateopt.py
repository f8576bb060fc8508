"""Numerical minimization of the single-letter rate expressions.

Both rates are minima over an auxiliary ``U`` generated as
``p_XY(x,y) p_U|X(u|x) p_Z|UY(z|u,y)``; searching over the encoder/decoder
pair makes ``U - X - Y`` and ``Z - (U,Y) - X`` hold by construction.

* no-privacy:   minimize I(X,Z; U | Y)
* with-privacy: minimize I(Z; U | Y) subject to I(U; X | Y,Z) = 0

Correctness (the induced ``p_XYZ`` equals the target) and privacy are
handled as penalties whose weight doubles every 50 iterations.  Each restart
alternates between encoder and decoder blocks, taking a central-difference
gradient step with a batched line search, and finishes by projecting the
decoder onto the exact correctness set with a small linear program.

Results are upper bounds on the true minimum unless the full-support
characterization certifies the value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import charact
from .instance import AuxPair, Instance
from .probcore import cond_mutual_info, seed_stream, tv_distance

NO_PRIVACY = "no-privacy"
WITH_PRIVACY = "with-privacy"
FEAS_TOL = 1e-6
ENUM_BUDGET = 10**6
GRAD_STEP = 1e-6
DOUBLING_PERIOD = 50
_LOG_FLOOR = 1e-14
_STEPS = 2.0 ** np.arange(6, -21, -1)


class BudgetError(ValueError):
    """The requested enumeration exceeds its budget."""


@dataclass(frozen=True)
class AuxSpec:
    mode: str = NO_PRIVACY
    u_card: int | None = None
    restarts: int = 3
    seed: int = 0
    penalty_weight: float = 10.0
    max_iters: int = 300
    convergence_tol: float = 1e-10

    def __post_init__(self):
        if self.mode not in (NO_PRIVACY, WITH_PRIVACY):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.u_card is not None and self.u_card < 1:
            raise ValueError("u_card must be >= 1")
        if self.restarts < 0 or self.max_iters < 0:
            raise ValueError("restarts and max_iters must be nonnegative")
        if self.convergence_tol <= 0 or self.penalty_weight <= 0:
            raise ValueError("convergence_tol and penalty_weight must be positive")

    def resolved_u_card(self, inst: Instance) -> int:
        nx, ny, nz = inst.shape
        return self.u_card if self.u_card is not None else nx * ny * nz + 2


@dataclass
class RateResult:
    mode: str
    status: str  # "feasible" | "infeasible" | "refuted"
    rate_bits: float | None
    exact: bool
    best_aux: AuxPair | None
    constraint_residuals: dict = field(default_factory=dict)
    correctness_residual: float | None = None
    restart_trace: list = field(default_factory=list)
    u_card: int | None = None

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    @property
    def label(self) -> str:
        if self.status == "refuted":
            return "infinite"
        if self.status == "infeasible":
            return "infeasible-at-budget"
        return "exact" if self.exact else "upper-bound"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "status": self.status,
            "label": self.label,
            "rate_bits": ("inf" if self.rate_bits == math.inf else self.rate_bits),
            "exact": self.exact,
            "u_card": self.u_card,
            "correctness_residual": self.correctness_residual,
            "constraint_residuals": self.constraint_residuals,
            "restart_trace": self.restart_trace,
            "best_aux": self.best_aux.to_dict() if self.best_aux is not None else None,
        }


# -- exact evaluation -------------------------------------------------------

def evaluate(inst: Instance, pair: AuxPair, mode: str) -> dict:
    """Objective and every residual, recomputed from scratch on the induced joint."""
    j = pair.joint(inst)
    obj = (
        cond_mutual_info(j, ("X", "Z"), "U", "Y")
        if mode == NO_PRIVACY
        else cond_mutual_info(j, "Z", "U", "Y")
    )
    return {
        "objective": obj,
        "correctness": tv_distance(j.marginal(("X", "Y", "Z")), inst.joint_xyz()),
        "residuals": {
            "U-X-Y": cond_mutual_info(j, "U", "Y", "X"),
            "Z-(U,Y)-X": cond_mutual_info(j, "Z", "X", ("U", "Y")),
            "U-(Y,Z)-X": cond_mutual_info(j, "U", "X", ("Y", "Z")),
        },
    }


def _is_feasible(ev: dict, mode: str) -> bool:
    if ev["correctness"] > FEAS_TOL:
        return False
    return mode == NO_PRIVACY or ev["residuals"]["U-(Y,Z)-X"] <= FEAS_TOL


def _result(inst, pair, mode, status, exact, trace, u_card) -> RateResult:
    ev = evaluate(inst, pair, mode)
    return RateResult(
        mode=mode,
        status=status,
        rate_bits=ev["objective"] if status == "feasible" else None,
        exact=exact,
        best_aux=pair,
        constraint_residuals=ev["residuals"],
        correctness_residual=ev["correctness"],
        restart_trace=trace,
        u_card=u_card,
    )


# -- deterministic baseline -------------------------------------------------

def _set_partitions(n: int, max_blocks: int):
    """Restricted growth strings: every map [n] -> [max_blocks] up to relabeling."""
    def rec(prefix, used):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for b in range(min(used + 1, max_blocks)):
            yield from rec(prefix + [b], max(used, b + 1))
    yield from rec([], 0)


def _decoder_for_map(inst: Instance, labels: tuple[int, ...], u_card: int) -> np.ndarray | None:
    """Decoder forced by correctness for a deterministic encoder, or None if infeasible."""
    nx, ny, nz = inst.shape
    dec = np.full((u_card, ny, nz), 1.0 / nz)
    for u in set(labels):
        block = [x for x in range(nx) if labels[x] == u]
        for y in range(ny):
            live = [x for x in block if inst.p_xy[x, y] > 0] or block[:1]
            row = inst.p_z_given_xy[live[0], y]
            for x in live[1:]:
                if np.any(np.abs(inst.p_z_given_xy[x, y] - row) > 1e-12):
                    return None
            dec[u, y] = row
    return dec


def enumerate_deterministic_u(inst: Instance, u_card: int, mode: str = NO_PRIVACY) -> RateResult:
    """Best feasible deterministic encoder X -> [u_card].

    Maps are enumerated up to relabeling of U, which changes neither the
    objective nor feasibility.
    """
    nx = inst.x.size
    if u_card ** nx > ENUM_BUDGET:
        raise BudgetError(f"u_card^|X| = {u_card}^{nx} exceeds {ENUM_BUDGET}")
    best = None
    trace = []
    for labels in _set_partitions(nx, u_card):
        dec = _decoder_for_map(inst, labels, u_card)
        if dec is None:
            continue
        enc = np.zeros((nx, u_card))
        enc[np.arange(nx), labels] = 1.0
        pair = AuxPair(enc, dec)
        ev = evaluate(inst, pair, mode)
        if not _is_feasible(ev, mode):
            continue
        trace.append({"map": list(labels), "value": ev["objective"]})
        if best is None or ev["objective"] < best[0] - 1e-12:
            best = (ev["objective"], pair)
    if best is None:
        return RateResult(mode, "infeasible", None, False, None, restart_trace=trace, u_card=u_card)
    return _result(inst, best[1], mode, "feasible", False, trace, u_card)


# -- batched penalized objective -------------------------------------------

def _softmax(theta: np.ndarray) -> np.ndarray:
    e = np.exp(theta - theta.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _hb(p: np.ndarray) -> np.ndarray:
    """Entropy in bits of each table along the leading batch axis."""
    flat = p.reshape(p.shape[0], -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(flat > 0, flat * np.log2(np.where(flat > 0, flat, 1.0)), 0.0)
    return -t.sum(axis=1)


class _Problem:
    def __init__(self, inst: Instance, mode: str, u_card: int):
        self.pxy = inst.p_xy
        self.target = inst.joint_xyz().mass
        self.mode = mode
        self.nx, self.ny, self.nz = inst.shape
        self.nu = u_card
        self.h_y = float(_hb(inst.p_xy.sum(axis=0)[None])[0])

    def terms(self, th_enc: np.ndarray, th_dec: np.ndarray):
        """Objective, correctness TV and privacy CMI for a batch of logits."""
        enc = _softmax(th_enc)  # (B, X, U)
        dec = _softmax(th_dec)  # (B, U, Y, Z)
        # axes (B, X, Y, U, Z)
        j = self.pxy[None, :, :, None, None] * enc[:, :, None, :, None] * dec.transpose(0, 2, 1, 3)[:, None]
        p_xyz = j.sum(axis=3)
        p_yuz = j.sum(axis=1)
        p_yu = p_yuz.sum(axis=3)
        h_xyz, h_all, h_yu = _hb(p_xyz), _hb(j), _hb(p_yu)
        h_yz = _hb(p_xyz.sum(axis=1))
        h_yuz = _hb(p_yuz)
        if self.mode == NO_PRIVACY:
            obj = h_xyz + h_yu - h_all - self.h_y
            priv = np.zeros_like(obj)
        else:
            obj = h_yz + h_yu - h_yuz - self.h_y
            priv = np.maximum(h_yuz + h_xyz - h_all - h_yz, 0.0)
        tv = 0.5 * np.abs(p_xyz - self.target[None]).reshape(len(obj), -1).sum(axis=1)
        return obj, tv, priv

    def penalized(self, th_enc, th_dec, weight):
        obj, tv, priv = self.terms(th_enc, th_dec)
        return obj + weight * tv**2 + weight * priv


def _block_step(prob: _Problem, th_enc, th_dec, weight, which: str):
    """One central-difference gradient step on one block with a batched line search."""
    block = th_enc if which == "enc" else th_dec
    d = block.size
    eye = np.eye(d).reshape((d,) + block.shape) * GRAD_STEP
    pert = np.concatenate([block[None] + eye, block[None] - eye])
    if which == "enc":
        vals = prob.penalized(pert, np.broadcast_to(th_dec, (2 * d,) + th_dec.shape), weight)
    else:
        vals = prob.penalized(np.broadcast_to(th_enc, (2 * d,) + th_enc.shape), pert, weight)
    grad = ((vals[:d] - vals[d:]) / (2 * GRAD_STEP)).reshape(block.shape)
    cands = block[None] - _STEPS.reshape((-1,) + (1,) * block.ndim) * grad[None]
    cands = np.concatenate([block[None], cands])
    n = len(cands)
    if which == "enc":
        vals = prob.penalized(cands, np.broadcast_to(th_dec, (n,) + th_dec.shape), weight)
    else:
        vals = prob.penalized(np.broadcast_to(th_enc, (n,) + th_enc.shape), cands, weight)
    return cands[int(np.argmin(vals))]


def _project_decoder(inst: Instance, enc: np.ndarray, dec: np.ndarray) -> np.ndarray | None:
    """Closest decoder (in L1) that makes the induced p_XYZ exact, for a fixed encoder."""
    nx, ny, nz = inst.shape
    nu = enc.shape[1]
    out = np.empty_like(dec)
    nq = nu * nz
    for y in range(ny):
        live = [x for x in range(nx) if inst.p_xy[x, y] > 0]
        a_eq, b_eq = [], []
        for u in range(nu):
            row = np.zeros(2 * nq)
            row[u * nz:(u + 1) * nz] = 1.0
            a_eq.append(row)
            b_eq.append(1.0)
        for x in live:
            for z in range(nz):
                row = np.zeros(2 * nq)
                row[np.arange(nu) * nz + z] = enc[x]
                a_eq.append(row)
                b_eq.append(inst.p_z_given_xy[x, y, z])
        d = dec[:, y, :].ravel()
        eye = np.eye(nq)
        a_ub = np.block([[eye, -eye], [-eye, -eye]])
        b_ub = np.concatenate([d, -d])
        c = np.concatenate([np.zeros(nq), np.ones(nq)])
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=np.array(a_eq), b_eq=np.array(b_eq),
                      bounds=[(0, None)] * (2 * nq), method="highs")
        if res.status != 0:
            return None
        q = np.clip(res.x[:nq].reshape(nu, nz), 0.0, None)
        out[:, y, :] = q / q.sum(axis=1, keepdims=True)
    return out


def _to_logits(p: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(p, _LOG_FLOOR))


def _embed(pair: AuxPair, u_card: int) -> AuxPair | None:
    k = pair.u_card
    if k > u_card:
        return None
    if k == u_card:
        return pair
    nx = pair.p_u_given_x.shape[0]
    _, ny, nz = pair.p_z_given_uy.shape
    enc = np.zeros((nx, u_card))
    enc[:, :k] = pair.p_u_given_x
    dec = np.full((u_card, ny, nz), 1.0 / nz)
    dec[:k] = pair.p_z_given_uy
    return AuxPair(enc, dec)


def _run_restart(inst, prob: _Problem, spec: AuxSpec, th_enc, th_dec):
    """Returns (best feasible (value, pair) or None, best penalized pair)."""
    mode = spec.mode
    best = None

    def consider(pair: AuxPair):
        nonlocal best
        ev = evaluate(inst, pair, mode)
        if _is_feasible(ev, mode) and (best is None or ev["objective"] < best[0]):
            best = (ev["objective"], pair)

    consider(AuxPair(_softmax(th_enc), _softmax(th_dec)))
    prev = math.inf
    for it in range(spec.max_iters):
        weight = spec.penalty_weight * 2.0 ** (it // DOUBLING_PERIOD)
        th_enc = _block_step(prob, th_enc, th_dec, weight, "enc")
        th_dec = _block_step(prob, th_enc, th_dec, weight, "dec")
        obj, tv, priv = prob.terms(th_enc[None], th_dec[None])
        feasible = tv[0] <= FEAS_TOL and priv[0] <= FEAS_TOL
        if feasible:
            consider(AuxPair(_softmax(th_enc), _softmax(th_dec)))
        cur = float(obj[0] + weight * tv[0] ** 2 + weight * priv[0])
        if feasible and abs(prev - cur) < spec.convergence_tol:
            break
        prev = cur
    enc = _softmax(th_enc)
    proj = _project_decoder(inst, enc, _softmax(th_dec))
    if proj is not None:
        consider(AuxPair(enc, proj))
    return best, AuxPair(enc, _softmax(th_dec))


def _search(inst: Instance, spec: AuxSpec, warm: list[tuple[str, AuxPair]]) -> RateResult:
    u_card = spec.resolved_u_card(inst)
    prob = _Problem(inst, spec.mode, u_card)
    nx, ny, nz = inst.shape
    starts = []
    for kind, pair in warm:
        emb = _embed(pair, u_card)
        if emb is not None:
            starts.append((kind, _to_logits(emb.p_u_given_x), _to_logits(emb.p_z_given_uy), emb))
    for r in range(spec.restarts):
        rng = seed_stream(spec.seed, r)
        starts.append(("random", rng.normal(0, 2, (nx, u_card)), rng.normal(0, 2, (u_card, ny, nz)), None))
    trace = []
    best = None  # (value, restart index, pair)
    fallback = None
    for idx, (kind, te, td, exact_start) in enumerate(starts):
        found, last = _run_restart(inst, prob, spec, te, td)
        if exact_start is not None:
            # the logit floor perturbs a warm start slightly; keep the exact point too
            ev = evaluate(inst, exact_start, spec.mode)
            if _is_feasible(ev, spec.mode) and (found is None or ev["objective"] <= found[0]):
                found = (ev["objective"], exact_start)
        trace.append({"restart": idx, "start": kind,
                      "value": None if found is None else found[0], "feasible": found is not None})
        if fallback is None:
            fallback = last
        if found is not None and (best is None or (found[0], idx) < (best[0], best[1])):
            best = (found[0], idx, found[1])
    if best is None:
        res = _result(inst, fallback, spec.mode, "infeasible", False, trace, u_card) if fallback else \
            RateResult(spec.mode, "infeasible", None, False, None, restart_trace=trace, u_card=u_card)
        return res
    return _result(inst, best[2], spec.mode, "feasible", False, trace, u_card)


def _warm_starts(inst: Instance, spec: AuxSpec) -> list[tuple[str, AuxPair]]:
    warm = []
    u_card = spec.resolved_u_card(inst)
    try:
        det = enumerate_deterministic_u(inst, min(u_card, inst.x.size), spec.mode)
        if det.feasible:
            warm.append(("deterministic", det.best_aux))
    except BudgetError:
        pass
    if inst.full_support:
        try:
            cert = charact.check_computable(inst)
        except charact.DegenerateInstanceError:
            cert = None
        if cert is not None and cert.computable:
            warm.append(("w-channel", charact.build_w(inst, cert).as_pair()))
    return warm


def minimize_rns(inst: Instance, spec: AuxSpec | None = None, warm=()) -> RateResult:
    """Upper bound on min I(X,Z;U|Y) over encoder/decoder pairs computing the target.

    ``warm`` holds extra starting pairs; any pair with at most ``u_card``
    symbols is embedded and its value can only be improved on, which is how a
    result at a smaller cardinality carries over to a larger one.
    """
    spec = spec or AuxSpec()
    if spec.mode != NO_PRIVACY:
        raise ValueError("minimize_rns needs mode='no-privacy'")
    return _search(inst, spec, _warm_starts(inst, spec) + [("supplied", p) for p in warm])


def minimize_rs(inst: Instance, spec: AuxSpec | None = None, warm=()) -> RateResult:
    """min I(Z;U|Y) under the privacy chain U - (Y,Z) - X.

    On full-support inputs the characterization short-circuits refuted
    instances to an infinite rate and certifies the value H(W|Y).
    """
    spec = spec or AuxSpec(mode=WITH_PRIVACY)
    if spec.mode != WITH_PRIVACY:
        raise ValueError("minimize_rs needs mode='with-privacy'")
    u_card = spec.resolved_u_card(inst)
    oracle = None
    if inst.full_support:
        cert = charact.check_computable(inst)
        if not cert.computable:
            return RateResult(spec.mode, "refuted", math.inf, True, None, u_card=u_card)
        w = charact.build_w(inst, cert).as_pair()
        oracle = (charact.optimal_rate_full_support(inst), w)
    res = _search(inst, spec, _warm_starts(inst, spec) + [("supplied", p) for p in warm])
    if oracle is None:
        return res
    value, w = oracle
    if res.feasible and res.rate_bits < value - FEAS_TOL:
        return res
    out = _result(inst, w, spec.mode, "feasible", True, res.restart_trace, u_card)
    return out
