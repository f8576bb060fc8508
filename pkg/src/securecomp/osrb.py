"""Finite-blocklength simulation of random binning with Slepian-Wolf decoding.

Every sequence ``u^n`` receives two independent uniform bin indices ``f`` (at
rate ``rate_f``) and ``m`` (at rate ``rate_m``).  Bob recovers ``u^n`` from
``(f, m, y^n)`` by maximum likelihood within the bin, then emits ``z^n``
symbolwise through ``p_Z|UY``.  A seed fixes the binning; sweeping seeds
averages over binnings.

Alice's encoder is idealized: ``u^n`` is drawn i.i.d. through ``p_U|X`` and
``f`` is the bin of that sequence.  This is the source-coding side of the
construction, which the shared-randomness protocol approaches when
``rate_f < H(U|X,Y,Z)``.  Reports carry this note.

Sequences are indexed lexicographically with the first symbol most
significant, so index order equals lexicographic order on ``U^n``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import charact
from .instance import AuxPair, Instance
from .probcore import draw_rows, plugin_cmi, sample_indices, seed_stream

SEQ_BUDGET = 10**7
DECODE_FAILURE = -1
ENCODER_NOTE = "idealized encoder: u^n i.i.d. through p_U|X, f = bin of u^n"
TABLE_COLUMNS = (
    "n", "rate_f", "rate_m", "decode_error_rate", "empirical_tv",
    "independence_tv", "leakage_proxy", "trials", "seed",
)


class BudgetError(ValueError):
    """Sequence space or bin count too large to enumerate."""


def bin_count(n: int, rate: float) -> int:
    if rate < 0:
        raise ValueError("rates must be nonnegative")
    # round first so that e.g. 2**(4*1.0) does not become 17 through float noise
    return max(1, math.ceil(round(2.0 ** (n * rate), 9)))


@dataclass(frozen=True)
class BinningConfig:
    n: int
    rate_f: float
    rate_m: float
    seed: int = 0
    trials: int = 1000

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.rate_f < 0 or self.rate_m < 0:
            raise ValueError("rates must be nonnegative")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @property
    def nf(self) -> int:
        return bin_count(self.n, self.rate_f)

    @property
    def nm(self) -> int:
        return bin_count(self.n, self.rate_m)


@dataclass(frozen=True)
class Binning:
    n: int
    u_size: int
    nf: int
    nm: int
    f_map: np.ndarray
    m_map: np.ndarray

    def __post_init__(self):
        key = self.f_map.astype(np.int64) * self.nm + self.m_map
        order = np.argsort(key, kind="stable")
        object.__setattr__(self, "_order", order)
        object.__setattr__(self, "_sorted_keys", key[order])

    def members(self, f: int, m: int) -> np.ndarray:
        """Sequence indices in bin (f, m), in lexicographic order."""
        k = int(f) * self.nm + int(m)
        lo = np.searchsorted(self._sorted_keys, k, side="left")
        hi = np.searchsorted(self._sorted_keys, k, side="right")
        return self._order[lo:hi]

    def digits(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        powers = self.u_size ** np.arange(self.n - 1, -1, -1, dtype=np.int64)
        return (idx[..., None] // powers) % self.u_size

    def index(self, seqs) -> np.ndarray:
        seqs = np.asarray(seqs, dtype=np.int64)
        powers = self.u_size ** np.arange(self.n - 1, -1, -1, dtype=np.int64)
        return (seqs * powers).sum(axis=-1)


def generate_binning(config: BinningConfig, u_size: int) -> Binning:
    """Uniform i.i.d. bin indices for all ``u_size**n`` sequences, fixed by the seed."""
    total = u_size ** config.n
    if total > SEQ_BUDGET:
        raise BudgetError(f"|U|^n = {u_size}^{config.n} exceeds {SEQ_BUDGET}")
    nf, nm = config.nf, config.nm
    if nf * nm > 2**62:
        raise BudgetError("bin count too large")
    f_map = seed_stream(config.seed, 0).integers(0, nf, size=total)
    m_map = seed_stream(config.seed, 1).integers(0, nm, size=total)
    return Binning(config.n, u_size, nf, nm, f_map, m_map)


def _log_p_u_given_y(inst: Instance, aux: AuxPair) -> np.ndarray:
    p_uy = (inst.p_xy[:, :, None] * aux.p_u_given_x[:, None, :]).sum(axis=0).T  # (U, Y)
    p_y = inst.p_xy.sum(axis=0)
    with np.errstate(divide="ignore"):
        return np.log(p_uy / np.where(p_y > 0, p_y, 1.0))


def sw_decode(binning: Binning, f: int, m: int, y_seq, log_p_u_given_y: np.ndarray) -> int:
    """ML sequence in bin (f, m) given ``y^n``; lexicographic tie-break.

    Returns ``DECODE_FAILURE`` for an empty bin.
    """
    cands = binning.members(f, m)
    if cands.size == 0:
        return DECODE_FAILURE
    if cands.size == 1:
        return int(cands[0])
    y_seq = np.asarray(y_seq)
    ll = log_p_u_given_y[binning.digits(cands), y_seq[None, :]].sum(axis=1)
    best = ll.max()
    if not np.isfinite(best):
        return int(cands[0])
    return int(cands[np.flatnonzero(ll >= best - 1e-9)[0]])


@dataclass
class OsrbReport:
    n: int
    rate_f: float
    rate_m: float
    nominal_rate_f: float
    nominal_rate_m: float
    decode_error_rate: float
    empirical_tv: float
    independence_tv: float
    leakage_proxy: float
    trials: int
    seed: int
    note: str = ENCODER_NOTE

    def to_dict(self) -> dict:
        return asdict(self)


def run_protocol_b(inst: Instance, aux: AuxPair, config: BinningConfig) -> OsrbReport:
    """Run ``config.trials`` blocks of the binning scheme with one fixed binning."""
    nx, ny, nz = inst.shape
    nu = aux.u_card
    n, t = config.n, config.trials
    b = generate_binning(config, nu)
    logp = _log_p_u_given_y(inst, aux)

    xy = sample_indices(inst.p_xy, seed_stream(config.seed, 2), t * n)
    x, y = (a.reshape(t, n) for a in np.unravel_index(xy, (nx, ny)))
    enc_cdf = np.cumsum(aux.p_u_given_x, axis=1)
    u = draw_rows(enc_cdf[x.ravel()], seed_stream(config.seed, 3).random(t * n)).reshape(t, n)
    idx = b.index(u)
    f, m = b.f_map[idx], b.m_map[idx]

    u_hat = np.array([sw_decode(b, f[i], m[i], y[i], logp) for i in range(t)])
    errors = u_hat != idx
    u_emit = b.digits(np.where(u_hat == DECODE_FAILURE, 0, u_hat))
    dec_cdf = np.cumsum(aux.p_z_given_uy, axis=2)
    z = draw_rows(dec_cdf[u_emit.ravel(), y.ravel()], seed_stream(config.seed, 4).random(t * n)).reshape(t, n)

    target = inst.joint_xyz().mass.ravel()
    xyz = np.ravel_multi_index((x.ravel(), y.ravel(), z.ravel()), (nx, ny, nz))
    emp = np.bincount(xyz, minlength=target.size) / xyz.size
    empirical_tv = 0.5 * float(np.abs(emp - target).sum())

    # pooled (x,y,z,f) against p_XYZ x uniform(f); unobserved cells contribute their full mass
    f_pool = np.repeat(f, n)
    keys, counts = np.unique(np.stack([xyz, f_pool], axis=1), axis=0, return_counts=True)
    q = target[keys[:, 0]] / b.nf
    independence_tv = 0.5 * float(np.abs(counts / xyz.size - q).sum() + (1.0 - q.sum()))

    leakage = plugin_cmi(np.repeat(m, n), x.ravel(), y.ravel() * nz + z.ravel())
    return OsrbReport(
        n=n,
        rate_f=math.log2(b.nf) / n,
        rate_m=math.log2(b.nm) / n,
        nominal_rate_f=config.rate_f,
        nominal_rate_m=config.rate_m,
        decode_error_rate=float(errors.mean()),
        empirical_tv=empirical_tv,
        independence_tv=max(independence_tv, 0.0),
        leakage_proxy=leakage,
        trials=t,
        seed=config.seed,
    )


def rate_region_sweep(inst: Instance, aux: AuxPair, grid, n_list, trials: int, seed: int = 0) -> list[OsrbReport]:
    """One report per ((rate_f, rate_m), n) cell, all with the same seed."""
    grid = list(grid)
    n_list = list(n_list)
    if not grid or not n_list:
        raise ValueError("rate grid and n list must be nonempty")
    return [
        run_protocol_b(inst, aux, BinningConfig(n, rf, rm, seed, trials))
        for rf, rm in grid
        for n in n_list
    ]


def simulate_sw_w_scheme(inst: Instance, rate_m: float, n: int, trials: int, seed: int = 0) -> OsrbReport:
    """Bin the class sequence W^n at ``rate_m`` with no extra randomness."""
    cert = charact.check_computable(inst)
    if not cert.computable:
        raise charact.ContractViolation(f"instance is not securely computable: {cert.refutation.detail}")
    aux = charact.build_w(inst, cert).as_pair()
    return run_protocol_b(inst, aux, BinningConfig(n, 0.0, rate_m, seed, trials))


def write_table(reports, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_COLUMNS)
        for r in reports:
            d = r.to_dict()
            w.writerow([d[c] for c in TABLE_COLUMNS])
