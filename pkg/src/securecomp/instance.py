"""Problem instances ``(p_XY, p_Z|XY)``, auxiliary encoder/decoder pairs, and the instance file format.

Instance files are JSON::

    {
      "name": "and",
      "description": "...",
      "x_symbols": ["0", "1"],
      "y_symbols": ["0", "1"],
      "z_symbols": ["0", "1"],
      "p_xy": [[0.25, 0.25], [0.25, 0.25]],
      "p_z_given_xy": [[[1, 0], [1, 0]], [[1, 0], [0, 1]]]
    }

``p_xy[x][y]`` and ``p_z_given_xy[x][y][z]`` are indexed by position in the
symbol lists, and the declaration order of symbols is the canonical order
used for every tie-break and every inverse-CDF draw.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .probcore import NORM_TOL, Alphabet, Channel, JointDistribution, ValidationError, compose


class ParseError(ValueError):
    """Instance text is not well-formed."""


@dataclass(frozen=True)
class Instance:
    x: Alphabet
    y: Alphabet
    z: Alphabet
    p_xy: np.ndarray = field(repr=False)
    p_z_given_xy: np.ndarray = field(repr=False)
    name: str = ""
    description: str = ""

    def __post_init__(self):
        pxy = np.array(self.p_xy, dtype=float)
        pz = np.array(self.p_z_given_xy, dtype=float)
        if pxy.shape != (self.x.size, self.y.size):
            raise ValidationError(f"p_xy has shape {pxy.shape}, expected {(self.x.size, self.y.size)}")
        if pz.shape != (self.x.size, self.y.size, self.z.size):
            raise ValidationError(
                f"p_z_given_xy has shape {pz.shape}, expected {(self.x.size, self.y.size, self.z.size)}"
            )
        neg = np.argwhere(pxy < 0)
        if neg.size:
            raise ValidationError(f"p_xy[{neg[0][0]}][{neg[0][1]}] is negative")
        if abs(pxy.sum() - 1.0) > NORM_TOL:
            raise ValidationError(f"p_xy sums to {pxy.sum()!r}, not 1")
        neg = np.argwhere(pz < 0)
        if neg.size:
            i, j, k = neg[0]
            raise ValidationError(f"p_z_given_xy[{i}][{j}][{k}] is negative")
        rows = pz.sum(axis=2)
        bad = np.argwhere(np.abs(rows - 1.0) > NORM_TOL)
        if bad.size:
            i, j = bad[0]
            raise ValidationError(
                f"p_z_given_xy row x={self.x.symbols[i]!r}, y={self.y.symbols[j]!r} sums to {rows[i, j]!r}"
            )
        pxy.setflags(write=False)
        pz.setflags(write=False)
        object.__setattr__(self, "p_xy", pxy)
        object.__setattr__(self, "p_z_given_xy", pz)

    @classmethod
    def from_arrays(cls, p_xy, p_z_given_xy, name: str = "", description: str = "", symbols=None) -> "Instance":
        p_xy = np.asarray(p_xy, dtype=float)
        p_z = np.asarray(p_z_given_xy, dtype=float)
        nx, ny, nz = p_z.shape
        xs, ys, zs = symbols or (range(nx), range(ny), range(nz))
        return cls(
            Alphabet("X", tuple(str(s) for s in xs)),
            Alphabet("Y", tuple(str(s) for s in ys)),
            Alphabet("Z", tuple(str(s) for s in zs)),
            p_xy,
            p_z,
            name,
            description,
        )

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.x.size, self.y.size, self.z.size

    def joint_xy(self) -> JointDistribution:
        return JointDistribution((self.x, self.y), self.p_xy)

    def channel(self) -> Channel:
        return Channel((self.x, self.y), (self.z,), self.p_z_given_xy)

    def joint_xyz(self) -> JointDistribution:
        return compose(self.joint_xy(), self.channel())

    def zero_cells(self) -> list[tuple]:
        return [(self.x.symbols[i], self.y.symbols[j]) for i, j in np.argwhere(self.p_xy <= 0)]

    @property
    def full_support(self) -> bool:
        return bool(np.all(self.p_xy > 0))


@dataclass(frozen=True)
class AuxPair:
    """Encoder ``p_U|X`` (|X| x |U|) and decoder ``p_Z|UY`` (|U| x |Y| x |Z|)."""

    p_u_given_x: np.ndarray
    p_z_given_uy: np.ndarray

    def __post_init__(self):
        enc = np.array(self.p_u_given_x, dtype=float)
        dec = np.array(self.p_z_given_uy, dtype=float)
        if enc.ndim != 2 or dec.ndim != 3 or enc.shape[1] != dec.shape[0]:
            raise ValidationError(f"incompatible encoder {enc.shape} / decoder {dec.shape}")
        enc.setflags(write=False)
        dec.setflags(write=False)
        object.__setattr__(self, "p_u_given_x", enc)
        object.__setattr__(self, "p_z_given_uy", dec)

    @property
    def u_card(self) -> int:
        return self.p_u_given_x.shape[1]

    def u_alphabet(self, name: str = "U") -> Alphabet:
        return Alphabet.range(name, self.u_card)

    def channels(self, inst: Instance, u_name: str = "U") -> tuple[Channel, Channel]:
        u = self.u_alphabet(u_name)
        return (
            Channel((inst.x,), (u,), self.p_u_given_x),
            Channel((u, inst.y), (inst.z,), self.p_z_given_uy),
        )

    def joint(self, inst: Instance, u_name: str = "U") -> JointDistribution:
        """p_XY * p_U|X * p_Z|UY over axes (X, Y, U, Z)."""
        enc, dec = self.channels(inst, u_name)
        return compose(compose(inst.joint_xy(), enc), dec)

    def to_dict(self) -> dict:
        return {"p_u_given_x": self.p_u_given_x.tolist(), "p_z_given_uy": self.p_z_given_uy.tolist()}


# -- file format -------------------------------------------------------------

_REQUIRED = ("x_symbols", "y_symbols", "z_symbols", "p_xy", "p_z_given_xy")


def _symbols(doc: dict, key: str) -> tuple[str, ...]:
    syms = doc[key]
    if not isinstance(syms, list) or not syms:
        raise ParseError(f"field {key!r}: expected a nonempty list of labels")
    out = tuple(str(s) for s in syms)
    if len(set(out)) != len(out):
        raise ValidationError(f"field {key!r}: duplicate symbols")
    return out


def _table(doc: dict, key: str, shape: tuple[int, ...]) -> np.ndarray:
    try:
        arr = np.array(doc[key], dtype=float)
    except (TypeError, ValueError) as e:
        raise ParseError(f"field {key!r}: expected a numeric table of shape {shape}") from e
    if arr.shape != shape:
        raise ParseError(f"field {key!r}: shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"field {key!r}: non-finite entry")
    return arr


def loads_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    missing = [k for k in _REQUIRED if k not in doc]
    if missing:
        raise ParseError(f"missing field(s): {', '.join(missing)}")
    xs, ys, zs = (_symbols(doc, k) for k in _REQUIRED[:3])
    pxy = _table(doc, "p_xy", (len(xs), len(ys)))
    pz = _table(doc, "p_z_given_xy", (len(xs), len(ys), len(zs)))
    return Instance(
        Alphabet("X", xs),
        Alphabet("Y", ys),
        Alphabet("Z", zs),
        pxy,
        pz,
        str(doc.get("name", "")),
        str(doc.get("description", "")),
    )


def parse_instance(path) -> Instance:
    """Read and validate an instance file."""
    return loads_instance(Path(path).read_text())


def canonical_text(inst: Instance) -> str:
    """Canonical serialization; the digest is SHA-256 of this text."""
    doc = {
        "name": inst.name,
        "description": inst.description,
        "x_symbols": list(inst.x.symbols),
        "y_symbols": list(inst.y.symbols),
        "z_symbols": list(inst.z.symbols),
        "p_xy": inst.p_xy.tolist(),
        "p_z_given_xy": inst.p_z_given_xy.tolist(),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def serialize_instance(inst: Instance) -> str:
    return json.dumps(json.loads(canonical_text(inst)), indent=2) + "\n"


def digest(inst: Instance) -> str:
    return "sha256:" + hashlib.sha256(canonical_text(inst).encode()).hexdigest()
