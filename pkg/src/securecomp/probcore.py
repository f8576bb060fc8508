"""Exact and empirical probability arithmetic over finite alphabets.

Distributions are dense numpy tables whose axes carry named alphabets.
Subsets of axes are referred to by alphabet name.  All information
quantities are in bits and use the plug-in convention ``0 log 0 = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

NORM_TOL = 1e-9
CMP_TOL = 1e-12


class ShapeError(ValueError):
    """Axis sets are inconsistent (overlap, mismatch, unknown name)."""


class ValidationError(ValueError):
    """A table violates a probability invariant."""


@dataclass(frozen=True)
class Alphabet:
    name: str
    symbols: tuple

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if len(self.symbols) < 1:
            raise ValidationError(f"alphabet {self.name!r} is empty")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValidationError(f"alphabet {self.name!r} has duplicate symbols")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol) -> int:
        return self.symbols.index(symbol)

    @classmethod
    def range(cls, name: str, size: int) -> "Alphabet":
        return cls(name, tuple(range(size)))


def _names(axes: Sequence[Alphabet]) -> tuple[str, ...]:
    return tuple(a.name for a in axes)


def _as_tuple(names) -> tuple[str, ...]:
    if names is None:
        return ()
    if isinstance(names, str):
        return (names,)
    return tuple(names)


@dataclass(frozen=True)
class JointDistribution:
    """Normalized probability table over the product of ``axes``."""

    axes: tuple[Alphabet, ...]
    mass: np.ndarray = field(repr=False)

    def __post_init__(self):
        axes = tuple(self.axes)
        mass = np.array(self.mass, dtype=float)
        object.__setattr__(self, "axes", axes)
        if len(set(_names(axes))) != len(axes):
            raise ShapeError(f"duplicate axis names {_names(axes)}")
        shape = tuple(a.size for a in axes)
        if mass.shape != shape:
            raise ShapeError(f"mass shape {mass.shape} does not match axes {shape}")
        if not np.all(np.isfinite(mass)) or np.any(mass < 0):
            raise ValidationError("negative or non-finite mass")
        total = mass.sum()
        if abs(total - 1.0) > NORM_TOL:
            raise ValidationError(f"mass sums to {total!r}, not 1")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @property
    def names(self) -> tuple[str, ...]:
        return _names(self.axes)

    def axis(self, name: str) -> Alphabet:
        return self.axes[self._positions((name,))[0]]

    def _positions(self, names) -> list[int]:
        own = self.names
        out = []
        for n in _as_tuple(names):
            if n not in own:
                raise ShapeError(f"unknown axis {n!r}; have {own}")
            out.append(own.index(n))
        return out

    def marginal(self, names) -> "JointDistribution":
        """Marginal over ``names``, with axes in the order given."""
        keep = self._positions(names)
        if len(set(keep)) != len(keep):
            raise ShapeError(f"repeated axis in {names}")
        drop = tuple(i for i in range(len(self.axes)) if i not in keep)
        m = self.mass.sum(axis=drop) if drop else self.mass
        # remaining axes are in ascending original order; permute to requested order
        remaining = sorted(keep)
        perm = [remaining.index(i) for i in keep]
        m = np.transpose(m, perm) if m.ndim else m
        return JointDistribution(tuple(self.axes[i] for i in keep), m)

    def reorder(self, names) -> "JointDistribution":
        if sorted(_as_tuple(names)) != sorted(self.names):
            raise ShapeError(f"reorder needs a permutation of {self.names}")
        return self.marginal(names)


@dataclass(frozen=True)
class Channel:
    """Conditional kernel: ``table[inputs..., outputs...]`` rows sum to one."""

    input_axes: tuple[Alphabet, ...]
    output_axes: tuple[Alphabet, ...]
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        ins, outs = tuple(self.input_axes), tuple(self.output_axes)
        object.__setattr__(self, "input_axes", ins)
        object.__setattr__(self, "output_axes", outs)
        names = _names(ins) + _names(outs)
        if len(set(names)) != len(names):
            raise ShapeError(f"channel axes overlap: {names}")
        t = np.array(self.table, dtype=float)
        shape = tuple(a.size for a in ins + outs)
        if t.shape != shape:
            raise ShapeError(f"table shape {t.shape} does not match axes {shape}")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ValidationError("negative or non-finite channel entry")
        rows = t.reshape(int(np.prod([a.size for a in ins], dtype=int)), -1).sum(axis=1)
        bad = np.flatnonzero(np.abs(rows - 1.0) > NORM_TOL)
        if bad.size:
            idx = np.unravel_index(bad[0], tuple(a.size for a in ins))
            raise ValidationError(f"channel row {tuple(int(i) for i in idx)} sums to {rows[bad[0]]!r}")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def input_names(self) -> tuple[str, ...]:
        return _names(self.input_axes)

    @property
    def output_names(self) -> tuple[str, ...]:
        return _names(self.output_axes)

    def row(self, inputs: Sequence[int]) -> JointDistribution:
        return JointDistribution(self.output_axes, self.table[tuple(inputs)])


def _check_disjoint(*groups):
    seen: set[str] = set()
    for g in groups:
        for n in g:
            if n in seen:
                raise ShapeError(f"axis {n!r} appears in more than one subset")
            seen.add(n)


def tv_distance(p: JointDistribution, q: JointDistribution) -> float:
    """Half the L1 distance between two tables on identical axes."""
    if p.axes != q.axes:
        raise ShapeError(f"axes differ: {p.names} vs {q.names}")
    return 0.5 * float(np.abs(p.mass - q.mass).sum())


def _h(mass: np.ndarray) -> float:
    m = mass[mass > 0]
    return float(-(m * np.log2(m)).sum())


def entropy(p: JointDistribution, target_axes, given_axes=()) -> float:
    """H(target | given) in bits."""
    t, g = _as_tuple(target_axes), _as_tuple(given_axes)
    _check_disjoint(t, g)
    joint = _h(p.marginal(t + g).mass)
    cond = _h(p.marginal(g).mass) if g else 0.0
    return max(joint - cond, 0.0)


def cond_mutual_info(p: JointDistribution, a_axes, b_axes, given_axes=()) -> float:
    """I(A; B | C) in bits, clipped at zero from round-off."""
    a, b, c = _as_tuple(a_axes), _as_tuple(b_axes), _as_tuple(given_axes)
    _check_disjoint(a, b, c)
    h = lambda names: _h(p.marginal(names).mass) if names else 0.0  # noqa: E731
    val = h(a + c) + h(b + c) - h(a + b + c) - h(c)
    return max(val, 0.0)


def compose(base: JointDistribution, k: Channel) -> JointDistribution:
    """Joint of ``base`` extended by the outputs of ``k``."""
    pos = base._positions(k.input_names)
    _check_disjoint(base.names, k.output_names)
    nb = len(base.axes)
    letters = "abcdefghijklmnopqrstuvwxyz"
    if nb + len(k.output_axes) > len(letters):
        raise ShapeError("too many axes")
    base_sub = letters[:nb]
    out_sub = letters[nb : nb + len(k.output_axes)]
    k_sub = "".join(base_sub[i] for i in pos) + out_sub
    mass = np.einsum(f"{base_sub},{k_sub}->{base_sub}{out_sub}", base.mass, k.table)
    return JointDistribution(base.axes + k.output_axes, mass)


def check_markov(p: JointDistribution, a_axes, mid_axes, b_axes, tol: float = NORM_TOL) -> bool:
    """True iff A - mid - B holds up to ``tol`` bits of conditional MI."""
    return cond_mutual_info(p, a_axes, b_axes, mid_axes) <= tol


# -- randomness -------------------------------------------------------------

def seed_stream(seed: int, *path: int) -> np.random.Generator:
    """Generator for sub-stream ``path`` of a master seed.

    Split rule: the stream index path is used as the ``spawn_key`` of a
    ``SeedSequence`` built from the 64-bit master seed, so streams with
    different paths are independent and each is reproducible on its own.
    """
    if not 0 <= int(seed) < 2**64:
        raise ValidationError(f"seed {seed} outside 64-bit unsigned range")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(i) for i in path))
    return np.random.Generator(np.random.PCG64(ss))


def _cdf(probs: np.ndarray) -> np.ndarray:
    c = np.cumsum(probs, axis=-1)
    c[..., -1] = 1.0
    return c


def draw_rows(cdf: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF lookup, vectorized: ``cdf`` is (n, k), ``uniforms`` is (n,)."""
    return (uniforms[:, None] >= cdf[:, :-1]).sum(axis=1)


def sample_indices(probs: np.ndarray, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` flat indices drawn by inverse CDF in canonical order."""
    flat = np.asarray(probs, dtype=float).ravel()
    if np.any(flat < 0) or abs(flat.sum() - 1.0) > NORM_TOL:
        raise ValidationError("cannot sample from an unnormalized table")
    c = _cdf(flat)
    return np.searchsorted(c, rng.random(size), side="right").clip(max=flat.size - 1)


def sample(p: JointDistribution | Channel, rng: np.random.Generator, inputs: Sequence[int] = ()) -> tuple:
    """Draw one symbol tuple (as labels) from a distribution or a channel row."""
    dist = p.row(inputs) if isinstance(p, Channel) else p
    idx = int(sample_indices(dist.mass, rng, 1)[0])
    cell = np.unravel_index(idx, dist.mass.shape)
    return tuple(ax.symbols[int(i)] for ax, i in zip(dist.axes, cell))


def empirical_joint(samples: Iterable[Sequence], axes: Sequence[Alphabet]) -> JointDistribution:
    """Frequency table of symbol-label tuples."""
    axes = tuple(axes)
    counts = np.zeros(tuple(a.size for a in axes))
    n = 0
    for s in samples:
        if len(s) != len(axes):
            raise ValidationError(f"sample {s!r} has wrong arity")
        try:
            counts[tuple(a.index(v) for a, v in zip(axes, s))] += 1
        except ValueError as e:
            raise ValidationError(f"sample {s!r} out of range") from e
        n += 1
    if n == 0:
        raise ValidationError("empty sample list")
    return JointDistribution(axes, counts / n)


def empirical_from_codes(codes: Sequence[np.ndarray], axes: Sequence[Alphabet]) -> JointDistribution:
    """Frequency table from parallel arrays of integer symbol indices."""
    axes = tuple(axes)
    shape = tuple(a.size for a in axes)
    if not codes or len(codes[0]) == 0:
        raise ValidationError("empty sample list")
    flat = np.ravel_multi_index(tuple(np.asarray(c) for c in codes), shape)
    counts = np.bincount(flat, minlength=int(np.prod(shape))).reshape(shape)
    return JointDistribution(axes, counts / counts.sum())


def plugin_cmi(a: np.ndarray, b: np.ndarray, c: np.ndarray | None = None) -> float:
    """Plug-in I(A;B|C) in bits from parallel integer sample arrays.

    Works with arbitrarily large (sparse) alphabets since only observed
    combinations are counted.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    c = np.zeros_like(a) if c is None else np.asarray(c, dtype=np.int64)
    n = a.size
    if n == 0:
        raise ValidationError("empty sample list")

    def h(*cols):
        _, counts = np.unique(np.stack(cols, axis=1), axis=0, return_counts=True)
        q = counts / n
        return float(-(q * np.log2(q)).sum())

    return max(h(a, c) + h(b, c) - h(a, b, c) - h(c), 0.0)
