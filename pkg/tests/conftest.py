"""Shared generators and brute-force reference computations for the tests."""

import itertools
import math

import numpy as np
import pytest

from securecomp import fixtures
from securecomp.instance import Instance


def random_simplex(rng, shape, sparsity=0.0):
    """Random probability table; with ``sparsity`` > 0 some cells are zeroed."""
    a = rng.gamma(0.7, size=shape)
    if sparsity:
        a = a * (rng.random(shape) >= sparsity)
        a.flat[rng.integers(a.size)] += 1.0
    return a / a.sum()


def random_rows(rng, shape):
    a = rng.gamma(0.8, size=shape) + 1e-3
    return a / a.sum(axis=-1, keepdims=True)


def rank_one_instance(rng, nx=None, ny=None, k=None, extra_z=None):
    """A computable full-support instance with a planted class structure.

    Class sums come from one random ``p_W|X`` shared by every y; at each y the
    outputs are split into k nonempty groups, each with its own within-class
    distribution.  Returns the instance together with the planted ``p_W|X``.
    """
    nx = nx or int(rng.integers(2, 4))
    ny = ny or int(rng.integers(1, 4))
    k = k or int(rng.integers(1, 4))
    nz = k + (extra_z if extra_z is not None else int(rng.integers(0, 3)))
    p_w = random_rows(rng, (nx, k))
    p_z = np.zeros((nx, ny, nz))
    for y in range(ny):
        labels = np.concatenate([np.arange(k), rng.integers(0, k, nz - k)])
        rng.shuffle(labels)
        for i in range(k):
            members = np.flatnonzero(labels == i)
            q = rng.dirichlet(np.ones(members.size))
            p_z[:, y, members] = p_w[:, i, None] * q[None, :]
    p_xy = random_simplex(rng, (nx, ny)) * 0.9 + 0.1 / (nx * ny)
    return Instance.from_arrays(p_xy, p_z), p_w


def brute_entropy(mass: dict) -> float:
    return -sum(p * math.log2(p) for p in mass.values() if p > 0)


def brute_marginal(table: np.ndarray, keep) -> dict:
    out = {}
    for idx in itertools.product(*(range(s) for s in table.shape)):
        key = tuple(idx[i] for i in keep)
        out[key] = out.get(key, 0.0) + float(table[idx])
    return out


def brute_cmi(table: np.ndarray, a, b, c=()) -> float:
    """I(A;B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C) by explicit summation."""
    a, b, c = tuple(a), tuple(b), tuple(c)
    h = lambda keep: brute_entropy(brute_marginal(table, keep))  # noqa: E731
    return h(a + c) + h(b + c) - h(a + b + c) - h(c)


@pytest.fixture(params=fixtures.CERTIFIED)
def certified(request):
    return fixtures.load(request.param)


@pytest.fixture
def identity():
    return fixtures.load("identity")


@pytest.fixture
def bsc():
    return fixtures.load("bsc")


@pytest.fixture
def and_inst():
    return fixtures.load("and")


# -- acceptance summary ------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def record_criterion(label: str, ok: bool, detail: str = "") -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
