"""Shipped instance files."""

from importlib import resources

from ..instance import Instance, loads_instance

NAMES = ("and", "identity", "x_independent", "bsc", "rank_one_3x2x3")
CERTIFIED = ("identity", "x_independent", "bsc", "rank_one_3x2x3")


def path(name: str):
    return resources.files(__name__).joinpath(f"{name}.json")


def load(name: str) -> Instance:
    if name not in NAMES:
        raise KeyError(f"unknown fixture {name!r}; have {NAMES}")
    return loads_instance(path(name).read_text())
