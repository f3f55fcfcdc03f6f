"""Bundled example systems, one ``.ndl`` description and one ``.json`` initial state each."""

from importlib import resources

NAMES = ("free_particle", "oscillator", "pendulum", "example2", "central")


def path(name: str, suffix: str = ".ndl"):
    return resources.files(__name__).joinpath(name + suffix)


def read(name: str, suffix: str = ".ndl") -> str:
    return path(name, suffix).read_text(encoding="utf-8")
