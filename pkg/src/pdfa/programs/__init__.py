"""Example programs shipped with the package."""

from pathlib import Path

DIR = Path(__file__).parent


def path(name: str) -> Path:
    return DIR / name


def names():
    return sorted(p.name for p in DIR.glob("*.pw"))


def read(name: str) -> str:
    return path(name).read_text()
