"""Bundled benchmark corpus.

Classic higher-order analysis stress tests, re-encoded for this language
surface (no exact correspondence with any published state counts is
claimed).
"""
from dataclasses import dataclass
from importlib import resources

from ..syntax import parse_and_normalize


@dataclass(frozen=True)
class BenchmarkEntry:
    name: str
    path: str
    fuel: int  # concrete evaluation terminates within this many steps
    tags: tuple


BENCHMARKS = [
    BenchmarkEntry("fig1", "fig1.scm", 100_000, ("toy", "recursion")),
    BenchmarkEntry("mj09", "mj09.scm", 100_000, ("polyvariance",)),
    BenchmarkEntry("eta", "eta.scm", 100_000, ("return-flow",)),
    BenchmarkEntry("kcfa2", "kcfa2.scm", 100_000, ("worst-case",)),
    BenchmarkEntry("kcfa3", "kcfa3.scm", 100_000, ("worst-case",)),
    BenchmarkEntry("blur", "blur.scm", 100_000, ("eta", "loop")),
    BenchmarkEntry("loop2", "loop2.scm", 100_000, ("loop",)),
    BenchmarkEntry("sat", "sat.scm", 100_000, ("boolean", "search")),
]

BY_NAME = {b.name: b for b in BENCHMARKS}


def source(name: str) -> str:
    entry = BY_NAME[name]
    return resources.files(__package__).joinpath(entry.path).read_text()


def load(name: str):
    """Parse and normalize a bundled benchmark; returns the root Exp."""
    return parse_and_normalize(source(name))
