"""Deterministic graph families used for experiment sequences.

Every graph is a structure with one symmetric binary relation ``E`` and the
uniform measure.  The size parameter ``n`` means:

========  =====================================================
family    structure
========  =====================================================
path      ``P_n`` on ``n`` vertices
cycle     ``C_n`` on ``n`` vertices
grid      ``n x n`` grid
tree      balanced binary tree on ``n`` vertices (heap order)
star      ``K_{1,n}``: centre ``0`` and ``n`` leaves
complete  ``K_n``
er        Erdős–Rényi ``G(n, p)`` drawn from a Philox stream
========  =====================================================
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

import numpy as np

from .structures import Structure, make_structure

__all__ = [
    "FAMILIES",
    "GeneratorSpec",
    "complete_graph",
    "cycle_graph",
    "erdos_renyi",
    "generate",
    "graph_structure",
    "grid_graph",
    "parse_graph_spec",
    "parse_sizes",
    "path_graph",
    "star_graph",
    "tree_graph",
]


def graph_structure(n: int, edges: Iterable[tuple[int, int]], rel: str = "E") -> Structure:
    """Uniform structure whose ``rel`` holds in both directions of every edge."""
    tuples = set()
    for a, b in edges:
        if a == b:
            raise ValueError("loops are not allowed in generated graphs")
        tuples.add((a, b))
        tuples.add((b, a))
    return make_structure(n, {rel: tuples}, {rel: 2})


def path_graph(n: int) -> Structure:
    return graph_structure(n, ((i, i + 1) for i in range(n - 1)))


def cycle_graph(n: int) -> Structure:
    if n < 3:
        raise ValueError("a cycle needs at least 3 vertices")
    return graph_structure(n, ((i, (i + 1) % n) for i in range(n)))


def grid_graph(n: int) -> Structure:
    def v(r, c):
        return r * n + c
    edges = []
    for r in range(n):
        for c in range(n):
            if c + 1 < n:
                edges.append((v(r, c), v(r, c + 1)))
            if r + 1 < n:
                edges.append((v(r, c), v(r + 1, c)))
    return graph_structure(n * n, edges)


def tree_graph(n: int) -> Structure:
    return graph_structure(n, ((i, (i - 1) // 2) for i in range(1, n)))


def star_graph(n: int) -> Structure:
    return graph_structure(n + 1, ((0, i) for i in range(1, n + 1)))


def complete_graph(n: int) -> Structure:
    return graph_structure(n, itertools.combinations(range(n), 2))


def erdos_renyi(n: int, p: float, seed: int = 0) -> Structure:
    """``G(n, p)``; the Philox key is ``(seed, n)`` so each size has its own stream."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("edge probability must lie in [0, 1]")
    rng = np.random.Generator(np.random.Philox(key=[int(seed), int(n)]))
    pairs = list(itertools.combinations(range(n), 2))
    if not pairs:
        return graph_structure(n, [])
    coins = rng.random(len(pairs))
    return graph_structure(n, (pair for pair, u in zip(pairs, coins) if u < p))


_BUILDERS: dict[str, Callable[..., Structure]] = {
    "path": path_graph,
    "cycle": cycle_graph,
    "grid": grid_graph,
    "tree": tree_graph,
    "star": star_graph,
    "complete": complete_graph,
}
FAMILIES = tuple(_BUILDERS) + ("er",)


@dataclass(frozen=True)
class GeneratorSpec:
    """A graph family together with the sizes at which to instantiate it."""

    family: str
    sizes: tuple[int, ...] = field(default=())
    p: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if self.family == "er" and self.p is None:
            raise ValueError("the er family needs an edge probability p")
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))

    def build(self, n: int) -> Structure:
        if self.family == "er":
            return erdos_renyi(n, self.p, self.seed)
        return _BUILDERS[self.family](n)

    def __iter__(self) -> Iterator[tuple[int, Structure]]:
        for n in self.sizes:
            yield n, self.build(n)


def generate(family: str, n: int, p: float | None = None, seed: int = 0) -> Structure:
    return GeneratorSpec(family, (n,), p, seed).build(n)


def parse_graph_spec(text: str) -> tuple[str, int, float | None, int]:
    """Parse ``family:n`` or ``er:n:p[:seed]``."""
    parts = text.split(":")
    if len(parts) < 2 or parts[0] not in FAMILIES:
        raise ValueError(f"graph spec {text!r} must look like family:n with family in {', '.join(FAMILIES)}")
    family, n = parts[0], int(parts[1])
    p = float(parts[2]) if len(parts) > 2 else None
    seed = int(parts[3]) if len(parts) > 3 else 0
    return family, n, p, seed


def parse_sizes(text: str) -> tuple[int, ...]:
    """``"10,20,40"`` or a range ``"10:100:10"`` (inclusive stop)."""
    if ":" in text:
        bits = [int(x) for x in text.split(":")]
        start, stop = bits[0], bits[1]
        step = bits[2] if len(bits) > 2 else 1
        return tuple(range(start, stop + 1, step))
    return tuple(int(x) for x in text.split(",") if x.strip())

