"""Search for ``p``-subdivided complete graphs as subgraphs of a Gaifman graph.

A ``p``-subdivision of ``K_N`` has ``N`` principal vertices joined pairwise
by internally disjoint paths with ``p`` internal vertices each (``p + 1``
edges).  In ``at_most`` mode paths may be shorter.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import BudgetExceeded
from .structures import Structure, distances_from

__all__ = [
    "SubdivisionWitness",
    "find_subdivision",
    "verify_witness",
]

MAX_PRINCIPALS = 5
MAX_SUBDIVISION = 3
MAX_VERTICES = 200
MAX_STEPS = 5 * 10**7


@dataclass(frozen=True)
class SubdivisionWitness:
    principals: tuple[int, ...]
    paths: tuple[tuple[int, ...], ...]
    p: int
    mode: str = "exact"

    def to_json(self) -> dict:
        return {"principals": list(self.principals), "p": self.p, "mode": self.mode,
                "paths": [list(path) for path in self.paths]}


def verify_witness(g: Structure, w: SubdivisionWitness) -> list[str]:
    """Independent check of a witness; returns the list of problems (empty when valid)."""
    problems = []
    adj = g.adjacency
    principals = list(w.principals)
    if len(set(principals)) != len(principals):
        problems.append("principal vertices repeat")
    want = {frozenset(pair) for pair in itertools.combinations(principals, 2)}
    seen_pairs = set()
    internal_seen: set[int] = set()
    for path in w.paths:
        ends = frozenset((path[0], path[-1]))
        if ends not in want:
            problems.append(f"path {path} does not join two principal vertices")
            continue
        if ends in seen_pairs:
            problems.append(f"pair {sorted(ends)} joined twice")
        seen_pairs.add(ends)
        edges = len(path) - 1
        if w.mode == "exact" and edges != w.p + 1:
            problems.append(f"path {path} has {edges} edges, want {w.p + 1}")
        if w.mode == "at_most" and not 1 <= edges <= w.p + 1:
            problems.append(f"path {path} has {edges} edges, want at most {w.p + 1}")
        for a, b in zip(path, path[1:]):
            if b not in adj[a]:
                problems.append(f"edge {a}-{b} of path {path} is not in the graph")
        inner = path[1:-1]
        if len(set(path)) != len(path):
            problems.append(f"path {path} is not simple")
        for v in inner:
            if v in principals:
                problems.append(f"path {path} passes through principal vertex {v}")
            if v in internal_seen:
                problems.append(f"internal vertex {v} shared by two paths")
            internal_seen.add(v)
    if seen_pairs != want:
        problems.append(f"{len(want - seen_pairs)} principal pair(s) have no path")
    return problems


class _Search:
    def __init__(self, g: Structure, N: int, p: int, mode: str, max_steps: int):
        self.adj = [sorted(a) for a in g.adjacency]
        self.n = g.size
        self.N = N
        self.p = p
        self.lengths = [p + 1] if mode == "exact" else list(range(1, p + 2))
        self.steps = 0
        self.max_steps = max_steps

    def step(self):
        self.steps += 1
        if self.steps > self.max_steps:
            raise BudgetExceeded(f"subdivision search exceeded {self.max_steps} steps")

    def paths(self, a: int, b: int, edges: int, used: set[int]):
        """Simple paths ``a .. b`` with exactly ``edges`` edges and no internal vertex in ``used``."""
        blocked = used - {b}
        dist_b = distances_from(self.adj, b, blocked - {a}, limit=edges)
        if dist_b[a] > edges:
            return
        path = [a]
        on_path = {a}

        def extend(u, left):
            self.step()
            if left == 1:
                if b in self.adj[u]:
                    yield tuple(path) + (b,)
                return
            for w in self.adj[u]:
                if w == b or w in blocked or w in on_path or dist_b[w] > left - 1:
                    continue
                path.append(w)
                on_path.add(w)
                yield from extend(w, left - 1)
                path.pop()
                on_path.discard(w)

        yield from extend(a, edges)

    def grow(self, candidates, start, principals, used, chosen):
        if len(principals) == self.N:
            return True
        for idx in range(start, len(candidates) - (self.N - len(principals)) + 1):
            v = candidates[idx]
            if v in used:
                continue
            self.step()
            mark = len(chosen)
            principals.append(v)
            if self._extend(v, candidates, idx, principals, used, chosen):
                return True
            del chosen[mark:]
            principals.pop()
        return False

    def _extend(self, v, candidates, idx, principals, used, chosen):
        targets = principals[:-1]
        base = used | {v}

        def attempt(k, used_now):
            if k == len(targets):
                return self.grow(candidates, idx + 1, principals, used_now, chosen)
            a = targets[k]
            for edges in self.lengths:
                for path in self.paths(a, v, edges, used_now):
                    chosen.append(path)
                    if attempt(k + 1, used_now | set(path[1:-1])):
                        return True
                    chosen.pop()
            return False

        return attempt(0, base)

    def run(self):
        degree = [len(a) for a in self.adj]
        candidates = sorted((v for v in range(self.n) if degree[v] >= self.N - 1), key=lambda v: (-degree[v], v))
        principals: list[int] = []
        chosen: list[tuple[int, ...]] = []
        if self.grow(candidates, 0, principals, set(), chosen):
            return tuple(principals), chosen
        return None


def find_subdivision(g: Structure, N: int, p: int, mode: str = "exact", max_principals: int = MAX_PRINCIPALS,
                     max_subdivision: int = MAX_SUBDIVISION, max_vertices: int = MAX_VERTICES,
                     max_steps: int = MAX_STEPS) -> SubdivisionWitness | None:
    """Find a ``p``-subdivision of ``K_N`` in the Gaifman graph of ``g``, or return ``None``.

    ``None`` certifies that the whole search space was exhausted.  Principal
    vertices are tried in order of decreasing degree (ties by id), so the
    result is deterministic.  Exceeding any size or step budget raises
    :class:`~stonelab.errors.BudgetExceeded`.
    """
    if N < 2 or p < 0:
        raise ValueError("need N >= 2 and p >= 0")
    if mode not in ("exact", "at_most"):
        raise ValueError("mode must be 'exact' or 'at_most'")
    if N > max_principals or p > max_subdivision or g.size > max_vertices:
        raise BudgetExceeded(f"search (N={N}, p={p}, n={g.size}) is outside the budget "
                             f"(N<={max_principals}, p<={max_subdivision}, n<={max_vertices})")
    result = _Search(g, N, p, mode, max_steps).run()
    if result is None:
        return None
    principals, paths = result
    w = SubdivisionWitness(tuple(principals), tuple(paths), p, mode)
    problems = verify_witness(g, w)
    if problems:
        raise AssertionError("internal error, invalid witness: " + "; ".join(problems))
    return w
