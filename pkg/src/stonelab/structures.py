"""Finite relational structures, signatures, Gaifman graphs and metric balls.

Elements of a structure are the integers ``0 .. n-1``.  Relations are sets
of tuples keyed by symbol name.  Two families of unary symbols are reserved
for marks: ``M1, M2, ...`` (each holds on at most one element) and
``Z1, Z2, ...`` (the per-radius skeleton prefixes).  Symbols of the form
``N_<R>_I<bits>_f<i>_<j>...`` are produced only by :mod:`stonelab.encode`.

Weights are optional.  ``weights=None`` means the uniform measure, which is
kept exact (``Fraction(1, n)``).  Explicit weights may be ``Fraction`` (exact
mode) or ``float``.
"""

from __future__ import annotations

import json
import math
import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from numbers import Rational
from pathlib import Path
from typing import Iterable, Mapping, Sequence

__all__ = [
    "INF",
    "Signature",
    "Structure",
    "StructureError",
    "ball",
    "distances_from",
    "dump_structure",
    "disjoint_union",
    "forget_marks",
    "gaifman_graph",
    "induced_substructure",
    "is_mark_symbol",
    "load_structure",
    "make_structure",
    "mark_index",
    "marked_element",
    "structure_from_json",
    "structure_to_json",
    "validate_structure",
    "with_marks",
]

INF = math.inf
WEIGHT_TOL = 1e-12

_MARK_RE = re.compile(r"^([MZ])(\d+)$")
_ENCODED_RE = re.compile(r"^N_.+_I[01]+_f\d+(?:_\d+)*$")


class StructureError(ValueError):
    """Raised when a structure violates one of its invariants."""


def is_mark_symbol(name: str) -> bool:
    return _MARK_RE.match(name) is not None


def mark_index(name: str) -> tuple[str, int] | None:
    """Return ``("M", i)`` / ``("Z", d)`` for a mark symbol, else ``None``."""
    m = _MARK_RE.match(name)
    if m is None:
        return None
    return m.group(1), int(m.group(2))


def is_encoded_symbol(name: str) -> bool:
    return _ENCODED_RE.match(name) is not None


@dataclass(frozen=True)
class Signature:
    """Relation symbols with their arities.

    Mark symbols are implicitly unary and may be looked up without being
    declared.
    """

    relations: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for name, arity in self.relations.items():
            if not isinstance(arity, int) or arity < 1:
                raise StructureError(f"symbol {name!r}: arity must be a positive integer, got {arity!r}")
            if is_mark_symbol(name) and arity != 1:
                raise StructureError(f"symbol {name!r} is a reserved unary mark symbol")

    def arity(self, name: str) -> int | None:
        if name in self.relations:
            return self.relations[name]
        if is_mark_symbol(name):
            return 1
        return None

    def __contains__(self, name: str) -> bool:
        return self.arity(name) is not None

    def user_symbols(self) -> list[str]:
        """Symbols that are neither marks nor generated encoding symbols."""
        return [r for r in self.relations if not is_mark_symbol(r) and not is_encoded_symbol(r)]


@dataclass(frozen=True)
class Structure:
    """A finite relational structure, optionally carrying element weights.

    Build instances with :func:`make_structure`, which normalises the
    relation tuples and validates every invariant.
    """

    size: int
    relations: Mapping[str, frozenset]
    arities: Mapping[str, int]
    weights: tuple | None = None
    names: tuple[str, ...] | None = None

    @property
    def signature(self) -> Signature:
        return Signature(dict(self.arities))

    @property
    def domain(self) -> range:
        return range(self.size)

    @property
    def is_exact(self) -> bool:
        """True when all weights are rationals (uniform weights included)."""
        if self.weights is None:
            return True
        return all(isinstance(w, Rational) for w in self.weights)

    @cached_property
    def weight_vector(self) -> tuple:
        if self.weights is None:
            if self.size == 0:
                return ()
            w = Fraction(1, self.size)
            return (w,) * self.size
        return tuple(self.weights)

    @property
    def is_uniform(self) -> bool:
        return self.weights is None

    def tuples(self, name: str) -> frozenset:
        return self.relations.get(name, frozenset())

    @cached_property
    def adjacency(self) -> tuple[frozenset, ...]:
        adj: list[set] = [set() for _ in range(self.size)]
        for tuples in self.relations.values():
            for t in tuples:
                if len(t) < 2:
                    continue
                members = set(t)
                for u in members:
                    adj[u].update(members)
        for u in range(self.size):
            adj[u].discard(u)
        return tuple(frozenset(a) for a in adj)

    @cached_property
    def _distance_cache(self) -> dict:
        return {}

    def distances(self, v: int) -> list:
        """Gaifman distances from ``v`` (``INF`` when unreachable), memoised."""
        cache = self._distance_cache
        row = cache.get(v)
        if row is None:
            row = distances_from(self.adjacency, v)
            cache[v] = row
        return row

    def mass(self, elements: Iterable[int]):
        w = self.weight_vector
        if self.is_exact:
            return sum((w[e] for e in elements), Fraction(0))
        return math.fsum(w[e] for e in elements)

    def marks(self) -> dict[int, int]:
        """Map ``i -> element`` for every nonempty ``M_i``."""
        out = {}
        for name, tuples in self.relations.items():
            idx = mark_index(name)
            if idx and idx[0] == "M" and tuples:
                (t,) = tuples
                out[idx[1]] = t[0]
        return out

    def replace(self, **changes) -> "Structure":
        data = dict(size=self.size, relations=self.relations, arities=self.arities,
                    weights=self.weights, names=self.names)
        data.update(changes)
        return make_structure(**data)


def _normalize_weight(w):
    if isinstance(w, bool):
        raise StructureError("weights must be numbers")
    if isinstance(w, Rational):
        return Fraction(w)
    if isinstance(w, str):
        return Fraction(w)
    return float(w)


def make_structure(size: int, relations: Mapping[str, Iterable[Sequence[int]]] | None = None,
                   arities: Mapping[str, int] | None = None, weights: Sequence | None = None,
                   names: Sequence[str] | None = None, validate: bool = True) -> Structure:
    """Normalise raw data into a validated :class:`Structure`.

    Arities are inferred from the tuples when not declared; an empty relation
    needs a declared arity (mark symbols default to 1).
    """
    relations = relations or {}
    declared = dict(arities or {})
    rels: dict[str, frozenset] = {}
    for name, tuples in relations.items():
        tuples = frozenset(tuple(int(e) for e in t) for t in tuples)
        rels[name] = tuples
        if name not in declared:
            if tuples:
                declared[name] = len(next(iter(tuples)))
            elif is_mark_symbol(name):
                declared[name] = 1
            else:
                raise StructureError(f"cannot infer arity of empty relation {name!r}; declare it")
    for name in declared:
        rels.setdefault(name, frozenset())
    if weights is not None:
        weights = tuple(_normalize_weight(w) for w in weights)
    s = Structure(size=int(size), relations=rels, arities=declared, weights=weights,
                  names=tuple(names) if names is not None else None)
    if validate:
        validate_structure(s)
    return s


def validate_structure(s: Structure, sig: Signature | None = None) -> None:
    """Check every structure invariant, raising :class:`StructureError` on the first violation.

    When ``sig`` is given, every relation of ``s`` must be declared there
    with the same arity (marks excepted).
    """
    if s.size < 0:
        raise StructureError("domain size must be non-negative")
    Signature(dict(s.arities))
    for name in sorted(s.relations):
        arity = s.arities.get(name)
        if sig is not None:
            want = sig.arity(name)
            if want is None:
                raise StructureError(f"symbol {name!r} is not in the signature")
            if want != arity:
                raise StructureError(f"symbol {name!r}: arity {arity} differs from signature arity {want}")
        for t in sorted(s.relations[name]):
            if len(t) != arity:
                raise StructureError(f"symbol {name!r}: tuple {t} has length {len(t)}, arity is {arity}")
            for e in t:
                if not 0 <= e < s.size:
                    raise StructureError(f"symbol {name!r}: tuple {t} has element {e} outside domain 0..{s.size - 1}")
    owner: dict[int, str] = {}
    for name in sorted(s.relations):
        idx = mark_index(name)
        if not idx or idx[0] != "M":
            continue
        tuples = s.relations[name]
        if len(tuples) > 1:
            raise StructureError(f"mark {name!r} holds on {len(tuples)} elements; at most one allowed")
        for (e,) in tuples:
            if e in owner:
                raise StructureError(f"element {e} carries two marks: {owner[e]!r} and {name!r}")
            owner[e] = name
    if s.weights is not None:
        if len(s.weights) != s.size:
            raise StructureError(f"{len(s.weights)} weights for a domain of size {s.size}")
        if any(w < 0 for w in s.weights):
            raise StructureError("weights must be non-negative")
        total = sum(s.weights, Fraction(0)) if s.is_exact else math.fsum(s.weights)
        if abs(total - 1) > WEIGHT_TOL:
            raise StructureError(f"weights sum to {float(total)!r}, not 1")
    if s.names is not None and len(s.names) != s.size:
        raise StructureError("element names do not match the domain size")


def gaifman_graph(s: Structure) -> dict[int, frozenset]:
    """Adjacency map of the Gaifman graph: ``x ~ y`` iff ``x != y`` share a tuple."""
    return dict(enumerate(s.adjacency))


def distances_from(adj: Sequence[Iterable[int]], v: int, removed: frozenset | set = frozenset(),
                   limit: float = INF) -> list:
    """BFS distances from ``v`` over ``adj``, skipping ``removed`` vertices."""
    dist = [INF] * len(adj)
    if v in removed:
        return dist
    dist[v] = 0
    queue = deque([v])
    while queue:
        u = queue.popleft()
        du = dist[u]
        if du >= limit:
            continue
        for w in adj[u]:
            if dist[w] == INF and w not in removed:
                dist[w] = du + 1
                queue.append(w)
    return dist


def ball(s: Structure, v: int, d: int, removed: frozenset | set = frozenset()) -> frozenset:
    """Elements at Gaifman distance at most ``d`` from ``v``.

    With ``removed``, distances are taken in the Gaifman graph with those
    vertices deleted.
    """
    if not 0 <= v < s.size:
        raise StructureError(f"element {v} outside domain")
    if d < 0:
        raise ValueError("radius must be non-negative")
    if removed:
        dist = distances_from(s.adjacency, v, removed, limit=d)
    else:
        dist = s.distances(v)
    return frozenset(u for u, du in enumerate(dist) if du <= d)


def forget_marks(s: Structure) -> Structure:
    """Drop every ``M_i`` and ``Z_d`` relation; everything else is kept."""
    keep = {r: t for r, t in s.relations.items() if not is_mark_symbol(r)}
    if len(keep) == len(s.relations):
        return s
    return make_structure(s.size, keep, {r: s.arities[r] for r in keep}, s.weights, s.names)


def with_marks(s: Structure, marks: Mapping[str, Iterable[int]]) -> Structure:
    """Return ``s`` with the given mark relations set (replacing existing ones)."""
    rels = dict(s.relations)
    arities = dict(s.arities)
    for name, elems in marks.items():
        if not is_mark_symbol(name):
            raise StructureError(f"{name!r} is not a mark symbol")
        rels[name] = [(e,) for e in elems]
        arities[name] = 1
    return make_structure(s.size, rels, arities, s.weights, s.names)


def marked_element(s: Structure, i: int) -> int | None:
    t = s.tuples(f"M{i}")
    if not t:
        return None
    return next(iter(t))[0]


def induced_substructure(s: Structure, elements: Iterable[int]) -> tuple[Structure, dict[int, int]]:
    """Substructure induced on ``elements`` (renumbered in increasing order) and the renumbering map.

    The result carries uniform weights; every relation of ``s`` stays declared.
    """
    elems = sorted(set(elements))
    index = {e: i for i, e in enumerate(elems)}
    rels = {}
    for name, tuples in s.relations.items():
        rels[name] = [tuple(index[e] for e in t) for t in tuples if all(e in index for e in t)]
    return make_structure(len(elems), rels, dict(s.arities), validate=False), index


def disjoint_union(parts: Sequence[Structure]) -> tuple[Structure, list[int]]:
    """Disjoint union (no tuples across parts) and the offset of each part."""
    offsets = []
    rels: dict[str, list] = {}
    arities: dict[str, int] = {}
    total = 0
    for part in parts:
        offsets.append(total)
        for name, tuples in part.relations.items():
            arities.setdefault(name, part.arities[name])
            rels.setdefault(name, []).extend(tuple(e + total for e in t) for t in tuples)
        total += part.size
    return make_structure(total, rels, arities, validate=False), offsets


# JSON wire format: {"domain": n | [names], "relations": {...}, "arities": {...}?, "weights": [...]?}

def _weight_to_json(w):
    if isinstance(w, Fraction):
        return int(w) if w.denominator == 1 else f"{w.numerator}/{w.denominator}"
    return w


def structure_to_json(s: Structure) -> dict:
    out: dict = {"domain": list(s.names) if s.names is not None else s.size}
    out["relations"] = {r: [list(t) for t in sorted(s.relations[r])] for r in sorted(s.relations)}
    empty = {r: s.arities[r] for r in sorted(s.relations) if not s.relations[r]}
    if empty:
        out["arities"] = empty
    if s.weights is not None:
        out["weights"] = [_weight_to_json(w) for w in s.weights]
    return out


def structure_from_json(data: Mapping) -> Structure:
    domain = data["domain"]
    names = None
    if isinstance(domain, list):
        names = [str(x) for x in domain]
        index = {name: i for i, name in enumerate(names)}
        size = len(names)

        def conv(e):
            if isinstance(e, str):
                if e not in index:
                    raise StructureError(f"unknown element name {e!r}")
                return index[e]
            return e
    else:
        size = int(domain)

        def conv(e):
            return e
    relations = {r: [[conv(e) for e in t] for t in tuples] for r, tuples in data.get("relations", {}).items()}
    return make_structure(size, relations, data.get("arities"), data.get("weights"), names)


def load_structure(path: str | Path) -> Structure:
    with open(path) as fh:
        return structure_from_json(json.load(fh))


def dump_structure(s: Structure, path: str | Path | None = None) -> str:
    text = json.dumps(structure_to_json(s), indent=1)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text
