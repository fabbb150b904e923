"""Mark elimination: encoding a marked structure and rewriting formulas to match.

``encode_m`` keeps the domain and the unary relations, deletes every tuple of
a relation ``R`` (arity ``k > 1``) that touches an element marked
``M1 .. Mm``, and records what was deleted in new relations
``N^R_{I,f}``: an unmarked tuple lies in ``N^R_{I,f}`` when filling the
positions ``I`` with the elements marked ``M_{f(i)}`` yields an ``R``-tuple.
Tuples made only of marked elements are summarised by the pattern ``Z``
of the elimination theory.  ``eliminate_formula`` substitutes each such
``R`` by a quantifier-free formula that reassembles it from these pieces.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Mapping

from .errors import BudgetExceeded
from .logic import (
    And, Atom, Bottom, Dist, Eq, Exists, Forall, Formula, FormulaError, Implies, Not, Or, Qm, Top,
    conj, disj,
)
from .structures import Structure, StructureError, is_encoded_symbol, is_mark_symbol, make_structure

__all__ = [
    "DEFAULT_MAX_ARITY",
    "EliminationTheory",
    "elimination_theory",
    "encode_m",
    "encoded_symbol",
    "encoded_symbols",
    "eliminate_formula",
    "eta",
    "varsigma",
]

DEFAULT_MAX_ARITY = 3


def encoded_symbol(rel: str, positions: tuple[int, ...], marks: tuple[int, ...], arity: int) -> str:
    """Name of ``N^R_{I,f}``; ``positions`` are 1-based and increasing, ``marks`` their ``f`` values."""
    bits = "".join("1" if i in positions else "0" for i in range(1, arity + 1))
    return f"N_{rel}_I{bits}_f{'_'.join(map(str, marks))}"


def encoded_symbols(rel: str, arity: int, m: int) -> Iterator[tuple[str, tuple[int, ...], tuple[int, ...]]]:
    """Every ``(name, I, f)`` for nonempty proper ``I`` of ``[arity]`` and ``f: I -> [m]``."""
    for size in range(1, arity):
        for positions in itertools.combinations(range(1, arity + 1), size):
            for marks in itertools.product(range(1, m + 1), repeat=size):
                yield encoded_symbol(rel, positions, marks, arity), positions, marks


def _user_relations(s: Structure, max_arity: int) -> dict[str, int]:
    out = {}
    for name, arity in s.arities.items():
        if is_encoded_symbol(name):
            raise StructureError(f"structure already carries encoding symbol {name!r}")
        if is_mark_symbol(name) or arity < 2:
            continue
        if arity > max_arity:
            raise BudgetExceeded(f"relation {name!r} has arity {arity}, above the encoding cap {max_arity}")
        out[name] = arity
    return out


def _mark_of(s: Structure, m: int) -> dict[int, int]:
    """Element -> mark index, for the marks ``M1 .. Mm``."""
    if m < 0:
        raise ValueError("m must be non-negative")
    return {e: i for i, e in s.marks().items() if i <= m}


def encode_m(s: Structure, m: int, max_arity: int = DEFAULT_MAX_ARITY) -> Structure:
    """The encoded structure: same domain, same unary relations, marked tuples moved to ``N`` symbols."""
    rels = _user_relations(s, max_arity)
    mark = _mark_of(s, m)
    out_rel: dict[str, list] = {}
    out_ar: dict[str, int] = {}
    for name, arity in s.arities.items():
        if name not in rels:
            out_rel[name] = list(s.relations[name])
            out_ar[name] = arity
    for name, k in rels.items():
        out_rel[name] = []
        out_ar[name] = k
        for sym, positions, _ in encoded_symbols(name, k, m):
            out_rel[sym] = []
            out_ar[sym] = k - len(positions)
        for t in s.relations[name]:
            positions = tuple(i + 1 for i, e in enumerate(t) if e in mark)
            if not positions:
                out_rel[name].append(t)
            elif len(positions) < k:
                sym = encoded_symbol(name, positions, tuple(mark[t[i - 1]] for i in positions), k)
                out_rel[sym].append(tuple(e for i, e in enumerate(t, 1) if i not in positions))
    return make_structure(s.size, out_rel, out_ar, s.weights, s.names)


@dataclass(frozen=True)
class EliminationTheory:
    """For each relation of arity > 1, the mark-index tuples ``Z`` realised by marked elements."""

    m: int
    patterns: Mapping[str, frozenset]
    arities: Mapping[str, int]

    def to_json(self) -> dict:
        return {r: [list(z) for z in sorted(self.patterns[r])] for r in sorted(self.patterns)}

    @classmethod
    def from_json(cls, data: Mapping, m: int, arities: Mapping[str, int]) -> "EliminationTheory":
        patterns = {r: frozenset(tuple(z) for z in zs) for r, zs in data.items()}
        for r, zs in patterns.items():
            for z in zs:
                if len(z) != arities[r] or not all(1 <= i <= m for i in z):
                    raise ValueError(f"pattern {z} is not in [m]^k for {r}")
        return cls(m, patterns, {r: arities[r] for r in patterns})

    def sentences(self) -> dict[str, Formula]:
        return {r: varsigma(r, self.patterns[r], self.m, self.arities[r]) for r in self.patterns}


def elimination_theory(s: Structure, m: int, max_arity: int = DEFAULT_MAX_ARITY) -> EliminationTheory:
    rels = _user_relations(s, max_arity)
    mark = _mark_of(s, m)
    patterns = {}
    for name in rels:
        patterns[name] = frozenset(
            tuple(mark[e] for e in t) for t in s.relations[name] if all(e in mark for e in t))
    return EliminationTheory(m, patterns, rels)


def _xs(k: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(1, k + 1))


def _marked_tuple_exists(rel: str, z: tuple[int, ...]) -> Formula:
    xs = _xs(len(z))
    f: Formula = conj(Atom(rel, xs), *(Atom(f"M{i}", (x,)) for i, x in zip(z, xs)))
    for x in reversed(xs):
        f = Exists(x, f)
    return f


def varsigma(rel: str, pattern, m: int, arity: int) -> Formula:
    """Sentence saying that the marked ``rel``-tuples realise exactly the index tuples in ``pattern``."""
    present = [_marked_tuple_exists(rel, z) for z in sorted(pattern)]
    absent = [_marked_tuple_exists(rel, z)
              for z in itertools.product(range(1, m + 1), repeat=arity) if z not in pattern]
    return conj(conj(*present), Not(disj(*absent)))


def _unmarked(x: str, m: int) -> list[Formula]:
    return [Not(Atom(f"M{j}", (x,))) for j in range(1, m + 1)]


def eta(rel: str, pattern, m: int, args: tuple[str, ...]) -> Formula:
    """Quantifier-free reconstruction of ``rel(args)`` on the encoded structure."""
    k = len(args)
    marked = [conj(*(Atom(f"M{i}", (x,)) for i, x in zip(z, args))) for z in sorted(pattern)]
    plain = conj(Atom(rel, args), *(u for x in args for u in _unmarked(x, m)))
    mixed = []
    for sym, positions, marks in encoded_symbols(rel, k, m):
        free = tuple(x for i, x in enumerate(args, 1) if i not in positions)
        parts = [Atom(sym, free)]
        parts += [Atom(f"M{f}", (args[i - 1],)) for i, f in zip(positions, marks)]
        parts += [u for i, x in enumerate(args, 1) if i not in positions for u in _unmarked(x, m)]
        mixed.append(conj(*parts))
    return disj(*marked, plain, *mixed)


def eliminate_formula(f: Formula, theory: EliminationTheory) -> Formula:
    """Replace every relation of arity > 1 by its reconstruction formula.

    ``f`` may use only base symbols: marks, encoding symbols and distance
    atoms are rejected (distances change under encoding).
    """
    if isinstance(f, (Top, Bottom, Eq)):
        return f
    if isinstance(f, Dist):
        raise FormulaError("distance atoms are not base symbols and cannot be eliminated")
    if isinstance(f, Atom):
        if is_mark_symbol(f.rel) or is_encoded_symbol(f.rel):
            raise FormulaError(f"symbol {f.rel!r} is outside the base signature")
        if len(f.args) == 1:
            return f
        if f.rel not in theory.patterns:
            raise FormulaError(f"elimination theory has no pattern for {f.rel!r}")
        if theory.arities[f.rel] != len(f.args):
            raise FormulaError(f"relation {f.rel} has arity {theory.arities[f.rel]}, got {len(f.args)} arguments")
        return eta(f.rel, theory.patterns[f.rel], theory.m, f.args)
    if isinstance(f, Not):
        return Not(eliminate_formula(f.body, theory))
    if isinstance(f, And):
        return And(tuple(eliminate_formula(p, theory) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(eliminate_formula(p, theory) for p in f.parts))
    if isinstance(f, Implies):
        return Implies(eliminate_formula(f.left, theory), eliminate_formula(f.right, theory))
    if isinstance(f, (Exists, Forall, Qm)):
        return type(f)(f.var, eliminate_formula(f.body, theory))
    raise TypeError(f"not a formula: {f!r}")


def symbol_count(arity: int, m: int) -> int:
    """Number of ``N`` symbols generated for one relation: ``sum_{i=1}^{k-1} C(k, i) m^i``."""
    return sum(math.comb(arity, i) * m ** i for i in range(1, arity))
