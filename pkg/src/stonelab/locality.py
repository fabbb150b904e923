"""Local types as rooted-ball isomorphism classes, reweighting, and the local product estimate.

Two elements have the same local type at radius ``d`` when their rooted
``d``-balls (induced substructures, marks included) are isomorphic by a map
sending root to root.  Classes are identified by a canonical code computed
by individualisation-refinement, so codes can be compared across structures.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Mapping, Sequence

from .errors import BudgetExceeded, EvaluationError
from .evaluation import DEFAULT_BUDGET, satisfies, stone_pairing_exact
from .logic import Dist, Formula, free_variables
from .structures import (
    WEIGHT_TOL, Structure, StructureError, ball, disjoint_union, induced_substructure, make_structure,
)

__all__ = [
    "DEFAULT_MAX_BALL",
    "LocalProductEstimate",
    "LocalityError",
    "TypeClass",
    "TypePartition",
    "canonical_code",
    "local_product_estimate",
    "local_types",
    "reweight_to_targets",
    "rooted_ball",
]

DEFAULT_MAX_BALL = 12


class LocalityError(EvaluationError):
    """The formula's truth differs between the structure and its local balls."""


# ---------------------------------------------------------------- canonical labeling

class _Canonizer:
    def __init__(self, size: int, relations: Mapping[str, frozenset], root: int):
        self.size = size
        self.relations = {r: t for r, t in relations.items() if t}
        self.root = root
        self.incident: list[list] = [[] for _ in range(size)]
        for name in sorted(self.relations):
            for t in self.relations[name]:
                for e in set(t):
                    self.incident[e].append((name, t))
        self.best = None
        self.best_lab = None
        self.automorphisms: list[tuple[int, ...]] = []

    def initial_cells(self) -> list[list[int]]:
        unary = [[] for _ in range(self.size)]
        for name, tuples in self.relations.items():
            for t in tuples:
                if len(t) == 1:
                    unary[t[0]].append(name)
        key = {v: (v != self.root, tuple(sorted(unary[v]))) for v in range(self.size)}
        cells = []
        for _, group in itertools.groupby(sorted(range(self.size), key=key.get), key=key.get):
            cells.append(list(group))
        return cells

    def refine(self, cells: list[list[int]]) -> list[list[int]]:
        while True:
            color = {}
            for ci, cell in enumerate(cells):
                for v in cell:
                    color[v] = ci
            new = []
            for cell in cells:
                if len(cell) == 1:
                    new.append(cell)
                    continue
                sig = {}
                for v in cell:
                    sig[v] = sorted((name, tuple((color[e], e == v) for e in t)) for name, t in self.incident[v])
                for _, group in itertools.groupby(sorted(cell, key=sig.get), key=sig.get):
                    new.append(list(group))
            if len(new) == len(cells):
                return new
            cells = new

    def encode(self, lab: Sequence[int]) -> tuple:
        rels = []
        for name in sorted(self.relations):
            rels.append((name, tuple(sorted(tuple(lab[e] for e in t) for t in self.relations[name]))))
        return (self.size, tuple(rels))

    def leaf(self, cells):
        lab = [0] * self.size
        for ci, cell in enumerate(cells):
            lab[cell[0]] = ci
        code = self.encode(lab)
        if self.best is None or code < self.best:
            self.best, self.best_lab = code, lab
        elif code == self.best:
            inv = [0] * self.size
            for v, c in enumerate(self.best_lab):
                inv[c] = v
            self.automorphisms.append(tuple(inv[lab[v]] for v in range(self.size)))

    def orbit_roots(self, prefix: tuple[int, ...], elements: list[int]) -> dict[int, int]:
        parent = {v: v for v in range(self.size)}

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v
        for g in self.automorphisms:
            if all(g[v] == v for v in prefix):
                for v in range(self.size):
                    a, b = find(v), find(g[v])
                    if a != b:
                        parent[max(a, b)] = min(a, b)
        return {v: find(v) for v in elements}

    def search(self, cells, prefix):
        cells = self.refine(cells)
        target = next((ci for ci, cell in enumerate(cells) if len(cell) > 1), None)
        if target is None:
            self.leaf(cells)
            return
        candidates = sorted(cells[target])
        explored_roots = set()
        for v in candidates:
            if explored_roots:
                roots = self.orbit_roots(prefix, [v] + candidates)
                if any(roots[v] == roots[u] for u in explored_roots):
                    continue
            rest = [u for u in cells[target] if u != v]
            self.search(cells[:target] + [[v], rest] + cells[target + 1:], prefix + (v,))
            explored_roots.add(v)

    def run(self) -> tuple:
        if self.size == 0:
            return (0, ())
        self.search(self.initial_cells(), ())
        return self.best


def canonical_code(s: Structure, root: int) -> str:
    """Canonical text code of ``s`` rooted at ``root``; equal codes iff rooted-isomorphic."""
    size, rels = _Canonizer(s.size, s.relations, root).run()
    body = ";".join(f"{name}:" + " ".join("-".join(map(str, t)) for t in tuples) for name, tuples in rels)
    return f"{size}|{body}"


def rooted_ball(s: Structure, v: int, d: int, max_ball: int | None = DEFAULT_MAX_BALL) -> tuple[Structure, int]:
    """Induced substructure on the ``d``-ball of ``v`` and the position of ``v`` in it."""
    members = ball(s, v, d)
    if max_ball is not None and len(members) > max_ball:
        raise BudgetExceeded(f"ball of radius {d} around {v} has {len(members)} elements; "
                             f"canonical labeling budget is {max_ball}")
    sub, index = induced_substructure(s, members)
    return sub, index[v]


# ---------------------------------------------------------------- partitions

@dataclass(frozen=True)
class TypeClass:
    code: str
    members: tuple[int, ...]


@dataclass(frozen=True)
class TypePartition:
    """Elements grouped by rooted ``radius``-ball isomorphism type.

    Classes are ordered by their smallest member; ``frequencies[i]`` is the
    total weight of class ``i``.
    """

    radius: int
    classes: tuple[TypeClass, ...]
    frequencies: tuple
    class_index: tuple[int, ...] = field(repr=False, default=())

    def class_of(self, v: int) -> int:
        return self.class_index[v]

    @property
    def codes(self) -> list[str]:
        return [c.code for c in self.classes]

    def positive_classes(self) -> list[int]:
        return [i for i, f in enumerate(self.frequencies) if f > 0]

    def to_json(self) -> dict:
        return {
            "radius": self.radius,
            "classes": [
                {"code": c.code, "members": list(c.members), "frequency": float(f),
                 **({"exact": str(f)} if isinstance(f, Fraction) else {})}
                for c, f in zip(self.classes, self.frequencies)
            ],
        }


def local_types(s: Structure, d: int, max_ball: int | None = DEFAULT_MAX_BALL) -> TypePartition:
    """Partition the domain by rooted ``d``-ball isomorphism type."""
    if d < 0:
        raise ValueError("radius must be non-negative")
    groups: dict[str, list[int]] = {}
    for v in range(s.size):
        sub, root = rooted_ball(s, v, d, max_ball)
        groups.setdefault(canonical_code(sub, root), []).append(v)
    classes = sorted((TypeClass(code, tuple(members)) for code, members in groups.items()),
                     key=lambda c: c.members[0])
    index = [0] * s.size
    for i, c in enumerate(classes):
        for v in c.members:
            index[v] = i
    freqs = tuple(s.mass(c.members) for c in classes)
    return TypePartition(d, tuple(classes), freqs, tuple(index))


def reweight_to_targets(s: Structure, tp: TypePartition, targets: Mapping[str, object] | Sequence) -> Structure:
    """Rescale weights inside each class so that class masses equal ``targets``.

    ``targets`` maps class codes to masses (missing codes get 0) or lists one
    mass per class.  Each element keeps its share of its class:
    ``w'(v) = w(v) / mass(class) * target(class)``.
    """
    codes = tp.codes
    if isinstance(targets, Mapping):
        unknown = [c for c in targets if c not in codes]
        if unknown:
            raise StructureError(f"target given for {len(unknown)} code(s) that are not classes of the partition")
        tvec = [targets.get(c, 0) for c in codes]
    else:
        tvec = list(targets)
        if len(tvec) != len(codes):
            raise StructureError(f"{len(tvec)} targets for {len(codes)} classes")
    exact = s.is_exact and all(isinstance(t, Rational) for t in tvec)
    tvec = [Fraction(t) if exact else float(t) for t in tvec]
    if any(t < 0 for t in tvec):
        raise StructureError("targets must be non-negative")
    total = sum(tvec, Fraction(0)) if exact else math.fsum(tvec)
    if (exact and total != 1) or abs(total - 1) > WEIGHT_TOL:
        raise StructureError(f"targets sum to {float(total)!r}, not 1")
    for i, (t, base) in enumerate(zip(tvec, tp.frequencies)):
        if t > 0 and base == 0:
            raise StructureError(f"positive target on class {i}, which has zero base mass")
    w = s.weight_vector
    new = []
    for v in range(s.size):
        i = tp.class_of(v)
        base = tp.frequencies[i]
        if base == 0:
            new.append(Fraction(0) if exact else 0.0)
        elif exact:
            new.append(Fraction(w[v]) / base * tvec[i])
        else:
            new.append(float(w[v]) / float(base) * tvec[i])
    return make_structure(s.size, s.relations, s.arities, new, s.names)


# ---------------------------------------------------------------- local product estimate

@dataclass(frozen=True)
class LocalProductEstimate:
    """Product-of-types value of a ``d``-local formula next to its true pairing.

    ``pattern`` lists the class tuples whose far-apart representatives
    satisfy the formula; ``tilde`` sums the products of their frequencies.
    """

    tilde: object
    bound: object
    exact: object
    radius: int
    pattern: tuple[tuple[int, ...], ...]
    partition: TypePartition

    @property
    def gap(self):
        return abs(self.exact - self.tilde)

    @property
    def within_bound(self) -> bool:
        return self.gap <= self.bound

    def to_json(self) -> dict:
        return {"radius": self.radius, "tilde": float(self.tilde), "exact": float(self.exact),
                "gap": float(self.gap), "bound": float(self.bound), "within_bound": self.within_bound,
                "classes": len(self.partition.classes), "pattern_size": len(self.pattern)}


def _check_locality(s: Structure, f: Formula, fv: list[str], d: int, checks: int, seed: int,
                    budget: int):
    rng = random.Random(seed)
    for _ in range(checks):
        assignment = {v: rng.randrange(s.size) for v in fv}
        members = set()
        for e in assignment.values():
            members |= ball(s, e, d)
        local, index = induced_substructure(s, members)
        here = satisfies(s, f, assignment, budget)
        there = satisfies(local, f, {v: index[e] for v, e in assignment.items()}, budget)
        if here != there:
            raise LocalityError(f"formula is not {d}-local: assignment {assignment} evaluates to {here} "
                                f"globally but {there} on the union of balls")


def local_product_estimate(s: Structure, f: Formula, d: int, max_ball: int | None = DEFAULT_MAX_BALL,
                           checks: int = 5, seed: int = 0, budget: int = DEFAULT_BUDGET) -> LocalProductEstimate:
    """Compare ``<f, s>`` with the value obtained from local types alone.

    ``f`` is assumed ``d``-local; this is spot-checked on ``checks`` random
    assignments (:class:`LocalityError` on disagreement).  For every tuple of
    classes, ``f`` is evaluated on the disjoint union of the representatives'
    balls, which puts the free variables pairwise at infinite distance.  The
    returned ``bound`` is ``C(p, 2) * <dist<=2d(x1, x2), s>``.
    """
    fv = free_variables(f)
    p = len(fv)
    if p < 1:
        raise ValueError("the formula needs at least one free variable")
    if s.size == 0:
        raise ValueError("empty structure")
    tp = local_types(s, d, max_ball)
    _check_locality(s, f, fv, d, checks, seed, budget)
    balls = []
    for c in tp.classes:
        balls.append(rooted_ball(s, c.members[0], d, max_ball))
    live = tp.positive_classes()
    pattern = []
    tilde = Fraction(0) if s.is_exact else 0.0
    for combo in itertools.product(live, repeat=p):
        union, offsets = disjoint_union([balls[i][0] for i in combo])
        assignment = {v: offsets[j] + balls[i][1] for j, (v, i) in enumerate(zip(fv, combo))}
        if satisfies(union, f, assignment, budget):
            pattern.append(combo)
            term = Fraction(1) if s.is_exact else 1.0
            for i in combo:
                term *= tp.frequencies[i]
            tilde += term
    near = stone_pairing_exact(s, Dist("x1", "x2", 2 * d), budget).value
    bound = math.comb(p, 2) * near
    exact = stone_pairing_exact(s, f, budget).value
    return LocalProductEstimate(tilde, bound, exact, d, tuple(pattern), tp)
