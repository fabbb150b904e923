"""Model checking and Stone pairings on finite (weighted) structures.

Formulas are compiled into closures over a slot array, one slot per
variable binder.  Distance atoms read the structure's memoised BFS rows.
Every atom evaluation counts against a budget; exceeding it raises
:class:`~stonelab.errors.BudgetExceeded` rather than falling back to
sampling.

Semantics of ``Qm x. psi``: the total weight of the elements ``x`` that
satisfy ``psi`` is positive.  On a finite structure this is the same as the
existence of a witness of positive weight.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from .errors import BudgetExceeded, EvaluationError
from .logic import (
    And, Eq, Exists, Formula, Not, Top, free_variables,
)
from .structures import Structure, is_mark_symbol

__all__ = [
    "DEFAULT_BUDGET",
    "PairingResult",
    "compile_formula",
    "hoeffding_halfwidth",
    "qm_satisfies",
    "satisfies",
    "satisfying_set",
    "stone_pairing",
    "stone_pairing_exact",
    "stone_pairing_sampled",
]

DEFAULT_BUDGET = 10**8
CONFIDENCE = 0.99

Compiled = Callable[[list], bool]


class _Counter:
    __slots__ = ("count", "budget")

    def __init__(self, budget: int):
        self.count = 0
        self.budget = budget


class _Compiler:
    def __init__(self, s: Structure, budget: int):
        self.s = s
        self.n = s.size
        self.domain = range(s.size)
        self.positive = tuple(e for e, w in enumerate(s.weight_vector) if w > 0)
        self.counter = _Counter(budget)
        self.nslots = 0

    def new_slot(self) -> int:
        self.nslots += 1
        return self.nslots - 1

    def tick(self):
        c = self.counter
        c.count += 1
        if c.count > c.budget:
            raise BudgetExceeded(
                f"more than {c.budget} atom evaluations; raise the budget or use sampling")

    def slot(self, slots: Mapping[str, int], var: str) -> int:
        try:
            return slots[var]
        except KeyError:
            raise EvaluationError(f"variable {var!r} is free but not assigned") from None

    def compile(self, f: Formula, slots: Mapping[str, int]) -> Compiled:
        method = getattr(self, "_c_" + type(f).__name__, None)
        if method is None:
            raise TypeError(f"not a formula: {f!r}")
        return method(f, slots)

    def _c_Top(self, f, slots):
        return lambda env: True

    def _c_Bottom(self, f, slots):
        return lambda env: False

    def _c_Eq(self, f, slots):
        i, j = self.slot(slots, f.left), self.slot(slots, f.right)
        tick = self.tick

        def eq(env):
            tick()
            return env[i] == env[j]
        return eq

    def _c_Atom(self, f, slots):
        s = self.s
        if f.rel not in s.relations:
            if not is_mark_symbol(f.rel):
                raise EvaluationError(f"relation symbol {f.rel!r} is not interpreted in the structure")
            if len(f.args) != 1:
                raise EvaluationError(f"mark {f.rel} is unary")
            tuples = frozenset()
        else:
            arity = s.arities[f.rel]
            if arity != len(f.args):
                raise EvaluationError(f"relation {f.rel} has arity {arity}, used with {len(f.args)} arguments")
            tuples = s.relations[f.rel]
        idx = tuple(self.slot(slots, a) for a in f.args)
        tick = self.tick
        if len(idx) == 1:
            members = frozenset(t[0] for t in tuples)
            (i,) = idx

            def unary(env):
                tick()
                return env[i] in members
            return unary
        if len(idx) == 2:
            i, j = idx

            def binary(env):
                tick()
                return (env[i], env[j]) in tuples
            return binary

        def atom(env):
            tick()
            return tuple(env[k] for k in idx) in tuples
        return atom

    def _c_Dist(self, f, slots):
        i, j = self.slot(slots, f.left), self.slot(slots, f.right)
        bound, within = f.bound, f.within
        rows = self.s.distances
        tick = self.tick

        def dist(env):
            tick()
            return (rows(env[i])[env[j]] <= bound) == within
        return dist

    def _c_Not(self, f, slots):
        body = self.compile(f.body, slots)
        return lambda env: not body(env)

    def _c_And(self, f, slots):
        parts = tuple(self.compile(p, slots) for p in f.parts)

        def conj(env):
            for p in parts:
                if not p(env):
                    return False
            return True
        return conj

    def _c_Or(self, f, slots):
        parts = tuple(self.compile(p, slots) for p in f.parts)

        def disj(env):
            for p in parts:
                if p(env):
                    return True
            return False
        return disj

    def _c_Implies(self, f, slots):
        left, right = self.compile(f.left, slots), self.compile(f.right, slots)
        return lambda env: (not left(env)) or right(env)

    def _bind(self, var, slots):
        k = self.new_slot()
        inner = dict(slots)
        inner[var] = k
        return k, inner

    def _c_Exists(self, f, slots):
        fast = self._distinct_witnesses(f, slots)
        if fast is not None:
            return fast
        k, inner = self._bind(f.var, slots)
        body = self.compile(f.body, inner)
        domain = self.domain

        def exists(env):
            for e in domain:
                env[k] = e
                if body(env):
                    return True
            return False
        return exists

    def _c_Forall(self, f, slots):
        k, inner = self._bind(f.var, slots)
        body = self.compile(f.body, inner)
        domain = self.domain

        def forall(env):
            for e in domain:
                env[k] = e
                if not body(env):
                    return False
            return True
        return forall

    def _c_Qm(self, f, slots):
        k, inner = self._bind(f.var, slots)
        body = self.compile(f.body, inner)
        positive = self.positive

        def qm(env):
            for e in positive:
                env[k] = e
                if body(env):
                    return True
            return False
        return qm

    def _distinct_witnesses(self, f: Exists, slots):
        """Evaluate ``exists y1..yk (/\\ chi_i(y_i) /\\ pairwise y_i != y_j)`` by bipartite matching.

        Applies only when every conjunct mentions at most one of the block
        variables apart from the pairwise inequalities, which must all be
        present.  Returns ``None`` when the shape does not match.
        """
        chain = []
        g: Formula = f
        while isinstance(g, Exists):
            chain.append(g.var)
            g = g.body
        if len(chain) < 2 or len(set(chain)) != len(chain):
            return None
        block = set(chain)
        conjuncts = list(_flatten_and(g))
        per_var: dict[str, list] = {v: [] for v in chain}
        outer = []
        pairs = set()
        for c in conjuncts:
            if isinstance(c, Not) and isinstance(c.body, Eq):
                a, b = c.body.left, c.body.right
                if a in block and b in block and a != b:
                    pairs.add(frozenset((a, b)))
                    continue
            fv = set(free_variables(c)) & block
            if len(fv) > 1:
                return None
            if fv:
                per_var[fv.pop()].append(c)
            else:
                outer.append(c)
        if len(pairs) != len(chain) * (len(chain) - 1) // 2:
            return None
        outer_fns = tuple(self.compile(c, slots) for c in outer)
        tests = []
        for v in chain:
            k, inner = self._bind(v, slots)
            tests.append((k, tuple(self.compile(c, inner) for c in per_var[v])))
        domain = self.domain

        def distinct_exists(env):
            for o in outer_fns:
                if not o(env):
                    return False
            candidates = []
            for k, fns in tests:
                cand = []
                for e in domain:
                    env[k] = e
                    for t in fns:
                        if not t(env):
                            break
                    else:
                        cand.append(e)
                if not cand:
                    return False
                candidates.append(cand)
            return _has_distinct_representatives(candidates)
        return distinct_exists


def _flatten_and(f: Formula):
    if isinstance(f, And):
        for p in f.parts:
            yield from _flatten_and(p)
    elif not isinstance(f, Top):
        yield f


def _has_distinct_representatives(candidates: list[list[int]]) -> bool:
    """Kuhn's augmenting-path matching of every candidate list to a distinct element."""
    match: dict[int, int] = {}

    def augment(i, seen):
        for e in candidates[i]:
            if e in seen:
                continue
            seen.add(e)
            if e not in match or augment(match[e], seen):
                match[e] = i
                return True
        return False

    for i in sorted(range(len(candidates)), key=lambda i: len(candidates[i])):
        if not augment(i, set()):
            return False
    return True


def compile_formula(s: Structure, f: Formula, variables: list[str] | None = None,
                    budget: int = DEFAULT_BUDGET):
    """Compile ``f`` against ``s``.

    Returns ``(fn, nslots, counter)`` where ``fn(env)`` evaluates ``f`` with
    ``env[i]`` holding the value of ``variables[i]`` (default: the free
    variables in first-occurrence order).
    """
    if variables is None:
        variables = free_variables(f)
    comp = _Compiler(s, budget)
    slots = {v: comp.new_slot() for v in variables}
    fn = comp.compile(f, slots)
    return fn, comp.nslots, comp.counter


def satisfies(s: Structure, f: Formula, assignment: Mapping[str, int] | None = None,
              budget: int = DEFAULT_BUDGET) -> bool:
    """Tarskian satisfaction of ``f`` in ``s`` under ``assignment``."""
    assignment = dict(assignment or {})
    fv = free_variables(f)
    missing = [v for v in fv if v not in assignment]
    if missing:
        raise EvaluationError(f"unbound free variable(s): {', '.join(missing)}")
    for v in fv:
        if not 0 <= assignment[v] < s.size:
            raise EvaluationError(f"{v} = {assignment[v]} is outside the domain")
    fn, nslots, _ = compile_formula(s, f, fv, budget)
    env = [assignment[v] for v in fv] + [0] * (nslots - len(fv))
    return bool(fn(env))


def qm_satisfies(s: Structure, f: Formula, budget: int = DEFAULT_BUDGET) -> bool:
    """Truth of a sentence (possibly using ``Qm``) under the weighted semantics."""
    fv = free_variables(f)
    if fv:
        raise EvaluationError(f"expected a sentence, got free variables {fv}")
    return satisfies(s, f, {}, budget)


def satisfying_set(s: Structure, f: Formula, variables: list[str] | None = None,
                   budget: int = DEFAULT_BUDGET) -> set[tuple[int, ...]]:
    """All satisfying assignments, as tuples ordered like ``variables``."""
    if variables is None:
        variables = free_variables(f)
    fn, nslots, _ = compile_formula(s, f, list(variables), budget)
    p = len(variables)
    env = [0] * nslots
    out = set()
    for tup in itertools.product(range(s.size), repeat=p):
        env[:p] = tup
        if fn(env):
            out.add(tup)
    return out


@dataclass(frozen=True)
class PairingResult:
    """A Stone pairing value.

    In exact mode ``value`` is a ``Fraction`` whenever the weights are
    rational.  In sampled mode ``value = hits / samples`` as a ``Fraction``
    and ``halfwidth`` is the 99% Hoeffding half-width.
    """

    value: Fraction | float
    mode: str
    free_variables: tuple[str, ...] = ()
    samples: int | None = None
    seed: int | None = None
    hits: int | None = None
    halfwidth: float = 0.0
    evaluations: int = 0

    def __float__(self):
        return float(self.value)

    def interval(self) -> tuple[float, float]:
        v = float(self.value)
        return max(0.0, v - self.halfwidth), min(1.0, v + self.halfwidth)

    def to_json(self) -> dict:
        out = {"value": float(self.value), "mode": self.mode, "free_variables": list(self.free_variables)}
        if isinstance(self.value, Fraction):
            out["exact"] = f"{self.value.numerator}/{self.value.denominator}"
        if self.mode == "sampled":
            out.update(samples=self.samples, seed=self.seed, hits=self.hits, ci_halfwidth=self.halfwidth)
        return out


def stone_pairing_exact(s: Structure, f: Formula, budget: int = DEFAULT_BUDGET) -> PairingResult:
    """Weighted measure of the satisfying set of ``f`` under the product of element weights.

    Elements of weight zero are skipped.  For a sentence the value is its
    truth value (1 or 0).
    """
    fv = free_variables(f)
    p = len(fv)
    fn, nslots, counter = compile_formula(s, f, fv, budget)
    env = [0] * nslots
    w = s.weight_vector
    if p == 0:
        value = Fraction(1) if fn(env) else Fraction(0)
        return PairingResult(value, "exact", (), evaluations=counter.count)
    support = [e for e in range(s.size) if w[e] > 0]
    if s.is_uniform:
        hits = 0
        for tup in itertools.product(support, repeat=p):
            env[:p] = tup
            if fn(env):
                hits += 1
        value = Fraction(hits, s.size ** p)
    elif s.is_exact:
        value = Fraction(0)
        for tup in itertools.product(support, repeat=p):
            env[:p] = tup
            if fn(env):
                prod = Fraction(1)
                for e in tup:
                    prod *= w[e]
                value += prod
    else:
        terms = []
        for tup in itertools.product(support, repeat=p):
            env[:p] = tup
            if fn(env):
                terms.append(math.prod(w[e] for e in tup))
        value = math.fsum(terms)
    return PairingResult(value, "exact", tuple(fv), evaluations=counter.count)


def hoeffding_halfwidth(samples: int, confidence: float = CONFIDENCE) -> float:
    """Half-width ``sqrt(ln(2/alpha) / (2 N))`` of the two-sided Hoeffding interval."""
    alpha = 1.0 - confidence
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * samples))


def draw_assignments(s: Structure, p: int, samples: int, seed: int) -> np.ndarray:
    """Independent weighted draws, shape ``(samples, p)``.

    Sample ``i`` consumes uniforms ``i*p .. i*p+p-1`` of a Philox stream keyed
    by ``seed`` and inverts the cumulative weight vector, so a given
    ``(seed, samples)`` always yields the same assignments.
    """
    weights = np.asarray([float(x) for x in s.weight_vector], dtype=np.float64)
    cdf = np.cumsum(weights)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    u = rng.random((samples, p)) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, s.size - 1)


def stone_pairing_sampled(s: Structure, f: Formula, samples: int, seed: int = 0,
                          budget: int = DEFAULT_BUDGET) -> PairingResult:
    """Monte Carlo estimate of the Stone pairing with a 99% Hoeffding half-width."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    fv = free_variables(f)
    p = len(fv)
    fn, nslots, counter = compile_formula(s, f, fv, budget)
    env = [0] * nslots
    if p == 0:
        truth = bool(fn(env))
        return PairingResult(Fraction(int(truth)), "sampled", (), samples=samples, seed=seed,
                             hits=samples if truth else 0, halfwidth=0.0, evaluations=counter.count)
    draws = draw_assignments(s, p, samples, seed).tolist()
    hits = 0
    for row in draws:
        env[:p] = row
        if fn(env):
            hits += 1
    return PairingResult(Fraction(hits, samples), "sampled", tuple(fv), samples=samples, seed=seed,
                         hits=hits, halfwidth=hoeffding_halfwidth(samples), evaluations=counter.count)


def stone_pairing(s: Structure, f: Formula, samples: int | None = None, seed: int = 0,
                  budget: int = DEFAULT_BUDGET) -> PairingResult:
    if samples is None:
        return stone_pairing_exact(s, f, budget)
    return stone_pairing_sampled(s, f, samples, seed, budget)
