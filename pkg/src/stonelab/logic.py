"""First-order formulas: AST, text grammar, printer and named formula families.

Grammar (whitespace is insignificant)::

    formula  := quant | impl
    quant    := ("exists" | "forall" | "Qm") VAR "." formula
    impl     := disj ["->" formula]                 # right associative
    disj     := conj ("|" conj)*
    conj     := unary ("&" unary)*
    unary    := "!" unary | quant | atom | "(" formula ")"
    atom     := "true" | "false" | VAR "=" VAR | VAR "!=" VAR
              | "dist<=" INT "(" VAR "," VAR ")" | "dist>" INT "(" VAR "," VAR ")"
              | REL "(" VAR ("," VAR)* ")"

Variables match ``[a-z][a-z0-9]*``; relation symbols start with an upper
case letter.  Quantifiers extend as far right as possible.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .structures import Signature, is_mark_symbol

__all__ = [
    "And", "Atom", "Bottom", "Dist", "Eq", "Exists", "Forall", "Formula", "FormulaError",
    "FormulaInfo", "Implies", "Not", "Or", "Qm", "Top",
    "canned_formulas", "conj", "phi_probe", "psi_probe", "delta", "disj", "formula_info",
    "free_variables", "fresh_variable", "hat_delta", "mtp_phi_prime", "mtp_psi_prime",
    "ordered_free_variables", "parse_formula", "parse_formula_file", "quantifier_rank",
    "rename_free", "symbols", "to_text", "variables", "zeta",
]


class FormulaError(ValueError):
    """Syntax or well-formedness error in a formula."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)

    def __and__(self, other):
        return conj(self, other)

    def __or__(self, other):
        return disj(self, other)

    def __invert__(self):
        return Not(self)


@dataclass(frozen=True, repr=False)
class Top(Formula):
    pass


@dataclass(frozen=True, repr=False)
class Bottom(Formula):
    pass


@dataclass(frozen=True, repr=False)
class Eq(Formula):
    left: str
    right: str


@dataclass(frozen=True, repr=False)
class Atom(Formula):
    rel: str
    args: tuple[str, ...]


@dataclass(frozen=True, repr=False)
class Dist(Formula):
    """``dist<=bound(left, right)`` when ``within`` else ``dist>bound(left, right)``."""

    left: str
    right: str
    bound: int
    within: bool = True


@dataclass(frozen=True, repr=False)
class Not(Formula):
    body: Formula


@dataclass(frozen=True, repr=False)
class And(Formula):
    parts: tuple[Formula, ...]


@dataclass(frozen=True, repr=False)
class Or(Formula):
    parts: tuple[Formula, ...]


@dataclass(frozen=True, repr=False)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, repr=False)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True, repr=False)
class Forall(Formula):
    var: str
    body: Formula


@dataclass(frozen=True, repr=False)
class Qm(Formula):
    """Positive-measure quantifier: the witnesses of ``body`` have positive weight."""

    var: str
    body: Formula


QUANTIFIERS = (Exists, Forall, Qm)

for _cls in (Top, Bottom, Eq, Atom, Dist, Not, And, Or, Implies, Exists, Forall, Qm):
    _cls.__repr__ = lambda self: f"<{type(self).__name__} {to_text(self)}>"


def conj(*parts: Formula) -> Formula:
    parts = tuple(parts)
    if not parts:
        return Top()
    if len(parts) == 1:
        return parts[0]
    return And(parts)


def disj(*parts: Formula) -> Formula:
    parts = tuple(parts)
    if not parts:
        return Bottom()
    if len(parts) == 1:
        return parts[0]
    return Or(parts)


# ---------------------------------------------------------------- lexer / parser

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<dist>dist(?P<op><=|>)(?P<bound>\d+))
  | (?P<arrow>->)
  | (?P<neq>!=)
  | (?P<sym>[!&|().,=])
  | (?P<rel>[A-Z][A-Za-z0-9_]*)
  | (?P<var>[a-z][a-z0-9]*)
""", re.VERBOSE)

_KEYWORDS = {"exists", "forall", "true", "false", "dist"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind == "ws":
            pass
        elif m.group("dist"):
            tokens.append(("dist", m.group("op") + m.group("bound"), pos))
        elif kind == "arrow":
            tokens.append(("->", "->", pos))
        elif kind == "neq":
            tokens.append(("!=", "!=", pos))
        elif kind == "sym":
            tokens.append((m.group(), m.group(), pos))
        elif kind == "rel":
            word = m.group()
            tokens.append(("Qm" if word == "Qm" else "rel", word, pos))
        else:
            word = m.group()
            tokens.append((word if word in _KEYWORDS else "var", word, pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, signature: Signature | None):
        self.tokens = _tokenize(text)
        self.i = 0
        self.signature = signature

    def peek(self) -> str:
        return self.tokens[self.i][0]

    def take(self, kind: str | None = None):
        tok = self.tokens[self.i]
        if kind is not None and tok[0] != kind:
            want = "variable" if kind == "var" else repr(kind)
            got = "end of input" if tok[0] == "eof" else repr(tok[1])
            raise FormulaError(f"expected {want}, got {got}", tok[2])
        self.i += 1
        return tok

    def parse(self) -> Formula:
        f = self.formula()
        self.take("eof")
        return f

    def formula(self) -> Formula:
        left = self.disjunction()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.formula())
        return left

    def disjunction(self) -> Formula:
        parts = [self.conjunction()]
        while self.peek() == "|":
            self.take()
            parts.append(self.conjunction())
        return disj(*parts)

    def conjunction(self) -> Formula:
        parts = [self.unary()]
        while self.peek() == "&":
            self.take()
            parts.append(self.unary())
        return conj(*parts)

    def unary(self) -> Formula:
        kind = self.peek()
        if kind == "!":
            self.take()
            return Not(self.unary())
        if kind in ("exists", "forall", "Qm"):
            self.take()
            var = self.take("var")[1]
            self.take(".")
            body = self.formula()
            return {"exists": Exists, "forall": Forall, "Qm": Qm}[kind](var, body)
        if kind == "(":
            self.take()
            f = self.formula()
            self.take(")")
            return f
        return self.atom()

    def atom(self) -> Formula:
        kind, value, pos = self.tokens[self.i]
        if kind == "true":
            self.take()
            return Top()
        if kind == "false":
            self.take()
            return Bottom()
        if kind == "dist":
            self.take()
            self.take("(")
            a = self.take("var")[1]
            self.take(",")
            b = self.take("var")[1]
            self.take(")")
            within = value.startswith("<=")
            return Dist(a, b, int(value[2:] if within else value[1:]), within)
        if kind == "var":
            a = self.take()[1]
            op = self.peek()
            if op not in ("=", "!="):
                raise FormulaError(f"expected '=' or '!=' after variable {a!r}", self.tokens[self.i][2])
            self.take()
            b = self.take("var")[1]
            return Eq(a, b) if op == "=" else Not(Eq(a, b))
        if kind == "rel":
            self.take()
            self.take("(")
            args = [self.take("var")[1]]
            while self.peek() == ",":
                self.take()
                args.append(self.take("var")[1])
            self.take(")")
            self._check_symbol(value, len(args), pos)
            return Atom(value, tuple(args))
        got = "end of input" if kind == "eof" else repr(value)
        raise FormulaError(f"unexpected {got}", pos)

    def _check_symbol(self, rel: str, nargs: int, pos: int):
        if is_mark_symbol(rel):
            if nargs != 1:
                raise FormulaError(f"mark symbol {rel} is unary, got {nargs} arguments", pos)
            return
        if self.signature is None:
            return
        arity = self.signature.arity(rel)
        if arity is None:
            raise FormulaError(f"unknown relation symbol {rel!r}", pos)
        if arity != nargs:
            raise FormulaError(f"relation {rel} has arity {arity}, got {nargs} arguments", pos)


def parse_formula(text: str, signature: Signature | None = None) -> Formula:
    """Parse ``text``; with a signature, relation symbols and arities are checked."""
    return _Parser(text, signature).parse()


def parse_formula_file(text: str, signature: Signature | None = None) -> list[Formula]:
    """One formula per line; blank lines and ``#`` comments are skipped."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(parse_formula(line, signature))
        except FormulaError as exc:
            raise FormulaError(f"line {lineno}: {exc}") from None
    return out


# ---------------------------------------------------------------- printer

_PREC = {Implies: 1, Or: 2, And: 3}


def to_text(f: Formula) -> str:
    """Canonical text; ``parse_formula(to_text(f)) == f``."""
    return _show(f, 0)


def _show(f: Formula, ctx: int) -> str:
    # ctx: binding strength required by the parent (0 = anything goes)
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bottom):
        return "false"
    if isinstance(f, Eq):
        return f"{f.left} = {f.right}"
    if isinstance(f, Atom):
        return f"{f.rel}({','.join(f.args)})"
    if isinstance(f, Dist):
        op = "<=" if f.within else ">"
        return f"dist{op}{f.bound}({f.left},{f.right})"
    if isinstance(f, Not):
        if isinstance(f.body, Eq):
            return f"{f.body.left} != {f.body.right}"
        inner = f.body
        if isinstance(inner, (Atom, Dist, Top, Bottom, Not)):
            return "!" + _show(inner, 4)
        return "!(" + _show(inner, 0) + ")"
    if isinstance(f, QUANTIFIERS):
        kw = {Exists: "exists", Forall: "forall", Qm: "Qm"}[type(f)]
        text = f"{kw} {f.var}. {_show(f.body, 0)}"
        return text if ctx == 0 else f"({text})"
    if isinstance(f, Implies):
        prec = _PREC[Implies]
        text = f"{_show(f.left, prec + 1)} -> {_show(f.right, prec)}"
        return text if ctx <= prec else f"({text})"
    if isinstance(f, (And, Or)):
        prec = _PREC[type(f)]
        sep = " & " if isinstance(f, And) else " | "
        text = sep.join(_show(p, prec + 1) for p in f.parts)
        return text if ctx <= prec else f"({text})"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------- analysis

def _walk_free(f: Formula, bound: frozenset, out: list, seen: set):
    if isinstance(f, (Eq, Dist)):
        names = (f.left, f.right)
    elif isinstance(f, Atom):
        names = f.args
    elif isinstance(f, (Top, Bottom)):
        return
    elif isinstance(f, Not):
        return _walk_free(f.body, bound, out, seen)
    elif isinstance(f, (And, Or)):
        for p in f.parts:
            _walk_free(p, bound, out, seen)
        return
    elif isinstance(f, Implies):
        _walk_free(f.left, bound, out, seen)
        _walk_free(f.right, bound, out, seen)
        return
    elif isinstance(f, QUANTIFIERS):
        return _walk_free(f.body, bound | {f.var}, out, seen)
    else:
        raise TypeError(f"not a formula: {f!r}")
    for v in names:
        if v not in bound and v not in seen:
            seen.add(v)
            out.append(v)


def free_variables(f: Formula) -> list[str]:
    """Free variables in order of first occurrence."""
    out: list[str] = []
    _walk_free(f, frozenset(), out, set())
    return out


def _natural_key(name: str):
    m = re.match(r"^([a-z]+)(\d*)$", name)
    if m is None:
        return (name, -1)
    return (m.group(1), int(m.group(2)) if m.group(2) else -1)


def ordered_free_variables(f: Formula) -> list[str]:
    """Free variables sorted by name (``x < y``, ``x1 < x2 < x10``)."""
    return sorted(free_variables(f), key=_natural_key)


def quantifier_rank(f: Formula) -> int:
    if isinstance(f, QUANTIFIERS):
        return 1 + quantifier_rank(f.body)
    if isinstance(f, Not):
        return quantifier_rank(f.body)
    if isinstance(f, (And, Or)):
        return max(quantifier_rank(p) for p in f.parts)
    if isinstance(f, Implies):
        return max(quantifier_rank(f.left), quantifier_rank(f.right))
    return 0


def subformulas(f: Formula) -> Iterator[Formula]:
    yield f
    if isinstance(f, Not):
        yield from subformulas(f.body)
    elif isinstance(f, (And, Or)):
        for p in f.parts:
            yield from subformulas(p)
    elif isinstance(f, Implies):
        yield from subformulas(f.left)
        yield from subformulas(f.right)
    elif isinstance(f, QUANTIFIERS):
        yield from subformulas(f.body)


def symbols(f: Formula) -> dict[str, int]:
    """Relation symbols used, with the number of arguments they take."""
    out: dict[str, int] = {}
    for g in subformulas(f):
        if isinstance(g, Atom):
            out.setdefault(g.rel, len(g.args))
    return out


def variables(f: Formula) -> set[str]:
    out = set()
    for g in subformulas(f):
        if isinstance(g, (Eq, Dist)):
            out.update((g.left, g.right))
        elif isinstance(g, Atom):
            out.update(g.args)
        elif isinstance(g, QUANTIFIERS):
            out.add(g.var)
    return out


@dataclass(frozen=True)
class FormulaInfo:
    free_variables: tuple[str, ...]
    quantifier_rank: int
    uses_qm: bool
    relations: frozenset[str]
    uses_distance: bool


def formula_info(f: Formula) -> FormulaInfo:
    """Free variables, quantifier rank (distance atoms count 0) and symbol usage."""
    subs = list(subformulas(f))
    return FormulaInfo(
        free_variables=tuple(free_variables(f)),
        quantifier_rank=quantifier_rank(f),
        uses_qm=any(isinstance(g, Qm) for g in subs),
        relations=frozenset(g.rel for g in subs if isinstance(g, Atom)),
        uses_distance=any(isinstance(g, Dist) for g in subs),
    )


# ---------------------------------------------------------------- substitution

def fresh_variable(avoid: Iterable[str], stem: str = "v") -> str:
    avoid = set(avoid)
    for k in itertools.count(1):
        name = f"{stem}{k}"
        if name not in avoid:
            return name
    raise AssertionError("unreachable")


def rename_free(f: Formula, mapping: Mapping[str, str]) -> Formula:
    """Simultaneously rename free variables, renaming bound ones to avoid capture."""
    mapping = {k: v for k, v in mapping.items() if k != v}
    if not mapping:
        return f
    return _rename(f, mapping)


def _rename(f: Formula, mapping: Mapping[str, str]) -> Formula:
    r = lambda v: mapping.get(v, v)  # noqa: E731
    if isinstance(f, (Top, Bottom)):
        return f
    if isinstance(f, Eq):
        return Eq(r(f.left), r(f.right))
    if isinstance(f, Dist):
        return Dist(r(f.left), r(f.right), f.bound, f.within)
    if isinstance(f, Atom):
        return Atom(f.rel, tuple(r(a) for a in f.args))
    if isinstance(f, Not):
        return Not(_rename(f.body, mapping))
    if isinstance(f, And):
        return And(tuple(_rename(p, mapping) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(_rename(p, mapping) for p in f.parts))
    if isinstance(f, Implies):
        return Implies(_rename(f.left, mapping), _rename(f.right, mapping))
    if isinstance(f, QUANTIFIERS):
        inner = {k: v for k, v in mapping.items() if k != f.var}
        if not inner:
            return f
        var = f.var
        targets = set(inner.values())
        if var in targets:
            new = fresh_variable(variables(f.body) | targets | set(inner), stem=var.rstrip("0123456789") or "v")
            inner[var] = new
            var = new
        return type(f)(var, _rename(f.body, inner))
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------- formula families

def delta(d: int, i: int) -> Formula:
    """``x1`` lies within distance ``d`` of the element marked ``M_i``."""
    _check_nonneg(d=d)
    if i < 1:
        raise FormulaError("mark index must be >= 1")
    return Exists("z", And((Dist("x1", "z", d), Atom(f"M{i}", ("z",)))))


def hat_delta(d: int) -> Formula:
    """``x1`` lies within distance ``d`` of some element marked ``Z_d``."""
    _check_nonneg(d=d)
    return Exists("z", And((Dist("x1", "z", d), Atom(f"Z{d}", ("z",)))))


def zeta(d: int) -> Formula:
    """The ``d``-ball around ``x1`` contains ``x2`` but no element marked ``Z_d``."""
    _check_nonneg(d=d)
    return And((
        Dist("x1", "x2", d),
        Forall("z", Implies(Dist("x1", "z", d), Not(Atom(f"Z{d}", ("z",))))),
    ))


def _check_nonneg(**kw):
    for k, v in kw.items():
        if not isinstance(v, int) or v < 0:
            raise FormulaError(f"{k} must be a non-negative integer, got {v!r}")


def _unary(f: Formula, var: str, role: str) -> Formula:
    fv = free_variables(f)
    if len(fv) > 1:
        raise FormulaError(f"{role} must have at most one free variable, has {fv}")
    return rename_free(f, {fv[0]: var}) if fv else f


def _binary(g: Formula, a: str, b: str, role: str) -> Formula:
    fv = ordered_free_variables(g)
    if len(fv) != 2:
        raise FormulaError(f"{role} must have exactly two free variables, has {fv}")
    return rename_free(g, {fv[0]: a, fv[1]: b})


def _witness_block(x: str, count: int, edge: Formula, target: Formula, outgoing: bool,
                   avoid: set[str]) -> Formula:
    ys = []
    for _ in range(count):
        ys.append(fresh_variable(avoid | set(ys), stem="y"))
    body = []
    for i, y in enumerate(ys):
        link = _binary(edge, x, y, "adjacency formula") if outgoing else _binary(edge, y, x, "adjacency formula")
        body.append(link)
        body.append(_unary(target, y, "target formula"))
        for y2 in ys[i + 1:]:
            body.append(Not(Eq(y, y2)))
    f: Formula = And(tuple(body)) if len(body) > 1 else body[0]
    for y in reversed(ys):
        f = Exists(y, f)
    return f


def default_adjacency(rel: str = "E") -> Formula:
    return Atom(rel, ("x1", "x2"))


def mtp_phi_prime(phi: Formula, psi: Formula, b: int, adjacency: Formula | None = None) -> Formula:
    """``phi(x)`` and ``x`` has at least ``b`` distinct adjacency-neighbours satisfying ``psi``."""
    if not isinstance(b, int) or b <= 0:
        raise FormulaError(f"b must be a positive integer, got {b!r}")
    gamma = adjacency if adjacency is not None else default_adjacency()
    avoid = variables(phi) | variables(psi) | variables(gamma) | {"x"}
    return And((_unary(phi, "x", "phi"), _witness_block("x", b, gamma, psi, True, avoid)))


def mtp_psi_prime(phi: Formula, psi: Formula, a: int, adjacency: Formula | None = None) -> Formula:
    """``psi(x)`` and ``x`` has no ``a+1`` distinct adjacency-neighbours satisfying ``phi``."""
    if not isinstance(a, int) or a < 0:
        raise FormulaError(f"a must be a non-negative integer, got {a!r}")
    gamma = adjacency if adjacency is not None else default_adjacency()
    avoid = variables(phi) | variables(psi) | variables(gamma) | {"x"}
    return And((_unary(psi, "x", "psi"), Not(_witness_block("x", a + 1, gamma, phi, False, avoid))))


def phi_probe(phi: Formula) -> Formula:
    """``exists y. Qm x. phi(x, y)``; the first free variable of ``phi`` (by name) plays ``x``."""
    return Exists("y", Qm("x", _binary(phi, "x", "y", "phi")))


def psi_probe(phi: Formula) -> Formula:
    """``forall y. Qm x. phi(x, y)``."""
    return Forall("y", Qm("x", _binary(phi, "x", "y", "phi")))


_CANNED = {
    "delta": delta,
    "hat_delta": hat_delta,
    "zeta": zeta,
    "mtp_phi'": mtp_phi_prime,
    "mtp_psi'": mtp_psi_prime,
    "phi_probe": phi_probe,
    "psi_probe": psi_probe,
}


def canned_formulas(kind: str, *args, **params) -> Formula:
    """Build a named formula family by kind (``"delta"``, ``"zeta"``, ``"mtp_phi'"``, ...)."""
    try:
        builder = _CANNED[kind]
    except KeyError:
        raise FormulaError(f"unknown formula family {kind!r}; choose from {sorted(_CANNED)}") from None
    return builder(*args, **params)


def qm_prefix(f: Formula, variables: Sequence[str]) -> Formula:
    for v in reversed(list(variables)):
        f = Qm(v, f)
    return f
