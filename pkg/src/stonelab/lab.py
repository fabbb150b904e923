"""Experiments built from the library: convergence tables, the mark/encode/eliminate
pipeline, mass-transport checks, limit-theory emission and ``Qm`` probes.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .encode import elimination_theory, eliminate_formula, encode_m
from .errors import BudgetExceeded, EvaluationError, InvariantViolation
from .evaluation import (
    DEFAULT_BUDGET, qm_satisfies, satisfies, satisfying_set, stone_pairing, stone_pairing_exact,
)
from .generators import GeneratorSpec
from .locality import LocalityError, local_product_estimate
from .logic import (
    And, Atom, Exists, Formula, FormulaError, Not, Or, phi_probe, free_variables, mtp_phi_prime,
    mtp_psi_prime, ordered_free_variables, parse_formula, qm_prefix, rename_free, to_text,
)
from .residuality import mark_plan, max_ball_fraction
from .structures import Structure, StructureError

__all__ = [
    "CSV_COLUMNS",
    "ConvergenceRow",
    "ConvergenceTable",
    "EmittedSentence",
    "MassTransportReport",
    "PipelineReport",
    "PipelineRow",
    "QmProbeReport",
    "DEFAULT_TAU",
    "POSITIVE",
    "INCONCLUSIVE",
    "TENDS_TO_ZERO",
    "limit_theory_emit",
    "mass_transport_check",
    "pipeline_demo",
    "qm_probes",
    "run_convergence",
    "trend_verdict",
]

DEFAULT_TAU = 1e-2
WINDOW = 3
TENDS_TO_ZERO = "tends-to-zero (empirical)"
POSITIVE = "positive-limit (empirical)"
INCONCLUSIVE = "inconclusive"
CSV_COLUMNS = ("n", "formula_id", "value", "mode", "ci_halfwidth", "verdict")


# ---------------------------------------------------------------- convergence

def trend_verdict(values: Sequence[float], tau: float = DEFAULT_TAU) -> str:
    """Empirical trend of a value sequence, judged on its last three entries.

    ``tends-to-zero`` needs the last value below ``tau`` and no increase in
    the window; ``positive-limit`` needs the whole window at or above
    ``tau`` without a strict decrease.  Anything else is inconclusive.
    """
    if len(values) < WINDOW:
        return INCONCLUSIVE
    tail = [float(v) for v in values[-WINDOW:]]
    steps = list(zip(tail, tail[1:]))
    if tail[-1] < tau and all(b <= a for a, b in steps):
        return TENDS_TO_ZERO
    if min(tail) >= tau and not all(b < a for a, b in steps):
        return POSITIVE
    return INCONCLUSIVE


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    formula_id: str
    value: Fraction | float | None
    mode: str
    halfwidth: float | None = None
    error: str | None = None


@dataclass
class ConvergenceTable:
    """Rows ordered by ``n`` then formula order, plus one verdict per formula."""

    rows: list[ConvergenceRow]
    formula_ids: list[str]
    tau: float = DEFAULT_TAU
    verdicts: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.verdicts:
            self.verdicts = self.compute_verdicts(self.tau)

    def series(self, formula_id: str) -> list[ConvergenceRow]:
        return [r for r in self.rows if r.formula_id == formula_id]

    def compute_verdicts(self, tau: float) -> dict[str, str]:
        out = {}
        for fid in self.formula_ids:
            rows = self.series(fid)
            if any(r.error for r in rows):
                out[fid] = INCONCLUSIVE
            else:
                out[fid] = trend_verdict([r.value for r in rows], tau)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            if r.error:
                w.writerow([r.n, r.formula_id, "", "error", "", f"error: {r.error}"])
                continue
            half = "" if r.halfwidth is None else repr(float(r.halfwidth))
            w.writerow([r.n, r.formula_id, repr(float(r.value)), r.mode, half, self.verdicts[r.formula_id]])
        return buf.getvalue()

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def from_csv(cls, text: str, tau: float = DEFAULT_TAU) -> "ConvergenceTable":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"expected CSV columns {', '.join(CSV_COLUMNS)}")
        rows, ids = [], []
        for rec in reader:
            fid = rec["formula_id"]
            if fid not in ids:
                ids.append(fid)
            if rec["mode"] == "error":
                rows.append(ConvergenceRow(int(rec["n"]), fid, None, "error",
                                           error=rec["verdict"].removeprefix("error: ")))
            else:
                half = float(rec["ci_halfwidth"]) if rec["ci_halfwidth"] else None
                rows.append(ConvergenceRow(int(rec["n"]), fid, float(rec["value"]), rec["mode"], half))
        rows.sort(key=lambda r: (r.n, ids.index(r.formula_id)))
        return cls(rows, ids, tau)


def _formula_list(formulas: Iterable[Formula | str]) -> list[Formula]:
    return [parse_formula(f) if isinstance(f, str) else f for f in formulas]


def run_convergence(gen: GeneratorSpec, formulas: Iterable[Formula | str], samples: int | None = None,
                    seed: int = 0, tau: float = DEFAULT_TAU, budget: int = DEFAULT_BUDGET,
                    out: str | Path | None = None) -> ConvergenceTable:
    """Pairing of every formula on every member of the generated sequence.

    ``samples=None`` gives exact values, otherwise seeded Monte Carlo.  A
    failing row (budget, evaluation error) is recorded and does not stop the
    run.  The formula id written to the CSV is the formula's printed form.
    """
    fs = _formula_list(formulas)
    ids = [to_text(f) for f in fs]
    rows = []
    for n in sorted(gen.sizes):
        try:
            s = gen.build(n)
        except (ValueError, StructureError) as exc:
            rows.extend(ConvergenceRow(n, fid, None, "error", error=str(exc)) for fid in ids)
            continue
        for f, fid in zip(fs, ids):
            try:
                res = stone_pairing(s, f, samples=samples, seed=seed, budget=budget)
            except (BudgetExceeded, EvaluationError) as exc:
                rows.append(ConvergenceRow(n, fid, None, "error", error=f"{type(exc).__name__}: {exc}"))
                continue
            half = res.halfwidth if res.mode == "sampled" else None
            rows.append(ConvergenceRow(n, fid, res.value, res.mode, half))
    table = ConvergenceTable(rows, ids, tau)
    if out is not None:
        table.write(out)
    return table


# ---------------------------------------------------------------- limit theory

@dataclass(frozen=True)
class EmittedSentence:
    formula_id: str
    sentence: Formula
    verdict: str

    @property
    def text(self) -> str:
        return to_text(self.sentence)


def limit_theory_emit(table: ConvergenceTable, tau: float | None = None,
                      notices: list[str] | None = None) -> list[EmittedSentence]:
    """The ``Qm``-part of the limit theory suggested by a convergence table.

    A formula judged to tend to zero contributes ``!(Qm x1. ... Qm xp. phi)``;
    one with a positive limit contributes ``Qm x1. ... Qm xp. phi``.  A
    sentence is emitted as is (or negated) according to its last value.
    Inconclusive formulas are skipped and a notice is appended to
    ``notices``.  All emitted sentences are empirical.
    """
    verdicts = table.compute_verdicts(tau) if tau is not None else table.verdicts
    out = []
    for fid in table.formula_ids:
        f = parse_formula(fid)
        fv = ordered_free_variables(f)
        verdict = verdicts[fid]
        if not fv:
            rows = table.series(fid)
            if not rows or rows[-1].error:
                verdict = INCONCLUSIVE
            else:
                verdict = POSITIVE if float(rows[-1].value) >= 0.5 else TENDS_TO_ZERO
        if verdict == INCONCLUSIVE:
            if notices is not None:
                notices.append(f"skipped {fid}: inconclusive trend")
            continue
        body = qm_prefix(f, fv)
        out.append(EmittedSentence(fid, body if verdict == POSITIVE else Not(body), verdict))
    return out


# ---------------------------------------------------------------- pipeline

@dataclass
class PipelineRow:
    """Outcome of the pipeline on one member of the sequence."""

    n: int
    size: int
    skeleton: tuple[int, ...]
    marks: int
    reached: bool
    eps: object
    encoded_mass: object
    encoded_residual: bool
    theory_holds: bool
    pairings: list[dict]
    local: list[dict]

    @property
    def round_trip_ok(self) -> bool:
        return all(p["equal"] for p in self.pairings)

    def to_json(self) -> dict:
        return {"n": self.n, "size": self.size, "skeleton": list(self.skeleton), "m": self.marks,
                "skeleton_reached_eps": self.reached, "eps": float(self.eps),
                "encoded_max_ball": float(self.encoded_mass), "encoded_residual": self.encoded_residual,
                "theory_holds": self.theory_holds, "round_trip_ok": self.round_trip_ok,
                "pairings": self.pairings, "local": self.local}


@dataclass
class PipelineReport:
    radius: int
    rows: list[PipelineRow]
    monotone: dict

    @property
    def ok(self) -> bool:
        return all(r.round_trip_ok and r.theory_holds for r in self.rows)

    def to_json(self) -> dict:
        return {"radius": self.radius, "ok": self.ok,
                "monotone": {str(k): v for k, v in self.monotone.items()},
                "rows": [r.to_json() for r in self.rows]}


def _pairing_text(v) -> str:
    return str(v) if isinstance(v, Fraction) else repr(v)


def pipeline_demo(gen: GeneratorSpec | Sequence[tuple[int, Structure]], d: int,
                  eps: float | Callable[[int], object], m_budget: int,
                  formulas: Iterable[Formula | str], max_ball: int | None = 12,
                  budget: int = DEFAULT_BUDGET) -> PipelineReport:
    """Mark a skeleton, encode it away, and check that elimination undoes the encoding.

    For each structure: marks come from :func:`mark_plan` at radius ``d``,
    the encoded structure is measured for ``(d, eps)``-residuality, and for
    each formula ``<phi, A+>`` is compared with ``<phi_hat, A*>`` by exact
    equality.  The local-product gap on the encoded side is reported per
    formula; a formula that turns out not to be local there is reported,
    not raised.  ``eps`` may be a function of the sequence parameter ``n``.
    """
    seq = list(gen)
    fs = _formula_list(formulas)
    eps_list = [eps(n) if callable(eps) else eps for n, _ in seq]
    plans, summary = mark_plan([s for _, s in seq], [d], eps_list, m_budget)
    rows = []
    for (n, s), plan, e in zip(seq, plans, eps_list):
        marked = plan.marked
        m = len(plan.skeleton)
        encoded = encode_m(marked, m)
        theory = elimination_theory(marked, m)
        theory_holds = all(satisfies(marked, sent, {}, budget) for sent in theory.sentences().values())
        resid = max_ball_fraction(encoded, d, e)
        pairings, local = [], []
        for f in fs:
            hat = eliminate_formula(f, theory)
            before = stone_pairing_exact(marked, f, budget).value
            after = stone_pairing_exact(encoded, hat, budget).value
            pairings.append({"formula": to_text(f), "original": _pairing_text(before),
                             "encoded": _pairing_text(after), "equal": before == after})
            entry = {"formula": to_text(f)}
            if not free_variables(hat):
                entry["status"] = "sentence"
            else:
                try:
                    est = local_product_estimate(encoded, hat, d, max_ball=max_ball, budget=budget)
                    entry.update(status="ok", **est.to_json())
                except LocalityError as exc:
                    entry.update(status="not-local", detail=str(exc))
                except BudgetExceeded as exc:
                    entry.update(status="budget", detail=str(exc))
            local.append(entry)
        rows.append(PipelineRow(n, s.size, plan.skeleton, m, plan.reached, e, resid.mass,
                                bool(resid.verdict), theory_holds, pairings, local))
    return PipelineReport(d, rows, summary["monotone"])


# ---------------------------------------------------------------- mass transport

@dataclass(frozen=True)
class MassTransportReport:
    a: int
    b: int
    phi_prime: Formula | None
    psi_prime: Formula | None
    lhs: Fraction
    rhs: Fraction
    trivial: bool

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs

    def to_json(self) -> dict:
        return {"a": self.a, "b": self.b, "lhs": str(self.lhs), "rhs": str(self.rhs),
                "holds": self.holds, "trivial": self.trivial, "measure": "uniform",
                "phi_prime": to_text(self.phi_prime) if self.phi_prime else None,
                "psi_prime": to_text(self.psi_prime) if self.psi_prime else None}


def _one_free(f: Formula, role: str) -> list[str]:
    fv = free_variables(f)
    if len(fv) > 1:
        raise FormulaError(f"{role} must be unary, has free variables {fv}")
    return fv


def mass_transport_check(s: Structure, phi: Formula, psi: Formula, gamma: Formula | None = None,
                         budget: int = DEFAULT_BUDGET) -> MassTransportReport:
    """Check ``b * <phi'> <= a * <psi'>`` under the uniform measure on ``s``.

    ``b`` is the least number of ``gamma``-successors in ``psi`` of a
    ``phi``-element and ``a`` the largest number of ``gamma``-predecessors
    in ``phi`` of a ``psi``-element (the first free variable of ``gamma`` by
    name is the source).  When ``phi`` is empty or ``b = 0`` the inequality
    holds trivially.  A violation raises :class:`InvariantViolation`.
    """
    fv_phi = _one_free(phi, "phi")
    fv_psi = _one_free(psi, "psi")
    gamma = gamma if gamma is not None else Atom("E", ("x1", "x2"))
    gv = ordered_free_variables(gamma)
    if len(gv) != 2:
        raise FormulaError(f"gamma must have exactly two free variables, has {gv}")
    u = s.replace(weights=None)

    def unary_set(f, fv):
        if not fv:
            return set(range(u.size)) if satisfies(u, f, {}, budget) else set()
        return {t[0] for t in satisfying_set(u, f, fv, budget)}

    A = unary_set(phi, fv_phi)
    B = unary_set(psi, fv_psi)
    edges = satisfying_set(u, gamma, gv, budget)
    out_deg = {x: 0 for x in A}
    in_deg = {y: 0 for y in B}
    for x, y in edges:
        if x in A and y in B:
            out_deg[x] += 1
            in_deg[y] += 1
    b = min(out_deg.values()) if A else 0
    a = max(in_deg.values()) if B else 0
    if b == 0:
        return MassTransportReport(a, b, None, None, Fraction(0), Fraction(0), True)
    phi_p = mtp_phi_prime(phi, psi, b, gamma)
    psi_p = mtp_psi_prime(phi, psi, a, gamma)
    lhs = b * Fraction(stone_pairing_exact(u, phi_p, budget).value)
    rhs = a * Fraction(stone_pairing_exact(u, psi_p, budget).value)
    report = MassTransportReport(a, b, phi_p, psi_p, lhs, rhs, False)
    if not report.holds:
        raise InvariantViolation(f"mass transport violated: {b} * <phi'> = {lhs} > {a} * <psi'> = {rhs}")
    return report


# ---------------------------------------------------------------- Qm probes

@dataclass(frozen=True)
class QmProbeReport:
    phi_qm: bool
    phi_pairing: Fraction | float
    psi_sequence: tuple[float, ...]

    @property
    def agree(self) -> bool:
        return self.phi_qm == (self.phi_pairing > 0)

    def to_json(self) -> dict:
        return {"Phi_qm": self.phi_qm, "Phi_pairing": float(self.phi_pairing),
                "Phi_pairing_positive": self.phi_pairing > 0, "agree": self.agree,
                "Psi_sequence": list(self.psi_sequence),
                "Psi_note": "reported only; no equivalence is asserted on finite atomic models"}


def qm_probes(s: Structure, phi: Formula, K: int = 4, budget: int = DEFAULT_BUDGET) -> QmProbeReport:
    """Evaluate ``exists y. Qm x. phi(x, y)`` two ways and list the ``Psi``-side roots.

    The first free variable of ``phi`` by name plays ``x``, the second
    ``y``.  The pairing criterion is ``<exists y. phi(x1, y) & phi(x2, y)> > 0``.
    The ``Psi`` sequence is ``<exists y. !phi(x1, y) | ... | !phi(xk, y)>^(1/k)``
    for ``k = 1 .. K``.  Disagreement on ``Phi`` raises :class:`InvariantViolation`.
    """
    fv = ordered_free_variables(phi)
    if len(fv) != 2:
        raise FormulaError(f"phi must have exactly two free variables, has {fv}")
    taken = set(fv)
    y = "y"
    while y in taken:
        y += "y"

    def inst(i):
        return rename_free(phi, {fv[0]: f"x{i}", fv[1]: y})

    phi_qm = qm_satisfies(s, phi_probe(phi), budget)
    pairing = stone_pairing_exact(s, Exists(y, And((inst(1), inst(2)))), budget).value
    seq = []
    for k in range(1, K + 1):
        parts = tuple(Not(inst(i)) for i in range(1, k + 1))
        body = parts[0] if k == 1 else Or(parts)
        v = stone_pairing_exact(s, Exists(y, body), budget).value
        seq.append(float(v) ** (1.0 / k) if v > 0 else 0.0)
    report = QmProbeReport(phi_qm, pairing, tuple(seq))
    if not report.agree:
        raise InvariantViolation(f"Phi disagreement: Qm evaluation {phi_qm}, pairing {pairing}")
    return report
