"""Ball-mass measurements, greedy skeleton extraction and marking plans.

A structure is ``(d, eps)``-residual when every ``d``-ball has weighted mass
below ``eps``.  Skeleton extraction removes, one at a time, the centre of a
heaviest ball in the Gaifman graph of what remains; the removal order is the
order in which the marks ``M1, M2, ...`` are assigned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .structures import Structure, StructureError, distances_from, make_structure, mark_index

__all__ = [
    "MarkingPlan",
    "ResidualityReport",
    "default_mark_count",
    "mark_plan",
    "max_ball_fraction",
    "skeleton_select",
]


@dataclass(frozen=True)
class ResidualityReport:
    """Heaviest ``d``-ball among the surviving centres.

    ``mass`` is measured with the weights of the full structure, so removed
    vertices simply stop counting.  ``verdict`` is ``mass < eps`` and is
    ``None`` when no ``eps`` was supplied.
    """

    d: int
    mass: object
    argmax: int | None
    eps: float | None = None
    removed: tuple[int, ...] = ()

    @property
    def verdict(self) -> bool | None:
        if self.eps is None:
            return None
        return self.mass < self.eps

    def to_json(self) -> dict:
        out = {"d": self.d, "mass": float(self.mass), "argmax": self.argmax,
               "eps": None if self.eps is None else float(self.eps),
               "residual": self.verdict, "removed": list(self.removed)}
        if hasattr(self.mass, "denominator"):
            out["exact"] = str(self.mass)
        return out


def _ball_masses(s: Structure, d: int, removed: frozenset) -> list:
    w = s.weight_vector
    zero = w[0] * 0 if w else 0
    masses = []
    for v in range(s.size):
        if v in removed:
            masses.append(None)
            continue
        if removed:
            dist = distances_from(s.adjacency, v, removed, limit=d)
        else:
            dist = s.distances(v)
        members = [u for u, du in enumerate(dist) if du <= d]
        if s.is_exact:
            masses.append(sum((w[u] for u in members), zero))
        else:
            masses.append(math.fsum(w[u] for u in members))
    return masses


def _report(s: Structure, d: int, eps, removed: tuple[int, ...]) -> ResidualityReport:
    masses = _ball_masses(s, d, frozenset(removed))
    best, arg = None, None
    for v, m in enumerate(masses):
        if m is not None and (best is None or m > best):
            best, arg = m, v
    if best is None:
        best = 0
    return ResidualityReport(d, best, arg, eps, tuple(removed))


def max_ball_fraction(s: Structure, d: int, eps: float | None = None) -> ResidualityReport:
    """Largest weighted mass of a radius-``d`` ball; ties go to the smallest centre."""
    if d < 0:
        raise ValueError("radius must be non-negative")
    return _report(s, d, eps, ())


def skeleton_select(s: Structure, d: int, eps, n_max: int) -> tuple[list[int], ResidualityReport]:
    """Greedily delete heaviest-ball centres until every ``d``-ball is lighter than ``eps``.

    Stops after ``n_max`` deletions even if the target was not reached; the
    returned report says which happened.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    removed: list[int] = []
    while True:
        report = _report(s, d, eps, tuple(removed))
        if report.verdict or len(removed) >= n_max or report.argmax is None:
            return removed, report
        removed.append(report.argmax)


def default_mark_count(d: int, n: int, skeleton_size: int) -> int:
    """``min(K, floor(log2(n + 1)))``: slow-growing and unbounded in ``n``."""
    return min(skeleton_size, int(math.floor(math.log2(n + 1))))


@dataclass(frozen=True)
class MarkingPlan:
    """Skeleton order and per-radius prefix lengths for one structure of a sequence."""

    size: int
    skeleton: tuple[int, ...]
    counts: dict[int, int]
    report: ResidualityReport
    reached: bool
    marked: Structure = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {"n": self.size, "skeleton": list(self.skeleton),
                "F": {str(d): c for d, c in sorted(self.counts.items())},
                "reached_eps": self.reached, "report": self.report.to_json()}


def mark_plan(sequence: Sequence[Structure], radii: Sequence[int], eps, n_max: int,
              count: Callable[[int, int, int], int] = default_mark_count,
              ) -> tuple[list[MarkingPlan], dict]:
    """Mark a skeleton in every structure of a sequence.

    The skeleton of each structure comes from :func:`skeleton_select` at the
    largest radius in ``radii``; ``M_i`` marks its ``i``-th vertex and
    ``Z_d`` marks the first ``count(d, n, K)`` of them.  ``eps`` is either
    one threshold or one per structure.  Returns the plans
    and a summary flagging radii whose counts fail to be non-decreasing
    along the sequence.
    """
    if not radii:
        raise ValueError("at least one radius is needed")
    sizes = [s.size for s in sequence]
    if any(a > b for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sequence sizes must be non-decreasing")
    dmax = max(radii)
    if isinstance(eps, (int, float, Fraction)):
        eps = [eps] * len(sequence)
    if len(eps) != len(sequence):
        raise ValueError("need one eps per structure")
    plans = []
    for s, e in zip(sequence, eps):
        if any((mark_index(r) or ("",))[0] in ("M", "Z") and s.relations[r] for r in s.relations):
            raise StructureError("input structures must not carry marks already")
        skeleton, report = skeleton_select(s, dmax, e, n_max)
        counts = {d: count(d, s.size, len(skeleton)) for d in sorted(set(radii))}
        for d, c in counts.items():
            if not 0 <= c <= len(skeleton):
                raise ValueError(f"mark count F_{d}({s.size}) = {c} outside 0..{len(skeleton)}")
        rels = dict(s.relations)
        arities = dict(s.arities)
        for i, v in enumerate(skeleton, 1):
            rels[f"M{i}"] = [(v,)]
            arities[f"M{i}"] = 1
        for d, c in counts.items():
            rels[f"Z{d}"] = [(v,) for v in skeleton[:c]]
            arities[f"Z{d}"] = 1
        marked = make_structure(s.size, rels, arities, s.weights, s.names)
        plans.append(MarkingPlan(s.size, tuple(skeleton), counts, report, bool(report.verdict), marked))
    monotone = {}
    for d in sorted(set(radii)):
        seq = [p.counts[d] for p in plans]
        monotone[d] = all(a <= b for a, b in zip(seq, seq[1:]))
    return plans, {"monotone": monotone}
