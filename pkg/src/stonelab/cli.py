"""Command-line entry point: ``stonelab <command> [options]``.

Exit codes: 0 success, 1 usage or input error, 2 budget exceeded,
3 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import encode, evaluation, lab, locality, residuality, witness
from .errors import BudgetExceeded, EvaluationError, InvariantViolation
from .generators import GeneratorSpec, generate, parse_graph_spec, parse_sizes
from .logic import FormulaError, parse_formula, parse_formula_file, to_text
from .structures import (
    Structure, StructureError, dump_structure, load_structure, structure_to_json,
)

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- helpers

def _structure(spec: str) -> Structure:
    """A JSON file, or a generated graph written ``family:n`` / ``er:n:p[:seed]``."""
    path = Path(spec)
    if path.exists():
        return load_structure(path)
    try:
        family, n, p, seed = parse_graph_spec(spec)
    except ValueError:
        raise UsageError(f"{spec!r} is neither a structure file nor a graph spec like cycle:100") from None
    return generate(family, n, p, seed)


def _formulas(args) -> list:
    if getattr(args, "formulas", None):
        return parse_formula_file(Path(args.formulas).read_text(encoding="utf-8"))
    if getattr(args, "formula", None):
        return [parse_formula(f) for f in args.formula]
    raise UsageError("give --formula or --formulas")


def _eps(text: str):
    """``0.05``, ``1/20`` or ``c/n`` (a function of the sequence parameter)."""
    text = text.strip()
    if text.endswith("/n"):
        c = Fraction(text[:-2])
        return lambda n: c / n
    return Fraction(text)


def _json_default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _emit(args, payload) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2, default=_json_default) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _add_structure(p, required=True):
    p.add_argument("--structure", required=required,
                   help="structure JSON file, or a graph spec such as cycle:100 or er:50:0.1:7")


def _add_formula(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--formula", action="append", help="formula text (repeatable)")
    g.add_argument("--formulas", help="file with one formula per line")


def _add_mode(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true", help="exact enumeration (default)")
    g.add_argument("--samples", type=int, help="Monte Carlo with this many samples")


def _add_common(p):
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=evaluation.DEFAULT_BUDGET,
                   help="atom-evaluation budget for exact evaluation")


# ---------------------------------------------------------------- commands

def cmd_pair(args):
    s = _structure(args.structure)
    out = []
    for f in _formulas(args):
        res = evaluation.stone_pairing(s, f, samples=args.samples, seed=args.seed, budget=args.budget)
        out.append({"formula": to_text(f), **res.to_json()})
    _emit(args, out)


def cmd_sample(args):
    if args.samples is None:
        args.samples = 10000
    cmd_pair(args)


def cmd_converge(args):
    gen = GeneratorSpec(args.family, parse_sizes(args.sizes), args.p, args.seed)
    table = lab.run_convergence(gen, _formulas(args), samples=args.samples, seed=args.seed,
                                tau=args.tau, budget=args.budget)
    _emit(args, table.to_csv())


def cmd_types(args):
    s = _structure(args.structure)
    _emit(args, locality.local_types(s, args.radius, args.max_ball).to_json())


def cmd_reweight(args):
    s = _structure(args.structure)
    tp = locality.local_types(s, args.radius, args.max_ball)
    raw = args.targets
    data = json.loads(Path(raw).read_text(encoding="utf-8") if Path(raw).exists() else raw)
    if isinstance(data, dict):
        targets = {k: Fraction(str(v)) for k, v in data.items()}
    else:
        targets = [Fraction(str(v)) for v in data]
    _emit(args, dump_structure(locality.reweight_to_targets(s, tp, targets)) + "\n")


def cmd_skeleton(args):
    s = _structure(args.structure)
    removed, report = residuality.skeleton_select(s, args.radius, _eps(args.eps), args.n_max)
    _emit(args, {"skeleton": removed, **report.to_json()})


def cmd_mark(args):
    seq = [_structure(spec) for spec in args.structure]
    eps = _eps(args.eps)
    if callable(eps):
        raise UsageError("mark takes a numeric --eps")
    plans, summary = residuality.mark_plan(seq, args.radii, eps, args.n_max)
    _emit(args, {"plans": [{**p.to_json(), "structure": structure_to_json(p.marked)} for p in plans],
                 "monotone": {str(k): v for k, v in summary["monotone"].items()}})


def cmd_encode(args):
    s = _structure(args.structure)
    m = args.m if args.m is not None else len(s.marks())
    enc = encode.encode_m(s, m)
    theory = encode.elimination_theory(s, m)
    _emit(args, {"m": m, "structure": structure_to_json(enc), "theory": theory.to_json(),
                 "arities": dict(theory.arities)})


def cmd_eliminate(args):
    if args.theory:
        data = json.loads(Path(args.theory).read_text(encoding="utf-8"))
        theory = encode.EliminationTheory.from_json(data["theory"], data["m"], data["arities"])
    elif args.structure:
        s = _structure(args.structure)
        m = args.m if args.m is not None else len(s.marks())
        theory = encode.elimination_theory(s, m)
    else:
        raise UsageError("give --theory (output of encode) or a marked --structure")
    _emit(args, "".join(to_text(encode.eliminate_formula(f, theory)) + "\n" for f in _formulas(args)))


def cmd_pipeline(args):
    gen = GeneratorSpec(args.family, parse_sizes(args.sizes), args.p, args.seed)
    report = lab.pipeline_demo(gen, args.radius, _eps(args.eps), args.n_max, _formulas(args),
                               max_ball=args.max_ball, budget=args.budget)
    _emit(args, report.to_json())
    if not all(r.round_trip_ok for r in report.rows):
        raise InvariantViolation("elimination did not reproduce the original pairing")


def cmd_subdivision(args):
    s = _structure(args.structure)
    w = witness.find_subdivision(s, args.N, args.p, mode=args.mode)
    _emit(args, {"N": args.N, "p": args.p, "mode": args.mode, "found": w is not None,
                 "witness": w.to_json() if w else None})


def cmd_mtp(args):
    s = _structure(args.structure)
    gamma = parse_formula(args.gamma) if args.gamma else None
    report = lab.mass_transport_check(s, parse_formula(args.phi), parse_formula(args.psi), gamma, args.budget)
    _emit(args, report.to_json())


def cmd_theory(args):
    table = lab.ConvergenceTable.from_csv(Path(args.table).read_text(encoding="utf-8"), args.tau)
    notices: list[str] = []
    sentences = lab.limit_theory_emit(table, args.tau, notices)
    for note in notices:
        print(note, file=sys.stderr)
    _emit(args, "".join(f"{e.text}\t# {e.verdict}\n" for e in sentences))


def cmd_qm(args):
    s = _structure(args.structure)
    fs = _formulas(args)
    if len(fs) != 1:
        raise UsageError("qm takes exactly one formula")
    _emit(args, lab.qm_probes(s, fs[0], args.K, args.budget).to_json())


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stonelab", description="Stone pairings and residuality experiments on finite structures.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("pair", help="Stone pairing of formulas on a structure")
    _add_structure(p), _add_formula(p), _add_mode(p), _add_common(p)
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("sample", help="Monte Carlo Stone pairing (default 10000 samples)")
    _add_structure(p), _add_formula(p), _add_mode(p), _add_common(p)
    p.set_defaults(func=cmd_sample)

    def sequence_args(p):
        p.add_argument("--family", required=True, help="path, cycle, grid, tree, star, complete or er")
        p.add_argument("--sizes", required=True, help='"10,20,40" or start:stop[:step]')
        p.add_argument("--p", type=float, help="edge probability for er")

    p = sub.add_parser("converge", help="pairing table over a generated sequence (CSV)")
    sequence_args(p), _add_formula(p), _add_mode(p), _add_common(p)
    p.add_argument("--tau", type=float, default=lab.DEFAULT_TAU)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("types", help="local type partition")
    _add_structure(p), _add_common(p)
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--max-ball", type=int, default=locality.DEFAULT_MAX_BALL)
    p.set_defaults(func=cmd_types)

    p = sub.add_parser("reweight", help="reweight local type classes to target masses")
    _add_structure(p), _add_common(p)
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--max-ball", type=int, default=locality.DEFAULT_MAX_BALL)
    p.add_argument("--targets", required=True, help="JSON list (class order) or code->mass map, inline or file")
    p.set_defaults(func=cmd_reweight)

    p = sub.add_parser("skeleton", help="greedy skeleton until every ball is light")
    _add_structure(p), _add_common(p)
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--n-max", type=int, default=10)
    p.set_defaults(func=cmd_skeleton)

    p = sub.add_parser("mark", help="marking plan for a sequence of structures")
    p.add_argument("--structure", action="append", required=True, help="repeat once per structure, smallest first")
    _add_common(p)
    p.add_argument("--radii", type=int, nargs="+", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--n-max", type=int, default=10)
    p.set_defaults(func=cmd_mark)

    p = sub.add_parser("encode", help="encode away the marks M1..Mm")
    _add_structure(p), _add_common(p)
    p.add_argument("--m", type=int, help="number of marks (default: all present)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("eliminate", help="rewrite formulas for the encoded structure")
    _add_structure(p, required=False), _add_formula(p), _add_common(p)
    p.add_argument("--theory", help="JSON written by the encode command")
    p.add_argument("--m", type=int)
    p.set_defaults(func=cmd_eliminate)

    p = sub.add_parser("pipeline", help="mark, encode, eliminate and compare pairings along a sequence")
    sequence_args(p), _add_formula(p), _add_common(p)
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--eps", required=True, help="number, fraction, or c/n")
    p.add_argument("--n-max", type=int, default=5)
    p.add_argument("--max-ball", type=int, default=locality.DEFAULT_MAX_BALL)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("subdivision", help="search for a p-subdivision of K_N")
    _add_structure(p), _add_common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--mode", choices=("exact", "at_most"), default="exact")
    p.set_defaults(func=cmd_subdivision)

    p = sub.add_parser("mtp", help="mass transport inequality check")
    _add_structure(p), _add_common(p)
    p.add_argument("--phi", required=True)
    p.add_argument("--psi", required=True)
    p.add_argument("--gamma", help="binary adjacency formula (default E(x1,x2))")
    p.set_defaults(func=cmd_mtp)

    p = sub.add_parser("theory", help="emit Qm sentences from a convergence CSV")
    p.add_argument("--table", required=True)
    p.add_argument("--tau", type=float, default=lab.DEFAULT_TAU)
    p.add_argument("--out")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("qm", help="Qm probes for a binary formula")
    _add_structure(p), _add_formula(p), _add_common(p)
    p.add_argument("--K", type=int, default=4)
    p.set_defaults(func=cmd_qm)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except BudgetExceeded as exc:
        print(f"stonelab: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InvariantViolation as exc:
        print(f"stonelab: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (UsageError, FormulaError, StructureError, EvaluationError, ValueError, KeyError,
            OSError, json.JSONDecodeError) as exc:
        print(f"stonelab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
