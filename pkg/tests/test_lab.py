import random
from fractions import Fraction

import pytest

from oracle import Oracle
from randgen import FormulaGen, random_graph
from stonelab.errors import InvariantViolation
from stonelab.generators import (
    FAMILIES, GeneratorSpec, complete_graph, cycle_graph, erdos_renyi, generate, grid_graph, parse_graph_spec,
    parse_sizes, path_graph, star_graph, tree_graph,
)
from stonelab.lab import (
    CSV_COLUMNS, INCONCLUSIVE, POSITIVE, TENDS_TO_ZERO, ConvergenceTable, limit_theory_emit,
    mass_transport_check, pipeline_demo, qm_probes, run_convergence, trend_verdict,
)
from stonelab.logic import FormulaError, parse_formula, to_text
from stonelab.structures import make_structure

P = parse_formula


# ---------------------------------------------------------------- generators

def test_generator_shapes():
    assert path_graph(4).size == 4 and len(path_graph(4).tuples("E")) == 6
    assert len(cycle_graph(5).tuples("E")) == 10
    assert grid_graph(3).size == 9 and len(grid_graph(3).tuples("E")) == 24
    assert tree_graph(7).adjacency[0] == {1, 2}
    assert star_graph(4).size == 5 and star_graph(4).adjacency[0] == {1, 2, 3, 4}
    assert len(complete_graph(5).tuples("E")) == 20
    with pytest.raises(ValueError):
        cycle_graph(2)
    with pytest.raises(ValueError):
        erdos_renyi(5, 1.5)


def test_erdos_renyi_is_seeded():
    assert erdos_renyi(30, 0.2, 4) == erdos_renyi(30, 0.2, 4)
    assert erdos_renyi(30, 0.2, 4) != erdos_renyi(30, 0.2, 5)
    assert not erdos_renyi(10, 0.0).tuples("E")
    assert len(erdos_renyi(10, 1.0).tuples("E")) == 90


def test_specs_and_parsing():
    assert "er" in FAMILIES
    assert parse_graph_spec("cycle:100") == ("cycle", 100, None, 0)
    assert parse_graph_spec("er:50:0.1:7") == ("er", 50, 0.1, 7)
    with pytest.raises(ValueError):
        parse_graph_spec("moebius:5")
    assert parse_sizes("10:40:10") == (10, 20, 30, 40)
    assert parse_sizes("3,5, 8") == (3, 5, 8)
    with pytest.raises(ValueError):
        GeneratorSpec("er", (5,))
    with pytest.raises(ValueError):
        GeneratorSpec("hypercube", (5,))
    assert [n for n, _ in GeneratorSpec("path", (3, 4))] == [3, 4]
    assert generate("star", 3) == star_graph(3)


# ---------------------------------------------------------------- verdicts

@pytest.mark.parametrize("values, verdict", [
    ([0.5, 0.2, 0.005], TENDS_TO_ZERO),
    ([0.005, 0.005, 0.005], TENDS_TO_ZERO),
    ([0.001, 0.002, 0.003], INCONCLUSIVE),
    ([1, 1, 1], POSITIVE),
    ([0.3, 0.5, 0.4], POSITIVE),
    ([0.5, 0.4, 0.3], INCONCLUSIVE),
    ([0.5, 0.02, 0.005, 0.3], INCONCLUSIVE),
    ([0.001, 0.3, 0.3, 0.4], POSITIVE),
    ([1, 1], INCONCLUSIVE),
    ([], INCONCLUSIVE),
])
def test_trend_verdict(values, verdict):
    assert trend_verdict(values) == verdict


def test_trend_threshold():
    assert trend_verdict([0.3, 0.2, 0.1], tau=0.15) == TENDS_TO_ZERO
    assert trend_verdict([0.3, 0.2, 0.2], tau=0.15) == POSITIVE


# ---------------------------------------------------------------- convergence

def test_path_neighbour_convergence():
    t = run_convergence(GeneratorSpec("path", (10, 20, 40, 80)), ["exists y. E(x,y)"])
    fid = to_text(P("exists y. E(x,y)"))
    assert [r.value for r in t.series(fid)] == [1, 1, 1, 1]
    assert t.verdicts[fid] == POSITIVE


def test_path_distance_convergence():
    t = run_convergence(GeneratorSpec("path", (100, 200, 400, 800)), ["dist<=2(x1,x2)"])
    vals = [r.value for r in t.rows]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[0] == Fraction(5 * 100 - 6, 100 ** 2)
    assert t.verdicts["dist<=2(x1,x2)"] == TENDS_TO_ZERO


def test_star_distance_values_match_oracle():
    sizes = (3, 6, 12, 50, 200, 400)
    t = run_convergence(GeneratorSpec("star", sizes), ["dist<=1(x1,x2)"])
    for n, r in zip(sizes, t.rows):
        assert r.value == Fraction(3 * n + 1, (n + 1) ** 2)
        if n <= 50:
            assert r.value == Oracle(star_graph(n)).pairing(P("dist<=1(x1,x2)"), ["x1", "x2"])
    assert t.verdicts["dist<=1(x1,x2)"] == TENDS_TO_ZERO


def test_csv_is_byte_deterministic(tmp_path):
    gen = GeneratorSpec("er", (20, 30), p=0.2, seed=11)
    formulas = ["E(x1,x2)", "exists y. E(x,y) & E(y,z)"]
    a = run_convergence(gen, formulas, samples=500, seed=3).to_csv()
    b = run_convergence(gen, formulas, samples=500, seed=3).to_csv()
    assert a == b
    assert a.splitlines()[0] == ",".join(CSV_COLUMNS)
    out = tmp_path / "t.csv"
    run_convergence(gen, formulas, samples=500, seed=3, out=out)
    assert out.read_text() == a


def test_csv_round_trip():
    t = run_convergence(GeneratorSpec("cycle", (5, 10, 20)), ["E(x1,x2)", "x = x"], samples=200, seed=1)
    back = ConvergenceTable.from_csv(t.to_csv())
    assert back.formula_ids == t.formula_ids
    assert back.verdicts == t.verdicts
    assert [float(r.value) for r in back.rows] == [float(r.value) for r in t.rows]
    assert back.to_csv() == t.to_csv()
    with pytest.raises(ValueError):
        ConvergenceTable.from_csv("a,b\n1,2\n")


def test_error_rows_are_recorded():
    t = run_convergence(GeneratorSpec("cycle", (2, 10, 20, 30)),
                        ["E(x1,x2)", "exists u. exists v. E(x,u) & E(u,v) & E(v,y)"], budget=30000)
    errs = [r for r in t.rows if r.error]
    assert {r.n for r in errs} >= {2}
    assert any("BudgetExceeded" in r.error for r in errs)
    assert t.verdicts["E(x1,x2)"] == INCONCLUSIVE
    text = t.to_csv()
    assert ",error," in text
    back = ConvergenceTable.from_csv(text)
    assert sum(1 for r in back.rows if r.error) == len(errs)


# ---------------------------------------------------------------- limit theory

def test_theory_emission():
    t = run_convergence(GeneratorSpec("path", (200, 400, 800)),
                        ["dist<=2(x1,x2)", "exists y. E(x,y)", "exists x. exists y. E(x,y)",
                         "forall x. E(x,x)"])
    notices = []
    out = {e.formula_id: e for e in limit_theory_emit(t, notices=notices)}
    assert out["dist<=2(x1,x2)"].text == to_text(P("!(Qm x1. Qm x2. dist<=2(x1,x2))"))
    assert out["exists y. E(x,y)"].text == to_text(P("Qm x. exists y. E(x,y)"))
    assert out["exists x. exists y. E(x,y)"].verdict == POSITIVE
    assert out["exists x. exists y. E(x,y)"].text == "exists x. exists y. E(x,y)"
    assert out["forall x. E(x,x)"].text.startswith("!")
    assert notices == []
    for e in out.values():
        assert P(e.text) == e.sentence


def test_theory_skips_inconclusive():
    t = ConvergenceTable.from_csv(
        "n,formula_id,value,mode,ci_halfwidth,verdict\n"
        "1,\"E(x1,x2)\",0.5,exact,,\n2,\"E(x1,x2)\",0.4,exact,,\n3,\"E(x1,x2)\",0.3,exact,,\n")
    notices = []
    assert limit_theory_emit(t, notices=notices) == []
    assert len(notices) == 1 and "inconclusive" in notices[0]
    assert len(limit_theory_emit(t, tau=0.5)) == 1


# ---------------------------------------------------------------- pipeline

def test_pipeline_on_stars():
    seq = [(n, star_graph(n)) for n in (8, 16, 32)]
    rep = pipeline_demo(seq, 1, lambda n: Fraction(2, n), 2, ["E(x1,x2)", "exists y. E(x,y)"])
    assert rep.ok
    for row in rep.rows:
        assert row.skeleton == (0,) and row.marks == 1
        assert row.encoded_mass == Fraction(1, row.size) and row.encoded_residual
        assert all(e["status"] in ("ok", "not-local", "budget") for e in row.local)
    js = rep.to_json()
    assert js["ok"] and len(js["rows"]) == 3


def test_pipeline_complete_graph_not_residual():
    rep = pipeline_demo([(5, complete_graph(5))], 1, 0.5, 2, ["E(x1,x2)"])
    row = rep.rows[0]
    assert not row.reached and len(row.skeleton) == 2
    assert row.round_trip_ok and row.theory_holds


def test_pipeline_unmarked_identity():
    rep = pipeline_demo(GeneratorSpec("cycle", (10, 20)), 1, 0.5, 2, ["E(x1,x2)"])
    for row in rep.rows:
        assert row.skeleton == () and row.round_trip_ok
        assert row.pairings[0]["original"] == row.pairings[0]["encoded"]


def test_pipeline_round_trip_random():
    rng = random.Random(4)
    gen = FormulaGen(rng, signature={"E": 2}, dist=False)
    for _ in range(15):
        seq = [(n, random_graph(rng, n, 0.3)) for n in sorted(rng.sample(range(4, 11), 2))]
        fs = [gen.with_free(["x1", "x2"], 1) for _ in range(2)]
        rep = pipeline_demo(seq, 1, Fraction(1, 3), 3, fs, max_ball=None)
        assert rep.ok


# ---------------------------------------------------------------- mass transport

def test_mass_transport_degrees():
    rng = random.Random(5)
    for _ in range(20):
        g = random_graph(rng, rng.randint(2, 9), 0.5)
        degs = [len(a) for a in g.adjacency]
        rep = mass_transport_check(g, P("true"), P("true"))
        assert rep.b == min(degs) and rep.a == max(degs)
        assert rep.holds
        if rep.b:
            assert rep.lhs == rep.b and rep.rhs == rep.a


def test_mass_transport_star():
    rep = mass_transport_check(star_graph(5), P("exists y. E(x,y) & !E(y,y)"), P("true"))
    assert rep.holds and not rep.trivial
    js = rep.to_json()
    assert js["measure"] == "uniform"


def test_mass_transport_ignores_weights_and_trivial_cases():
    g = make_structure(3, {"E": [(0, 1), (1, 0)]}, {"E": 2}, [Fraction(1, 2), Fraction(1, 2), 0])
    rep = mass_transport_check(g, P("x = x"), P("x = x"))
    assert rep.trivial and rep.holds
    assert mass_transport_check(path_graph(3), P("false & x = x"), P("true")).trivial


def test_mass_transport_errors():
    with pytest.raises(FormulaError):
        mass_transport_check(path_graph(3), P("E(x,y)"), P("true"))
    with pytest.raises(FormulaError):
        mass_transport_check(path_graph(3), P("true"), P("true"), gamma=P("E(x,x)"))


def test_mass_transport_custom_gamma():
    g = make_structure(4, {"R": [(0, 1), (0, 2), (3, 2)]}, {"R": 2})
    rep = mass_transport_check(g, P("exists y. R(x,y)"), P("exists y. R(y,x)"), gamma=P("R(u,v)"))
    assert (rep.b, rep.a) == (1, 2) and rep.holds


# ---------------------------------------------------------------- Qm probes

def test_qm_probe_examples():
    rep = qm_probes(complete_graph(3), P("E(x,y)"))
    assert rep.phi_qm and rep.agree and rep.phi_pairing > 0
    rep = qm_probes(path_graph(3), P("false & x = y"))
    assert not rep.phi_qm and rep.phi_pairing == 0
    empty = make_structure(4, {"E": []}, {"E": 2})
    rep = qm_probes(empty, P("E(x,y)"), K=3)
    assert not rep.phi_qm and rep.psi_sequence == (1.0, 1.0, 1.0)
    assert rep.to_json()["agree"] is True


def test_qm_probe_weighted_agreement():
    rng = random.Random(6)
    gen = FormulaGen(rng, signature={"E": 2})
    for _ in range(40):
        n = rng.randint(1, 6)
        raw = [rng.choice([0, 1, 2]) for _ in range(n)]
        if not any(raw):
            raw[0] = 1
        g = random_graph(rng, n, 0.5)
        s = make_structure(n, g.relations, g.arities, [Fraction(r, sum(raw)) for r in raw])
        rep = qm_probes(s, gen.with_free(["x", "y"], 1))
        assert rep.agree


def test_qm_probe_errors():
    with pytest.raises(FormulaError):
        qm_probes(path_graph(3), P("E(x,x)"))


def test_invariant_violation_is_exported():
    assert issubclass(InvariantViolation, Exception)
