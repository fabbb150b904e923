import random
from fractions import Fraction

import pytest

from oracle import Oracle, floyd_warshall
from randgen import random_structure
from stonelab.evaluation import stone_pairing_exact
from stonelab.generators import complete_graph, path_graph, star_graph, tree_graph
from stonelab.logic import Or, delta, hat_delta, parse_formula, zeta
from stonelab.residuality import default_mark_count, mark_plan, max_ball_fraction, skeleton_select
from stonelab.structures import StructureError, make_structure, with_marks


def test_examples():
    assert max_ball_fraction(complete_graph(6), 1).mass == 1
    edgeless = make_structure(7, {"E": []}, {"E": 2})
    for d in range(4):
        assert max_ball_fraction(edgeless, d).mass == Fraction(1, 7)
    rep = max_ball_fraction(path_graph(100), 2, eps=0.1)
    assert rep.mass == Fraction(5, 100) and rep.argmax == 2 and rep.verdict is True
    assert max_ball_fraction(path_graph(3), 0).verdict is None
    with pytest.raises(ValueError):
        max_ball_fraction(path_graph(3), -1)


def test_report_json():
    js = max_ball_fraction(path_graph(10), 1, eps=Fraction(1, 2)).to_json()
    assert js["exact"] == "3/10" and js["eps"] == 0.5 and js["residual"] is True


def test_non_decreasing_in_d_and_mean_identity():
    rng = random.Random(1)
    for _ in range(40):
        s = random_structure(rng, 1, 10, signature={"E": 2}, symmetric=True, weighted=True)
        dist = floyd_warshall(s)
        w = s.weight_vector
        prev = 0
        for d in range(4):
            m = max_ball_fraction(s, d).mass
            per = [sum((w[u] for u in range(s.size) if dist[v][u] <= d), Fraction(0)) for v in range(s.size)]
            assert m == max(per) and m >= prev
            prev = m
            mean = sum((w[v] * per[v] for v in range(s.size)), Fraction(0))
            f = parse_formula(f"dist<={d}(x1,x2)")
            assert mean == stone_pairing_exact(s, f).value == Oracle(s).pairing(f, ["x1", "x2"])


def test_skeleton_examples():
    S, rep = skeleton_select(star_graph(9), 1, Fraction(1, 5), 3)
    assert S == [0] and rep.mass == Fraction(1, 10) and rep.verdict
    S, rep = skeleton_select(path_graph(50), 1, 0.5, 3)
    assert S == [] and rep.verdict
    S, rep = skeleton_select(complete_graph(5), 1, 0.5, 2)
    assert len(S) == 2 and not rep.verdict and rep.mass == Fraction(3, 5)
    with pytest.raises(ValueError):
        skeleton_select(path_graph(3), 1, 0, 2)


def test_skeleton_result_is_remeasured():
    rng = random.Random(2)
    for _ in range(30):
        s = random_structure(rng, 2, 12, signature={"E": 2}, symmetric=True)
        S, rep = skeleton_select(s, 1, Fraction(1, 3), s.size)
        assert rep.verdict
        rest = [v for v in range(s.size) if v not in S]
        sub_adj = {v: {u for u in s.adjacency[v] if u not in S} for v in rest}
        for v in rest:
            seen = {v} | sub_adj[v]
            assert s.mass(seen) < Fraction(1, 3)


def test_mark_plan_stars():
    seq = [star_graph(n) for n in (3, 7, 15)]
    plans, summary = mark_plan(seq, [1], Fraction(1, 3), 2)
    for plan in plans:
        assert plan.skeleton == (0,)
        assert plan.marked.tuples("M1") == {(0,)}
        assert plan.marked.tuples("Z1") == {(0,)}
        assert plan.counts[1] == 1
    assert summary["monotone"] == {1: True}
    assert plans[0].to_json()["F"] == {"1": 1}


def test_mark_plan_residual_paths():
    plans, _ = mark_plan([path_graph(n) for n in (20, 40)], [1, 2], 0.9, 3)
    for plan in plans:
        assert plan.skeleton == () and plan.counts == {1: 0, 2: 0} and plan.reached
        assert not plan.marked.tuples("Z1")


def test_mark_plan_counts_follow_default():
    seq = [tree_graph(n) for n in (7, 15, 31, 63)]
    plans, summary = mark_plan(seq, [1, 2], [Fraction(1, 2)] * 4, 6)
    for plan in plans:
        for d, c in plan.counts.items():
            assert c == default_mark_count(d, plan.size, len(plan.skeleton))
            assert {t[0] for t in plan.marked.tuples(f"Z{d}")} == set(plan.skeleton[:c])
        for i, v in enumerate(plan.skeleton, 1):
            assert plan.marked.tuples(f"M{i}") == {(v,)}
    assert set(summary["monotone"]) == {1, 2}


def test_non_monotone_counts_are_flagged():
    seq = [star_graph(7), path_graph(9)]
    plans, summary = mark_plan(seq, [1], Fraction(1, 2), 3)
    assert plans[0].counts[1] == 1 and plans[1].counts[1] == 0
    assert summary["monotone"][1] is False


def test_mark_plan_errors():
    with pytest.raises(ValueError):
        mark_plan([path_graph(5), path_graph(3)], [1], 0.5, 2)
    with pytest.raises(ValueError):
        mark_plan([path_graph(5)], [], 0.5, 2)
    with pytest.raises(ValueError):
        mark_plan([path_graph(5)], [1], [0.5, 0.5], 2)
    with pytest.raises(StructureError):
        mark_plan([with_marks(path_graph(5), {"M1": [0]})], [1], 0.5, 2)
    with pytest.raises(ValueError):
        mark_plan([path_graph(5)], [1], 0.5, 2, count=lambda d, n, k: k + 1)


def _plans():
    rng = random.Random(3)
    out = [star_graph(12), tree_graph(20), complete_graph(6)]
    for _ in range(12):
        out.append(random_structure(rng, 4, 14, signature={"E": 2}, symmetric=True, density=0.3))
    out.sort(key=lambda s: s.size)
    plans, _ = mark_plan(out, [1, 2], Fraction(1, 4), 4)
    return plans


def test_zeta_is_bounded_by_free_ball_mass():
    for plan in _plans():
        s = plan.marked
        for d in (1, 2):
            dist = floyd_warshall(s)
            z = {t[0] for t in s.tuples(f"Z{d}")}
            free_balls = [s.mass([u for u in range(s.size) if dist[v][u] <= d])
                          for v in range(s.size) if not any(dist[v][u] <= d for u in z)]
            value = stone_pairing_exact(s, zeta(d)).value
            assert value <= max(free_balls, default=0)


def test_hat_delta_dominates_prefix_disjunctions():
    for plan in _plans():
        s = plan.marked
        for d in (1, 2):
            F = plan.counts[d]
            hat = stone_pairing_exact(s, hat_delta(d)).value
            for m in range(0, F + 1):
                disj = Or(tuple(delta(d, i) for i in range(1, m + 1))) if m else parse_formula("false & x1 = x1")
                value = stone_pairing_exact(s, disj).value
                assert hat >= value
                if m == F:
                    assert hat == value
