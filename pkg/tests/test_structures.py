import random
from fractions import Fraction

import pytest

from oracle import floyd_warshall
from randgen import random_structure
from stonelab.generators import cycle_graph, path_graph
from stonelab.structures import (
    Signature, StructureError, ball, disjoint_union, forget_marks, gaifman_graph, induced_substructure,
    make_structure, marked_element, structure_from_json, structure_to_json, validate_structure, with_marks,
)


def test_edgeless_uniform_is_valid():
    s = make_structure(3, {"E": []}, {"E": 2})
    validate_structure(s)
    assert s.weight_vector == (Fraction(1, 3),) * 3
    assert s.is_uniform and s.is_exact


def test_out_of_range_element():
    with pytest.raises(StructureError, match="outside domain"):
        make_structure(3, {"E": [(0, 5)]})


def test_duplicate_mark():
    with pytest.raises(StructureError, match="at most one"):
        make_structure(3, {"M1": [(0,), (1,)]})


def test_element_with_two_marks():
    with pytest.raises(StructureError, match="two marks"):
        make_structure(3, {"M1": [(0,)], "M2": [(0,)]})


def test_z_marks_may_hold_on_many_elements():
    s = make_structure(3, {"Z1": [(0,), (1,)], "M1": [(2,)]})
    assert s.marks() == {1: 2}


def test_arity_mismatch_and_signature():
    with pytest.raises(StructureError):
        make_structure(3, {"E": [(0, 1), (0, 1, 2)]})
    s = make_structure(3, {"E": [(0, 1)]})
    with pytest.raises(StructureError, match="not in the signature"):
        validate_structure(s, Signature({"P": 1}))
    with pytest.raises(StructureError, match="differs"):
        validate_structure(s, Signature({"E": 3}))
    validate_structure(s, Signature({"E": 2}))


def test_empty_relation_needs_arity():
    with pytest.raises(StructureError, match="declare"):
        make_structure(2, {"E": []})


@pytest.mark.parametrize("weights", [[0.5, 0.6], [Fraction(1, 2), Fraction(1, 3)], [-1, 2], [1]])
def test_bad_weights(weights):
    with pytest.raises(StructureError):
        make_structure(2, {"E": []}, {"E": 2}, weights)


def test_weights_are_normalised():
    s = make_structure(2, {"E": []}, {"E": 2}, ["1/3", "2/3"])
    assert s.weights == (Fraction(1, 3), Fraction(2, 3)) and s.is_exact
    f = make_structure(2, {"E": []}, {"E": 2}, [0.25, 0.75])
    assert not f.is_exact and f.mass([1]) == 0.75


def test_gaifman_of_plain_graph_is_its_edge_set():
    s = cycle_graph(5)
    g = gaifman_graph(s)
    assert all(g[v] == {(v + 1) % 5, (v - 1) % 5} for v in range(5))


def test_gaifman_of_ternary_relation_is_triangle():
    s = make_structure(4, {"R": [(0, 1, 2)]})
    assert gaifman_graph(s) == {0: {1, 2}, 1: {0, 2}, 2: {0, 1}, 3: frozenset()}


def test_gaifman_of_empty_relations():
    s = make_structure(4, {"E": []}, {"E": 2})
    assert all(not a for a in s.adjacency)


def test_gaifman_ignores_loops_and_is_symmetric():
    rng = random.Random(1)
    for _ in range(50):
        s = random_structure(rng, 1, 8, signature={"E": 2, "R": 3})
        adj = s.adjacency
        for v in range(s.size):
            assert v not in adj[v]
            assert all(v in adj[u] for u in adj[v])


def test_ball_examples():
    p5 = path_graph(5)
    assert ball(p5, 2, 1) == {1, 2, 3}
    assert ball(p5, 3, 0) == {3}
    assert ball(p5, 0, 4) == set(range(5))
    assert ball(p5, 2, 2, removed={1}) == {2, 3, 4}


def test_ball_growth_matches_floyd_warshall():
    rng = random.Random(2)
    for _ in range(30):
        s = random_structure(rng, 1, 9, signature={"E": 2, "R": 3}, density=0.1)
        dist = floyd_warshall(s)
        for v in range(s.size):
            prev = ball(s, v, 0)
            for d in range(1, 5):
                cur = ball(s, v, d)
                assert prev <= cur
                assert cur == prev | {u for w in prev for u in s.adjacency[w]}
                assert cur == {u for u in range(s.size) if dist[v][u] <= d}
                prev = cur


def test_forget_marks():
    p3 = path_graph(3)
    assert forget_marks(p3) is p3
    marked = with_marks(p3, {"M1": [1]})
    assert marked_element(marked, 1) == 1 and marked_element(marked, 2) is None
    plain = forget_marks(marked)
    assert plain.relations == p3.relations
    assert forget_marks(plain) == plain


def test_with_marks_rejects_non_marks():
    with pytest.raises(StructureError):
        with_marks(path_graph(3), {"E": [1]})


def test_induced_and_union():
    s = path_graph(5)
    sub, index = induced_substructure(s, [1, 2, 4])
    assert index == {1: 0, 2: 1, 4: 2}
    assert sub.relations["E"] == {(0, 1), (1, 0)}
    u, offsets = disjoint_union([path_graph(2), path_graph(3)])
    assert offsets == [0, 2] and u.size == 5
    assert u.relations["E"] == {(0, 1), (1, 0), (2, 3), (3, 2), (3, 4), (4, 3)}


def test_json_round_trip():
    rng = random.Random(3)
    for _ in range(20):
        s = random_structure(rng, 1, 6, weighted=True, signature={"E": 2, "P": 1})
        assert structure_from_json(structure_to_json(s)) == s


def test_json_named_domain():
    s = structure_from_json({"domain": ["a", "b", "c"], "relations": {"E": [["a", "b"], ["b", "c"]]},
                             "weights": ["1/2", "1/4", "1/4"]})
    assert s.names == ("a", "b", "c")
    assert s.relations["E"] == {(0, 1), (1, 2)}
    assert structure_from_json(structure_to_json(s)) == s
    with pytest.raises(StructureError, match="unknown element"):
        structure_from_json({"domain": ["a"], "relations": {"P": [["z"]]}})


def test_constructors_produce_valid_structures():
    for s in (path_graph(7), cycle_graph(9)):
        validate_structure(s)
