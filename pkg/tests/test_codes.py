import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neuraldec.codes import (AlistError, LayerPlan, ParityCheckMatrix, build_tanner_graph, check_syndrome,
                             default_layer_plan, degree_profile, gf2_rank, parse_alist, parse_protomap,
                             write_alist, write_protomap)
from neuraldec.testcodes import PBRL_SURROGATE_PROTO, dvbs2_like, pbrl_surrogate, regular_code

ALIST = """4 2
2 3
1 2 1 2
3 3
1
1 2
2
1 2
1 2 4
2 3 4
"""


def test_parse_alist_small():
    H = parse_alist(ALIST)
    assert (H.n, H.m, H.k) == (4, 2, 2)
    assert H.rows == ((0, 1, 3), (1, 2, 3))


def test_parse_alist_zero_padding_stripped():
    padded = """4 2
2 3
1 2 1 2
3 3
1 0
1 2
2 0
1 2
1 2 4
2 3 4
"""
    assert parse_alist(padded) == parse_alist(ALIST)


def test_parse_alist_out_of_range_reports_line():
    bad = ALIST.replace("2 3 4\n", "2 3 5\n")
    with pytest.raises(AlistError) as exc:
        parse_alist(bad)
    assert exc.value.line == 10


def test_parse_alist_inconsistent_sections():
    bad = ALIST.replace("1 2 4\n", "1 3 4\n")
    with pytest.raises(AlistError):
        parse_alist(bad)


def test_parse_alist_dimension_mismatch():
    with pytest.raises(AlistError):
        parse_alist(ALIST.replace("4 2\n", "5 2\n", 1))


def test_tanner_graph_small(small_H):
    G = build_tanner_graph(small_H)
    assert G.check_degrees.tolist() == [3, 3]
    assert G.var_degrees.tolist() == [1, 2, 1, 2]
    assert G.num_edges == 6
    # row-major edge ids
    assert list(zip(G.edge_check.tolist(), G.edge_var.tolist())) == [(0, 0), (0, 1), (0, 3), (1, 1), (1, 2), (1, 3)]


def test_identity_like_graph():
    G = build_tanner_graph(ParityCheckMatrix.from_dense([[1, 0], [0, 1]]))
    assert G.check_degrees.tolist() == [1, 1]
    assert G.var_degrees.tolist() == [1, 1]


def test_degree_profile_small(small_H):
    lam, rho = degree_profile(build_tanner_graph(small_H))
    assert rho == {3: 1.0}
    assert lam == pytest.approx({1: 2 / 6, 2: 4 / 6})


def test_degree_profile_regular():
    lam, rho = degree_profile(build_tanner_graph(regular_code(60, 3, 6)))
    assert lam == {3: 1.0} and rho == {6: 1.0}


def test_pbrl_surrogate_profile_matches_target_distribution():
    # target edge distribution of the k=1032 PBRL code (keys are node degrees)
    lam, rho = degree_profile(build_tanner_graph(pbrl_surrogate(4)[0]))
    assert {d: round(v, 4) for d, v in rho.items()} == {3: 0.0238, 4: 0.0635, 5: 0.0794, 6: 0.1905, 7: 0.2222,
                                                        8: 0.1270, 18: 0.1429, 19: 0.1508}
    assert {d: round(v, 4) for d, v in lam.items()} == {1: 0.1190, 5: 0.0794, 6: 0.0952, 7: 0.0556, 13: 0.3095,
                                                        16: 0.1270, 27: 0.2143}


def test_dvbs2_like_profile():
    G = build_tanner_graph(dvbs2_like(0.1))
    lam, rho = degree_profile(G)
    assert set(G.degree_sets[0]) == {4, 5, 6, 7}
    assert set(G.degree_sets[1]) == {1, 2, 3, 8}


def test_check_syndrome(small_H):
    assert check_syndrome(small_H, [0, 0, 0, 0])
    assert not check_syndrome(small_H, [1, 1, 0, 0])
    assert check_syndrome(small_H, [1, 0, 1, 1])
    with pytest.raises(ValueError):
        check_syndrome(small_H, [0, 0, 0])


def test_layer_plans():
    H = regular_code(12, 2, 4)  # 6 checks
    G = build_tanner_graph(H)
    assert default_layer_plan(G, 3).layers == ((0, 1), (2, 3), (4, 5))
    assert default_layer_plan(G, 1).layers == (tuple(range(6)),)
    with pytest.raises(ValueError):
        default_layer_plan(G, 4)
    G3 = build_tanner_graph(ParityCheckMatrix.from_dense([[1, 1, 0], [0, 1, 1], [1, 0, 1]]))
    assert default_layer_plan(G3, [[1, 0], [2]]).layers == ((1, 0), (2,))
    with pytest.raises(ValueError):
        default_layer_plan(G3, [[1, 0], [0, 2]])
    with pytest.raises(ValueError):
        LayerPlan(((0,), ())).validate(1)


def test_default_plan_follows_proto_rows():
    H, P = pbrl_surrogate(4)
    plan = default_layer_plan(build_tanner_graph(H, P))
    assert len(plan) == PBRL_SURROGATE_PROTO.shape[0]
    assert all(len(layer) == 4 for layer in plan.layers)


def test_protomap_round_trip():
    H, P = pbrl_surrogate(3)
    Q = parse_protomap(write_protomap(P), build_tanner_graph(H).num_edges)
    assert np.array_equal(P.cell, Q.cell) and (Q.lift, Q.rows, Q.cols) == (P.lift, P.rows, P.cols)
    with pytest.raises(ValueError):
        parse_protomap(write_protomap(P), 5)


def test_gf2_rank():
    assert gf2_rank(ParityCheckMatrix.from_dense([[1, 1, 0], [0, 1, 1], [1, 0, 1]])) == 2
    assert gf2_rank(ParityCheckMatrix.from_dense(np.eye(5, dtype=int))) == 5


def test_matrix_validation():
    with pytest.raises(ValueError):
        ParityCheckMatrix(3, ((0, 0, 1),))
    with pytest.raises(ValueError):
        ParityCheckMatrix(3, ((),))
    with pytest.raises(ValueError):
        ParityCheckMatrix(3, ((1, 3),))


@st.composite
def matrices(draw):
    n = draw(st.integers(2, 30))
    m = draw(st.integers(1, 15))
    rows = []
    for _ in range(m):
        r = draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n))
        rows.append(tuple(sorted(r)))
    return ParityCheckMatrix(n, tuple(rows))


@settings(max_examples=60, deadline=None)
@given(matrices(), st.booleans())
def test_alist_round_trip(H, pad):
    # columns that no row touches cannot be written as alist; pad them into row 0
    cols = {j for r in H.rows for j in r}
    if len(cols) < H.n:
        H = ParityCheckMatrix(H.n, (tuple(sorted(set(H.rows[0]) | (set(range(H.n)) - cols))),) + H.rows[1:])
    assert parse_alist(write_alist(H, pad=pad)) == H


@settings(max_examples=60, deadline=None)
@given(matrices())
def test_graph_invariants(H):
    G = build_tanner_graph(H)
    assert G.num_edges == G.check_degrees.sum() == G.var_degrees.sum()
    for e in range(G.num_edges):
        assert G.edge_of(int(G.edge_check[e]), int(G.edge_var[e])) == e
    lam, rho = degree_profile(G)
    assert abs(sum(lam.values()) - 1) < 1e-12 and abs(sum(rho.values()) - 1) < 1e-12
