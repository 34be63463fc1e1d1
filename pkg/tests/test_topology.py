import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from daestruct.errors import InvalidBranch, NotConnected
from daestruct.topology import (Branch, CircuitGraph, analyze, branch_membership,
                                build_incidence, check_source_sanity, detect_cv_loops,
                                detect_li_cutsets)

from conftest import cv_loop_members_graph, li_cutset_members_graph


def graph(n, *spec):
    return CircuitGraph(n, [Branch(bid, a, b, k) for bid, a, b, k in spec])


def test_incidence_signs_and_mass_row():
    g = graph(3, ("R1", 1, 2, "R"), ("C1", 2, 0, "C"), ("V1", 1, 0, "V"))
    inc = build_incidence(g)
    np.testing.assert_array_equal(inc.A_R, [[1], [-1]])
    np.testing.assert_array_equal(inc.A_C, [[0], [1]])
    np.testing.assert_array_equal(inc.A_V, [[1], [0]])
    assert inc.A_L.shape == (2, 0)
    # every column has at most one +1 and one -1
    full = inc.stack("CLRVI")
    assert np.all((full == 1).sum(axis=0) <= 1) and np.all((full == -1).sum(axis=0) <= 1)


def test_validation_errors():
    with pytest.raises(InvalidBranch):
        build_incidence(graph(2, ("R1", 1, 1, "R")))
    with pytest.raises(InvalidBranch):
        build_incidence(graph(2, ("Q1", 1, 0, "Q")))
    with pytest.raises(InvalidBranch):
        build_incidence(graph(2, ("R1", 1, 0, "R"), ("R1", 1, 0, "R")))
    with pytest.raises(InvalidBranch):
        build_incidence(graph(2, ("R1", 1, 5, "R")))
    with pytest.raises(NotConnected):
        build_incidence(graph(4, ("R1", 1, 0, "R"), ("R2", 2, 3, "R")))


def test_v_loop_and_i_cutset():
    inc = build_incidence(graph(2, ("V1", 1, 0, "V"), ("V2", 1, 0, "V")))
    assert check_source_sanity(inc) == (False, True)
    inc = build_incidence(graph(3, ("I1", 0, 1, "I"), ("I2", 1, 2, "I"), ("R1", 2, 0, "R")))
    assert check_source_sanity(inc) == (True, False)
    inc = build_incidence(graph(2, ("V1", 1, 0, "V"), ("R1", 1, 0, "R")))
    assert check_source_sanity(inc) == (True, True)


def test_cv_loop_and_li_cutset_examples():
    inc = build_incidence(graph(2, ("V1", 1, 0, "V"), ("C1", 1, 0, "C")))
    assert detect_cv_loops(inc)
    inc = build_incidence(graph(3, ("V1", 1, 0, "V"), ("R1", 1, 2, "R"), ("C1", 2, 0, "C")))
    assert not detect_cv_loops(inc) and not detect_li_cutsets(inc)
    inc = build_incidence(graph(3, ("I1", 0, 1, "I"), ("L1", 1, 2, "L"), ("R1", 2, 0, "R")))
    assert detect_li_cutsets(inc)
    rep = analyze(inc)
    assert rep.li_cutset_branches == {"I1", "L1"}
    assert rep.to_dict()["li_cutset_branches"] == ["I1", "L1"]


def test_membership_examples():
    g = graph(3, ("V1", 1, 0, "V"), ("C1", 1, 2, "C"), ("C2", 2, 0, "C"),
              ("R1", 2, 0, "R"), ("C3", 1, 0, "C"))
    cv, li, _ = branch_membership(build_incidence(g))
    assert cv == {"V1", "C1", "C2", "C3"}
    assert li == set()


KINDS = "CLRVI"


@st.composite
def random_graph(draw):
    n = draw(st.integers(2, 6))
    # spanning tree first so the graph is connected
    spec = []
    for k in range(1, n):
        a = draw(st.integers(0, k - 1))
        spec.append((a, k, draw(st.sampled_from(KINDS))))
    extra = draw(st.integers(0, 6))
    for _ in range(extra):
        a = draw(st.integers(0, n - 1))
        b = draw(st.integers(0, n - 1).filter(lambda x: x != a))
        spec.append((a, b, draw(st.sampled_from(KINDS))))
    return CircuitGraph(n, [Branch(f"{k}{i}", a, b, k) for i, (a, b, k) in enumerate(spec)])


@settings(max_examples=200, deadline=None)
@given(random_graph())
def test_membership_matches_graph_oracle(g):
    inc = build_incidence(g)
    cv, li, _ = branch_membership(inc, 1e-10)
    assert cv == cv_loop_members_graph(g)
    assert li == li_cutset_members_graph(g)
    assert detect_cv_loops(inc, 1e-10) == bool(cv)
    assert detect_li_cutsets(inc, 1e-10) == bool(li)
