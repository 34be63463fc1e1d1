import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from daestruct.benchmarks import BENCHMARKS, build_circuit, by_name
from daestruct.elements import DescriptorElement, make_resistor
from daestruct.errors import IncompleteModel, ReductionUnavailable, ShapeMismatch
from daestruct.mna import ElementBinding, assemble, consistent_initial_values, index_bound
from daestruct.reduction import reduce_to_ode
from daestruct.sim import integrate
from daestruct.topology import Branch, CircuitGraph
from daestruct.waveforms import Waveform, dc

from conftest import derivative_array_index


def test_layout_series_vr():
    s = build_circuit(2, [("V1", 1, 0, "V", 1.0), ("R1", 1, 0, "R", 1.0)])
    assert s.names == ["e1", "i_R1", "i_V1"]
    assert s.E.shape == (3, 3)


def test_layout_rlc():
    s = by_name("series_rlc").system()
    assert s.size == 3 + 4
    assert s.names[:3] == ["e1", "e2", "e3"]


def test_flux_inductor_adds_state():
    s = build_circuit(3, [("V1", 1, 0, "V", 1.0), ("R1", 1, 2, "R", 1.0),
                          ("L1", 2, 0, "Lflux", 1.0)])
    assert "x_L1_1" in s.names
    assert s.size == 2 + 3 + 1


def test_unbound_branch_raises():
    g = CircuitGraph(2, [Branch("V1", 1, 0, "V"), Branch("R1", 1, 0, "R")])
    with pytest.raises(IncompleteModel):
        assemble(g, {}, {"V1": dc(1.0)})
    with pytest.raises(IncompleteModel):
        assemble(g, {"R1": ElementBinding(make_resistor(1.0))}, {})


def test_port_count_mismatch():
    g = CircuitGraph(2, [Branch("V1", 1, 0, "V"), Branch("R1", 1, 0, "R")])
    with pytest.raises(ShapeMismatch):
        assemble(g, {"R1": ElementBinding(make_resistor(np.eye(2)))}, {"V1": dc(1.0)})


def test_element_forcing_rejected():
    el = DescriptorElement.from_blocks(0, 1, Li=[[-1.0]], Lv=[[1.0]], forcing=lambda t: [0.0])
    g = CircuitGraph(2, [Branch("V1", 1, 0, "V"), Branch("R1", 1, 0, "R")])
    with pytest.raises(IncompleteModel):
        assemble(g, {"R1": ElementBinding(el)}, {"V1": dc(1.0)})


def test_pencil_rows_rc():
    s = build_circuit(3, [("V1", 1, 0, "V", 1.0), ("R1", 1, 2, "R", 2.0),
                          ("C1", 2, 0, "C", 3.0)])
    # names: e1 e2 i_C1 i_R1 i_V1 ; rows: KCL(2), V(1), C(1), R(1)
    assert s.names == ["e1", "e2", "i_C1", "i_R1", "i_V1"]
    np.testing.assert_array_equal(s.A[0], [0, 0, 0, 1, 1])
    np.testing.assert_array_equal(s.A[1], [0, 0, 1, -1, 0])
    np.testing.assert_array_equal(s.A[2], [1, 0, 0, 0, 0])
    np.testing.assert_array_equal(s.E[3], [0, 3, 0, 0, 0])
    np.testing.assert_array_equal(s.A[4], [1, -1, 0, -2, 0])
    np.testing.assert_array_equal(s.forcing(0.0), [0, 0, 1, 0, 0])


@pytest.mark.parametrize("bench", BENCHMARKS, ids=lambda b: b.name)
def test_benchmark_bounds_and_oracle(bench):
    s = bench.system()
    rep = index_bound(s, tol=1e-10)
    assert rep.theorem_bound == bench.expected_bound
    assert rep.oracle_index == bench.expected_oracle
    assert rep.oracle_index == derivative_array_index(s.E, s.A)
    assert rep.agreement is True


def test_index_one_and_two_examples():
    rep = index_bound(by_name("series_rlc").system())
    assert rep.theorem_bound == "<=1" and rep.oracle_index <= 1
    rep = index_bound(by_name("c_parallel_v").system())
    assert rep.theorem_bound == "<=2" and rep.oracle_index == 2
    assert "theorem 2: all hypotheses hold" in rep.hypothesis_trace


def test_pure_capacitor_loop_is_index_one():
    # the loop law is built into the node potentials, so no hidden constraint
    # needs a second differentiation
    s = by_name("pure_c_loop").system()
    assert derivative_array_index(s.E, s.A) == 1
    assert index_bound(s).oracle_index == 1


def test_v_loop_not_covered():
    s = build_circuit(2, [("V1", 1, 0, "V", 1.0), ("V2", 1, 0, "V", 1.0), ("R1", 1, 0, "R", 1.0)])
    rep = index_bound(s)
    assert rep.status == "not-covered"
    assert rep.reason == "Assumption 4 violated"
    assert sorted(rep.witness["v_loop"]) == ["V1", "V2"]
    assert rep.oracle_index is None


def test_i_cutset_not_covered():
    s = build_circuit(3, [("I1", 0, 1, "I", 1.0), ("I2", 1, 2, "I", 1.0), ("R1", 2, 0, "R", 1.0)])
    rep = index_bound(s)
    assert rep.status == "not-covered" and rep.witness["i_cutset_nodes"] == [1]


def test_weak_resistor_not_covered():
    s = build_circuit(2, [("V1", 1, 0, "V", 1.0), ("R1", 1, 0, "R", -1.0)])
    rep = index_bound(s)
    assert rep.theorem_bound == "not-covered"


def test_unclassified_element_not_covered():
    # resistor with an internal index-2 chain x1' = x2, x1 = 0
    el = DescriptorElement.from_blocks(
        2, 1, Kx=[[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]], Lx=[[0.0, -1.0], [1.0, 0.0], [0.0, 0.0]],
        Li=[[0.0], [0.0], [-1.0]], Lv=[[0.0], [0.0], [1.0]])
    g = CircuitGraph(2, [Branch("V1", 1, 0, "V"), Branch("R1", 1, 0, "R")])
    s = assemble(g, {"R1": ElementBinding(el)}, {"V1": dc(1.0)})
    rep = index_bound(s, oracle=False)
    assert rep.status == "not-covered" and "unclassified" in rep.reason


def test_asserted_element_gets_bound_without_oracle():
    g = CircuitGraph(3, [Branch("V1", 1, 0, "V"), Branch("R1", 1, 2, "R"),
                         Branch("X1", 2, 0, "L")])
    s = assemble(g, {"R1": ElementBinding(make_resistor(1.0)),
                     "X1": ElementBinding(None, "asserted")}, {"V1": dc(1.0)})
    assert not s.linear
    rep = index_bound(s)
    assert rep.theorem_bound == "<=1"
    assert rep.oracle_index is None and rep.agreement is None


def test_permutation_equivariance():
    b = by_name("mixed_cv_li_two_loop")
    base = index_bound(b.system()).oracle_index
    rng = np.random.default_rng(3)
    for _ in range(5):
        lines = list(b.lines)
        rng.shuffle(lines)
        s = build_circuit(b.nodes, lines)
        assert index_bound(s).oracle_index == base


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_random_rlc_soundness(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    lines = [("V1", 1, 0, "V", Waveform("sin", (0.0, 1.0, 1.0)))]
    k = 0
    for node in range(2, n + 1):
        k += 1
        kind = "RLC"[int(rng.integers(0, 3))]
        lines.append((f"{kind}{k}", int(rng.integers(1, node)), node, kind, float(rng.uniform(0.5, 2))))
    for node in range(1, n + 1):
        k += 1
        kind = "RLC"[int(rng.integers(0, 3))]
        lines.append((f"{kind}{k}", node, 0, kind, float(rng.uniform(0.5, 2))))
    s = build_circuit(n + 1, lines)
    rep = index_bound(s, tol=1e-10)
    if rep.theorem_bound in ("<=1", "<=2"):
        assert rep.agreement
        assert rep.oracle_index == derivative_array_index(s.E, s.A)


def test_consistent_initial_values_keep_states():
    s = build_circuit(3, [("V1", 1, 0, "V", 1.0), ("R1", 1, 2, "R", 1.0), ("C1", 2, 0, "C", 1.0)])
    z0 = consistent_initial_values(s)
    assert z0[s.names.index("e2")] == 0.0
    assert z0[s.names.index("e1")] == pytest.approx(1.0)
    assert z0[s.names.index("i_C1")] == pytest.approx(1.0)


def test_consistent_initial_values_index_two():
    s = by_name("c_parallel_v").system()
    z0 = consistent_initial_values(s)
    # v = sin(2 pi t): e1(0) = 0, i_C(0) = C v'(0) = 2 pi
    assert z0[s.names.index("i_C1")] == pytest.approx(2 * np.pi)


# ---- reduction to an explicit ODE --------------------------------------------------


def test_reduction_rc_matches_closed_form():
    s = build_circuit(3, [("V1", 1, 0, "V", 1.0), ("R1", 1, 2, "R", 1.0), ("C1", 2, 0, "C", 1.0)])
    ode = reduce_to_ode(s)
    z0 = consistent_initial_values(s)
    res = integrate(ode, (0.0, 1.0), 1e-3, z0)
    vc = res.column("e2")
    np.testing.assert_allclose(vc, 1 - np.exp(-res.t), atol=2e-2)


def test_reduction_without_capacitors_or_sources():
    s = build_circuit(3, [("I1", 0, 1, "I", 1.0), ("R1", 1, 2, "R", 1.0), ("R2", 2, 0, "R", 1.0),
                          ("L1", 1, 0, "L", 1.0)])
    ode = reduce_to_ode(s)
    np.testing.assert_allclose(ode.projectors["Q_CV"], np.eye(2), atol=1e-14)
    np.testing.assert_allclose(ode.projectors["P_CV"], 0, atol=1e-14)


@pytest.mark.parametrize("bench", [b for b in BENCHMARKS if b.expected_bound == "<=1"],
                         ids=lambda b: b.name)
def test_projector_chain_identity(bench):
    P = reduce_to_ode(bench.system()).projectors
    np.testing.assert_allclose(P["Q_CV"], P["Q_CV"] @ P["P_R-CV"], atol=1e-10)


def test_index_two_path_recorded():
    ode = reduce_to_ode(by_name("c_parallel_v").system())
    assert "second differentiation stage taken" in ode.trace
    ode = reduce_to_ode(by_name("series_rlc").system())
    assert "first differentiation stage suffices" in ode.trace


def test_reduction_unavailable():
    s = build_circuit(2, [("V1", 1, 0, "V", 1.0), ("V2", 1, 0, "V", 1.0), ("R1", 1, 0, "R", 1.0)])
    with pytest.raises(ReductionUnavailable):
        reduce_to_ode(s)


@pytest.mark.parametrize("bench", BENCHMARKS, ids=lambda b: b.name)
def test_reduced_ode_satisfies_dae(bench):
    # on consistent values the ODE right-hand side solves E z' + A z = f
    s = bench.system()
    ode = reduce_to_ode(s)
    for t in (0.0, 0.3):
        z = consistent_initial_values(s, t0=t)
        zdot = ode.rhs(z, t)
        np.testing.assert_allclose(s.E @ zdot + s.A @ z, s.forcing(t), atol=1e-9)
