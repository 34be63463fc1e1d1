import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from daestruct.elements import (DescriptorElement, classify, evaluate, make_capacitor,
                                make_charge_capacitor, make_flux_inductor, make_inductor,
                                make_resistor, spot_check_strength)
from daestruct.errors import ShapeMismatch, Unclassified


def spd(rng, n):
    B = rng.standard_normal((n, n))
    return B @ B.T + n * np.eye(n)


@pytest.mark.parametrize("make, cls, diffs", [
    (make_resistor, "resistance-like", 1),
    (make_inductor, "inductance-like", 0),
    (make_capacitor, "capacitance-like", 0),
    (make_flux_inductor, "inductance-like", 1),
    (make_charge_capacitor, "capacitance-like", 1),
])
def test_classical_elements(make, cls, diffs):
    rep = classify(make(2.0))
    assert rep.element_class == cls
    assert rep.strong
    assert rep.differentiations_used == diffs


def test_witness_values():
    # i' = v'/R, i' = v/L, v' = i/C
    np.testing.assert_allclose(classify(make_resistor(4.0)).witness, [[0.25]])
    np.testing.assert_allclose(classify(make_inductor(2.0)).witness, [[0.5]])
    np.testing.assert_allclose(classify(make_capacitor(np.diag([1.0, 3.0]))).witness,
                               np.diag([1.0, 1.0 / 3.0]))
    np.testing.assert_allclose(classify(make_flux_inductor(2.0)).witness, [[0.5]])


def test_inductor_also_matches_resistance_template():
    rep = classify(make_inductor(1.0), all_classes=True)
    assert rep.element_class == "inductance-like"
    assert "resistance-like" in rep.matches


def test_negative_parameter_is_not_strong():
    rep = classify(make_resistor(-1.0))
    assert rep.element_class == "resistance-like" and not rep.strong
    assert rep.margin < 0


def index_two_internal_chain():
    """Resistor with an internal index-2 chain ``x1' = x2, x1 = 0``."""
    return DescriptorElement.from_blocks(
        2, 1,
        Kx=[[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
        Lx=[[0.0, -1.0], [1.0, 0.0], [0.0, 0.0]],
        Li=[[0.0], [0.0], [-1.0]],
        Lv=[[0.0], [0.0], [1.0]])


def test_unclassified_needs_two_differentiations():
    rep = classify(index_two_internal_chain())
    assert rep.element_class == "unclassified"
    assert set(rep.reasons) == {"inductance-like", "capacitance-like", "resistance-like"}
    with pytest.raises(Unclassified):
        classify(index_two_internal_chain(), hint="R")


def test_double_integrator_is_capacitance_like():
    # x1 = v, x1' = x2, x2' = i: v'' = i is an integrator chain, no second
    # differentiation is needed in the capacitance template
    el = DescriptorElement.from_blocks(
        2, 1,
        Kx=[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        Lx=[[1.0, 0.0], [0.0, -1.0], [0.0, 0.0]],
        Li=[[0.0], [0.0], [-1.0]],
        Lv=[[-1.0], [0.0], [0.0]])
    rep = classify(el)
    assert rep.element_class == "capacitance-like"
    assert not rep.strong


def test_hint_mismatch_raises():
    with pytest.raises(Unclassified):
        classify(make_capacitor(1.0), hint="L")
    with pytest.raises(ValueError):
        classify(make_capacitor(1.0), hint="Q")


def test_shape_checks():
    with pytest.raises(ShapeMismatch):
        DescriptorElement(1, 1, np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(ShapeMismatch):
        make_resistor(np.ones((2, 3)))


def test_evaluate_residual():
    el = make_capacitor(2.0)
    # 2 * v' - i
    np.testing.assert_allclose(evaluate(el, [], [3.0], [0.0], [], [0.0], [1.5]), [0.0])
    with pytest.raises(ShapeMismatch):
        evaluate(el, [], [1.0, 2.0], [0.0], [], [0.0], [0.0])


def test_to_dict_fields():
    d = classify(make_resistor(1.0)).to_dict()
    assert d["class"] == "resistance-like" and d["strong"] is True
    assert d["differentiations_used"] == 1


def test_spot_check_strength():
    ok, lam = spot_check_strength(lambda p: np.array([[1.0 + p * p]]), [0.0, 1.0, 2.0])
    assert ok and lam == pytest.approx(1.0)
    ok, _ = spot_check_strength(lambda p: np.array([[p]]), [1.0, -1.0])
    assert not ok


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 4))
def test_spd_parameters_are_strong(seed, n):
    rng = np.random.default_rng(seed)
    P = spd(rng, n)
    for make, cls in ((make_resistor, "resistance-like"), (make_inductor, "inductance-like"),
                      (make_capacitor, "capacitance-like"), (make_flux_inductor, "inductance-like"),
                      (make_charge_capacitor, "capacitance-like")):
        rep = classify(make(P))
        assert rep.element_class == cls and rep.strong
        # witness is the inverse parameter (conductance, inverse inductance/capacitance)
        np.testing.assert_allclose(rep.witness, np.linalg.inv(P), atol=1e-8)
