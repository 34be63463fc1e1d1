import numpy as np
import pytest

from daestruct.benchmarks import build_circuit, by_name
from daestruct.errors import StepFailure
from daestruct.sim import TransientResult, integrate, perturbation_probe
from daestruct.waveforms import Waveform


def rl():
    return build_circuit(3, [("V1", 1, 0, "V", 1.0), ("R1", 1, 2, "R", 1.0), ("L1", 2, 0, "L", 1.0)])


def rl_error(h):
    res = integrate(rl(), (0.0, 1.0), h)
    return abs(res.column("i_L1")[-1] - (1 - np.exp(-1.0)))


def test_rl_step_response():
    res = integrate(rl(), (0.0, 1.0), 1e-3)
    assert res.column("i_L1")[-1] == pytest.approx(0.6321, abs=2e-2)
    assert len(res.t) == res.x.shape[0] == 1001
    assert res.residuals.max() < 1e-12


def test_first_order_convergence():
    e1, e2 = rl_error(1e-2), rl_error(5e-3)
    assert 1.8 < e1 / e2 < 2.2


def test_zero_span():
    res = integrate(rl(), (0.0, 0.0), 1e-3)
    assert res.x.shape == (1, 3 + 2)


def test_resistive_divider_constant():
    s = build_circuit(3, [("V1", 1, 0, "V", 2.0), ("R1", 1, 2, "R", 1.0), ("R2", 2, 0, "R", 3.0)])
    res = integrate(s, (0.0, 0.1), 1e-2)
    np.testing.assert_allclose(res.column("e2"), 1.5, atol=1e-12)
    np.testing.assert_allclose(res.column("i_R1"), 0.5, atol=1e-12)


def test_step_failure():
    class Bad:
        E = np.zeros((2, 2))
        A = np.array([[1.0, 1.0], [1.0, 1.0]])
        names = ["a", "b"]

        def forcing(self, t):
            return np.zeros(2)

    with pytest.raises(StepFailure):
        integrate(Bad(), (0.0, 1.0), 0.1)


def test_bad_arguments():
    with pytest.raises(ValueError):
        integrate(rl(), (0.0, 1.0), 0.0)
    with pytest.raises(ValueError):
        integrate(rl(), (1.0, 0.0), 0.1)


def test_csv_format(tmp_path):
    res = TransientResult(np.array([0.0, 0.1]), np.array([[1.0, 2.0], [1 / 3, 0.0]]), ["a", "b"], 0.1)
    text = res.to_csv(tmp_path / "out.csv")
    assert text.splitlines()[0] == "t,a,b"
    assert text.splitlines()[2] == "0.10000000000000001,0.33333333333333331,0"
    assert (tmp_path / "out.csv").read_text() == text


def test_pwl_source():
    s = build_circuit(3, [("V1", 1, 0, "V", Waveform("pwl", (0.0, 0.0, 0.5, 1.0, 1.0, 1.0))),
                          ("R1", 1, 2, "R", 1.0), ("C1", 2, 0, "C", 1.0)])
    res = integrate(s, (0.0, 1.0), 1e-3)
    np.testing.assert_allclose(res.column("e1"), np.interp(res.t, [0, 0.5, 1], [0, 1, 1]), atol=1e-12)


def test_probe_index_one():
    r = perturbation_probe(by_name("series_rlc").system(), "V1")
    assert r.label == "empirical"
    assert r.max_exponent < 0.2


def test_probe_index_two():
    r = perturbation_probe(by_name("c_parallel_v").system(), "V1")
    assert r.exponents["i_C1"] > 0.8


def test_probe_zero_eps():
    r = perturbation_probe(by_name("c_parallel_v").system(), "V1", eps_list=(0.0,),
                           omegas=(10.0,), t_end=0.01, h=1e-4)
    assert all(v == 0.0 for v in r.rows[0]["deviation"].values())
    assert all(p is None for p in r.exponents.values())
