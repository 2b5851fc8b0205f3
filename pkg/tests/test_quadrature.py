import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erf

from psk_hadamard.quadrature import QuadratureConfig, QuadratureError, dyadic_breakpoints, integrate


def test_polynomial_exact():
    # 15-point Kronrod is exact for degree <= 22
    assert integrate(lambda x: 3 * x**2, 0.0, 2.0) == pytest.approx(8.0, abs=1e-14)


def test_sine():
    assert integrate(np.sin, 0.0, np.pi) == pytest.approx(2.0, abs=1e-13)


def test_endpoint_singularity_sqrt():
    cfg = QuadratureConfig(rel_tol=1e-10, abs_tol=1e-13)
    assert integrate(np.sqrt, 0.0, 1.0, cfg) == pytest.approx(2 / 3, abs=1e-9)


def test_steep_log_endpoint():
    # shape of the VP integrands near t = exp(-E)
    E = 6.0
    val = integrate(lambda t: np.sqrt(np.maximum(E + np.log(t), 0.0)), np.exp(-E), 1.0)
    # independent: substitute u = E + ln t, dt = e^{u-E} du
    u = np.linspace(0.0, E, 2_000_001)
    ref = np.trapezoid(np.sqrt(u) * np.exp(u - E), u)
    assert val == pytest.approx(ref, abs=1e-7)


def test_empty_and_reversed_range():
    assert integrate(np.exp, 1.0, 1.0) == 0.0
    assert integrate(np.exp, 2.0, 1.0) == 0.0
    out = integrate(lambda x: np.stack([x, x], axis=1), 1.0, 0.5)
    assert out.shape == (2,) and np.all(out == 0)


def test_vector_valued_components_consistent():
    f = lambda x: np.stack([np.sin(x), np.cos(x), 1 - np.sin(x) - np.cos(x)], axis=1)  # noqa: E731
    out = integrate(f, 0.0, 1.3)
    assert out.shape == (3,)
    assert out.sum() == pytest.approx(1.3, abs=1e-14)
    assert out[0] == pytest.approx(1 - np.cos(1.3), abs=1e-13)


def test_depth_exhaustion_raises():
    cfg = QuadratureConfig(rel_tol=1e-15, abs_tol=1e-300, max_depth=2)
    with pytest.raises(QuadratureError) as info:
        integrate(lambda x: np.sign(x - 0.3123), 0.0, 1.0, cfg)
    assert info.value.error > 0


@pytest.mark.parametrize("kw", [dict(rel_tol=0), dict(abs_tol=-1), dict(max_depth=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        QuadratureConfig(**kw)


def test_tightened():
    cfg = QuadratureConfig(1e-6, 1e-9, 12).tightened()
    assert cfg.rel_tol == pytest.approx(1e-7) and cfg.abs_tol == pytest.approx(1e-10) and cfg.max_depth == 12


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-5, 5), width=st.floats(0.01, 10), k=st.floats(0.1, 3))
def test_exponential_matches_closed_form(a, width, k):
    b = a + width
    exact = (np.exp(k * b) - np.exp(k * a)) / k
    assert integrate(lambda x: np.exp(k * x), a, b) == pytest.approx(exact, rel=1e-9, abs=1e-12)


def test_breakpoints_rescue_narrow_feature():
    # a bump of width ~1 at the far end of a long interval
    f = lambda x: np.exp(-((x - 999.5) ** 2))  # noqa: E731
    exact = 0.5 * np.sqrt(np.pi) * (erf(999.5) + erf(0.5))
    assert integrate(f, 0.0, 1000.0, breakpoints=dyadic_breakpoints(0.0, 1000.0)) == pytest.approx(exact, rel=1e-9)


def test_dyadic_breakpoints():
    pts = dyadic_breakpoints(0.0, 10.0)
    assert pts.tolist() == [1.0, 2.0, 4.0, 6.0, 8.0, 9.0]
    assert dyadic_breakpoints(0.0, 0.5).size == 0
    assert dyadic_breakpoints(1.0, 1.0).size == 0
