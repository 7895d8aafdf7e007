import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exitlab.quadrature import QuadratureError, integrate, integrate_segments


@pytest.mark.parametrize("f, a, b, exact, log_scale", [
    (lambda x: np.exp(-x), 0.0, math.inf, 1.0, False),
    (lambda x: x**-2.0, 1.0, math.inf, 1.0, True),
    (lambda x: x**-0.5, 0.0, 1.0, 2.0, True),
    (lambda x: np.sin(x), 0.0, math.pi, 2.0, False),
    (lambda x: 1.0 / (1.0 + x * x), -math.inf, math.inf, math.pi, False),
])
def test_known_integrals(f, a, b, exact, log_scale):
    res = integrate(f, a, b, log_scale=log_scale)
    assert res.value == pytest.approx(exact, rel=1e-10)
    assert res.error < 1e-8


def test_reversed_limits_flip_the_sign():
    assert integrate(np.cos, 1.0, 0.0, log_scale=False).value == pytest.approx(-math.sin(1.0), rel=1e-12)


def test_segments_are_independent():
    edges = [1e-6, 1e-3, 1.0, 10.0]
    vals, _ = integrate_segments(lambda u: 1.0 / u, edges)
    np.testing.assert_allclose(vals, np.log(np.array(edges[1:]) / edges[:-1]), rtol=1e-11)


def test_divergent_integral_raises():
    with pytest.raises(QuadratureError):
        integrate(lambda u: 1.0 / u, 1.0, math.inf)


def test_bad_edges_rejected():
    with pytest.raises(ValueError):
        integrate_segments(np.exp, [0.0])
    with pytest.raises(ValueError):
        integrate_segments(np.exp, [1.0, 0.5], log_scale=False)


@settings(max_examples=40, deadline=None)
@given(p=st.floats(0.2, 3.0), a=st.floats(1e-6, 1.0), span=st.floats(1.5, 1e6))
def test_power_laws_in_log_variable(p, a, span):
    b = a * span
    exact = (b ** (1 - p) - a ** (1 - p)) / (1 - p) if abs(p - 1) > 1e-9 else math.log(span)
    assert integrate(lambda u: u**-p, a, b).value == pytest.approx(exact, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(cuts=st.lists(st.floats(0.01, 50.0), min_size=1, max_size=6, unique=True))
def test_additivity_over_segments(cuts):
    edges = [0.0] + sorted(cuts) + [60.0]
    vals, _ = integrate_segments(lambda x: np.exp(-x) * (1 + x), edges, log_scale=False)
    total = integrate(lambda x: np.exp(-x) * (1 + x), 0.0, 60.0, log_scale=False).value
    assert vals.sum() == pytest.approx(total, rel=1e-10)
