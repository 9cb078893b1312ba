import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nullity_lab import ambient
from nullity_lab.ambient import euclidean, hyperbolic, sphere


def test_metric_inner_euclidean_identity():
    sp = euclidean(3)
    assert ambient.metric_inner(sp, [1, 0, 0], [1, 0, 0]) == 1.0


def test_metric_inner_lorentz_signature():
    sp = hyperbolic(3)
    e4 = np.array([0.0, 0, 0, 1])
    e1 = np.array([1.0, 0, 0, 0])
    assert ambient.metric_inner(sp, e4, e4) == -1.0
    assert ambient.metric_inner(sp, e1, e4) == 0.0


def test_metric_inner_dimension_mismatch():
    with pytest.raises(ValueError):
        ambient.metric_inner(euclidean(3), [1, 0], [1, 0, 0])


def test_geodesic_euclidean():
    sp = euclidean(3)
    out = ambient.geodesic(sp, [0, 0, 0], [1, 0, 0], 2.0)
    assert np.allclose(out, [2, 0, 0])


def test_geodesic_sphere_quarter_circle():
    sp = sphere(2)
    p = np.array([1.0, 0, 0])
    v = np.array([0.0, 1, 0])
    out = ambient.geodesic(sp, p, v, np.pi / 2)
    assert np.allclose(out, [0, 1, 0], atol=1e-15)


def test_geodesic_hyperbolic():
    sp = hyperbolic(3)
    p = np.array([0.0, 0, 0, 1])
    v = np.array([1.0, 0, 0, 0])
    out = ambient.geodesic(sp, p, v, 1.0)
    assert np.allclose(out, [np.sinh(1), 0, 0, np.cosh(1)], atol=1e-15)


def test_geodesic_rejects_bad_velocity():
    sp = sphere(2)
    p = np.array([1.0, 0, 0])
    with pytest.raises(ValueError):
        ambient.geodesic(sp, p, np.array([0.0, 2.0, 0]), 1.0)   # not unit
    with pytest.raises(ValueError):
        ambient.geodesic(sp, p, np.array([1.0, 0, 0]), 1.0)     # not tangent


def test_geodesic_at_zero_is_exact():
    sp = sphere(2)
    p = np.array([0.6, 0.8, 0.0])
    v = np.array([-0.8, 0.6, 0.0])
    assert np.array_equal(ambient.geodesic(sp, p, v, 0.0), p)


def test_transport_euclidean_identity():
    sp = euclidean(3)
    w = np.array([0.3, -0.2, 1.1])
    out = ambient.parallel_transport(sp, [0, 0, 0], [1, 0, 0], w, 5.0)
    assert np.array_equal(out, w)


def test_transport_sphere_great_circle():
    sp = sphere(2)
    p = np.array([1.0, 0, 0])
    v = np.array([0.0, 1, 0])
    out = ambient.parallel_transport(sp, p, v, v, np.pi / 2)
    assert np.allclose(out, [-1, 0, 0], atol=1e-15)


def test_transport_sphere_fixed_complement():
    sp = sphere(2)
    p = np.array([1.0, 0, 0])
    v = np.array([0.0, 1, 0])
    w = np.array([0.0, 0, 1])
    for s in (0.3, 1.2, 2.9):
        assert np.allclose(ambient.parallel_transport(sp, p, v, w, s), w)


def _sphere_frame(x, y):
    p = np.array([x, y, 1.0])
    p /= np.linalg.norm(p)
    v = np.array([-p[1], p[0], 0.0])
    if np.linalg.norm(v) < 1e-6:
        v = np.array([1.0, 0.0, 0.0]) - p[0] * p
    v /= np.linalg.norm(v)
    w = np.cross(p, v)
    return p, v, w


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-3, 3),
       st.floats(-1, 1), st.floats(-1, 1))
def test_sphere_geodesic_and_transport_invariants(x, y, s, a, b):
    sp = sphere(2)
    p, v, w_unit = _sphere_frame(x, y)
    q = ambient.geodesic(sp, p, v, s)
    assert abs(ambient.metric_inner(sp, q, q) - 1.0) < 1e-12
    w1 = a * v + b * w_unit
    w2 = b * v - a * w_unit
    t1 = ambient.parallel_transport(sp, p, v, w1, s)
    t2 = ambient.parallel_transport(sp, p, v, w2, s)
    assert abs(ambient.metric_inner(sp, t1, t2)
               - ambient.metric_inner(sp, w1, w2)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-2, 2),
       st.floats(-1, 1), st.floats(-1, 1))
def test_hyperbolic_geodesic_and_transport_invariants(x, y, s, a, b):
    sp = hyperbolic(2)
    p = np.array([x, y, np.sqrt(1.0 + x * x + y * y)])
    v = np.array([1.0, 0.0, 0.0])
    v = ambient.tangent_project(sp, p, v)
    n = ambient.norm(sp, v)
    if n < 1e-6:
        return
    v = v / n
    q = ambient.geodesic(sp, p, v, s)
    assert abs(ambient.metric_inner(sp, q, q) + 1.0) < 1e-10
    w = ambient.tangent_project(sp, p, np.array([a, b, 0.0]))
    t = ambient.parallel_transport(sp, p, v, w, s)
    assert abs(ambient.metric_inner(sp, t, t)
               - ambient.metric_inner(sp, w, w)) < 1e-10
    qq = ambient.geodesic_velocity(sp, p, v, s)
    assert abs(ambient.metric_inner(sp, q, qq)) < 1e-10


def test_project_to_model():
    sp = hyperbolic(2)
    x = np.array([0.5, -0.2, 1.4])
    y = ambient.project_to_model(sp, x)
    assert abs(ambient.metric_inner(sp, y, y) + 1.0) < 1e-14
    assert y[-1] > 0


def test_distance():
    assert ambient.distance(euclidean(2), [0, 0], [3, 4]) == 5.0
    assert abs(ambient.distance(sphere(2), [1, 0, 0], [0, 1, 0]) - np.pi / 2) < 1e-14
    sp = hyperbolic(3)
    p = np.array([0.0, 0, 0, 1])
    q = ambient.geodesic(sp, p, np.array([1.0, 0, 0, 0]), 1.3)
    assert abs(ambient.distance(sp, p, q) - 1.3) < 1e-12
