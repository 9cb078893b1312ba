import numpy as np
import pytest

from nullity_lab import lookup
from nullity_lab.bundle import (
    BaseCurve,
    ChartError,
    HolonomyElement,
    LiftError,
    build_leaf_chart,
    classify_fiber_action,
    holonomy_sample,
    horizontal_lift,
    parallel_displacement,
)
from nullity_lab.immersions import _torus_curve_derivs, lookup as cat_lookup


def circle_curve(z=0.0, turns=1.0):
    return BaseCurve(lambda t: np.array([2 * np.pi * turns * t - np.pi * 0, z])
                     * np.array([1.0, 0]) + np.array([0.0, z]),
                     lambda t: np.array([2 * np.pi * turns, 0.0]))


def test_build_leaf_chart_cylinder():
    chart = build_leaf_chart(lookup("cylinder"), np.array([0.0, 0.0]))
    assert chart.mu == 1
    # leaf coordinate is z, transverse is theta
    assert abs(abs(chart.kernel[1, 0]) - 1.0) < 1e-12
    assert abs(chart.kernel[0, 0]) < 1e-12
    assert abs(abs(chart.transverse[0, 0]) - 1.0) < 1e-12
    assert chart.slice_tangency < 1e-6


def test_build_leaf_chart_h3():
    chart = build_leaf_chart(lookup("h3_counterexample"), np.array([0.0, 0.0]))
    # leaf coordinate is s (axis 1), transverse is t (axis 0)
    assert abs(chart.kernel[0, 0]) < 1e-10
    assert abs(chart.transverse[1, 0]) < 1e-10


def test_build_leaf_chart_rejects_extremes():
    with pytest.raises(ChartError, match="no transverse"):
        build_leaf_chart(lookup("plane"), np.array([0.0, 0.0]))
    with pytest.raises(ChartError, match="no leaf"):
        build_leaf_chart(lookup("sphere"), np.array([0.0, 0.0]))


def test_horizontal_lift_cylinder_circle():
    cyl = lookup("cylinder")
    curve = circle_curve(z=0.0)
    path = horizontal_lift(cyl, curve, np.array([0.0, 5.0]), n_steps=400)
    # oracle: lift of the base circle through (1, 0, 5) is (cos t, sin t, 5)
    for t, x in zip(path.ts[::40], path.points[::40]):
        expect = np.array([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t), 5.0])
        assert np.linalg.norm(x - expect) < 1e-6
    assert path.horizontality_residual < 1e-6
    assert path.on_manifold_residual < 1e-9


def test_horizontal_lift_identity_start():
    cyl = lookup("cylinder")
    curve = BaseCurve(lambda t: np.array([1.5 * t, 0.3]),
                      lambda t: np.array([1.5, 0.0]))
    path = horizontal_lift(cyl, curve, np.array([0.0, 0.3]), n_steps=200)
    assert path.horizontality_residual < 1e-6
    assert np.linalg.norm(path.points[-1]
                          - cyl.value(np.array([1.5, 0.3]))) < 1e-9


def test_horizontal_lift_rejects_off_leaf_start():
    cyl = lookup("cylinder")
    curve = circle_curve(z=0.0)
    with pytest.raises(LiftError, match="not on the leaf"):
        horizontal_lift(cyl, curve, np.array([0.5, 5.0]))


def test_horizontal_lift_h3_preserves_s():
    imm = lookup("h3_counterexample")
    curve = BaseCurve(lambda t: np.array([10.0 * t - 5.0, 0.0]),
                      lambda t: np.array([10.0, 0.0]))
    for s0 in (0.5, -1.0, 2.0):
        path = horizontal_lift(imm, curve, np.array([-5.0, s0]), n_steps=500)
        assert np.max(np.abs(path.params[:, 1] - s0)) < 1e-6
        assert path.horizontality_residual < 1e-6


def test_horizontal_lift_sphere_orbit_preserves_s():
    imm = lookup("sphere_orbit")
    curve = BaseCurve(lambda t: np.array([2 * np.pi * t, 0.2]),
                      lambda t: np.array([2 * np.pi, 0.0]))
    path = horizontal_lift(imm, curve, np.array([0.0, 0.9]), n_steps=400)
    assert np.max(np.abs(path.params[:, 1] - 0.9)) < 1e-6
    # full loop returns to the start point
    assert np.linalg.norm(path.points[-1] - path.points[0]) < 1e-9


def test_parallel_displacement_cylinder_quarter():
    cyl = lookup("cylinder")
    quarter = BaseCurve(lambda t: np.array([0.5 * np.pi * t, 0.0]),
                        lambda t: np.array([0.5 * np.pi, 0.0]))
    pts = [np.array([0.0, 0.0]), np.array([0.0, 1.0]), np.array([0.0, 3.0])]
    out = parallel_displacement(cyl, quarter, pts, n_steps=300)
    assert out.distortion < 1e-8
    # z-values preserved
    assert np.allclose(out.start_coords, out.end_coords, atol=1e-8)
    assert out.element.displacement_error < 1e-6


def test_parallel_displacement_constant_curve_identity():
    cyl = lookup("cylinder")
    const = BaseCurve(lambda t: np.array([0.3, 0.0]),
                      lambda t: np.array([0.0, 0.0]))
    out = parallel_displacement(cyl, const,
                                [np.array([0.3, -1.0]), np.array([0.3, 2.0])],
                                n_steps=50)
    assert out.element.is_identity(1e-9)


def test_parallel_displacement_sphere_orbit_loop():
    imm = lookup("sphere_orbit")
    loop = BaseCurve(lambda t: np.array([0.4 + 2 * np.pi * t, 0.0]),
                     lambda t: np.array([2 * np.pi, 0.0]))
    pts = [np.array([0.4, -0.5]), np.array([0.4, 0.0]), np.array([0.4, 0.6])]
    out = parallel_displacement(imm, loop, pts, n_steps=400)
    assert out.is_loop
    assert out.element.kind == "orthogonal"
    assert out.element.displacement_error < 1e-6
    assert out.distortion < 1e-6
    M = out.element.linear
    assert np.linalg.norm(M.T @ M - np.eye(2)) < 1e-6


def test_parallel_displacement_rejects_hyperbolic():
    imm = lookup("h3_counterexample")
    loop = BaseCurve(lambda t: np.array([t, 0.0]), lambda t: np.array([1.0, 0.0]))
    with pytest.raises(LiftError, match="Euclidean and sphere"):
        parallel_displacement(imm, loop, [np.array([0.0, 0.0])])


def test_tangent_developable_translation_oracle():
    """Winding loop holonomy = ruling translation by the curve length.

    The ruling arclength coordinate w = v |gamma'(u)| satisfies
    dw = -|gamma'| du along horizontal curves, so one negative turn of the
    closed base translates it by +length(gamma).  The fitted offset is in the
    g-orthonormal leaf frame at the base point, which is arclength-scaled.
    """
    imm = lookup("tangent_developable")
    r, p = imm.meta["r"], imm.meta["p"]
    # curve length by fine quadrature (independent oracle)
    us = np.linspace(0, 2 * np.pi, 20001)
    speeds = [np.linalg.norm(_torus_curve_derivs(u, r, p)[1]) for u in us]
    length = float(np.trapezoid(speeds, us))
    loop = BaseCurve(lambda t: np.array([-2 * np.pi * t, 1.8]),
                     lambda t: np.array([-2 * np.pi, 0.0]))
    pts = [np.array([0.0, 1.6]), np.array([0.0, 1.8]), np.array([0.0, 2.1])]
    out = parallel_displacement(imm, loop, pts, n_steps=1500)
    assert out.is_loop
    L, b = out.element.linear, out.element.offset
    assert abs(L[0, 0] - 1.0) < 1e-5
    assert abs(b[0] - length) < 1e-4, (b, length)


def test_lift_uniqueness_rk4_order():
    """Lifts at steps h and h/2 agree to at least fourth order."""
    imm = lookup("tangent_developable")
    curve = BaseCurve(lambda t: np.array([-2.0 * t, 1.5]),
                      lambda t: np.array([-2.0, 0.0]))
    start = np.array([0.0, 1.2])
    ends = {}
    for n in (50, 100, 200):
        path = horizontal_lift(imm, curve, start, n_steps=n, residual_tol=1e-3)
        ends[n] = path.points[-1]
    e1 = np.linalg.norm(ends[50] - ends[200])
    e2 = np.linalg.norm(ends[100] - ends[200])
    if e1 > 1e-13:
        order = np.log2(e1 / max(e2, 1e-16)) / 1.0
        assert order > 3.0, (e1, e2, order)


def test_holonomy_sample_cylinder_identity():
    sample = holonomy_sample(lookup("cylinder"), np.array([0.0, 0.0]),
                             count=12, radius=0.5, seed=1, n_steps=300)
    assert len(sample.elements) == 12
    for e in sample.elements:
        assert e.kind == "affine"
        assert abs(e.linear[0, 0] - 1.0) < 1e-6
        assert abs(e.offset[0]) < 1e-6


def test_holonomy_sample_small_radius_identity():
    sample = holonomy_sample(lookup("tangent_developable"), np.array([0.0, 1.5]),
                             count=8, radius=1e-4, seed=3, n_steps=200,
                             windings=(0,), fiber_offsets=(-0.2, 0.0, 0.2))
    for e in sample.elements:
        assert e.is_identity(1e-5)


def test_holonomy_sample_developable_windings():
    imm = lookup("tangent_developable")
    sample = holonomy_sample(imm, np.array([0.0, 1.5]), count=20, radius=0.05,
                             seed=7, n_steps=700, windings=(-1, 0, 1),
                             fiber_offsets=(-0.15, 0.0, 0.15))
    r, p = imm.meta["r"], imm.meta["p"]
    us = np.linspace(0, 2 * np.pi, 20001)
    length = float(np.trapezoid(
        [np.linalg.norm(_torus_curve_derivs(u, r, p)[1]) for u in us], us))
    translations = []
    for e in sample.elements:
        w = e.loop["winding"][0]
        assert abs(e.offset[0] - (-w * length)) < 1e-3, (w, e.offset)
        translations.append(e.offset[0])
    # some loops must wind for the sample to be informative
    assert any(abs(tr) > 1.0 for tr in translations)
    # failures are allowed (lifts toward the edge exit), but not all
    assert len(sample.elements) >= 8


def test_holonomy_composition_and_reversal():
    """element(c1 . c2) == element(c2) o element(c1); reversal inverts."""
    imm = lookup("tangent_developable")
    u0 = np.array([0.0, 7.0])
    chart = build_leaf_chart(imm, u0)

    def loop_fn(a, b, w):
        return BaseCurve.fourier_loop(u0, chart.transverse, 0.05,
                                      [[a]], [[b]],
                                      winding_shift=np.array([2 * np.pi * w, 0.0]))

    pts = [np.array([0.0, 6.8]), np.array([0.0, 7.0]), np.array([0.0, 7.3])]
    c1 = loop_fn(0.4, -0.3, -1)
    c2 = loop_fn(-0.2, 0.5, 1)

    def concat(f, g):
        def fn(t):
            return f(2 * t) if t < 0.5 else g(2 * t - 1)

        def dfn(t):
            return 2 * f.velocity(2 * t) if t < 0.5 else 2 * g.velocity(2 * t - 1)

        return BaseCurve(fn, dfn, pieces=((0.0, 0.5), (0.5, 1.0)))

    e1 = parallel_displacement(imm, c1, pts, n_steps=900, chart=chart).element
    e2 = parallel_displacement(imm, c2, pts, n_steps=900, chart=chart).element
    e12 = parallel_displacement(imm, concat(c1, c2), pts, n_steps=1800,
                                chart=chart).element
    assert e12.distance_to(e2.compose(e1)) < 1e-5

    rev = BaseCurve(lambda t: c1(1 - t), lambda t: -c1.velocity(1 - t))
    erev = parallel_displacement(imm, rev, pts, n_steps=900, chart=chart).element
    assert erev.distance_to(e1.inverse()) < 1e-5


def _rotation_elements(angle, n=120):
    els = []
    for k in range(1, n + 1):
        th = angle * (1 + (k % 3))
        M = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        els.append(HolonomyElement(kind="orthogonal", linear=M, offset=None))
    return els


def test_classify_identity_elements():
    ident = [HolonomyElement(kind="affine", linear=np.eye(1),
                             offset=np.zeros(1)) for _ in range(120)]
    out = classify_fiber_action(ident, np.array([0.7]), fiber_dim=1, seed=0)
    assert out.verdict == "polar-like"
    assert out.orbit_dim == 0


def test_classify_dense_rotations_transitive():
    els = _rotation_elements(0.61803398875)
    p = np.array([1.0, 0.0])
    out = classify_fiber_action(els, p, fiber_dim=1, seed=0)
    assert out.verdict == "transitive"
    assert out.orbit_dim == 1


def test_classify_translations_in_plane_polar():
    # synthetic 2-dim fiber with orbits = x-lines: polar (sections = y-lines)
    rng = np.random.default_rng(0)
    els = [HolonomyElement(kind="affine", linear=np.eye(2),
                           offset=np.array([rng.normal(), 0.0]))
           for _ in range(150)]
    out = classify_fiber_action(els, np.array([0.0, 0.0]), fiber_dim=2, seed=1)
    assert out.verdict == "polar-like"
    assert out.orbit_dim == 1


def test_classify_requires_enough_elements():
    with pytest.raises(ValueError, match="100"):
        classify_fiber_action([], np.array([0.0]), fiber_dim=1)
