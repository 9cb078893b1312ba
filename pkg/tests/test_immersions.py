import numpy as np
import pytest

from nullity_lab import ambient, catalog, lookup
from nullity_lab.immersions import (
    Box,
    ChartedImmersion,
    DomainError,
    LORENTZ_ETA,
    NotNilpotentError,
    killing_exp,
    make_h3_counterexample,
    make_h3_matrix,
    nearest_point,
    ProjectionError,
)

E1 = np.array([1.0, 0, 0])
E2 = np.array([0.0, 1, 0])


def numeric_clone(imm):
    """Value-only copy, forcing finite-difference jets."""
    return ChartedImmersion(
        imm.name + "_numeric", imm.space, imm.param_dim, imm.value,
        domain=imm.domain, eval_box=imm.eval_box, periods=imm.periods)


def test_jet_cylinder_closed_form():
    cyl = lookup("cylinder")
    jet = cyl.jet(np.array([0.0, 0.0]))
    assert np.allclose(jet.point, [1, 0, 0])
    assert np.allclose(jet.d1, np.array([[0, 0], [1, 0], [0, 1]]))
    assert np.allclose(jet.d2[:, 0, 0], [-1, 0, 0])
    assert np.allclose(jet.d2[:, 0, 1], 0)
    assert np.allclose(jet.d2[:, 1, 1], 0)


def test_jet_plane_vanishing_hessian():
    plane = lookup("plane")
    jet = plane.jet(np.array([0.7, -1.2]))
    assert np.allclose(jet.d2, 0)


def test_numeric_jet_matches_analytic_cylinder():
    cyl = lookup("cylinder")
    num = numeric_clone(cyl)
    u = np.array([0.3, 1.1])
    ja = cyl.jet(u)
    jn = num.jet(u)
    assert np.max(np.abs(jn.d1 - ja.d1)) < 1e-9
    assert np.max(np.abs(jn.d2 - ja.d2)) < 1e-9
    assert jn.d1_error is not None and jn.d2_error is not None


def test_numeric_jets_match_all_analytic_entries():
    for name, imm in catalog().items():
        num = numeric_clone(imm)
        rng = np.random.default_rng(3)
        for u in imm.eval_box.sample(rng, 4):
            ja = imm.jet(np.asarray(u))
            jn = num.jet(np.asarray(u))
            assert np.max(np.abs(jn.d1 - ja.d1)) < 1e-8, name


def test_jet_outside_box_rejected():
    plane = lookup("plane")
    with pytest.raises(DomainError):
        plane.jet(np.array([10.0, 0.0]))


def test_jet_periodic_axis_not_boxed():
    cyl = lookup("cylinder")
    jet = cyl.jet(np.array([25.0, 0.5]))    # theta far outside, but periodic
    assert np.allclose(jet.point, [np.cos(25.0), np.sin(25.0), 0.5])


def test_make_h3_matrix_canonical_columns():
    k = make_h3_matrix(E1, E2, 1.0)
    A = k.A
    assert np.array_equal(A @ [1, 0, 0, 0], [0, 0, 0, 0])
    assert np.array_equal(A @ [0, 1, 0, 0], [0, 0, 1, 1])
    assert np.array_equal(A @ [0, 0, 1, 0], [0, -1, 0, 0])
    assert np.array_equal(A @ [0, 0, 0, 1], [0, 1, 0, 0])
    assert np.max(np.abs(np.linalg.matrix_power(A, 3))) == 0.0


def test_make_h3_matrix_lorentz_skew_exact():
    k = make_h3_matrix(E1, E2, 1.0)
    assert np.max(np.abs(k.A.T @ LORENTZ_ETA + LORENTZ_ETA @ k.A)) == 0.0


def test_make_h3_matrix_rejects_c2():
    # direct-multiplication oracle: the invalid assembly has A^3 e4 = (1-c^2) e2
    c = 2.0
    B = c * np.array([[0.0, 0, 0], [0, 0, -1], [0, 1, 0]])
    A = np.zeros((4, 4))
    A[:3, :3] = B
    A[:3, 3] = E2
    A[3, :3] = E2
    a3e4 = np.linalg.matrix_power(A, 3) @ np.array([0, 0, 0, 1.0])
    assert np.allclose(a3e4, (1 - c ** 2) * np.array([0, 1, 0, 0.0]))
    with pytest.raises(NotNilpotentError):
        make_h3_matrix(E1, E2, c)


def test_killing_exp_group_law():
    k = make_h3_matrix(E1, E2, 1.0)
    for t, tp in [(0.4, 1.3), (-2.0, 0.7), (1.1, -1.1)]:
        lhs = killing_exp(k, t + tp)
        rhs = killing_exp(k, t) @ killing_exp(k, tp)
        assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_h3_counterexample_geodesic_section():
    imm = lookup("h3_counterexample")
    k = imm.meta["killing"]
    for s in np.linspace(-2, 2, 9):
        sigma = np.sinh(s) * k.v + np.cosh(s) * np.array([0, 0, 0, 1.0])
        assert np.allclose(imm.value(np.array([0.0, s])), sigma, atol=1e-14)


def test_h3_counterexample_on_hyperboloid():
    imm = lookup("h3_counterexample")
    sp = imm.space
    grid = np.linspace(-3, 3, 21)
    for t in grid:
        for s in grid:
            x = imm.value(np.array([t, s]))
            assert abs(ambient.metric_inner(sp, x, x) + 1.0) < 1e-10


def test_h3_counterexample_injective_on_grid():
    imm = lookup("h3_counterexample")
    grid = np.linspace(-3, 3, 41)
    pts = np.array([imm.value(np.array([t, s])) for t in grid for s in grid])
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    assert np.sqrt(d2.min()) > 1e-6


def test_catalog_lookup():
    assert lookup("cylinder").name == "cylinder"
    h3 = lookup("h3_counterexample")
    assert h3.meta["killing"].c == 1.0
    with pytest.raises(KeyError):
        lookup("nonexistent")


def test_nearest_point_cylinder():
    cyl = lookup("cylinder")
    res = nearest_point(cyl, np.array([2.0, 0.0, 0.5]), seed_u=np.array([0.1, 0.4]))
    assert res.converged
    assert np.allclose(res.u, [0.0, 0.5], atol=1e-10)
    assert abs(res.distance - 1.0) < 1e-12


def test_nearest_point_rejects_cold_start():
    with pytest.raises(ProjectionError):
        nearest_point(lookup("cylinder"), np.array([2.0, 0, 0]), seed_u=None)


def test_box_validation():
    with pytest.raises(ValueError):
        Box((0.0,), (0.0,))
    b = Box((-1.0, 0.0), (1.0, 2.0))
    assert b.contains([0, 1]) and not b.contains([0, 3])
