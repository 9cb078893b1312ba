import numpy as np
import pytest

from nullity_lab import ambient, lookup
from nullity_lab._linalg import fit_loglog_slope
from nullity_lab.ambient import metric_matrix
from nullity_lab.nullity import nullity_space
from nullity_lab.shape import (
    codazzi_asymmetry,
    mean_curvature_and_gauss,
    shape_at,
    shape_data,
)


def aligned_shape_op(sd, reference_normal):
    """Orthonormal-frame shape operator for the normal closest to the reference."""
    scores = [abs(float(reference_normal @ metric_matrix(sd.space) @ sd.normal_frame[:, a]))
              for a in range(sd.codim)]
    a = int(np.argmax(scores))
    sign = np.sign(float(reference_normal @ metric_matrix(sd.space)
                         @ sd.normal_frame[:, a]))
    return sign * sd.shape_ops_on[a]


def test_cylinder_shape_operator_diag():
    cyl = lookup("cylinder")
    for th, z in [(0.0, 0.0), (1.1, -2.0), (-0.4, 3.0)]:
        sd = shape_at(cyl, np.array([th, z]))
        outward = np.array([np.cos(th), np.sin(th), 0.0])
        A = aligned_shape_op(sd, outward)
        assert np.allclose(A, np.diag([-1.0, 0.0]), atol=1e-12)


def test_plane_alpha_zero():
    sd = shape_at(lookup("plane"), np.array([0.3, -0.8]))
    assert np.allclose(sd.alpha, 0.0, atol=1e-14)
    assert np.allclose(sd.shape_ops, 0.0, atol=1e-14)


def test_great_sphere_totally_geodesic():
    gs = lookup("great_sphere")
    for u in [(0.0, 0.0), (0.9, -0.7), (2.1, 0.4)]:
        sd = shape_at(gs, np.array(u))
        assert sd.codim == 1
        assert np.max(np.abs(sd.alpha)) < 1e-12


def test_alpha_symmetry_and_pairing():
    rng = np.random.default_rng(7)
    for name in ("cylinder", "sphere", "h3_counterexample", "sphere_orbit",
                 "tangent_developable"):
        imm = lookup(name)
        for u in imm.eval_box.sample(rng, 3):
            sd = shape_at(imm, np.asarray(u))
            asym = np.max(np.abs(sd.alpha - np.transpose(sd.alpha, (0, 2, 1))))
            assert asym < 1e-10, name
            # <A_xi X, Y>_g == <alpha(X, Y), xi> for random X, Y, xi
            for _ in range(3):
                X = rng.normal(size=sd.m)
                Y = rng.normal(size=sd.m)
                c = rng.normal(size=sd.codim)
                lhs = 0.0
                for a in range(sd.codim):
                    lhs += c[a] * float(X @ (sd.shape_ops[a].T @ sd.g @ Y))
                # shape_ops[a] acts on X: <A X, Y>_g = (A X)^T g Y
                lhs = sum(c[a] * float((sd.shape_ops[a] @ X) @ sd.g @ Y)
                          for a in range(sd.codim))
                rhs = sum(c[a] * float(X @ sd.alpha[a] @ Y)
                          for a in range(sd.codim))
                assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(rhs)), name


def test_normal_frame_orthogonality():
    rng = np.random.default_rng(11)
    for name in ("cylinder", "great_sphere", "h3_counterexample", "sphere_orbit"):
        imm = lookup(name)
        G = metric_matrix(imm.space)
        for u in imm.eval_box.sample(rng, 3):
            sd = shape_at(imm, np.asarray(u))
            assert np.max(np.abs(sd.normal_frame.T @ G @ sd.tangent_frame)) < 1e-10
            if imm.space.kind != ambient.EUCLIDEAN:
                assert np.max(np.abs(sd.normal_frame.T @ G @ sd.point)) < 1e-10
            gram = sd.normal_frame.T @ G @ sd.normal_frame
            assert np.allclose(gram, np.eye(sd.codim), atol=1e-10)


def test_gauss_curvature_plane_sphere():
    _, K = mean_curvature_and_gauss(shape_at(lookup("plane"), np.array([0.1, 0.2])))
    assert abs(K) < 1e-12
    _, K = mean_curvature_and_gauss(shape_at(lookup("sphere"), np.array([0.5, 0.3])))
    assert abs(K - 1.0) < 1e-10


def test_gauss_curvature_h3_counterexample():
    imm = lookup("h3_counterexample")
    for t in np.linspace(-3, 3, 7):
        for s in np.linspace(-3, 3, 7):
            _, K = mean_curvature_and_gauss(shape_at(imm, np.array([t, s])))
            assert abs(K + 1.0) < 1e-9


def test_mean_curvature_round_sphere():
    sd = shape_at(lookup("sphere"), np.array([0.4, -0.2]))
    H, _ = mean_curvature_and_gauss(sd)
    # |H| = 1 for the unit sphere, pointing against the outward normal
    assert abs(np.linalg.norm(H) - 1.0) < 1e-10


def test_codazzi_second_order_decay():
    sphere = lookup("sphere")
    u = np.array([0.7, 0.3])
    hs = [2e-2, 1e-2, 5e-3]
    res = [codazzi_asymmetry(sphere, u, h) for h in hs]
    if max(res) > 1e-11:
        slope = fit_loglog_slope(hs, res)
        assert 1.5 < slope < 2.6, (res, slope)


def test_frame_choice_independence():
    imm = lookup("tangent_developable")
    u = np.array([0.8, 1.0])
    jet = imm.jet(u)
    base = shape_data(jet, imm.space)
    nd_base = nullity_space(base)
    eigs_base = np.sort(np.concatenate(
        [np.linalg.eigvalsh(base.shape_ops_on[a]) for a in range(base.codim)]))
    for order in ([2, 0, 1], [1, 2, 0]):
        sd = shape_data(jet, imm.space, basis_order=np.array(order))
        nd = nullity_space(sd)
        assert nd.mu == nd_base.mu
        # kernel spans agree
        overlap = np.linalg.svd(nd.basis_param.T @ base.g @ nd_base.basis_param,
                                compute_uv=False)
        assert np.all(np.abs(overlap - 1.0) < 1e-9)
        eigs = np.sort(np.concatenate(
            [np.linalg.eigvalsh(sd.shape_ops_on[a]) for a in range(sd.codim)]))
        assert np.max(np.abs(eigs - eigs_base)) < 1e-9


def test_degenerate_metric_rejected():
    from nullity_lab.immersions import Box, ChartedImmersion
    from nullity_lab.shape import DegenerateMetricError

    bad = ChartedImmersion(
        "bad", ambient.euclidean(3), 2,
        value=lambda u: np.array([u[0], u[0], 0.0]),
        eval_box=Box((-1.0, -1.0), (1.0, 1.0)))
    with pytest.raises((DegenerateMetricError, Exception)):
        shape_at(bad, np.array([0.0, 0.0]))
