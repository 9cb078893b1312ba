"""Fundamental forms, normal frames, and shape operators of a charted immersion.

All quantities are taken relative to the ambient space form: the first
fundamental form is the pullback of the model metric, the normal frame spans
the orthogonal complement of the tangent space inside the model's tangent
space (so the position vector of sphere/hyperboloid points is projected out),
and the second fundamental form keeps only the genuinely normal part of the
ambient second derivatives.

Sign convention: alpha(X, Y) is the normal component of the ambient
derivative of Y along X, and <A_xi X, Y> = <alpha(X, Y), xi>.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nullity_lab import ambient
from nullity_lab._linalg import align_frame, gram_schmidt, metric_complement
from nullity_lab.ambient import SpaceForm, metric_matrix
from nullity_lab.immersions import ChartedImmersion, ImmersionJet


class DegenerateMetricError(RuntimeError):
    """First fundamental form is numerically singular."""


class EmptyNormalSpaceError(RuntimeError):
    """The immersion has no normal directions inside the space form."""


@dataclass
class ShapeData:
    """First/second fundamental forms and shape operators at one point.

    ``alpha[a]`` holds the components <d2f_ij, xi_a>; ``shape_ops[a]`` is the
    operator g^{-1} alpha_a in coordinate basis, and ``shape_ops_on[a]`` its
    symmetric representation in the Cholesky-orthonormalized tangent frame
    (the frame itself is ``tangent_frame @ inv(chol).T``).
    """

    space: SpaceForm
    u: np.ndarray
    point: np.ndarray
    g: np.ndarray
    chol: np.ndarray
    tangent_frame: np.ndarray     # (embed, m) columns d_i f
    normal_frame: np.ndarray      # (embed, k), G-orthonormal
    alpha: np.ndarray             # (k, m, m)
    shape_ops: np.ndarray         # (k, m, m)
    shape_ops_on: np.ndarray      # (k, m, m), symmetric

    @property
    def m(self) -> int:
        return self.g.shape[0]

    @property
    def codim(self) -> int:
        return self.normal_frame.shape[1]

    def orthonormal_tangent_frame(self) -> np.ndarray:
        return self.tangent_frame @ np.linalg.inv(self.chol).T

    def param_from_orthonormal(self, x_on: np.ndarray) -> np.ndarray:
        """Coordinate components of a vector given in the orthonormal frame."""
        return np.linalg.solve(self.chol.T, x_on)


def shape_data(jet: ImmersionJet, space: SpaceForm,
               prev_normal_frame: np.ndarray | None = None,
               basis_order: np.ndarray | None = None,
               cond_max: float = 1e12) -> ShapeData:
    """Fundamental forms and shape operators from a 2-jet.

    ``prev_normal_frame`` aligns the computed normal frame to a previous one
    (projection + re-orthonormalization), which keeps frames continuous along
    curves.  ``basis_order`` permutes the seed basis of the complement
    computation; results must be invariant under it (tested property).
    """
    G = metric_matrix(space)
    T = jet.d1
    g = T.T @ G @ T
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > cond_max:
        raise DegenerateMetricError(
            f"first fundamental form has condition number {cond:.2e} at u={jet.u}")
    span = T if space.kind == ambient.EUCLIDEAN else np.column_stack([T, jet.point])
    N = metric_complement(span, G)
    if basis_order is not None:
        # re-run the complement with a permuted seed basis (invariance probe)
        P = np.eye(span.shape[0])[:, basis_order]
        _, s, vt = np.linalg.svd(span.T @ G @ P)
        rank = int(np.sum(s > 1e-10 * max(s[0], 1e-300)))
        N = gram_schmidt(P @ vt[rank:].T, G)
    if N.shape[1] == 0:
        raise EmptyNormalSpaceError(f"no normal directions at u={jet.u}")
    if prev_normal_frame is not None:
        N = align_frame(N, prev_normal_frame, G)
    alpha = np.einsum("ea,ef,fij->aij", N, G, jet.d2)
    alpha = 0.5 * (alpha + np.transpose(alpha, (0, 2, 1)))
    L = np.linalg.cholesky(g)
    Linv = np.linalg.inv(L)
    shape_ops = np.einsum("ij,ajk->aik", np.linalg.inv(g), alpha)
    shape_on = np.einsum("ij,ajk,lk->ail", Linv, alpha, Linv)
    shape_on = 0.5 * (shape_on + np.transpose(shape_on, (0, 2, 1)))
    return ShapeData(space=space, u=jet.u, point=jet.point, g=g, chol=L,
                     tangent_frame=T, normal_frame=N, alpha=alpha,
                     shape_ops=shape_ops, shape_ops_on=shape_on)


def shape_at(imm: ChartedImmersion, u,
             prev_normal_frame: np.ndarray | None = None) -> ShapeData:
    return shape_data(imm.jet(np.asarray(u, dtype=float)), imm.space,
                      prev_normal_frame=prev_normal_frame)


def mean_curvature_and_gauss(sd: ShapeData) -> tuple:
    """Mean curvature vector and intrinsic Gauss curvature (surfaces only).

    K = K_ambient + (<alpha_11, alpha_22> - |alpha_12|^2) / det(g); the
    normal frame is orthonormal and spacelike, so the normal inner products
    reduce to sums over frame components in all three models.
    """
    if sd.m != 2:
        raise ValueError("Gauss curvature is defined here for surfaces only")
    a = sd.alpha
    extr = float(np.sum(a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] ** 2))
    K = sd.space.curvature + extr / float(np.linalg.det(sd.g))
    ginv = np.linalg.inv(sd.g)
    H = sd.normal_frame @ (np.einsum("ij,aji->a", ginv, a) / sd.m)
    return H, K


def continue_normal_frame(sd: ShapeData, prev: np.ndarray) -> np.ndarray:
    """Align the normal frame of ``sd`` with a previous frame (no recompute)."""
    return align_frame(sd.normal_frame, prev, metric_matrix(sd.space))


def _christoffels_fd(imm: ChartedImmersion, u: np.ndarray, h: float) -> np.ndarray:
    """Christoffel symbols of the induced metric by central differences of g."""
    G = metric_matrix(imm.space)
    m = imm.param_dim

    def metric(v):
        _, d1 = imm.jet1(v)
        return d1.T @ G @ d1

    dg = np.zeros((m, m, m))    # dg[l, i, j] = d_l g_ij
    for l in range(m):
        up = u.copy(); up[l] += h
        um = u.copy(); um[l] -= h
        dg[l] = (metric(up) - metric(um)) / (2 * h)
    ginv = np.linalg.inv(metric(u))
    gamma = np.zeros((m, m, m))  # gamma[l, i, j]
    for i in range(m):
        for j in range(m):
            v = 0.5 * (dg[i, j, :] + dg[j, i, :] - dg[:, i, j])
            gamma[:, i, j] = ginv @ v
    return gamma


def codazzi_asymmetry(imm: ChartedImmersion, u, h: float = 1e-3) -> float:
    """Max asymmetry of the covariant derivative of alpha in its three slots.

    Finite-difference probe of the Codazzi identity: the normal-valued tensor
    (nabla_i alpha)(j, k) is computed with frame-aligned normal components and
    Christoffel corrections, and the result is compared under the i <-> j
    swap.  Second-order accurate in h.
    """
    u = np.asarray(u, dtype=float)
    m = imm.param_dim
    G = metric_matrix(imm.space)
    sd0 = shape_at(imm, u)
    gamma = _christoffels_fd(imm, u, h)

    def alpha_vec(v):
        sd = shape_at(imm, v, prev_normal_frame=sd0.normal_frame)
        # ambient normal-valued alpha components
        return np.einsum("ea,aij->eij", sd.normal_frame, sd.alpha)

    d_alpha = np.zeros((m, imm.embed_dim, m, m))
    for i in range(m):
        up = u.copy(); up[i] += h
        um = u.copy(); um[i] -= h
        d_alpha[i] = (alpha_vec(up) - alpha_vec(um)) / (2 * h)

    # project the ambient derivative onto the normal space at u and apply the
    # connection corrections for the two tangent slots
    Nf = sd0.normal_frame
    P_nu = Nf @ Nf.T @ G
    a0 = np.einsum("ea,aij->eij", Nf, sd0.alpha)
    T = np.zeros((m, m, m, imm.embed_dim))
    for i in range(m):
        for j in range(m):
            for k in range(m):
                v = P_nu @ d_alpha[i][:, j, k]
                v = v - a0[:, :, k] @ gamma[:, i, j] - a0[:, j, :] @ gamma[:, i, k]
                T[i, j, k] = v
    asym = 0.0
    for i in range(m):
        for j in range(m):
            for k in range(m):
                asym = max(asym, float(np.linalg.norm(T[i, j, k] - T[j, i, k])))
    return asym
