"""Nullity subspace, index-of-nullity field, and leaf diagnostics.

The nullity at a point is the common kernel of the shape operators, computed
by singular-value thresholding of the stacked symmetric operators in an
orthonormal tangent frame.  Rank decisions carry an explicit spectral gap;
points with a weak gap are flagged ambiguous and excluded from constancy
scans instead of being misclassified.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from nullity_lab import ambient
from nullity_lab._linalg import align_frame, metric_complement, svd_kernel
from nullity_lab.ambient import metric_matrix
from nullity_lab.immersions import ChartedImmersion, nearest_point
from nullity_lab.shape import ShapeData, shape_at

KERNEL_TOL = 1e-7
GAP_MIN = 1e3


class IndexJumpError(RuntimeError):
    """Index of nullity changes (or becomes ambiguous) within a stencil."""


@dataclass
class NullityData:
    """Orthonormal nullity basis with rank diagnostics.

    ``basis_param`` columns are g-orthonormal kernel vectors in parameter
    coordinates; ``basis_ambient`` are their pushforwards (unit vectors in
    the ambient metric).  ``gap`` is the ratio of the smallest retained to
    the largest discarded singular value of the stacked shape operator.
    """

    mu: int
    basis_param: np.ndarray       # (m, mu)
    basis_ambient: np.ndarray     # (embed, mu)
    singular_values: np.ndarray
    gap: float
    ambiguous: bool
    tol: float


def nullity_space(sd: ShapeData, tol: float = KERNEL_TOL,
                  gap_min: float = GAP_MIN) -> NullityData:
    """Common kernel of the shape operators by SVD thresholding."""
    stacked = sd.shape_ops_on.reshape(-1, sd.m)
    kernel_on, svals, gap, ambiguous = svd_kernel(stacked, rel_tol=tol,
                                                  gap_min=gap_min)
    mu = kernel_on.shape[1]
    # orthonormal-frame coordinates -> parameter coordinates (g-orthonormal)
    basis_param = np.linalg.solve(sd.chol.T, kernel_on) if mu else np.zeros((sd.m, 0))
    basis_ambient = sd.tangent_frame @ basis_param
    return NullityData(mu=mu, basis_param=basis_param,
                       basis_ambient=basis_ambient, singular_values=svals,
                       gap=gap, ambiguous=ambiguous, tol=tol)


def nullity_at(imm: ChartedImmersion, u, tol: float = KERNEL_TOL) -> NullityData:
    return nullity_space(shape_at(imm, u), tol=tol)


def kernel_frame(imm: ChartedImmersion, u, ref: np.ndarray | None = None,
                 tol: float = KERNEL_TOL):
    """Nullity data at u with the ambient basis aligned to a reference frame."""
    nd = nullity_at(imm, u, tol=tol)
    if ref is not None and nd.mu:
        G = metric_matrix(imm.space)
        amb = align_frame(nd.basis_ambient, ref, G)
        # recover matching parameter coordinates
        _, d1 = imm.jet1(np.asarray(u, dtype=float))
        g = d1.T @ G @ d1
        nd.basis_param = np.linalg.solve(g, d1.T @ G @ amb)
        nd.basis_ambient = amb
    return nd


# ---------------------------------------------------------------------------
# Index scan
# ---------------------------------------------------------------------------

@dataclass
class IndexScanReport:
    axes: list
    mu_field: np.ndarray          # -1 marks ambiguous points
    gap_field: np.ndarray
    components: list = field(default_factory=list)  # dicts: {mu, size}
    ambiguous_points: list = field(default_factory=list)

    @property
    def constant(self) -> bool:
        vals = self.mu_field[self.mu_field >= 0]
        return len(vals) > 0 and bool(np.all(vals == vals.flat[0]))

    def to_csv(self, path) -> None:
        grids = np.meshgrid(*self.axes, indexing="ij")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"u{i}" for i in range(len(self.axes))] + ["mu", "gap"])
            for idx in np.ndindex(self.mu_field.shape):
                row = [f"{g[idx]:.12g}" for g in grids]
                w.writerow(row + [int(self.mu_field[idx]),
                                  f"{self.gap_field[idx]:.6g}"])


def index_scan(imm: ChartedImmersion, axes, tol: float = KERNEL_TOL) -> IndexScanReport:
    """Index of nullity over a parameter grid plus constancy components.

    ``axes`` is a sequence of 1-d coordinate arrays.  Connected components are
    taken on the grid graph among unambiguous points of equal index.
    """
    axes = [np.asarray(a, dtype=float) for a in axes]
    shape = tuple(len(a) for a in axes)
    mu_field = np.full(shape, -1, dtype=int)
    gap_field = np.zeros(shape)
    ambiguous = []
    for idx in np.ndindex(shape):
        u = np.array([axes[d][idx[d]] for d in range(len(axes))])
        nd = nullity_at(imm, u, tol=tol)
        gap_field[idx] = nd.gap if np.isfinite(nd.gap) else np.inf
        if nd.ambiguous:
            ambiguous.append(u)
        else:
            mu_field[idx] = nd.mu

    components = []
    seen = np.zeros(shape, dtype=bool)
    for idx in np.ndindex(shape):
        if seen[idx] or mu_field[idx] < 0:
            continue
        mu = mu_field[idx]
        stack, size = [idx], 0
        seen[idx] = True
        while stack:
            cur = stack.pop()
            size += 1
            for d in range(len(shape)):
                for step in (-1, 1):
                    nxt = list(cur)
                    nxt[d] += step
                    nxt = tuple(nxt)
                    if all(0 <= nxt[k] < shape[k] for k in range(len(shape))) \
                            and not seen[nxt] and mu_field[nxt] == mu:
                        seen[nxt] = True
                        stack.append(nxt)
        components.append({"mu": int(mu), "size": int(size)})
    return IndexScanReport(axes=axes, mu_field=mu_field, gap_field=gap_field,
                           components=components, ambiguous_points=ambiguous)


# ---------------------------------------------------------------------------
# Gauss-map kernel cross-check (Euclidean targets)
# ---------------------------------------------------------------------------

@dataclass
class GaussKernelCheck:
    null_residual: float      # max |dP| along nullity directions; should vanish
    conull_residual: float    # min |dP| along unit complement directions


def gauss_kernel_crosscheck(imm: ChartedImmersion, u, tol: float = KERNEL_TOL,
                            h: float = 1e-4) -> GaussKernelCheck:
    """Differentiate the normal-space projector along nullity directions.

    The projector is frame-independent, so no continuation is needed; the
    derivative must vanish along the nullity and not along its complement.
    """
    if imm.space.kind != ambient.EUCLIDEAN:
        raise ValueError("Gauss-map cross-check requires a Euclidean target")
    u = np.asarray(u, dtype=float)
    sd = shape_at(imm, u)
    nd = nullity_space(sd, tol=tol)

    def projector(v):
        N = shape_at(imm, v).normal_frame
        return N @ N.T

    def dP_norm(direction):
        up = u + h * direction
        um = u - h * direction
        return float(np.linalg.norm(projector(up) - projector(um)) / (2 * h))

    null_res = 0.0
    for j in range(nd.mu):
        null_res = max(null_res, dP_norm(nd.basis_param[:, j]))
    comp = metric_complement(nd.basis_param if nd.mu else np.zeros((sd.m, 0)), sd.g)
    conull = np.inf
    for j in range(comp.shape[1]):
        conull = min(conull, dP_norm(comp[:, j]))
    return GaussKernelCheck(null_residual=null_res, conull_residual=conull)


# ---------------------------------------------------------------------------
# Autoparallel probe
# ---------------------------------------------------------------------------

def autoparallel_residual(imm: ChartedImmersion, u, h: float = 1e-3,
                          tol: float = KERNEL_TOL) -> float:
    """Max norm of the component of nabla_X Y outside the nullity.

    X, Y range over the nullity frame, extended on a local stencil by kernel
    continuation; the ambient directional derivative of Y along X is projected
    onto the tangent space and then onto the orthogonal complement of the
    nullity.  For an autoparallel distribution the result vanishes.
    """
    u = np.asarray(u, dtype=float)
    sd = shape_at(imm, u)
    nd = nullity_space(sd, tol=tol)
    if nd.ambiguous:
        raise IndexJumpError(f"ambiguous kernel at u={u}")
    if nd.mu == 0:
        return 0.0
    G = metric_matrix(imm.space)
    horiz = metric_complement(nd.basis_param, sd.g)     # of the kernel, in g
    horiz_amb = sd.tangent_frame @ horiz
    res = 0.0
    for i in range(nd.mu):
        x_dir = nd.basis_param[:, i]
        frames = []
        for sgn in (+1.0, -1.0):
            nd_s = kernel_frame(imm, u + sgn * h * x_dir, ref=nd.basis_ambient,
                                tol=tol)
            if nd_s.mu != nd.mu or nd_s.ambiguous:
                raise IndexJumpError(
                    f"index jump within stencil at u={u} (direction {i})")
            frames.append(nd_s.basis_ambient)
        deriv = (frames[0] - frames[1]) / (2 * h)       # columns: D_X Y_j
        for j in range(nd.mu):
            coeffs = horiz_amb.T @ G @ deriv[:, j]
            res = max(res, float(np.linalg.norm(coeffs)))
    return res


# ---------------------------------------------------------------------------
# Leaf geodesic check
# ---------------------------------------------------------------------------

@dataclass
class LeafCheckResult:
    max_residual: float
    exited: bool
    exit_s: float | None
    arclengths: np.ndarray
    residuals: np.ndarray
    params: np.ndarray


def leaf_geodesic_check(imm: ChartedImmersion, u, s_max: float,
                        n_steps: int = 100, direction: np.ndarray | None = None,
                        tol: float = KERNEL_TOL) -> LeafCheckResult:
    """Shoot the ambient geodesic along a nullity direction and track distance to M.

    The nearest-point projection is seeded by continuation along the geodesic;
    projection divergence or leaving the parameter domain is reported as a
    leaf exit (expected for incomplete examples such as the cone).
    """
    u = np.asarray(u, dtype=float)
    sd = shape_at(imm, u)
    nd = nullity_space(sd, tol=tol)
    if nd.mu < 1:
        raise ValueError("leaf_geodesic_check requires a nonzero nullity")
    if direction is None:
        direction = nd.basis_ambient[:, 0]
    v = np.asarray(direction, dtype=float)
    v = ambient.tangent_project(imm.space, sd.point, v)
    v = v / ambient.norm(imm.space, v)
    p = sd.point

    svals = np.linspace(0.0, s_max, n_steps + 1)
    params = np.zeros((len(svals), imm.param_dim))
    residuals = np.zeros(len(svals))
    params[0] = u
    seed = u.copy()
    G = metric_matrix(imm.space)
    _, d1 = imm.jet1(u)
    g = d1.T @ G @ d1
    step_param = np.linalg.solve(g, d1.T @ G @ v)   # pullback of the direction
    for i, s in enumerate(svals[1:], start=1):
        x = ambient.geodesic(imm.space, p, v, s)
        seed_i = seed + step_param * (svals[i] - svals[i - 1])
        try:
            proj = nearest_point(imm, x, seed_i)
        except Exception:
            return LeafCheckResult(max_residual=float(np.max(residuals[:i])),
                                   exited=True, exit_s=float(s),
                                   arclengths=svals[:i], residuals=residuals[:i],
                                   params=params[:i])
        if not proj.in_domain or not proj.converged:
            return LeafCheckResult(max_residual=float(np.max(residuals[:i])),
                                   exited=True, exit_s=float(s),
                                   arclengths=svals[:i], residuals=residuals[:i],
                                   params=params[:i])
        params[i] = proj.u
        residuals[i] = proj.distance
        seed = proj.u
        _, d1 = imm.jet1(proj.u)
        g = d1.T @ G @ d1
        vel = ambient.geodesic_velocity(imm.space, p, v, s)
        step_param = np.linalg.solve(g, d1.T @ G @ vel)
    return LeafCheckResult(max_residual=float(np.max(residuals)), exited=False,
                           exit_s=None, arclengths=svals, residuals=residuals,
                           params=params)
