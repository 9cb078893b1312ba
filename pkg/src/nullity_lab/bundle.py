"""Leaf charts, horizontal lifts, parallel displacement, and holonomy sampling.

The quotient of a manifold by its nullity foliation is never materialized:
base curves are parameter curves in the manifold, fibers are the leaves
through their points.  In a plane chart the kernel directions are constant in
parameter space (validated, not assumed), which makes the leaf through u the
parameter slice u + span(K) and keeps every lift ODE affine in the fiber
coordinates:

* Euclidean targets integrate the trivialization coordinates v of
  x(t) = c(t) + sum_i v^i X_i(t) with the Gram system G v' = -b;
* sphere targets integrate the unit-vector coordinates of the span of the
  leaf frame and the base point;
* the hyperbolic orbit surface (outside the affine/sphere bundle picture) is
  lifted through the chart-parameter system a' = -(K^T g K)^{-1} K^T g u'.

The affine coefficient tables are evaluated once per curve on a half-step
grid and shared across fiber points, so displacing a whole fiber sample costs
one sweep of jet evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from nullity_lab import ambient
from nullity_lab._linalg import (
    align_frame,
    local_pca_dimension,
    metric_complement,
    pca_dimension,
)
from nullity_lab.ambient import metric_matrix
from nullity_lab.immersions import ChartedImmersion, nearest_point
from nullity_lab.nullity import KERNEL_TOL, nullity_at
from nullity_lab.shape import shape_at


class ChartError(RuntimeError):
    """No valid plane chart at the requested point."""


class LiftError(RuntimeError):
    """Horizontal lift failed (bad start point, frame continuation, residual)."""


# ---------------------------------------------------------------------------
# Base curves
# ---------------------------------------------------------------------------

class BaseCurve:
    """Piecewise-smooth parameter curve on [0, 1] with analytic derivative."""

    def __init__(self, fn, dfn, pieces=((0.0, 1.0),), descriptor=None):
        self.fn = fn
        self.dfn = dfn
        self.pieces = tuple(pieces)
        self.descriptor = descriptor or {}

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.fn(t), dtype=float)

    def velocity(self, t: float) -> np.ndarray:
        return np.asarray(self.dfn(t), dtype=float)

    @classmethod
    def from_waypoints(cls, points) -> "BaseCurve":
        pts = np.asarray(points, dtype=float)
        n = len(pts) - 1
        if n < 1:
            raise ValueError("need at least two waypoints")
        breaks = np.linspace(0.0, 1.0, n + 1)

        def fn(t):
            k = min(int(np.clip(t, 0, 1 - 1e-12) * n), n - 1)
            s = t * n - k
            return (1 - s) * pts[k] + s * pts[k + 1]

        def dfn(t):
            k = min(int(np.clip(t, 0, 1 - 1e-12) * n), n - 1)
            return n * (pts[k + 1] - pts[k])

        pieces = tuple((breaks[i], breaks[i + 1]) for i in range(n))
        return cls(fn, dfn, pieces, {"waypoints": pts.tolist()})

    @classmethod
    def fourier_loop(cls, center, directions, radius, cos_coeffs, sin_coeffs,
                     winding_shift=None, descriptor=None) -> "BaseCurve":
        """Closed loop center + sum_j directions @ (Fourier offsets) + t * winding_shift.

        ``cos_coeffs``/``sin_coeffs`` have shape (n_dirs, n_harmonics); the
        cos terms enter as (cos(2 pi j t) - 1) so the loop starts and ends at
        the center, and ``winding_shift`` (a full-period parameter translation
        on periodic axes) closes in the base through periodicity.
        """
        center = np.asarray(center, dtype=float)
        D = np.asarray(directions, dtype=float)
        a = np.atleast_2d(np.asarray(cos_coeffs, dtype=float))
        b = np.atleast_2d(np.asarray(sin_coeffs, dtype=float))
        shift = (np.zeros_like(center) if winding_shift is None
                 else np.asarray(winding_shift, dtype=float))
        js = np.arange(1, a.shape[1] + 1)

        def fn(t):
            ang = 2 * np.pi * js * t
            off = radius * (a @ (np.cos(ang) - 1.0) + b @ np.sin(ang))
            return center + D @ off + t * shift

        def dfn(t):
            ang = 2 * np.pi * js * t
            doff = radius * 2 * np.pi * (a @ (-js * np.sin(ang))
                                         + b @ (js * np.cos(ang)))
            return D @ doff + shift

        return cls(fn, dfn, descriptor=descriptor or {})


# ---------------------------------------------------------------------------
# Leaf charts
# ---------------------------------------------------------------------------

@dataclass
class LeafChart:
    """Linear plane chart at ``center``: parameter kernel and transverse bases.

    ``kernel`` columns are g-orthonormal nullity directions in parameter
    coordinates, validated to span the nullity over the whole chart box, so
    parameter slices center + span(kernel) are the leaves.
    """

    imm: ChartedImmersion
    center: np.ndarray
    kernel: np.ndarray        # (m, l)
    transverse: np.ndarray    # (m, m - l)
    mu: int
    box_radius: float
    slice_tangency: float     # worst ambient angle defect seen in validation

    def section(self, b) -> np.ndarray:
        return self.center + self.transverse @ np.asarray(b, dtype=float)

    def leaf_point(self, u_base, a) -> np.ndarray:
        return np.asarray(u_base, dtype=float) + self.kernel @ np.asarray(a, dtype=float)

    def on_leaf(self, u_base, u, tol: float = 1e-8) -> bool:
        d = np.asarray(u, dtype=float) - np.asarray(u_base, dtype=float)
        # periodic axes identify parameter translations by full periods
        for i, p in enumerate(self.imm.periods):
            if p is not None:
                d[i] -= p * np.round(d[i] / p)
        resid = d - self.kernel @ (np.linalg.pinv(self.kernel) @ d)
        return bool(np.linalg.norm(resid) <= tol * (1.0 + np.linalg.norm(d)))


def _ambient_angle_defect(A: np.ndarray, B: np.ndarray, G: np.ndarray) -> float:
    """Largest principal-angle defect between equal-dimension G-spans."""
    from nullity_lab._linalg import gram_schmidt
    QA = gram_schmidt(A, G)
    QB = gram_schmidt(B, G)
    if QA.shape[1] != QB.shape[1]:
        return np.inf
    sv = np.linalg.svd(QA.T @ G @ QB, compute_uv=False)
    return float(np.max(np.abs(1.0 - sv))) if len(sv) else 0.0


def build_leaf_chart(imm: ChartedImmersion, u0, box_radius: float = 0.3,
                     tol: float = KERNEL_TOL,
                     tangency_tol: float = 1e-6) -> LeafChart:
    """Plane chart at u0 with constant parameter kernel, or ChartError.

    Validates on a stencil that the nullity stays inside the fixed parameter
    span (slice tangency below ``tangency_tol``); immersions whose kernel
    field genuinely rotates in parameter space have no linear plane chart and
    are rejected.
    """
    u0 = np.asarray(u0, dtype=float)
    sd = shape_at(imm, u0)
    nd = nullity_at(imm, u0, tol=tol)
    if nd.ambiguous:
        raise ChartError(f"ambiguous nullity at {u0}")
    m = imm.param_dim
    if nd.mu == 0:
        raise ChartError("no leaf directions (index of nullity is zero)")
    if nd.mu == m:
        raise ChartError("no transverse directions (nullity is everything)")
    K = nd.basis_param
    C = metric_complement(K, sd.g)
    G = metric_matrix(imm.space)
    worst = 0.0
    stencil = [u0]
    for basis in (K, C):
        for j in range(basis.shape[1]):
            for sgn in (+1.0, -1.0):
                stencil.append(u0 + sgn * box_radius * basis[:, j])
    for u in stencil[1:]:
        nd_u = nullity_at(imm, u, tol=tol)
        if nd_u.ambiguous or nd_u.mu != nd.mu:
            raise ChartError(f"index of nullity changes within chart box at {u}")
        _, d1 = imm.jet1(u)
        defect = _ambient_angle_defect(d1 @ K, nd_u.basis_ambient, G)
        worst = max(worst, defect)
        if defect > tangency_tol:
            raise ChartError(
                f"kernel field is not parameter-constant over the chart box "
                f"(slice tangency defect {defect:.2e} at {u})")
    return LeafChart(imm=imm, center=u0, kernel=K, transverse=C, mu=nd.mu,
                     box_radius=box_radius, slice_tangency=worst)


# ---------------------------------------------------------------------------
# Fiber charts (trivialization coordinates)
# ---------------------------------------------------------------------------

class FiberChart:
    """Leaf coordinates at a base point: affine (Euclidean) or unit-sphere."""

    def __init__(self, imm: ChartedImmersion, chart: LeafChart, u_base):
        self.imm = imm
        self.chart = chart
        self.u_base = np.asarray(u_base, dtype=float)
        self.anchor, d1 = imm.jet1(self.u_base)
        self.X = d1 @ chart.kernel                      # (embed, l)
        self.kind = "sphere" if imm.space.kind == ambient.SPHERE else "affine"
        if self.kind == "sphere":
            from nullity_lab._linalg import gram_schmidt
            E = gram_schmidt(self.X, metric_matrix(imm.space))
            self.basis = np.column_stack([E, self.anchor])   # (embed, l+1)
        else:
            self.basis = self.X

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def coords(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "sphere":
            return self.basis.T @ x
        sol, *_ = np.linalg.lstsq(self.basis, x - self.anchor, rcond=None)
        return sol

    def point(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.kind == "sphere":
            return self.basis @ v
        return self.anchor + self.basis @ v

    def gram(self) -> np.ndarray:
        if self.kind == "sphere":
            return np.eye(self.dim)
        return self.basis.T @ self.basis


# ---------------------------------------------------------------------------
# Affine lift systems
# ---------------------------------------------------------------------------

def _stage_grid(curve: BaseCurve, n_steps: int):
    """RK4 nodes and per-step stage times aligned with the curve's pieces.

    Breakpoints of piecewise curves land on nodes, and the first/last stage
    time of every step is nudged into the interior of its piece so one-sided
    velocity limits are evaluated on the correct branch.
    """
    breaks = sorted({0.0, 1.0, *(b for p in curve.pieces for b in p)})
    ts = []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= 0.0 or lo >= 1.0:
            continue
        lo, hi = max(lo, 0.0), min(hi, 1.0)
        k = max(1, int(round(n_steps * (hi - lo))))
        ts.extend(np.linspace(lo, hi, k + 1)[:-1])
    ts.append(1.0)
    nodes = np.asarray(ts)
    h = np.diff(nodes)
    delta = 1e-10 * h
    stages = np.stack([nodes[:-1] + delta,
                       0.5 * (nodes[:-1] + nodes[1:]),
                       nodes[1:] - delta], axis=1)
    return nodes, stages


def _euclid_tables(imm, chart, curve, times):
    """alpha(t), M(t) tables for G v' = -(r + B v) in leaf-frame coordinates."""
    K = chart.kernel
    l = K.shape[1]
    flat = np.ravel(times)
    alphas = np.zeros(times.shape + (l,))
    Ms = np.zeros(times.shape + (l, l))
    af, mf = alphas.reshape(-1, l), Ms.reshape(-1, l, l)
    for i, t in enumerate(flat):
        u = curve(t)
        du = curve.velocity(t)
        jet = imm.jet(u, check_rank=False)
        X = jet.d1 @ K
        Xdot = np.einsum("eij,j->ei", jet.d2, du) @ K
        cdot = jet.d1 @ du
        Gm = X.T @ X
        af[i] = -np.linalg.solve(Gm, X.T @ cdot)
        mf[i] = -np.linalg.solve(Gm, X.T @ Xdot)
    return alphas, Ms


def _euclid_node_frames(imm, chart, nodes_u):
    """Anchor points and leaf frames X = f_* K at the node base parameters."""
    K = chart.kernel
    cs = np.zeros((len(nodes_u), imm.embed_dim))
    Xs = np.zeros((len(nodes_u), imm.embed_dim, K.shape[1]))
    for i, u in enumerate(nodes_u):
        c, d1 = imm.jet1(u)
        cs[i] = c
        Xs[i] = d1 @ K
    return cs, Xs


def _sphere_tables(imm, chart, curve, times):
    """v' = M(t) v for coordinates in span{E(c(t)), c(t)} (orthonormal basis)."""
    K = chart.kernel
    l = K.shape[1]
    if l != 1:
        raise LiftError("sphere-case lift implemented for one-dimensional leaves")
    dim = l + 1
    flat = np.ravel(times)
    Ms = np.zeros(times.shape + (dim, dim))
    mf = Ms.reshape(-1, dim, dim)
    for i, t in enumerate(flat):
        u = curve(t)
        du = curve.velocity(t)
        jet = imm.jet(u, check_rank=False)
        X = (jet.d1 @ K)[:, 0]
        Xdot = (np.einsum("eij,j->ei", jet.d2, du) @ K)[:, 0]
        nX = np.linalg.norm(X)
        E = X / nX
        Edot = Xdot / nX - (X @ Xdot) * X / nX ** 3
        cdot = jet.d1 @ du
        B = np.column_stack([E, jet.point])
        D = np.column_stack([Edot, cdot])
        # v'_k = -<sum_j v_j B'_j, B_k>  =>  M[k, j] = -<B_k, D_j>
        mf[i] = -(B.T @ D)
    return Ms


def _sphere_node_bases(imm, chart, nodes_u):
    K = chart.kernel
    bases = np.zeros((len(nodes_u), imm.embed_dim, K.shape[1] + 1))
    for i, u in enumerate(nodes_u):
        c, d1 = imm.jet1(u)
        X = (d1 @ K)[:, 0]
        bases[i] = np.column_stack([X / np.linalg.norm(X), c])
    return bases


def _lift_hyperbolic(imm, chart, curve, nodes, stages, a0):
    """Leaf-offset trajectory of the chart-parameter system, by direct RK4.

    The metric is evaluated at the lifted point u(t) + K a, not at the base
    curve, so the system is exact for leaf-offset-dependent metrics too.
    """
    K = chart.kernel
    G = metric_matrix(imm.space)

    def rhs(t, a):
        w = curve(t) + K @ a
        du = curve.velocity(t)
        _, d1 = imm.jet1(w)
        g = d1.T @ G @ d1
        return -np.linalg.solve(K.T @ g @ K, K.T @ g @ du)

    a = np.asarray(a0, dtype=float).copy()
    out = np.empty((len(nodes), a.size))
    out[0] = a
    for i in range(len(nodes) - 1):
        h = nodes[i + 1] - nodes[i]
        k1 = rhs(stages[i, 0], a)
        k2 = rhs(stages[i, 1], a + 0.5 * h * k1)
        k3 = rhs(stages[i, 1], a + 0.5 * h * k2)
        k4 = rhs(stages[i, 2], a + h * k3)
        a = a + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = a
    return out


def _integrate_affine(alphas, Ms, v0: np.ndarray, nodes) -> np.ndarray:
    """RK4 for v' = alpha(t) + M(t) v with per-step stage tables (n, 3, ...).

    ``v0`` may be a matrix whose columns are independent initial conditions.
    Returns the node trajectory of shape (n_nodes, dim, n_cols).
    """
    v = np.asarray(v0, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    v = v.copy()
    out = np.empty((len(nodes),) + v.shape)
    out[0] = v

    def rhs(i, s, vv):
        out_v = np.zeros_like(vv)
        if alphas is not None:
            out_v += alphas[i, s][:, None]
        if Ms is not None:
            out_v += Ms[i, s] @ vv
        return out_v

    for i in range(len(nodes) - 1):
        h = nodes[i + 1] - nodes[i]
        k1 = rhs(i, 0, v)
        k2 = rhs(i, 1, v + 0.5 * h * k1)
        k3 = rhs(i, 1, v + 0.5 * h * k2)
        k4 = rhs(i, 2, v + h * k3)
        v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = v
    return out


# ---------------------------------------------------------------------------
# Horizontal lift
# ---------------------------------------------------------------------------

@dataclass
class HorizontalPath:
    """Discretized horizontal curve with its verification residuals."""

    ts: np.ndarray
    params: np.ndarray
    points: np.ndarray
    horizontality_residual: float
    on_manifold_residual: float
    step: float
    fiber_start: np.ndarray | None = None
    fiber_end: np.ndarray | None = None

    def endpoint(self) -> np.ndarray:
        return self.points[-1]


def verify_horizontality(imm: ChartedImmersion, ts, params, points,
                         max_checks: int = 33) -> tuple:
    """Re-verify horizontality and on-manifold residuals from scratch.

    Kernels are recomputed independently at the checked nodes; velocities are
    fourth-order central differences of the ambient nodes (windows shifted
    inward near the ends), normalized to unit speed.
    """
    n = len(ts)
    if n < 5:
        return 0.0, 0.0
    idx = np.unique(np.clip(np.linspace(0, n - 1, min(max_checks, n)).astype(int),
                            2, n - 3))
    G = metric_matrix(imm.space)
    horiz = 0.0
    onman = 0.0
    for i in idx:
        h = ts[i + 1] - ts[i]
        gaps = np.diff(ts[i - 2:i + 3])
        if np.max(np.abs(gaps - h)) > 1e-12:
            continue    # stencil straddles a piece boundary (kink node)
        # one-sided second-order estimates disagree at kinks of piecewise curves
        vf = (-3 * points[i] + 4 * points[i + 1] - points[i + 2]) / (2 * h)
        vb = (3 * points[i] - 4 * points[i - 1] + points[i - 2]) / (2 * h)
        if np.linalg.norm(vf - vb) > 1e-2 * max(np.linalg.norm(vf),
                                                np.linalg.norm(vb), 1e-12):
            continue
        vel = (points[i - 2] - 8 * points[i - 1] + 8 * points[i + 1]
               - points[i + 2]) / (12 * h)
        speed = np.sqrt(abs(vel @ G @ vel))
        if speed < 1e-14:
            continue
        vel = vel / speed
        nd = nullity_at(imm, params[i])
        for a in range(nd.mu):
            horiz = max(horiz, abs(float(vel @ G @ nd.basis_ambient[:, a])))
        onman = max(onman, float(np.linalg.norm(imm.value(params[i]) - points[i])))
    return horiz, onman


def _recover_leaf_params(imm, chart, curve, nodes, vs, points):
    """Parameter nodes of the lift: base params plus kernel offsets.

    Exact for affinely parametrized slices; any residual is polished with a
    seeded nearest-point projection.
    """
    K = chart.kernel
    params = np.zeros((len(nodes), imm.param_dim))
    for i, t in enumerate(nodes):
        u = curve(t)
        if imm.space.kind == ambient.SPHERE:
            ang = np.arctan2(vs[i][0], vs[i][1])
            _, d1 = imm.jet1(u)
            a = np.array([ang / max(np.linalg.norm(d1 @ K[:, 0]), 1e-12)])
        else:
            a = vs[i][:K.shape[1]]
        w = u + K @ a
        if np.linalg.norm(imm.value(w) - points[i]) > 1e-10 * (1 + np.linalg.norm(points[i])):
            seed = params[i - 1] if i else w
            res = nearest_point(imm, points[i], seed_u=w)
            if not res.converged:
                raise LiftError("parameter recovery failed along the lift")
            w = res.u
        params[i] = w
    return params


def horizontal_lift(imm: ChartedImmersion, curve: BaseCurve, start_u,
                    n_steps: int = 1000, chart: LeafChart | None = None,
                    residual_tol: float = 1e-6,
                    max_checks: int = 33) -> HorizontalPath:
    """Unique horizontal lift of a base curve through a leaf point.

    ``curve`` is the base expressed as a parameter curve; ``start_u`` must lie
    on the leaf through curve(0) (verified).  The lift integrates the affine
    trivialization system with fixed-step RK4 and re-verifies horizontality
    against independently recomputed kernels.
    """
    start_u = np.asarray(start_u, dtype=float)
    u_b0 = curve(0.0)
    if chart is None:
        chart = build_leaf_chart(imm, u_b0)
    if not chart.on_leaf(u_b0, start_u):
        raise LiftError(f"start point {start_u} is not on the leaf of {u_b0}")
    nodes, stages = _stage_grid(curve, n_steps)
    nodes_u = np.array([curve(t) for t in nodes])
    x0 = imm.value(start_u)
    if imm.space.kind != ambient.HYPERBOLIC:
        fc0 = FiberChart(imm, chart, u_b0)
        v0 = fc0.coords(x0)
        if np.linalg.norm(fc0.point(v0) - x0) > 1e-8 * (1 + np.linalg.norm(x0)):
            raise LiftError("start point does not reduce to leaf coordinates")

    if imm.space.kind == ambient.EUCLIDEAN:
        alphas, Ms = _euclid_tables(imm, chart, curve, stages)
        traj = _integrate_affine(alphas, Ms, v0, nodes)
        vs = traj[:, :, 0]
        cs, Xs = _euclid_node_frames(imm, chart, nodes_u)
        points = cs + np.einsum("tel,tl->te", Xs, vs)
    elif imm.space.kind == ambient.SPHERE:
        Ms = _sphere_tables(imm, chart, curve, stages)
        traj = _integrate_affine(None, Ms, v0, nodes)
        vs = traj[:, :, 0]
        # renormalize to the unit sphere of L (constraint projection)
        vs = vs / np.linalg.norm(vs, axis=1, keepdims=True)
        bases = _sphere_node_bases(imm, chart, nodes_u)
        points = np.einsum("ted,td->te", bases, vs)
    else:
        a0 = np.linalg.pinv(chart.kernel) @ (start_u - u_b0)
        vs = _lift_hyperbolic(imm, chart, curve, nodes, stages, a0)
        points = np.zeros((len(nodes), imm.embed_dim))
        for i, t in enumerate(nodes):
            points[i] = imm.value(curve(t) + chart.kernel @ vs[i])
        v0 = a0

    params = _recover_leaf_params(imm, chart, curve, nodes, vs, points)
    if not imm.in_domain(params[-1]):
        raise LiftError("lift left the parameter domain (leaf exit)")
    horiz, onman = verify_horizontality(imm, nodes, params, points, max_checks)
    if horiz > residual_tol:
        raise LiftError(
            f"horizontality residual {horiz:.2e} exceeds {residual_tol:.1e} "
            f"(step too coarse?)")
    if imm.space.kind == ambient.HYPERBOLIC:
        v_end = vs[-1]
    else:
        fc1 = FiberChart(imm, chart, curve(1.0))
        v_end = fc1.coords(points[-1])
    return HorizontalPath(ts=nodes, params=params, points=points,
                          horizontality_residual=horiz,
                          on_manifold_residual=onman,
                          step=1.0 / n_steps,
                          fiber_start=v0, fiber_end=v_end)


# ---------------------------------------------------------------------------
# Parallel displacement and holonomy elements
# ---------------------------------------------------------------------------

@dataclass
class HolonomyElement:
    """Fitted fiber map of a parallel displacement.

    Euclidean leaves carry affine maps v -> linear v + offset; sphere leaves
    carry orthogonal maps of the unit-vector coordinates.  The displacement
    error is the isometry defect of the fit in the induced fiber metric.
    """

    kind: str                     # "affine" | "orthogonal"
    linear: np.ndarray
    offset: np.ndarray | None
    loop: dict = field(default_factory=dict)
    displacement_error: float = 0.0
    lift_residual: float = 0.0

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.kind == "affine":
            return self.linear @ v + self.offset
        out = self.linear @ v
        return out / np.linalg.norm(out)

    def compose(self, first: "HolonomyElement") -> "HolonomyElement":
        """Element of (first loop, then this loop): self o first."""
        if self.kind != first.kind:
            raise ValueError("cannot compose elements of different kinds")
        L = self.linear @ first.linear
        b = None
        if self.kind == "affine":
            b = self.linear @ first.offset + self.offset
        return HolonomyElement(kind=self.kind, linear=L, offset=b)

    def inverse(self) -> "HolonomyElement":
        Linv = np.linalg.inv(self.linear)
        b = None if self.kind == "orthogonal" else -Linv @ self.offset
        return HolonomyElement(kind=self.kind, linear=Linv, offset=b)

    def distance_to(self, other: "HolonomyElement") -> float:
        d = float(np.max(np.abs(self.linear - other.linear)))
        if self.kind == "affine":
            d = max(d, float(np.max(np.abs(self.offset - other.offset))))
        return d

    def is_identity(self, tol: float = 1e-6) -> bool:
        ident = np.eye(self.linear.shape[0])
        d = float(np.max(np.abs(self.linear - ident)))
        if self.kind == "affine":
            d = max(d, float(np.max(np.abs(self.offset))))
        return d < tol


@dataclass
class DisplacementResult:
    element: HolonomyElement
    start_coords: np.ndarray
    end_coords: np.ndarray
    distortion: float
    is_loop: bool
    paths: list


def _fiber_metric_distance(imm, fc: FiberChart, v1, v2) -> float:
    if fc.kind == "sphere":
        return float(np.arccos(np.clip(np.dot(v1, v2)
                                       / (np.linalg.norm(v1) * np.linalg.norm(v2)),
                                       -1.0, 1.0)))
    d = np.asarray(v1) - np.asarray(v2)
    return float(np.sqrt(d @ fc.gram() @ d))


def parallel_displacement(imm: ChartedImmersion, curve: BaseCurve, fiber_points,
                          n_steps: int = 1000, chart: LeafChart | None = None,
                          loop_info: dict | None = None) -> DisplacementResult:
    """Lift a fiber sample along the base curve and fit the leaf-to-leaf map.

    The map is fitted by least squares in trivialization coordinates: affine
    for Euclidean targets, orthogonal for sphere targets.  When the curve is a
    loop in the base (the end leaf coincides with the start leaf), end
    coordinates are taken in the start fiber chart, so the element is a
    genuine holonomy map of one fiber.
    """
    u_b0 = curve(0.0)
    if chart is None:
        chart = build_leaf_chart(imm, u_b0)
    fiber_points = [np.asarray(p, dtype=float) for p in fiber_points]
    if imm.space.kind == ambient.HYPERBOLIC:
        raise LiftError("parallel displacement covers Euclidean and sphere "
                        "targets only (hyperbolic manifolds are analyzed "
                        "through the connectivity module)")
    for p in fiber_points:
        if not chart.on_leaf(u_b0, p):
            raise LiftError(f"fiber point {p} is not on the start leaf")

    fc0 = FiberChart(imm, chart, u_b0)
    u_b1 = curve(1.0)
    end_x = imm.value(u_b1)
    is_loop = bool(np.linalg.norm(fc0.point(fc0.coords(end_x)) - end_x)
                   < 1e-8 * (1 + np.linalg.norm(end_x)))
    fc1 = fc0 if is_loop else FiberChart(imm, chart, u_b1)

    paths = []
    starts = []
    ends = []
    lift_res = 0.0
    for p in fiber_points:
        path = horizontal_lift(imm, curve, p, n_steps=n_steps, chart=chart)
        paths.append(path)
        starts.append(fc0.coords(path.points[0]))
        ends.append(fc1.coords(path.points[-1]))
        lift_res = max(lift_res, path.horizontality_residual)
    A = np.asarray(starts)
    B = np.asarray(ends)

    if fc0.kind == "sphere":
        M, *_ = np.linalg.lstsq(A, B, rcond=None)
        M = M.T
        defect = float(np.linalg.norm(M.T @ M - np.eye(M.shape[0])))
        element = HolonomyElement(kind="orthogonal", linear=M, offset=None,
                                  loop=loop_info or {},
                                  displacement_error=defect,
                                  lift_residual=lift_res)
    else:
        Aaug = np.column_stack([A, np.ones(len(A))])
        M, *_ = np.linalg.lstsq(Aaug, B, rcond=None)
        L = M[:-1].T
        b = M[-1]
        Gs = fc0.gram()
        Ge = fc1.gram()
        defect = float(np.linalg.norm(L.T @ Ge @ L - Gs) / np.linalg.norm(Gs))
        element = HolonomyElement(kind="affine", linear=L, offset=b,
                                  loop=loop_info or {},
                                  displacement_error=defect,
                                  lift_residual=lift_res)

    distortion = 0.0
    for i in range(len(A)):
        for j in range(i + 1, len(A)):
            d0 = _fiber_metric_distance(imm, fc0, A[i], A[j])
            d1 = _fiber_metric_distance(imm, fc1, B[i], B[j])
            distortion = max(distortion, abs(d0 - d1))
    return DisplacementResult(element=element, start_coords=A, end_coords=B,
                              distortion=distortion, is_loop=is_loop,
                              paths=paths)


@dataclass
class HolonomySample:
    elements: list
    failures: list
    chart: LeafChart
    config: dict


def _winding_shift(imm: ChartedImmersion, winding) -> np.ndarray:
    """Full-period parameter translation; maps leaves to leaves by periodicity."""
    shift = np.zeros(imm.param_dim)
    for i, w in enumerate(winding):
        if w:
            if imm.periods[i] is None:
                raise ValueError(f"axis {i} is not periodic; winding invalid")
            shift[i] = w * imm.periods[i]
    return shift


def holonomy_sample(imm: ChartedImmersion, u0, count: int = 100,
                    radius: float = 0.5, seed: int = 0, harmonics: int = 3,
                    windings=None, n_steps: int = 512,
                    fiber_offsets=(-0.5, 0.0, 0.5),
                    chart: LeafChart | None = None) -> HolonomySample:
    """Sample holonomy elements over random closed loops at a base leaf.

    Loops are closed Fourier loops in the transverse coordinates scaled by
    ``radius``, optionally composed with full-period windings along periodic
    transverse axes.  Loops whose lift fails (leaf exit, residual blow-up) are
    skipped and reported.  Deterministic per (seed, loop index).
    """
    u0 = np.asarray(u0, dtype=float)
    if chart is None:
        chart = build_leaf_chart(imm, u0)
    periodic_transverse = any(
        imm.periods[i] is not None and np.max(np.abs(chart.transverse[i])) > 1e-9
        for i in range(imm.param_dim))
    if windings is None:
        windings = (-2, -1, 0, 1, 2) if periodic_transverse else (0,)
    fiber_pts = [chart.leaf_point(u0, np.full(chart.kernel.shape[1], off))
                 for off in fiber_offsets]
    children = np.random.SeedSequence(seed).spawn(count)
    elements = []
    failures = []
    nt = chart.transverse.shape[1]
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        a = rng.normal(size=(nt, harmonics)) / np.arange(1, harmonics + 1) ** 2
        b = rng.normal(size=(nt, harmonics)) / np.arange(1, harmonics + 1) ** 2
        w = np.zeros(imm.param_dim, dtype=int)
        if periodic_transverse:
            wind = int(rng.choice(windings))
            for ax in range(imm.param_dim):
                if imm.periods[ax] is not None \
                        and np.max(np.abs(chart.transverse[ax])) > 1e-9:
                    w[ax] = wind
                    break
        try:
            shift = _winding_shift(imm, w)
            desc = {"loop_index": i, "seed": int(seed), "radius": float(radius),
                    "winding": w.tolist(), "cos": a.tolist(), "sin": b.tolist()}
            loop = BaseCurve.fourier_loop(u0, chart.transverse, radius, a, b,
                                          winding_shift=shift, descriptor=desc)
            disp = parallel_displacement(imm, loop, fiber_pts, n_steps=n_steps,
                                         chart=chart, loop_info=desc)
            if not disp.is_loop:
                raise LiftError("curve did not close in the base")
            elements.append(disp.element)
        except Exception as exc:  # noqa: BLE001 -- failures are data here
            failures.append({"loop_index": i, "reason": str(exc)})
    if count and not elements:
        raise LiftError(f"all {count} loops failed; first: {failures[0]['reason']}")
    return HolonomySample(elements=elements, failures=failures, chart=chart,
                          config={"count": count, "radius": radius,
                                  "seed": seed, "harmonics": harmonics,
                                  "n_steps": n_steps,
                                  "windings": list(windings)})


# ---------------------------------------------------------------------------
# Fiber action classification
# ---------------------------------------------------------------------------

@dataclass
class OrbitClassification:
    verdict: str                  # transitive | polar-like | undetermined
    orbit_dim: int
    fiber_dim: int
    pca_gap: float
    orbit_extent: float
    section_meet_residual: float | None = None
    section_angle_defect: float | None = None
    n_orbit_points: int = 0


def _dedupe_cloud(cloud: np.ndarray, tol: float) -> np.ndarray:
    key = np.round(cloud / max(tol, 1e-300)).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    return cloud[np.sort(idx)]


def orbit_cloud(elements, p, rng: np.random.Generator, word_len: int = 4,
                n_words: int = 400) -> np.ndarray:
    """Orbit sample of p under random words in the elements and their inverses."""
    pool = list(elements) + [e.inverse() for e in elements]
    pts = [np.asarray(p, dtype=float)]
    for _ in range(n_words):
        k = int(rng.integers(1, word_len + 1))
        v = np.asarray(p, dtype=float)
        for _ in range(k):
            e = pool[int(rng.integers(len(pool)))]
            v = e.apply(v)
        pts.append(v)
    return np.asarray(pts)


def classify_fiber_action(elements, p, fiber_dim: int, seed: int = 0,
                          word_len: int = 4, n_words: int = 400,
                          extent_tol: float = 1e-8,
                          gap_min: float = 5.0) -> OrbitClassification:
    """Transitive / polar-like / undetermined classification of the fiber action.

    The orbit cloud of p is generated by words in the sampled elements; its
    dimension at p comes from local PCA.  Full dimension means transitive.
    Zero extent is the trivially polar case.  For intermediate dimensions a
    section probe checks that the affine complement at p meets nearby orbits
    orthogonally (Euclidean fiber coordinates only).
    """
    if len(elements) < 100:
        raise ValueError("need at least 100 elements to classify")
    p = np.asarray(p, dtype=float)
    rng = np.random.default_rng(seed)
    cloud = orbit_cloud(elements, p, rng, word_len, n_words)
    extent = float(np.max(np.linalg.norm(cloud - p, axis=1)))
    if extent < extent_tol * (1 + np.linalg.norm(p)):
        return OrbitClassification(verdict="polar-like", orbit_dim=0,
                                   fiber_dim=fiber_dim, pca_gap=np.inf,
                                   orbit_extent=extent,
                                   n_orbit_points=len(cloud))
    scale = max(extent, 1e-12)
    cloud = _dedupe_cloud(cloud, 1e-9 * scale)
    kind = elements[0].kind
    if kind == "orthogonal" and fiber_dim == 1:
        # coverage oracle on the fiber circle: the orbit of a circle action is
        # either finite or dense, so the largest angular gap decides
        ang = np.sort(np.arctan2(cloud[:, 0], cloud[:, 1]))
        gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
        max_gap = float(np.max(gaps))
        verdict = "transitive" if max_gap < 0.5 else "undetermined"
        return OrbitClassification(verdict=verdict,
                                   orbit_dim=1 if verdict == "transitive" else 0,
                                   fiber_dim=fiber_dim,
                                   pca_gap=2 * np.pi / max_gap,
                                   orbit_extent=extent,
                                   n_orbit_points=len(cloud))
    dim, svals, gap = local_pca_dimension(cloud, p)
    if gap < gap_min and dim < fiber_dim:
        return OrbitClassification(verdict="undetermined", orbit_dim=dim,
                                   fiber_dim=fiber_dim, pca_gap=gap,
                                   orbit_extent=extent,
                                   n_orbit_points=len(cloud))
    if dim >= fiber_dim:
        return OrbitClassification(verdict="transitive", orbit_dim=dim,
                                   fiber_dim=fiber_dim, pca_gap=gap,
                                   orbit_extent=extent,
                                   n_orbit_points=len(cloud))
    if kind != "affine":
        return OrbitClassification(verdict="undetermined", orbit_dim=dim,
                                   fiber_dim=fiber_dim, pca_gap=gap,
                                   orbit_extent=extent,
                                   n_orbit_points=len(cloud))
    # section probe: affine complement at p must meet nearby orbits orthogonally
    d_to_p = np.linalg.norm(cloud - p, axis=1)
    local = cloud[np.argsort(d_to_p)[:max(3 * dim, 24)]]
    _, _, vt = np.linalg.svd(local - p)
    tangent = vt[:dim].T
    normal = vt[dim:].T
    meet_res = 0.0
    angle_defect = 0.0
    for _ in range(5):
        q = p + rng.normal(size=fiber_dim) * 0.2 * scale
        oq = orbit_cloud(elements, q, rng, word_len, n_words // 4)
        # distance of orbit points to the section plane p + span(normal)
        dsec = np.linalg.norm((oq - p) @ tangent, axis=1)
        k = int(np.argmin(dsec))
        meet_res = max(meet_res, float(dsec[k] / scale))
        y = oq[k]
        dloc, _, _ = local_pca_dimension(oq, y)
        near = oq[np.argsort(np.linalg.norm(oq - y, axis=1))[:24]]
        _, _, vq = np.linalg.svd(near - y)
        t_orbit = vq[:max(dloc, 1)].T
        # orthogonal meeting: orbit tangent has no component along the section
        angle_defect = max(angle_defect,
                           float(np.linalg.norm(normal.T @ t_orbit, ord=2)))
    verdict = "polar-like" if meet_res < 0.15 and angle_defect < 0.15 \
        else "undetermined"
    return OrbitClassification(verdict=verdict, orbit_dim=dim,
                               fiber_dim=fiber_dim, pca_gap=gap,
                               orbit_extent=extent,
                               section_meet_residual=meet_res,
                               section_angle_defect=angle_defect,
                               n_orbit_points=len(cloud))
