"""Parametrized immersions with 2-jet evaluation, and the catalog of test manifolds.

An immersion is a map f: U in R^m -> ambient model with first and second
derivatives, either closed form (``analytic_jet``) or by fourth-order central
differences.  The catalog collects the desk-scale manifolds used throughout:
flat controls (plane, cylinder, cone), curved controls (round sphere, circle,
great sphere), ruled surfaces with one-dimensional nullity (tangent
developable, orbit surface in the 3-sphere), and the hyperbolic orbit surface
built from a nilpotent Lorentz Killing field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from nullity_lab import ambient
from nullity_lab.ambient import SpaceForm, euclidean, hyperbolic, metric_matrix, sphere


class DomainError(ValueError):
    """Parameter point outside the declared evaluation box."""


class ImmersionRankError(RuntimeError):
    """Differential fails to have full rank (immersion condition broken)."""


class ProjectionError(RuntimeError):
    """Nearest-point projection rejected or diverged."""


class NotNilpotentError(ValueError):
    """Assembled Killing matrix is not nilpotent (invalid scale parameter)."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned parameter box; bounds may be infinite."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("box bounds must have equal length")
        for lo, hi in zip(self.lower, self.upper):
            if not lo < hi:
                raise ValueError("box bounds must satisfy lower < upper")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, u, skip_axes=(), tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        for i, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if i in skip_axes:
                continue
            if u[i] < lo - tol or u[i] > hi + tol:
                return False
        return True

    def clip(self, u) -> np.ndarray:
        return np.clip(np.asarray(u, dtype=float), self.lower, self.upper)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        return lo + (hi - lo) * rng.random((n, self.dim))


@dataclass
class ImmersionJet:
    """Point, differential and second differential of an immersion at u."""

    u: np.ndarray
    point: np.ndarray
    d1: np.ndarray          # (embed_dim, m)
    d2: np.ndarray          # (embed_dim, m, m)
    d1_error: float | None = None   # Richardson half-step estimates, numeric jets only
    d2_error: float | None = None

    @property
    def m(self) -> int:
        return self.d1.shape[1]


# fourth-order central-difference stencils
_D1_OFF = np.array([-2.0, -1.0, 1.0, 2.0])
_D1_W = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
_D2_OFF = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
_D2_W = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0

# First-derivative step follows |u| with a 1e-4 floor.  The second-derivative
# step must be much larger: with h=1e-4 the h^-2 roundoff amplification alone
# exceeds 1e-8, so the optimum for fourth-order stencils in float64 sits near
# eps^(1/6) ~ 2.5e-3.
_D1_STEP = 1e-4
_D2_STEP = 2.5e-3


class ChartedImmersion:
    """Immersion f: U subset R^m -> ambient with 2-jet evaluation.

    Parameters
    ----------
    name : identifier used by the catalog and reports.
    space : ambient SpaceForm.
    value : u -> ambient point, shape (embed_dim,).
    jacobian, hessian : optional closed-form derivatives; when both are given
        the immersion is flagged ``analytic_jet`` and finite differences are
        never used.
    domain : hard parameter domain (default: all of R^m).
    eval_box : finite box inside the domain where evaluation is supported.
    periods : per-parameter period or None; periodic axes are exempt from the
        evaluation-box check, and loops may wind along them.
    incomplete : marks manifolds with a geodesic boundary (cone, ruled sheets).
    normal_frame : optional u -> (embed_dim, k) smooth orthonormal normal
        frame, used by tube constructions to avoid generic frame continuation.
    """

    def __init__(self, name: str, space: SpaceForm, param_dim: int, value,
                 jacobian=None, hessian=None, domain: Box | None = None,
                 eval_box: Box | None = None, periods=None,
                 incomplete: bool = False, normal_frame=None, meta=None):
        if eval_box is None:
            raise ValueError("an evaluation box is required")
        if eval_box.dim != param_dim:
            raise ValueError("evaluation box dimension mismatch")
        self.name = name
        self.space = space
        self.param_dim = param_dim
        self._value = value
        self._jac = jacobian
        self._hess = hessian
        self.domain = domain
        self.eval_box = eval_box
        self.periods = tuple(periods) if periods is not None else (None,) * param_dim
        self.incomplete = incomplete
        self.normal_frame = normal_frame
        self.meta = dict(meta or {})

    @property
    def analytic_jet(self) -> bool:
        return self._jac is not None and self._hess is not None

    @property
    def embed_dim(self) -> int:
        return self.space.embed_dim

    def _periodic_axes(self) -> tuple:
        return tuple(i for i, p in enumerate(self.periods) if p is not None)

    def in_domain(self, u, tol: float = 1e-9) -> bool:
        if self.domain is None:
            return True
        return self.domain.contains(u, skip_axes=self._periodic_axes(), tol=tol)

    def in_eval_box(self, u, tol: float = 1e-9) -> bool:
        return self.eval_box.contains(u, skip_axes=self._periodic_axes(), tol=tol)

    def _check_point(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.param_dim,):
            raise ValueError(f"parameter point must have shape ({self.param_dim},)")
        if not self.in_eval_box(u):
            raise DomainError(f"{self.name}: parameter {u} outside evaluation box")
        return u

    def value(self, u) -> np.ndarray:
        return np.asarray(self._value(np.asarray(u, dtype=float)), dtype=float)

    def jet1(self, u) -> tuple:
        """Fast path: point and first differential only."""
        u = np.asarray(u, dtype=float)
        f0 = self.value(u)
        if self._jac is not None:
            return f0, np.asarray(self._jac(u), dtype=float)
        return f0, self._fd_d1(u, _D1_STEP)[0]

    def jet(self, u, check_rank: bool = True) -> ImmersionJet:
        u = self._check_point(u)
        f0 = self.value(u)
        if self.analytic_jet:
            d1 = np.asarray(self._jac(u), dtype=float)
            d2 = np.asarray(self._hess(u), dtype=float)
            jet = ImmersionJet(u=u, point=f0, d1=d1, d2=d2)
        else:
            d1, d1_err = self._fd_d1(u, _D1_STEP, with_error=True)
            d2, d2_err = self._fd_d2(u, _D2_STEP, with_error=True)
            jet = ImmersionJet(u=u, point=f0, d1=d1, d2=d2,
                               d1_error=d1_err, d2_error=d2_err)
        if check_rank:
            s = np.linalg.svd(jet.d1, compute_uv=False)
            if s[0] <= 0 or s[-1] / s[0] < 1e-10:
                raise ImmersionRankError(
                    f"{self.name}: rank of df drops below {self.param_dim} at u={u}")
        return jet

    def _steps(self, u, base) -> np.ndarray:
        return np.maximum(base, base * np.abs(u))

    def _fd_d1(self, u, base_step, with_error: bool = False):
        def run(scale):
            h = self._steps(u, base_step) * scale
            d1 = np.zeros((self.embed_dim, self.param_dim))
            for i in range(self.param_dim):
                acc = np.zeros(self.embed_dim)
                for off, w in zip(_D1_OFF, _D1_W):
                    up = u.copy()
                    up[i] += off * h[i]
                    acc += w * self.value(up)
                d1[:, i] = acc / h[i]
            return d1

        d1 = run(1.0)
        if not with_error:
            return d1, None
        d1_half = run(0.5)
        return d1, float(np.max(np.abs(d1 - d1_half)))

    def _fd_d2(self, u, base_step, with_error: bool = False):
        def run(scale):
            h = self._steps(u, base_step) * scale
            d2 = np.zeros((self.embed_dim, self.param_dim, self.param_dim))
            for i in range(self.param_dim):
                acc = np.zeros(self.embed_dim)
                for off, w in zip(_D2_OFF, _D2_W):
                    up = u.copy()
                    up[i] += off * h[i]
                    acc += w * self.value(up)
                d2[:, i, i] = acc / h[i] ** 2
            for i in range(self.param_dim):
                for j in range(i + 1, self.param_dim):
                    acc = np.zeros(self.embed_dim)
                    for oi, wi in zip(_D1_OFF, _D1_W):
                        for oj, wj in zip(_D1_OFF, _D1_W):
                            up = u.copy()
                            up[i] += oi * h[i]
                            up[j] += oj * h[j]
                            acc += wi * wj * self.value(up)
                    d2[:, i, j] = d2[:, j, i] = acc / (h[i] * h[j])
            return d2

        d2 = run(1.0)
        if not with_error:
            return d2, None
        d2_half = run(0.5)
        return d2, float(np.max(np.abs(d2 - d2_half)))

    def validate(self, points=None, tol: float = 1e-10) -> None:
        """Check the immersion invariants on sample points.

        Verifies rank of df and, for curved targets, the model constraint and
        the tangency <f, df_i> = 0.
        """
        if points is None:
            rng = np.random.default_rng(0)
            points = self.eval_box.sample(rng, 25)
        for u in points:
            jet = self.jet(np.asarray(u, dtype=float))
            if self.space.kind == ambient.EUCLIDEAN:
                continue
            c = ambient.metric_inner(self.space, jet.point, jet.point)
            if abs(c - self.space.model_constant) > tol:
                raise ValueError(f"{self.name}: model constraint violated at {u}")
            for i in range(self.param_dim):
                if abs(ambient.metric_inner(self.space, jet.point, jet.d1[:, i])) > tol:
                    raise ValueError(f"{self.name}: df not tangent to model at {u}")


@dataclass
class ProjectionResult:
    u: np.ndarray
    distance: float
    converged: bool
    in_domain: bool
    n_iter: int


def nearest_point(imm: ChartedImmersion, x, seed_u, tol: float = 1e-12,
                  max_iter: int = 60) -> ProjectionResult:
    """Nearest-point projection onto the immersion by Gauss-Newton.

    A seed parameter is mandatory: the solver is meant to be driven by
    continuation along a known path, and cold starts are rejected.
    """
    if seed_u is None:
        raise ProjectionError("nearest_point requires a seed (cold starts rejected)")
    x = np.asarray(x, dtype=float)
    G = metric_matrix(imm.space)
    u = np.asarray(seed_u, dtype=float).copy()
    scale = max(1.0, float(np.linalg.norm(x)))

    def objective(v):
        r = imm.value(v) - x
        return float(r @ G @ r)

    obj = objective(u)
    step_norm = np.inf
    for it in range(max_iter):
        f0, d1 = imm.jet1(u)
        r = f0 - x
        g = d1.T @ G @ d1
        grad = 2.0 * d1.T @ (G @ r)
        try:
            step = np.linalg.solve(g, -0.5 * grad)
        except np.linalg.LinAlgError:
            raise ProjectionError("nearest_point: singular Gauss-Newton system")
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) > 1e3 * scale:
            raise ProjectionError("nearest_point: Gauss-Newton diverged")
        step_norm = float(np.linalg.norm(step))
        if step_norm < tol * (1.0 + np.linalg.norm(u)):
            break
        # backtracking keeps the step from bouncing between equidistant points
        alpha, accepted = 1.0, False
        slope = float(grad @ step)
        while alpha >= 1.0 / 256:
            u_try = u + alpha * step
            if objective(u_try) <= obj + 0.25 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        u = u + alpha * step
        obj = objective(u)
    in_dom = imm.in_domain(u) and imm.in_eval_box(u)
    f0, d1 = imm.jet1(u)
    r = f0 - x
    sq = ambient.metric_inner(imm.space, r, r)
    dist = float(np.sqrt(max(sq, 0.0)))
    grad_norm = float(np.linalg.norm(d1.T @ (G @ r)))
    converged = (step_norm < 1e-8 * (1.0 + np.linalg.norm(u))
                 or grad_norm < 1e-10 * scale)
    return ProjectionResult(u=u, distance=dist, converged=converged,
                            in_domain=in_dom, n_iter=it + 1)


# ---------------------------------------------------------------------------
# Hyperbolic orbit surface from a nilpotent Killing field
# ---------------------------------------------------------------------------

LORENTZ_ETA = np.diag([1.0, 1.0, 1.0, -1.0])


@dataclass(frozen=True)
class NilpotentKilling:
    """Nilpotent element of the Lorentz algebra so_1(4) in block form.

    ``A = [[B, w], [w^T, 0]]`` with B a rotation generator fixing v; valid
    instances satisfy A^3 = 0 exactly and A^T eta + eta A = 0.
    """

    A: np.ndarray
    v: np.ndarray
    w: np.ndarray
    B: np.ndarray
    c: float


def _cross_matrix(a3: np.ndarray) -> np.ndarray:
    x, y, z = a3
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _as_spatial4(vec, label: str) -> np.ndarray:
    v = np.asarray(vec, dtype=float)
    if v.shape == (3,):
        v = np.concatenate([v, [0.0]])
    if v.shape != (4,):
        raise ValueError(f"{label} must be a 3- or 4-vector")
    if abs(v[3]) > 1e-14:
        raise ValueError(f"{label} must be spatial (zero timelike component)")
    return v


def make_h3_matrix(v, w, c: float, tol: float = 1e-12) -> NilpotentKilling:
    """Assemble the Killing matrix A = [[B, w], [w^T, 0]] with B = c * (v x .).

    Raises NotNilpotentError unless A^3 vanishes entrywise, which pins the
    scale to c = +-1 for orthonormal v, w.
    """
    v = _as_spatial4(v, "v")
    w = _as_spatial4(w, "w")
    if abs(np.dot(v[:3], v[:3]) - 1.0) > 1e-12 or abs(np.dot(w[:3], w[:3]) - 1.0) > 1e-12:
        raise ValueError("v and w must be spatial unit vectors")
    if abs(np.dot(v[:3], w[:3])) > 1e-12:
        raise ValueError("v and w must be orthogonal")
    if c == 0:
        raise ValueError("scale c must be nonzero")
    B = c * _cross_matrix(v[:3])
    if np.any(np.abs(B @ v[:3]) > tol):
        raise ValueError("B must annihilate v")
    if not np.any(np.abs(B @ w[:3]) > tol):
        raise ValueError("B must move w")
    A = np.zeros((4, 4))
    A[:3, :3] = B
    A[:3, 3] = w[:3]
    A[3, :3] = w[:3]
    A3 = A @ A @ A
    if np.max(np.abs(A3)) >= tol:
        raise NotNilpotentError(
            f"A^3 != 0 (max entry {np.max(np.abs(A3)):.3e}); scale c={c} is invalid")
    if np.max(np.abs(A.T @ LORENTZ_ETA + LORENTZ_ETA @ A)) > 0:
        raise ValueError("A is not Lorentz-skew")
    return NilpotentKilling(A=A, v=v, w=w, B=B, c=float(c))


def killing_exp(k: NilpotentKilling, t: float) -> np.ndarray:
    """One-parameter isometry exp(tA) = I + tA + t^2/2 A^2 (A is 3-step nilpotent)."""
    A = k.A
    return np.eye(4) + t * A + 0.5 * t * t * (A @ A)


def make_h3_counterexample(k: NilpotentKilling,
                           eval_halfwidth: float = 6.0) -> ChartedImmersion:
    """Orbit surface f(t, s) = exp(tA) (sinh(s) v + cosh(s) e4) in hyperbolic 3-space.

    The s-curves are geodesics; the t-curves are orbits of the Killing flow.
    The immersion is polynomial in t and hyperbolic-trigonometric in s, so the
    jets are closed form.
    """
    A = k.A
    A2 = A @ A
    v = k.v
    e4 = np.array([0.0, 0.0, 0.0, 1.0])

    def sigma(s):
        return np.sinh(s) * v + np.cosh(s) * e4

    def sigma_p(s):
        return np.cosh(s) * v + np.sinh(s) * e4

    def value(u):
        t, s = u
        return (np.eye(4) + t * A + 0.5 * t * t * A2) @ sigma(s)

    def jacobian(u):
        t, s = u
        E = np.eye(4) + t * A + 0.5 * t * t * A2
        Ep = A + t * A2
        return np.column_stack([Ep @ sigma(s), E @ sigma_p(s)])

    def hessian(u):
        t, s = u
        E = np.eye(4) + t * A + 0.5 * t * t * A2
        Ep = A + t * A2
        d2 = np.zeros((4, 2, 2))
        d2[:, 0, 0] = A2 @ sigma(s)
        d2[:, 0, 1] = d2[:, 1, 0] = Ep @ sigma_p(s)
        d2[:, 1, 1] = E @ sigma(s)
        return d2

    hw = eval_halfwidth
    return ChartedImmersion(
        name="h3_counterexample", space=hyperbolic(3), param_dim=2,
        value=value, jacobian=jacobian, hessian=hessian,
        eval_box=Box((-hw, -4.5), (hw, 4.5)),
        meta={"killing": k},
    )


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------

def _plane() -> ChartedImmersion:
    J = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])

    return ChartedImmersion(
        "plane", euclidean(3), 2,
        value=lambda u: np.array([u[0], u[1], 0.0]),
        jacobian=lambda u: J,
        hessian=lambda u: np.zeros((3, 2, 2)),
        eval_box=Box((-3.0, -3.0), (3.0, 3.0)),
        normal_frame=lambda u: np.array([[0.0], [0.0], [1.0]]),
    )


def _cylinder() -> ChartedImmersion:
    def value(u):
        th, z = u
        return np.array([np.cos(th), np.sin(th), z])

    def jacobian(u):
        th, _ = u
        return np.array([[-np.sin(th), 0.0], [np.cos(th), 0.0], [0.0, 1.0]])

    def hessian(u):
        th, _ = u
        d2 = np.zeros((3, 2, 2))
        d2[:, 0, 0] = [-np.cos(th), -np.sin(th), 0.0]
        return d2

    def normal_frame(u):
        th = u[0]
        return np.array([[np.cos(th)], [np.sin(th)], [0.0]])

    return ChartedImmersion(
        "cylinder", euclidean(3), 2, value, jacobian, hessian,
        eval_box=Box((-np.pi, -12.0), (np.pi, 12.0)),
        periods=(2 * np.pi, None),
        normal_frame=normal_frame,
    )


def _cone(beta: float = 0.7) -> ChartedImmersion:
    sb, cb = np.sin(beta), np.cos(beta)

    def value(u):
        r, th = u
        return np.array([r * sb * np.cos(th), r * sb * np.sin(th), r * cb])

    def jacobian(u):
        r, th = u
        return np.array([
            [sb * np.cos(th), -r * sb * np.sin(th)],
            [sb * np.sin(th), r * sb * np.cos(th)],
            [cb, 0.0],
        ])

    def hessian(u):
        r, th = u
        d2 = np.zeros((3, 2, 2))
        d2[:, 0, 1] = d2[:, 1, 0] = [-sb * np.sin(th), sb * np.cos(th), 0.0]
        d2[:, 1, 1] = [-r * sb * np.cos(th), -r * sb * np.sin(th), 0.0]
        return d2

    return ChartedImmersion(
        "cone", euclidean(3), 2, value, jacobian, hessian,
        domain=Box((1e-12, -np.pi), (np.inf, np.pi)),
        eval_box=Box((0.2, -np.pi), (3.0, np.pi)),
        periods=(None, 2 * np.pi),
        incomplete=True,
        meta={"half_angle": beta},
    )


def _round_sphere_map(embed_pad: int):
    def value(u):
        a, b = u
        p = [np.cos(a) * np.cos(b), np.sin(a) * np.cos(b), np.sin(b)]
        return np.array(p + [0.0] * embed_pad)

    def jacobian(u):
        a, b = u
        j = np.zeros((3 + embed_pad, 2))
        j[0] = [-np.sin(a) * np.cos(b), -np.cos(a) * np.sin(b)]
        j[1] = [np.cos(a) * np.cos(b), -np.sin(a) * np.sin(b)]
        j[2] = [0.0, np.cos(b)]
        return j

    def hessian(u):
        a, b = u
        d2 = np.zeros((3 + embed_pad, 2, 2))
        d2[0:3, 0, 0] = [-np.cos(a) * np.cos(b), -np.sin(a) * np.cos(b), 0.0]
        d2[0:3, 0, 1] = d2[0:3, 1, 0] = [np.sin(a) * np.sin(b),
                                         -np.cos(a) * np.sin(b), 0.0]
        d2[0:3, 1, 1] = [-np.cos(a) * np.cos(b), -np.sin(a) * np.cos(b),
                         -np.sin(b)]
        return d2

    return value, jacobian, hessian


def _sphere_entry() -> ChartedImmersion:
    value, jac, hess = _round_sphere_map(0)

    def normal_frame(u):
        return value(u).reshape(3, 1)

    return ChartedImmersion(
        "sphere", euclidean(3), 2, value, jac, hess,
        eval_box=Box((-np.pi, -1.2), (np.pi, 1.2)),
        periods=(2 * np.pi, None),
        normal_frame=normal_frame,
    )


def _great_sphere() -> ChartedImmersion:
    value, jac, hess = _round_sphere_map(1)
    return ChartedImmersion(
        "great_sphere", sphere(3), 2, value, jac, hess,
        eval_box=Box((-np.pi, -1.2), (np.pi, 1.2)),
        periods=(2 * np.pi, None),
    )


def _circle(radius: float = 2.0) -> ChartedImmersion:
    def value(u):
        th = u[0]
        return np.array([radius * np.cos(th), radius * np.sin(th), 0.0])

    def jacobian(u):
        th = u[0]
        return np.array([[-radius * np.sin(th)], [radius * np.cos(th)], [0.0]])

    def hessian(u):
        th = u[0]
        return np.array([[-radius * np.cos(th)], [-radius * np.sin(th)],
                         [0.0]]).reshape(3, 1, 1)

    def normal_frame(u):
        th = u[0]
        return np.array([[np.cos(th), 0.0], [np.sin(th), 0.0], [0.0, 1.0]])

    return ChartedImmersion(
        "circle", euclidean(3), 1, value, jacobian, hessian,
        eval_box=Box((-np.pi,), (np.pi,)),
        periods=(2 * np.pi,),
        normal_frame=normal_frame,
        meta={"radius": radius},
    )


def _sphere_orbit(beta: float = 0.6) -> ChartedImmersion:
    """Orbit surface f(t, s) = exp(t A) sigma(s) in the 3-sphere.

    A generates the rotation of the (x1, x2)-plane and sigma is the great
    circle through u = (cos b, 0, sin b, 0) and e4.  The s-curves are the
    nullity leaves (arcs of great circles); the coordinates are orthogonal, so
    horizontal lifts preserve s.  Rank degenerates on the focal lines
    s = +-pi/2, kept outside the evaluation box.
    """
    rho, h = np.cos(beta), np.sin(beta)
    A = np.zeros((4, 4))
    A[0, 1], A[1, 0] = -1.0, 1.0

    def value(u):
        t, s = u
        return np.array([rho * np.cos(s) * np.cos(t), rho * np.cos(s) * np.sin(t),
                         h * np.cos(s), np.sin(s)])

    def jacobian(u):
        t, s = u
        return np.array([
            [-rho * np.cos(s) * np.sin(t), -rho * np.sin(s) * np.cos(t)],
            [rho * np.cos(s) * np.cos(t), -rho * np.sin(s) * np.sin(t)],
            [0.0, -h * np.sin(s)],
            [0.0, np.cos(s)],
        ])

    def hessian(u):
        t, s = u
        d2 = np.zeros((4, 2, 2))
        d2[:, 0, 0] = [-rho * np.cos(s) * np.cos(t), -rho * np.cos(s) * np.sin(t),
                       0.0, 0.0]
        d2[:, 0, 1] = d2[:, 1, 0] = [rho * np.sin(s) * np.sin(t),
                                     -rho * np.sin(s) * np.cos(t), 0.0, 0.0]
        d2[:, 1, 1] = -value(u)
        return d2

    return ChartedImmersion(
        "sphere_orbit", sphere(3), 2, value, jacobian, hessian,
        eval_box=Box((-np.pi, -1.1), (np.pi, 1.1)),
        periods=(2 * np.pi, None),
        incomplete=True,
        meta={"generator": A, "beta": beta},
    )


def _torus_curve_derivs(u: float, r: float, p: int):
    c, s = np.cos(u), np.sin(u)
    cp, sp = np.cos(p * u), np.sin(p * u)
    R = 1.0 + r * cp
    R1 = -r * p * sp
    R2 = -r * p * p * cp
    R3 = r * p ** 3 * sp
    g0 = np.array([R * c, R * s, r * sp])
    g1 = np.array([R1 * c - R * s, R1 * s + R * c, r * p * cp])
    g2 = np.array([R2 * c - 2 * R1 * s - R * c,
                   R2 * s + 2 * R1 * c - R * s,
                   -r * p * p * sp])
    g3 = np.array([R3 * c - 3 * R2 * s - 3 * R1 * c + R * s,
                   R3 * s + 3 * R2 * c - 3 * R1 * s - R * c,
                   -r * p ** 3 * cp])
    return g0, g1, g2, g3


def _tangent_developable(r: float = 0.25, p: int = 3) -> ChartedImmersion:
    """Tangent developable f(u, v) = gamma(u) + v gamma'(u) of a closed torus curve.

    The curve has nowhere-vanishing torsion for these parameters, so the
    nullity is exactly the ruling direction.  Going once around the closed
    base translates the ruling arclength coordinate by the full curve length,
    which makes this the catalog member with nontrivial holonomy.
    """

    def value(u):
        g0, g1, _, _ = _torus_curve_derivs(u[0], r, p)
        return g0 + u[1] * g1

    def jacobian(u):
        _, g1, g2, _ = _torus_curve_derivs(u[0], r, p)
        return np.column_stack([g1 + u[1] * g2, g1])

    def hessian(u):
        _, _, g2, g3 = _torus_curve_derivs(u[0], r, p)
        d2 = np.zeros((3, 2, 2))
        d2[:, 0, 0] = g2 + u[1] * g3
        d2[:, 0, 1] = d2[:, 1, 0] = g2
        return d2

    # the eval box leaves headroom above: winding loops translate the ruling
    # coordinate by the full curve length per turn
    return ChartedImmersion(
        "tangent_developable", euclidean(3), 2, value, jacobian, hessian,
        domain=Box((-np.inf, 1e-12), (np.inf, np.inf)),
        eval_box=Box((-np.pi, 0.25), (np.pi, 24.0)),
        periods=(2 * np.pi, None),
        incomplete=True,
        meta={"r": r, "p": p},
    )


_CATALOG: dict | None = None


def catalog() -> dict:
    """Named desk-scale immersions; built once, returned as a shallow copy."""
    global _CATALOG
    if _CATALOG is None:
        k = make_h3_matrix(np.array([1.0, 0, 0]), np.array([0.0, 1, 0]), 1.0)
        _CATALOG = {
            e.name: e for e in [
                _plane(),
                _cylinder(),
                _cone(),
                _sphere_entry(),
                _great_sphere(),
                _circle(),
                _sphere_orbit(),
                _tangent_developable(),
                make_h3_counterexample(k),
            ]
        }
    return dict(_CATALOG)


def lookup(name: str) -> ChartedImmersion:
    cat = catalog()
    if name not in cat:
        raise KeyError(f"unknown manifold {name!r}; available: {sorted(cat)}")
    return cat[name]
