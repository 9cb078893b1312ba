"""Exact geometry of the three simply connected model space forms.

Euclidean space is plain R^n.  The sphere is the unit sphere of R^{n+1}.
Hyperbolic space is the upper sheet of the unit hyperboloid in Lorentz
space, with inner product x1*y1 + ... + xn*yn - x_{n+1}*y_{n+1} (the last
coordinate is timelike and positive on the sheet).  Geodesics and parallel
transport are closed form in all three models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EUCLIDEAN = "euclidean"
SPHERE = "sphere"
HYPERBOLIC = "hyperbolic"

_KINDS = (EUCLIDEAN, SPHERE, HYPERBOLIC)


@dataclass(frozen=True)
class SpaceForm:
    """Ambient model descriptor: kind plus intrinsic dimension."""

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown space form kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dimension must be positive")

    @property
    def embed_dim(self) -> int:
        return self.dim if self.kind == EUCLIDEAN else self.dim + 1

    @property
    def curvature(self) -> float:
        return {EUCLIDEAN: 0.0, SPHERE: 1.0, HYPERBOLIC: -1.0}[self.kind]

    @property
    def model_constant(self) -> float:
        """Value of <x,x> on represented points (sphere +1, hyperboloid -1)."""
        if self.kind == EUCLIDEAN:
            raise ValueError("Euclidean space has no model constraint")
        return 1.0 if self.kind == SPHERE else -1.0


def euclidean(n: int) -> SpaceForm:
    return SpaceForm(EUCLIDEAN, n)


def sphere(n: int) -> SpaceForm:
    return SpaceForm(SPHERE, n)


def hyperbolic(n: int) -> SpaceForm:
    return SpaceForm(HYPERBOLIC, n)


def metric_matrix(space: SpaceForm) -> np.ndarray:
    """Gram matrix of the ambient inner product in standard coordinates."""
    G = np.eye(space.embed_dim)
    if space.kind == HYPERBOLIC:
        G[-1, -1] = -1.0
    return G


def metric_inner(space: SpaceForm, u: np.ndarray, v: np.ndarray) -> float:
    """Ambient inner product; Lorentzian for the hyperbolic model."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[-1] != space.embed_dim or v.shape[-1] != space.embed_dim:
        raise ValueError(
            f"expected vectors of length {space.embed_dim}, "
            f"got {u.shape[-1]} and {v.shape[-1]}"
        )
    s = np.sum(u * v, axis=-1)
    if space.kind == HYPERBOLIC:
        s = s - 2.0 * u[..., -1] * v[..., -1]
    return float(s) if np.ndim(s) == 0 else s


def norm(space: SpaceForm, u: np.ndarray) -> float:
    """Norm of a spacelike vector (sqrt of |<u,u>|)."""
    return float(np.sqrt(abs(metric_inner(space, u, u))))


def check_point(space: SpaceForm, p: np.ndarray, tol: float = 1e-8) -> None:
    """Reject points off the model constraint set."""
    p = np.asarray(p, dtype=float)
    if p.shape != (space.embed_dim,):
        raise ValueError(f"point must have shape ({space.embed_dim},)")
    if space.kind == EUCLIDEAN:
        return
    c = metric_inner(space, p, p)
    if abs(c - space.model_constant) > tol:
        raise ValueError(f"point violates model constraint: <p,p>={c}")
    if space.kind == HYPERBOLIC and p[-1] <= 0:
        raise ValueError("hyperboloid point must lie on the upper sheet")


def check_tangent(space: SpaceForm, p: np.ndarray, v: np.ndarray,
                  unit: bool = False, tol: float = 1e-8) -> None:
    v = np.asarray(v, dtype=float)
    if space.kind != EUCLIDEAN and abs(metric_inner(space, p, v)) > tol:
        raise ValueError("vector is not tangent to the model at p")
    if unit and abs(metric_inner(space, v, v) - 1.0) > tol:
        raise ValueError("vector is not unit length")


def project_to_model(space: SpaceForm, x: np.ndarray) -> np.ndarray:
    """Nearest constraint-set representative (radial rescaling)."""
    x = np.asarray(x, dtype=float)
    if space.kind == EUCLIDEAN:
        return x
    c = metric_inner(space, x, x)
    if space.kind == SPHERE:
        return x / np.sqrt(c)
    if c >= 0:
        raise ValueError("cannot project a non-timelike point to the hyperboloid")
    y = x / np.sqrt(-c)
    return y if y[-1] > 0 else -y


def tangent_project(space: SpaceForm, p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Remove the position component of ``w`` (identity in Euclidean space)."""
    if space.kind == EUCLIDEAN:
        return np.asarray(w, dtype=float)
    w = np.asarray(w, dtype=float)
    return w - (metric_inner(space, w, p) / space.model_constant) * np.asarray(p)


def geodesic(space: SpaceForm, p: np.ndarray, v: np.ndarray, s: float,
             tol: float = 1e-8) -> np.ndarray:
    """Unit-speed geodesic from p with initial velocity v, evaluated at s."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    check_point(space, p, tol=tol)
    check_tangent(space, p, v, unit=True, tol=tol)
    if space.kind == EUCLIDEAN:
        return p + s * v
    if space.kind == SPHERE:
        return np.cos(s) * p + np.sin(s) * v
    return np.cosh(s) * p + np.sinh(s) * v


def geodesic_velocity(space: SpaceForm, p: np.ndarray, v: np.ndarray,
                      s: float) -> np.ndarray:
    """Velocity of the geodesic at arclength s."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if space.kind == EUCLIDEAN:
        return v
    if space.kind == SPHERE:
        return -np.sin(s) * p + np.cos(s) * v
    return np.sinh(s) * p + np.cosh(s) * v


def parallel_transport(space: SpaceForm, p: np.ndarray, v: np.ndarray,
                       w: np.ndarray, s: float, tol: float = 1e-8) -> np.ndarray:
    """Transport tangent vector w along the geodesic through (p, v) to arclength s.

    The component of w along v rotates (or boosts) with the geodesic frame;
    the component orthogonal to the plane of motion is constant.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    check_point(space, p, tol=tol)
    check_tangent(space, p, v, unit=True, tol=tol)
    check_tangent(space, p, w, tol=tol)
    if space.kind == EUCLIDEAN:
        return w
    a = metric_inner(space, w, v)
    w_perp = w - a * v
    return a * geodesic_velocity(space, p, v, s) + w_perp


def distance(space: SpaceForm, p: np.ndarray, q: np.ndarray) -> float:
    """Geodesic distance between model points."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if space.kind == EUCLIDEAN:
        return float(np.linalg.norm(p - q))
    ip = metric_inner(space, p, q)
    if space.kind == SPHERE:
        return float(np.arccos(np.clip(ip, -1.0, 1.0)))
    return float(np.arccosh(max(-ip, 1.0)))
