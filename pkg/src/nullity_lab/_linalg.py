"""Shared numerical linear algebra helpers.

All routines take an explicit ambient Gram matrix ``G`` so the same code
serves the Euclidean and Lorentz inner products.  Vectors handled here are
always spacelike in the Lorentz case (tangent/normal data of submanifolds of
the hyperboloid), so square roots of self-inner-products are safe after the
degeneracy checks.
"""

from __future__ import annotations

import numpy as np


def gram_schmidt(vectors: np.ndarray, G: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """G-orthonormalize the columns of ``vectors``, dropping dependent ones.

    Raises ValueError if a vector with nonpositive self-inner-product larger
    than the tolerance shows up (non-spacelike input).
    """
    out = []
    for j in range(vectors.shape[1]):
        v = vectors[:, j].astype(float).copy()
        for w in out:
            v = v - (w @ G @ v) * w
        sq = float(v @ G @ v)
        if abs(sq) <= tol * max(1.0, float(v @ v)):
            continue
        if sq < 0:
            raise ValueError("gram_schmidt: non-spacelike vector in input span")
        out.append(v / np.sqrt(sq))
    return np.column_stack(out) if out else np.zeros((vectors.shape[0], 0))


def metric_complement(span: np.ndarray, G: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """G-orthonormal basis of the G-orthogonal complement of ``span`` columns.

    The complement is the Euclidean null space of ``span.T @ G``; it is then
    G-orthonormalized.  Works for the Lorentz form as long as the complement
    is spacelike (which holds whenever the timelike direction lies in the
    span, e.g. the position vector of a hyperboloid point).
    """
    if span.shape[1] == 0:
        basis = np.eye(span.shape[0])
    else:
        _, s, vt = np.linalg.svd(span.T @ G)
        rank = int(np.sum(s > tol * max(s[0], 1e-300)))
        basis = vt[rank:].T
    return gram_schmidt(basis, G)


def svd_kernel(M: np.ndarray, rel_tol: float = 1e-7, gap_min: float = 1e3):
    """Kernel of ``M`` by relative singular-value thresholding.

    Returns ``(kernel_basis, singular_values, gap, ambiguous)`` where the
    basis columns are orthonormal right singular vectors, ``gap`` is the ratio
    of the smallest retained to the largest discarded singular value (inf when
    one side is empty), and ``ambiguous`` flags gap < gap_min.
    """
    m = M.shape[1]
    _, s, vt = np.linalg.svd(M, full_matrices=True)
    s = np.concatenate([s, np.zeros(max(0, m - len(s)))])
    smax = s[0] if len(s) else 0.0
    if smax <= 1e-14:
        return np.eye(m), s, np.inf, False
    keep = s > rel_tol * smax
    r = int(np.sum(keep))
    kernel = vt[r:].T
    if r == 0 or r == m or s[r] < 1e-14 * smax:
        gap = np.inf
    else:
        gap = float(s[r - 1] / s[r])
    return kernel, s, gap, bool(gap < gap_min)


def align_frame(new: np.ndarray, ref: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Rotate the orthonormal frame ``new`` (within its span) closest to ``ref``.

    Orthogonal Procrustes on the overlap matrix; keeps the span of ``new``
    while removing arbitrary SVD sign/rotation flips between nearby frames.
    """
    if new.shape[1] == 0:
        return new
    C = new.T @ G @ ref
    u, _, vt = np.linalg.svd(C)
    return new @ (u @ vt)


def pca_dimension(points: np.ndarray, center: np.ndarray | None = None,
                  rel_tol: float = 0.05):
    """Dimension estimate of a point cloud by singular-value thresholding.

    Returns ``(dim, singular_values, gap)``; gap is the ratio across the
    retained/discarded boundary (inf if nothing is discarded).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        return 0, np.zeros(0), np.inf
    c = pts.mean(axis=0) if center is None else np.asarray(center, dtype=float)
    s = np.linalg.svd(pts - c, compute_uv=False)
    if s[0] <= 1e-12:
        return 0, s, np.inf
    keep = s > rel_tol * s[0]
    dim = int(np.sum(keep))
    gap = np.inf if dim >= len(s) or s[dim] <= 1e-300 else float(s[dim - 1] / s[dim])
    return dim, s, gap


def local_pca_dimension(points: np.ndarray, anchor: np.ndarray,
                        k_neighbors: int | None = None, rel_tol: float = 0.08):
    """PCA dimension of the k nearest cloud points around ``anchor``.

    A small fixed neighborhood keeps curvature of the sampled set from
    inflating the estimate the way a global PCA would.
    """
    pts = np.asarray(points, dtype=float)
    d = np.linalg.norm(pts - anchor, axis=1)
    keep = d > 1e-12
    if not np.any(keep):
        return 0, np.zeros(0), np.inf
    pts = pts[keep]
    d = d[keep]
    if k_neighbors is None:
        k_neighbors = int(np.clip(len(pts) // 10, 12, 40))
    order = np.argsort(d)
    local = pts[order[:min(k_neighbors, len(pts))]]
    if len(local) < 2:
        return 0, np.zeros(0), np.inf
    return pca_dimension(local, center=anchor, rel_tol=rel_tol)


def rk4(f, y0: np.ndarray, t0: float, t1: float, n_steps: int) -> np.ndarray:
    """Classic fixed-step RK4; returns the trajectory of shape (n+1, dim)."""
    y = np.asarray(y0, dtype=float).copy()
    h = (t1 - t0) / n_steps
    out = np.empty((n_steps + 1, y.size))
    out[0] = y
    t = t0
    for i in range(n_steps):
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (i + 1) * h
        out[i + 1] = y
    return out


def fit_loglog_slope(hs, errs) -> float:
    """Least-squares slope of log(err) against log(h)."""
    x = np.log(np.asarray(hs, dtype=float))
    y = np.log(np.asarray(errs, dtype=float))
    A = np.column_stack([x, np.ones_like(x)])
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(sol[0])
