"""Rigid motions and simple shape fits for point clouds in ℝ³."""

import logging
from typing import Dict, Tuple

import numpy as np
from scipy.linalg import lstsq, svd
from scipy.spatial import cKDTree

from pycmc.exceptions import AlignmentError

# cross-covariance singular value ratio below which the rotation is not determined
RANK_TOL = 1e-12


def _flat(points) -> np.ndarray:
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    return points


def procrustes(P, Q) -> Tuple[np.ndarray, np.ndarray, float]:
    """Proper rigid motion x ↦ Rx + t taking P closest to Q in least squares.

    The reflection branch is rejected, det R = +1. Rows with a NaN in either
    cloud are ignored.

    Args:
        P: array (..., 3).
        Q: array (..., 3), same shape.

    Returns:
        (R, t, residual) with residual = sup |R p + t − q|.

    Raises:
        AlignmentError: if the cross-covariance has rank < 2.

    **Examples:**
        >>> P = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
        >>> R, t, res = procrustes(P, P + 1.0)
        >>> bool(res < 1e-12)
        True
    """
    P, Q = _flat(P), _flat(Q)
    assert P.shape == Q.shape, "point clouds must match"
    ok = np.all(np.isfinite(P), axis=1) & np.all(np.isfinite(Q), axis=1)
    P, Q = P[ok], Q[ok]
    if len(P) < 3:
        raise AlignmentError(f"procrustes needs at least 3 matched points, got {len(P)}")
    cp, cq = P.mean(axis=0), Q.mean(axis=0)
    u, s, vt = svd((P - cp).T @ (Q - cq))
    if s[1] < RANK_TOL * max(s[0], 1e-300):
        raise AlignmentError(f"rank-deficient cross-covariance, singular values {s}")
    d = np.sign(np.linalg.det(vt.T @ u.T)) or 1.0
    R = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = cq - R @ cp
    residual = float(np.max(np.linalg.norm(P @ R.T + t - Q, axis=1)))
    return R, t, residual


def apply_motion(R: np.ndarray, t: np.ndarray, points) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    return points @ R.T + t


def fit_screw(points_a, points_b) -> Dict:
    """Rigid motion b ≈ R a + t with its rotation angle and axis.

    Used for f(x + ρ, y) = R f(x, y) + t.
    """
    R, t, residual = procrustes(points_a, points_b)
    angle = float(np.arccos(np.clip(0.5 * (np.trace(R) - 1), -1.0, 1.0)))
    w, v = np.linalg.eig(R)
    axis = np.real(v[:, int(np.argmin(np.abs(w - 1)))])
    scale = float(np.nanmax(np.linalg.norm(_flat(points_b) - np.nanmean(_flat(points_b), axis=0), axis=1)))
    return {
        "R": R,
        "t": t,
        "angle": angle,
        "axis": axis / np.linalg.norm(axis),
        "pitch": float(np.dot(t, axis) / np.linalg.norm(axis)),
        "residual": residual,
        "relative_residual": residual / scale if scale > 0 else residual,
    }


def fit_cylinder(points, normals) -> Dict:
    """Axis, center and radius of a cylinder through the points.

    The axis is the direction least seen by the normals (smallest singular
    vector); the cross-section is a least-squares circle in the orthogonal
    plane.

    Returns:
        Dict with axis, center, radius and rel_variance = Var(d)/mean(d)²
        of the distances d to the axis.
    """
    P, N = _flat(points), _flat(normals)
    ok = np.all(np.isfinite(P), axis=1) & np.all(np.isfinite(N), axis=1)
    P, N = P[ok], N[ok]
    _, _, vt = svd(N, full_matrices=False)
    axis = vt[-1]
    e1 = vt[0]
    e2 = np.cross(axis, e1)
    u, v = P @ e1, P @ e2
    # u² + v² = 2 c_u u + 2 c_v v + k
    design = np.stack([2 * u, 2 * v, np.ones_like(u)], axis=1)
    (cu, cv, k), *_ = lstsq(design, u**2 + v**2)
    radius = float(np.sqrt(k + cu**2 + cv**2))
    center = cu * e1 + cv * e2
    d = np.hypot(u - cu, v - cv)
    rel_variance = float(np.var(d) / np.mean(d) ** 2)
    logging.debug(f"fit_cylinder: radius {radius:.6g}, rel_variance {rel_variance:.3e}")
    return {"axis": axis, "center": center, "radius": radius, "rel_variance": rel_variance}


def self_proximity(points, ring: int = 2, factor: float = 0.5) -> Dict:
    """Heuristic self-approach statistic of a gridded surface.

    Counts vertex pairs closer than ``factor`` times the smallest grid edge
    whose grid indices are more than ``ring`` apart (cyclically in y). This
    is a rough indicator only; it certifies nothing about embeddedness.

    Args:
        points: array (nx, ny, 3).
        ring: int, index distance regarded as the grid neighbourhood.
        factor: float.
    """
    points = np.asarray(points, dtype=float)
    nx, ny, _ = points.shape
    flat = points.reshape(-1, 3)
    ok = np.all(np.isfinite(flat), axis=1)
    idx = np.flatnonzero(ok)
    edges = np.concatenate(
        [
            np.linalg.norm(np.diff(points, axis=0), axis=-1).ravel(),
            np.linalg.norm(np.diff(points, axis=1), axis=-1).ravel(),
        ]
    )
    edges = edges[np.isfinite(edges) & (edges > 0)]
    radius = factor * float(edges.min()) if edges.size else 0.0
    tree = cKDTree(flat[ok])
    pairs = tree.query_pairs(radius, output_type="ndarray") if radius > 0 else np.zeros((0, 2), dtype=int)
    close = 0
    for a, b in idx[pairs] if len(pairs) else []:
        ia, ja = divmod(int(a), ny)
        ib, jb = divmod(int(b), ny)
        dj = min(abs(ja - jb), ny - abs(ja - jb))
        if abs(ia - ib) > ring or dj > ring:
            close += 1
    dist, _ = tree.query(flat[ok], k=2)
    return {
        "radius": radius,
        "close_pairs": close,
        "min_neighbor_distance": float(dist[:, 1].min()) if len(dist) else float("nan"),
        "heuristic": True,
    }
