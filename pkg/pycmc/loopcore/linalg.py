"""Batched 2×2 complex matrix helpers.

Every function accepts arrays of shape (..., 2, 2) and works element-wise
over the leading axes.
"""

import numpy as np

from pycmc.exceptions import SingularLoopError

IDENTITY = np.eye(2, dtype=complex)

# su(2) basis identified with R^3
SU2_BASIS = np.array(
    [
        [[0, 1], [-1, 0]],
        [[0, 1j], [1j, 0]],
        [[1j, 0], [0, -1j]],
    ],
    dtype=complex,
)


def det2(m):
    m = np.asarray(m)
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def adj2(m):
    m = np.asarray(m)
    out = np.empty(m.shape, dtype=complex)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 1, 1] = m[..., 0, 0]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    return out


def inv2(m, singular: float = 1e-12):
    """Inverse by adjugate over determinant.

    Raises:
        SingularLoopError: if some |det| is below ``singular``.
    """
    d = det2(m)
    if np.any(np.abs(d) < singular):
        raise SingularLoopError(f"determinant {np.min(np.abs(d)):.3e} below {singular:g}")
    return adj2(m) / np.asarray(d)[..., None, None]


def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def commutator(a, b):
    return a @ b - b @ a


def op_norm(m):
    """Largest singular value, batched."""
    return np.linalg.norm(np.asarray(m, dtype=complex), ord=2, axis=(-2, -1))


def identity_like(shape=()):
    return np.broadcast_to(IDENTITY, tuple(shape) + (2, 2)).copy()


def sqrt_principal(w):
    """Square root with Re >= 0 and, on the imaginary axis, Im >= 0."""
    s = np.sqrt(np.asarray(w, dtype=complex))
    flip = (np.abs(s.real) <= 1e-15 * np.maximum(1.0, np.abs(s))) & (s.imag < 0)
    return np.where(flip, -s, s)


def sinhc(mu):
    """sinh(μ)/μ, continuous at 0."""
    mu = np.asarray(mu, dtype=complex)
    small = np.abs(mu) < 1e-4
    safe = np.where(small, 1.0, mu)
    mu2 = mu * mu
    return np.where(small, 1.0 + mu2 / 6.0 + mu2 * mu2 / 120.0, np.sinh(safe) / safe)


def expm_traceless(x):
    """exp X = cosh(μ) id + μ⁻¹ sinh(μ) X for traceless X, μ² = −det X.

    The formula is even in μ, so no branch choice is involved.
    """
    x = np.asarray(x, dtype=complex)
    mu = np.sqrt(-det2(x))
    return np.cosh(mu)[..., None, None] * IDENTITY + sinhc(mu)[..., None, None] * x


def to_r3(m):
    """Coordinates x_j = −½ tr(e_j m) of an su(2) element in the basis e₁, e₂, e₃."""
    m = np.asarray(m, dtype=complex)
    coords = -0.5 * np.einsum("jab,...ba->...j", SU2_BASIS, m)
    return coords.real


def from_r3(x):
    """Inverse of ``to_r3`` on su(2)."""
    x = np.asarray(x, dtype=float)
    # tr(e_j e_k) = -2 δ_jk, hence m = Σ x_j e_j
    return np.einsum("...j,jab->...ab", x.astype(complex), SU2_BASIS)


def contour_coefficient(func, center: complex, radius: float, k: int = -1, m: int = 64):
    """Laurent coefficient of index k of ``func`` around ``center``.

    Trapezoidal rule on the circle |λ − center| = radius, exponentially
    accurate for functions analytic on a neighbourhood of the punctured
    disk. ``func`` maps an array of points to values of shape (m, ...).

    **Examples:**
        >>> res = contour_coefficient(lambda l: 1.0 / (l - 0.3), 0.3, 0.01, k=-1)
        >>> abs(res - 1) < 1e-12
        True
    """
    zeta = np.exp(2j * np.pi * np.arange(m) / m)
    pts = center + radius * zeta
    vals = np.asarray(func(pts), dtype=complex)
    weights = (radius * zeta) ** (-k) / m
    return np.tensordot(weights, vals, axes=(0, 0))
