"""The operator 𝓛ₙ(X) = nX + [A, X] on 2×2 matrices and its inverse."""

from typing import Optional

import numpy as np

from pycmc.exceptions import DomainError, ResonanceError
from pycmc.loopcore.linalg import IDENTITY, commutator, det2, inv2, sqrt_principal
from pycmc.loopcore.matrix_loop import MatrixLoop

RESONANCE_RTOL = 1e-10


def L_apply(a, n: int, x) -> np.ndarray:
    """𝓛ₙ(X) = nX + [A, X], batched over leading axes.

    **Examples:**
        >>> import numpy as np
        >>> a = np.array([[0, 1], [2, 0]], dtype=complex)
        >>> np.allclose(L_apply(a, 3, np.eye(2)), 3 * np.eye(2))
        True
    """
    a = np.asarray(a, dtype=complex)
    x = np.asarray(x, dtype=complex)
    return n * x + commutator(a, x)


def L_inverse(a, n: int, x, lam=None, rtol: float = RESONANCE_RTOL) -> np.ndarray:
    """𝓛ₙ⁻¹(X) for traceless A.

    With R = n·id + A − adj(A) = n·id + 2A, n𝓛ₙ⁻¹(X) = X − R⁻¹[A, X]. R is
    singular exactly when n = ±2μ, i.e. at the resonances of A.

    Args:
        a: traceless matrices (..., 2, 2).
        n: int >= 1.
        x: matrices (..., 2, 2).
        lam: optional λ-values matching the batch, used in error messages.
        rtol: float, relative threshold on det R = n² − 4μ².

    Returns:
        y: matrices with 𝓛ₙ(y) = x.

    Raises:
        ResonanceError: if det R is below threshold somewhere.
    """
    assert n >= 1, "𝓛ₙ is inverted for n >= 1 only"
    a = np.asarray(a, dtype=complex)
    x = np.asarray(x, dtype=complex)
    r_mat = n * IDENTITY + 2 * a
    d = det2(r_mat)
    bad = np.abs(d) <= rtol * max(1.0, n * n)
    if np.any(bad):
        where = None
        if lam is not None:
            lam_arr = np.broadcast_to(np.asarray(lam, dtype=complex), np.shape(d))
            where = complex(lam_arr[bad].ravel()[0])
        raise ResonanceError(f"𝓛_{n} is not invertible (n = ±2μ)", lam=where)
    return (x - inv2(r_mat, singular=0.0) @ commutator(a, x)) / n


def l_eigenvalues(a, n: int) -> np.ndarray:
    """Eigenvalues {n, n, n + 2μ, n − 2μ} of 𝓛ₙ, shape (..., 4)."""
    a = np.asarray(a, dtype=complex)
    m = sqrt_principal(-det2(a))
    n_arr = np.full(m.shape, n, dtype=complex)
    return np.stack([n_arr, n_arr, n + 2 * m, n - 2 * m], axis=-1)


def l_dense(a, n: int) -> np.ndarray:
    """𝓛ₙ as a 4×4 matrix on row-major vec(X)."""
    a = np.asarray(a, dtype=complex)
    eye = np.eye(2)
    return n * np.eye(4) + np.kron(a, eye) - np.kron(eye, a.T)


def _entry_coeffs(loop: MatrixLoop, i: int, j: int):
    return loop.coeffs[:, i, j], loop.kmin


def _laurent_product_coefficient(p, q, index: int) -> complex:
    (cp, kp), (cq, kq) = p, q
    total = 0j
    for s, value in enumerate(cp):
        t = index - (kp + s) - kq
        if 0 <= t < len(cq):
            total += value * cq[t]
    return total


def l_holo_residual(a: MatrixLoop, x: MatrixLoop, tol: float = 1e-10) -> float:
    """|λ⁻¹ coefficient| of A₁₂X₂₁ + A₂₁X₁₂.

    The order pattern is checked first: X₁₂ may have at most a simple pole,
    the other entries of X and all entries of A except A₁₂ must be
    holomorphic at λ = 0. Coefficients below ``tol`` count as zero there.

    Raises:
        DomainError: if A or X violates the order pattern.
    """
    def lowest(loop: MatrixLoop, i: int, j: int) -> int:
        nz = np.nonzero(np.abs(loop.coeffs[:, i, j]) > tol)[0]
        return loop.kmin + int(nz[0]) if nz.size else 0

    for loop, name in ((a, "A"), (x, "X")):
        if lowest(loop, 0, 1) < -1:
            raise DomainError(f"{name}₁₂ has a pole of order > 1 at λ = 0")
        for i, j in ((0, 0), (1, 0), (1, 1)):
            if lowest(loop, i, j) < 0:
                raise DomainError(f"{name}[{i}{j}] has a pole at λ = 0")
    value = _laurent_product_coefficient(
        _entry_coeffs(a, 0, 1), _entry_coeffs(x, 1, 0), -1
    ) + _laurent_product_coefficient(_entry_coeffs(a, 1, 0), _entry_coeffs(x, 0, 1), -1)
    return float(abs(value))


def L_holo_check(a: MatrixLoop, x: MatrixLoop, tol: Optional[float] = 1e-10) -> bool:
    """Whether A₁₂X₂₁ + A₂₁X₁₂ has no λ⁻¹ term (see ``l_holo_residual``)."""
    return bool(l_holo_residual(a, x, tol) < tol)
