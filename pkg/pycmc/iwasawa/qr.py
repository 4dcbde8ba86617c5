from typing import Tuple

import numpy as np
import scipy.linalg

from pycmc.exceptions import SingularLoopError
from pycmc.loopcore.linalg import det2


def _phases(diag: np.ndarray) -> np.ndarray:
    mod = np.abs(diag)
    return np.where(mod > 0, diag / np.where(mod > 0, mod, 1.0), 1.0)


def qr_constant(m, singular: float = 1e-12) -> Tuple[np.ndarray, np.ndarray]:
    """Iwasawa factorization of a constant loop: m = U·T.

    U is unitary and T upper triangular with positive real diagonal; for
    det m = 1 both factors have determinant one.

    Args:
        m: 2×2 complex matrix.
        singular: float, determinant threshold.

    Returns:
        (U, T): Tuple of 2×2 arrays.

    Raises:
        SingularLoopError: if |det m| < singular.

    **Examples:**
        >>> u, t = qr_constant([[0, -1], [1, 0]])
        >>> bool(np.allclose(t, np.eye(2)))
        True
    """
    m = np.asarray(m, dtype=complex)
    if abs(det2(m)) < singular:
        raise SingularLoopError(f"cannot QR-factor a singular matrix (det {det2(m):.3e})")
    q, r = np.linalg.qr(m)
    d = _phases(np.diag(r))
    return q * d[None, :], np.conj(d)[:, None] * r


def rq_constant(m, singular: float = 1e-12) -> Tuple[np.ndarray, np.ndarray]:
    """Factorization m = T·U with T upper triangular positive-diagonal, U unitary."""
    m = np.asarray(m, dtype=complex)
    if abs(det2(m)) < singular:
        raise SingularLoopError(f"cannot RQ-factor a singular matrix (det {det2(m):.3e})")
    r, q = scipy.linalg.rq(m)
    d = _phases(np.diag(r))
    return r * np.conj(d)[None, :], d[:, None] * q


def is_upper_positive(m, tol: float = 1e-10) -> bool:
    """Whether m lies in 𝒯 (upper triangular, positive real diagonal)."""
    m = np.asarray(m, dtype=complex)
    diag = np.diag(m)
    return bool(abs(m[1, 0]) <= tol and np.all(diag.real > 0) and np.all(np.abs(diag.imag) <= tol))
