"""Truncated power series in z.

A series is an array whose leading axis is the power of z (index k holds the
coefficient of z^k); trailing axes are either empty (scalar series) or
(..., 2, 2) for matrix series over λ-samples. All products are truncated to
the length of the first operand unless ``order`` is given.
"""

from typing import Optional

import numpy as np


def _zeros_like_product(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    shape = np.broadcast_shapes(a.shape[1:], b.shape[1:])
    if a.ndim >= 3 and b.ndim >= 3:
        shape = np.broadcast_shapes(a.shape[1:-2], b.shape[1:-2]) + (2, 2)
    return np.zeros((order,) + shape, dtype=complex)


def mat_mul(a: np.ndarray, b: np.ndarray, order: Optional[int] = None) -> np.ndarray:
    """Product of two matrix series, c_k = Σ_{i+j=k} a_i b_j."""
    order = order or len(a)
    out = _zeros_like_product(a, b, order)
    for i in range(min(order, len(a))):
        if not np.any(a[i]):
            continue
        m = min(len(b), order - i)
        out[i : i + m] += np.matmul(a[i], b[:m])
    return out


def scalar_mul(a: np.ndarray, b: np.ndarray, order: Optional[int] = None) -> np.ndarray:
    order = order or len(a)
    full = np.convolve(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    out = np.zeros(order, dtype=complex)
    out[: min(order, len(full))] = full[:order]
    return out


def scale(s: np.ndarray, e: np.ndarray, order: Optional[int] = None) -> np.ndarray:
    """Product of a scalar series s with a matrix series e."""
    order = order or len(e)
    out = np.zeros((order,) + e.shape[1:], dtype=complex)
    for i in range(min(order, len(s))):
        if s[i] == 0:
            continue
        m = min(len(e), order - i)
        out[i : i + m] += s[i] * e[:m]
    return out


def scalar_inv(a: np.ndarray, order: Optional[int] = None) -> np.ndarray:
    """Reciprocal of a scalar series with a_0 != 0."""
    order = order or len(a)
    assert a[0] != 0, "series with vanishing constant term is not invertible"
    out = np.zeros(order, dtype=complex)
    out[0] = 1.0 / a[0]
    for k in range(1, order):
        acc = sum(a[j] * out[k - j] for j in range(1, min(k, len(a) - 1) + 1))
        out[k] = -acc / a[0]
    return out


def derivative(e: np.ndarray) -> np.ndarray:
    """d/dz, keeping the length (last coefficient becomes zero)."""
    out = np.zeros_like(e, dtype=complex)
    ks = np.arange(1, len(e)).reshape((-1,) + (1,) * (e.ndim - 1))
    out[:-1] = ks * e[1:]
    return out


def compose(e: np.ndarray, s: np.ndarray, order: Optional[int] = None) -> np.ndarray:
    """Σ_k e_k s(z)^k for a scalar series s with s_0 = 0."""
    order = order or len(e)
    assert abs(s[0]) == 0, "inner series must vanish at z = 0"
    out = np.zeros((order,) + e.shape[1:], dtype=complex)
    power = np.zeros(order, dtype=complex)
    power[0] = 1.0
    for k in range(min(order, len(e))):
        out += scale(power, np.broadcast_to(e[k], (1,) + e.shape[1:]), order)
        power = scalar_mul(power, s, order)
    return out


def reversion(s: np.ndarray, order: Optional[int] = None) -> np.ndarray:
    """Compositional inverse t of s (s_0 = 0, s_1 != 0): s(t(w)) = w."""
    order = order or len(s)
    assert abs(s[0]) == 0 and s[1] != 0, "series must be of the form s_1 z + ..."
    ident = np.zeros(order, dtype=complex)
    ident[1] = 1.0
    t = ident / s[1]
    # each pass fixes one more coefficient
    for _ in range(order):
        t = t - (compose(s, t, order) - ident) / s[1]
    return t


def evaluate(e: np.ndarray, z: complex) -> np.ndarray:
    """Σ_k e_k z^k by Horner's rule."""
    out = np.zeros(e.shape[1:], dtype=complex)
    for c in e[::-1]:
        out = out * z + c
    return out


def evaluate_derivative(e: np.ndarray, z: complex) -> np.ndarray:
    return evaluate(derivative(e), z)
