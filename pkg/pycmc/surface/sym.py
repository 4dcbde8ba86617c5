import logging
from typing import Optional, Tuple

import numpy as np

from pycmc.exceptions import DomainError
from pycmc.loopcore.functional import as_loop_function, evaluate
from pycmc.loopcore.linalg import IDENTITY, SU2_BASIS, contour_coefficient, dagger, inv2, op_norm, to_r3
from pycmc.loopcore.matrix_loop import MatrixLoop

# θ-step of the five-point stencil used on meshes
STENCIL_STEP = 1e-3
STENCIL_OFFSETS = np.array([0.0, -2.0, -1.0, 1.0, 2.0])
UNITARITY_WARN = 1e-8


def stencil(lam_sym: complex = 1.0, h: float = STENCIL_STEP) -> np.ndarray:
    """λ_sym·e^{ihk}, k = 0, −2, −1, 1, 2."""
    return complex(lam_sym) * np.exp(1j * h * STENCIL_OFFSETS)


def _su2_part(x):
    """Projection onto su(2): anti-hermitian, traceless."""
    x = 0.5 * (x - dagger(x))
    tr = 0.5 * (x[..., 0, 0] + x[..., 1, 1])
    return x - tr[..., None, None] * IDENTITY


def _sym_matrix(f, df, H: float):
    dev = float(np.max(op_norm(dagger(f) @ f - IDENTITY)))
    if dev > UNITARITY_WARN:
        logging.warning(f"sym: frame is not unitary at λ_sym (deviation {dev:.3e}), projecting")
    return _su2_part(-2.0 / H * df @ inv2(f))


def sym(F, lam_sym: complex = 1.0, H: float = 1.0) -> np.ndarray:
    """Sym point f = −2H⁻¹F′F⁻¹, F′ = ∂F/∂θ at λ = λ_sym = e^{iθ}.

    MatrixLoops are differentiated spectrally, other loop-like inputs by a
    five-point difference in θ. The su(2) value is mapped to ℝ³ by
    x_j = −½ tr(e_j·X) with e₁ = [[0, 1], [−1, 0]], e₂ = [[0, i], [i, 0]],
    e₃ = [[i, 0], [0, −i]].

    Args:
        F: loop-like unitary frame at one point of the domain.
        lam_sym: complex, Sym point on S¹.
        H: float, mean curvature.

    Returns:
        point: array of shape (3,).

    **Examples:**
        >>> bool(np.allclose(sym(np.eye(2)), 0.0))
        True
    """
    lam = np.array([complex(lam_sym)])
    if isinstance(F, MatrixLoop):
        df = F.theta_derivative().eval(lam)
    else:
        df = as_loop_function(F).theta_derivative(lam)
    return to_r3(_sym_matrix(evaluate(F, lam), df, H))[0]


def sym_from_stencil(values, H: float = 1.0, h: float = STENCIL_STEP) -> np.ndarray:
    """Sym points from frame values on ``stencil`` (axis −3 is the stencil).

    Args:
        values: array (..., 5, 2, 2).
        H: float.
        h: float, stencil step.

    Returns:
        points: array (..., 3).
    """
    values = np.asarray(values, dtype=complex)
    f = values[..., 0, :, :]
    df = (values[..., 1, :, :] - 8 * values[..., 2, :, :] + 8 * values[..., 3, :, :] - values[..., 4, :, :]) / (12 * h)
    return to_r3(_sym_matrix(f, df, H))


def metric_from_rho(rho, alpha, H: float = 1.0):
    """Conformal factor 2|α/H|ρ² in the coordinate w = x + iy."""
    return 2 * np.abs(np.asarray(alpha) / H) * np.asarray(rho) ** 2


def positive_constant_term(B, radius: float = 0.25) -> float:
    """B₁₁(0): exact for a MatrixLoop, a contour mean otherwise."""
    if isinstance(B, MatrixLoop):
        return float(B.coefficient(0)[0, 0].real)
    value = contour_coefficient(lambda lam: evaluate(B, lam)[:, 0, 0], 0.0, radius, k=0, m=32)
    return float(np.real(value))


def metric_from_B(B, alpha: complex, H: float = 1.0, radius: float = 0.25) -> float:
    """Conformal factor 2|α/H|·B₁₁(0)² of the immersion.

    Args:
        B: loop-like positive factor at the point.
        alpha: complex, λ⁻¹-coefficient of the upper-right entry of the
            potential in the coordinate w at the point.
        H: float.
        radius: float, contour radius when B is not a MatrixLoop.

    Raises:
        DomainError: if α vanishes (a branch point of the immersion).
    """
    if abs(alpha) < 1e-14:
        raise DomainError("α vanishes: the immersion is branched at this point")
    return float(metric_from_rho(positive_constant_term(B, radius), alpha, H))


def moving_frame(
    F_value, alpha: complex, H: float = 1.0, lam_sym: complex = 1.0, previous: Optional[complex] = None
) -> Tuple[np.ndarray, complex]:
    """G = F·diag(p, p⁻¹) with p² = iHα/(λ|Hα|).

    Args:
        F_value: 2×2 frame value at λ_sym.
        alpha: complex.
        H: float.
        lam_sym: complex.
        previous: Optional[complex], p at a neighbouring vertex; the root
            nearest to it is taken so p varies continuously on the grid.

    Returns:
        (G, p).
    """
    p = np.sqrt(1j * H * alpha / (complex(lam_sym) * abs(H * alpha)))
    if previous is not None and abs(p + previous) < abs(p - previous):
        p = -p
    g = np.asarray(F_value, dtype=complex) @ np.diag([p, 1 / p])
    return g, complex(p)


def normal(G) -> np.ndarray:
    """Unit normal G·e₃·G⁻¹ in ℝ³."""
    G = np.asarray(G, dtype=complex)
    return to_r3(G @ SU2_BASIS[2] @ inv2(G))


def normals_from_frames(F_values) -> np.ndarray:
    """Normals F·e₃·F⁻¹; the diagonal gauge of the moving frame drops out."""
    return normal(F_values)
