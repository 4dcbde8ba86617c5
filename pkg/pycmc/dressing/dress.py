import json
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from pycmc.config import DEFAULT_TOLERANCES, Tolerances
from pycmc.delaunay.residue import DelaunayResidue
from pycmc.exceptions import DegenerateError, InconsistencyError, PycmcError
from pycmc.loopcore.annulus import Annulus, circle_points
from pycmc.loopcore.functional import LoopFunction, evaluate
from pycmc.loopcore.linalg import contour_coefficient, det2, inv2, op_norm
from pycmc.loopcore.matrix_loop import MatrixLoop
from pycmc.dressing.simple_factor import SimpleFactor, sandwich, unitarity_residual

# relative size of the index −1 coefficient above which a pole is genuine
POLE_THRESHOLD = 1e-6
UNITARITY_WARN = 1e-9


def _frame_at(F, z, lam):
    if z is None:
        return evaluate(F, lam)
    lam = np.asarray(lam, dtype=complex)
    return np.asarray(F(z, lam.reshape(-1)), dtype=complex).reshape(lam.shape + (2, 2))


def h_line(F_at_lam0, line) -> np.ndarray:
    """Line F(z, λ0)⁻¹L of the positive side factor."""
    return inv2(np.asarray(F_at_lam0, dtype=complex)) @ np.asarray(line, dtype=complex)


@dataclass
class DressingResult:
    """Output of one explicit dressing step.

    Attributes:
        unitary: LoopFunction, g·F·h⁻¹.
        positive: Optional[LoopFunction], h·B if B was given.
        g: SimpleFactor, the dressing factor.
        h: SimpleFactor, normalized factor with line F(z, λ0)⁻¹L.
        unitarity_residual: float, sup ‖F̃*F̃ − id‖ on the check circles.
    """

    unitary: LoopFunction
    positive: Optional[LoopFunction]
    g: SimpleFactor
    h: SimpleFactor
    unitarity_residual: float

    def __iter__(self):
        yield self.unitary
        yield self.h


def dress(
    sf: SimpleFactor,
    F,
    z=None,
    B=None,
    check_radii: Optional[List[float]] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> DressingResult:
    """Explicit dressing g·F·h⁻¹ of a unitary frame by a simple factor.

    The line of h is F(z, λ0)⁻¹L; then the singularities of g F h⁻¹ at λ0
    and 1/λ̄0 are removable and h·B stays positive.

    Args:
        sf: SimpleFactor g.
        F: loop-like unitary frame, or a callable (z, λ) ↦ F when ``z`` is set.
        z: Optional point of the domain passed to ``F`` and ``B``.
        B: Optional positive factor (same calling convention as ``F``).
        check_radii: Optional[List[float]], circles where unitarity is
            measured; default S¹ and the circle of F.
        tol: Tolerances.

    Returns:
        DressingResult, unpacks as (F_dressed, h).

    **Examples:**
        >>> g = SimpleFactor.normalized(0.3, [1, 1j])
        >>> f_new, h = dress(g, np.eye(2))
        >>> bool(np.allclose(f_new(np.array([0.7j])), np.eye(2)))
        True
    """
    try:
        f0 = _frame_at(F, z, np.array([sf.lam0]))[0]
    except PycmcError as err:
        raise DegenerateError(f"frame cannot be evaluated at λ0 = {sf.lam0:.6g}: {err}") from err
    h = SimpleFactor.normalized(sf.lam0, h_line(f0, sf.line))

    def unitary_func(lam):
        return sandwich(sf, _frame_at(F, z, lam), h, lam)

    dressed = LoopFunction(unitary_func, tag="unitary", radius=getattr(F, "radius", 1.0), name="dressed")
    positive = None
    if B is not None:

        def positive_func(lam):
            return h.eval(lam) @ _frame_at(B, z, lam)

        positive = LoopFunction(positive_func, Annulus.disk(abs(sf.lam0)), tag="positive", name="dressed+")
    radii = check_radii if check_radii is not None else sorted({1.0, float(getattr(F, "radius", 1.0))})
    lam = np.concatenate([circle_points(rho, 32, offset=0.25) for rho in radii])
    residual = unitarity_residual(unitary_func, lam)
    if residual > UNITARITY_WARN:
        logging.warning(f"dress: unitarity residual {residual:.3e} at λ0 = {sf.lam0:.6g}")
    logging.debug(f"dress: h = {h!r}, unitarity residual {residual:.3e}")
    return DressingResult(dressed, positive, sf, h, residual)


class DressedFrame:
    """Frame obtained from a base frame by successive explicit dressings.

    Args:
        base: object with ``unitary_at(x, y, λ)`` and ``positive_at(x, λ)``
            (e.g. a ``DelaunayFrame``).
        factors: List[SimpleFactor], applied left to right, g_k acting on
            the result of the previous step.
    """

    def __init__(self, base, factors: List[SimpleFactor]):
        self.base = base
        self.factors = list(factors)

    def __repr__(self):
        return f"DressedFrame({len(self.factors)} factors)"

    def _steps(self, x: float, y: float) -> Tuple[Callable, List[SimpleFactor]]:
        func = lambda lam: self.base.unitary_at(x, y, lam)  # noqa: E731
        hs = []
        for g in self.factors:
            f0 = func(np.array([g.lam0]))[0]
            h = SimpleFactor.normalized(g.lam0, h_line(f0, g.line))
            func = (lambda prev, g, h: lambda lam: sandwich(g, prev(lam), h, lam))(func, g, h)
            hs.append(h)
        return func, hs

    def unitary(self, x: float, y: float) -> LoopFunction:
        func, _ = self._steps(x, y)
        return LoopFunction(func, tag="unitary", name=f"dressed({x:g}, {y:g})")

    def unitary_at(self, x: float, y: float, lam):
        lam = np.asarray(lam, dtype=complex)
        func, _ = self._steps(x, y)
        return func(lam.reshape(-1)).reshape(lam.shape + (2, 2))

    def positive_at(self, x: float, y: float, lam):
        """h_k···h_1·B(x), holomorphic on the disk below every λ0."""
        lam = np.asarray(lam, dtype=complex).reshape(-1)
        _, hs = self._steps(x, y)
        out = self.base.positive_at(x, lam)
        for h in hs:
            out = h.eval(lam) @ out
        return out

    def factors_at(self, x: float, y: float, lam) -> Tuple[np.ndarray, np.ndarray]:
        return self.unitary_at(x, y, lam), self.positive_at(x, y, lam)


def eigenline(a0, mu0: complex) -> np.ndarray:
    """Eigenvector of the traceless 2×2 matrix a0 for the eigenvalue μ0."""
    a0 = np.asarray(a0, dtype=complex)
    v1 = np.array([a0[0, 1], mu0 - a0[0, 0]])
    v2 = np.array([mu0 + a0[1, 1], a0[1, 0]])
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    return v / np.linalg.norm(v)


def validate_special_dressing(res: DelaunayResidue, g: SimpleFactor, tol: Tolerances = DEFAULT_TOLERANCES) -> Dict:
    """Checks that g·A·g⁻¹ is again a Delaunay residue.

    Returns:
        report: Dict with the conjugated residue, its structure residual,
            the relative pole coefficient at λ0, the det and μ² mismatches.
    """
    lam0 = g.lam0

    def conj(lam):
        lam = np.asarray(lam, dtype=complex)
        return sandwich(g, res.matrix(lam), g, lam)

    rho = 0.5 * min(abs(lam0), abs(g.f.lam1) - abs(lam0))
    c_m1 = contour_coefficient(conj, lam0, rho, k=-1)
    c_0 = contour_coefficient(conj, lam0, rho, k=0)
    pole = float(op_norm(c_m1) / max(1.0, op_norm(c_0)))
    loop = MatrixLoop.from_samples(conj(circle_points(1.0, tol.samples)), radius=1.0)
    new, structure = DelaunayResidue.from_loop(loop)
    lam = circle_points(1.0, 64, offset=0.5)
    det_residual = float(np.max(np.abs(det2(conj(lam)) - det2(res.matrix(lam)))))
    mu2_residual = float(np.max(np.abs(new.mu_squared(lam) - res.mu_squared(lam))))
    return {
        "residue": new,
        "pole_residue": pole,
        "structure_residual": structure,
        "det_residual": det_residual,
        "mu2_residual": mu2_residual,
    }


def special_dressing(
    res: DelaunayResidue, lam0: complex, sign: int = 1, tol: Tolerances = DEFAULT_TOLERANCES
) -> SimpleFactor:
    """Normalized simple factor g with g·A·g⁻¹ again a Delaunay residue.

    The line is the eigenline of A(λ0) for the eigenvalue sign·μ(λ0), which
    makes g·A·g⁻¹ regular at λ0 and at 1/λ̄0.

    Raises:
        DegenerateError: if λ0 is outside 𝒟₁∖{0} or A(λ0) is defective.
        InconsistencyError: if the conjugated residue fails validation.
    """
    lam0 = complex(lam0)
    if lam0 == 0 or abs(lam0) >= 1:
        raise DegenerateError(f"special dressing needs 0 < |λ0| < 1, got {lam0}")
    mu0 = complex(res.mu(lam0))
    if abs(mu0) < 1e-8:
        raise DegenerateError(f"A(λ0) is defective at λ0 = {lam0:.6g}")
    a0 = res.matrix(np.array([lam0]))[0]
    g = SimpleFactor.normalized(lam0, eigenline(a0, sign * mu0))
    report = validate_special_dressing(res, g, tol)
    bad = max(report["pole_residue"], report["structure_residual"])
    if bad > 1e-8:
        raise InconsistencyError(f"special dressing at λ0 = {lam0:.6g} fails validation ({bad:.3e})")
    logging.info(f"special dressing at λ0 = {lam0:.6g}: new residue {report['residue']}")
    return g


def scenario_to_dict(res: DelaunayResidue, factors: List[SimpleFactor]) -> Dict:
    return {"residue": res.to_dict(), "factors": [g.to_dict() for g in factors]}


def scenario_from_dict(d: Dict) -> Tuple[DelaunayResidue, List[SimpleFactor]]:
    return DelaunayResidue.from_dict(d["residue"]), [SimpleFactor.from_dict(f) for f in d.get("factors", [])]


def save_scenario(path: str, res: DelaunayResidue, factors: List[SimpleFactor]):
    with open(path, "w") as f:
        json.dump(scenario_to_dict(res, factors), f, indent=2)


def load_scenario(path: str) -> Tuple[DelaunayResidue, List[SimpleFactor]]:
    with open(path) as f:
        return scenario_from_dict(json.load(f))
