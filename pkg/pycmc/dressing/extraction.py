import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg

from pycmc.config import DEFAULT_TOLERANCES, Tolerances
from pycmc.delaunay.residue import DelaunayResidue, exp_xy
from pycmc.delaunay.spectral import spectral_data
from pycmc.dressing.dress import POLE_THRESHOLD
from pycmc.dressing.simple_factor import SimpleFactor, factor_product, perp
from pycmc.exceptions import DegenerateError, ExtractionError
from pycmc.iwasawa.qr import rq_constant
from pycmc.loopcore.annulus import Annulus, circle_points
from pycmc.loopcore.functional import LoopFunction, evaluate
from pycmc.loopcore.linalg import IDENTITY, contour_coefficient, dagger, inv2, op_norm
from pycmc.loopcore.matrix_loop import MatrixLoop

# ‖M₁(λ0) − ι·id‖ at or below this means M₁(λ0) is semisimple
SEMISIMPLE_TOL = 1e-6


@dataclass
class ExtractionResult:
    """C₊ = g₁···g_k·V with normalized simple factors g_i.

    Attributes:
        factors: List[SimpleFactor], in the order they multiply C₊ from the left.
        V: LoopFunction, remainder with V·A·V⁻¹ a Delaunay residue.
        residue: DelaunayResidue parsed from V·A·V⁻¹.
        structure_residual: float, size of what does not fit the Delaunay form.
        reconstruction_residual: float, sup ‖g₁···g_k V − C₊‖/‖C₊‖ on C_r.
        monodromy_unitarity: float, sup ‖M₁*M₁ − id‖ on S¹ of M₁ = C₊MC₊⁻¹.
    """

    factors: List[SimpleFactor]
    V: LoopFunction
    residue: DelaunayResidue
    structure_residual: float
    reconstruction_residual: float
    monodromy_unitarity: float
    poles: List[complex] = field(default_factory=list)

    def __iter__(self):
        yield self.factors
        yield self.V

    def stat(self):
        print("Statistics of simple factor extraction:")
        print(f"\t- Number of factors: {len(self.factors)}")
        print(f"\t- Poles: {[f'{p:.6g}' for p in self.poles]}")
        print(f"\t- Structure residual of V·A·V⁻¹: {self.structure_residual:.3e}")
        print(f"\t- Reconstruction residual: {self.reconstruction_residual:.3e}")


def _monodromy(res: DelaunayResidue, lam) -> np.ndarray:
    """exp(2πiA) = x·id + i·y·A."""
    x, y = exp_xy(res, lam)
    return x[..., None, None] * IDENTITY + 1j * y[..., None, None] * res.matrix(lam)


def _conjugated(c, mat):
    def func(lam):
        lam = np.asarray(lam, dtype=complex)
        cv = c(lam)
        return cv @ mat(lam) @ inv2(cv)

    return func


def _contour_radius(lam0: complex, others: List[complex]) -> float:
    gaps = [abs(lam0), 1 - abs(lam0)] + [abs(lam0 - q) for q in others if q != lam0]
    return 0.3 * min(gaps)


def extract_simple_factors(
    C_plus,
    res: DelaunayResidue,
    r: Optional[float] = None,
    max_iter: Optional[int] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> ExtractionResult:
    """Peels normalized simple factors off a positive loop C₊.

    At a pole λ0 of A₁ = C₊AC₊⁻¹ the monodromy M₁ = C₊MC₊⁻¹ takes the value
    ι·id + nilpotent with ι = cos 2πμ(λ0) = ±1; its eigenvector v spans the
    kernel of the residue and the factor with line [v]⊥ (normalized at
    λ = 0) removes the pole.

    Args:
        C_plus: loop-like, positive normalized; must be evaluable on 𝒟₁ away
            from the resonance points (a LoopFunction built from factors, or
            a Laurent polynomial).
        res: DelaunayResidue.
        r: Optional[float], radius of C_r; default ``C_plus.radius``.
        max_iter: Optional[int], default twice the number of candidates plus 2.
        tol: Tolerances.

    Returns:
        ExtractionResult, unpacks as (G, V).

    Raises:
        DegenerateError: if M₁(λ0) ≈ ι·id at a pole.
        ExtractionError: if a pole survives ``max_iter`` peelings.
    """
    r = float(getattr(C_plus, "radius", 1.0)) if r is None else float(r)
    candidates = [
        p
        for p in spectral_data(res, Annulus(r, 1.0)).resonance_points
        if abs(abs(p.lam) - 1) > 1e-9 and abs(p.lam) > r * (1 + 1e-9)
    ]
    lams = [p.lam for p in candidates]
    max_iter = 2 * len(candidates) + 2 if max_iter is None else max_iter
    a_func = res.matrix
    m_func = lambda lam: _monodromy(res, lam)  # noqa: E731
    c0 = lambda lam: evaluate(C_plus, lam)  # noqa: E731

    s1 = circle_points(1.0, 64, offset=0.5)
    m1 = _conjugated(c0, m_func)(s1)
    unitarity = float(np.max(op_norm(dagger(m1) @ m1 - IDENTITY)))
    if unitarity > 1e-8:
        logging.warning(f"extract_simple_factors: C₊MC₊⁻¹ is not unitary on S¹ ({unitarity:.3e})")

    current = c0
    factors, poles = [], []
    for it in range(max_iter + 1):
        found = None
        for p in candidates:
            rho = _contour_radius(p.lam, lams)
            a1 = _conjugated(current, a_func)
            residue = contour_coefficient(a1, p.lam, rho, k=-1)
            value = contour_coefficient(a1, p.lam, rho, k=0)
            if op_norm(residue) > POLE_THRESHOLD * max(1.0, op_norm(value)):
                found = (p, rho)
                break
        if found is None:
            break
        if it == max_iter:
            raise ExtractionError(f"pole at λ = {found[0].lam:.6g} survives {max_iter} peelings")
        p, rho = found
        iota = (-1.0) ** p.k
        m_at = contour_coefficient(_conjugated(current, m_func), p.lam, rho, k=0)
        if op_norm(m_at - iota * IDENTITY) <= SEMISIMPLE_TOL:
            raise DegenerateError(f"M₁ is semisimple at λ0 = {p.lam:.6g}, the eigenline is not determined")
        _, z = scipy.linalg.schur(m_at, output="complex")
        l0 = perp(z[:, 0])
        _, u = rq_constant(SimpleFactor(p.lam, l0).psi(0.0))
        g = SimpleFactor.normalized(p.lam, u @ l0)
        current = (lambda prev, g: lambda lam: g.inverse(lam) @ prev(lam))(current, g)
        factors.append(g)
        poles.append(p.lam)
        logging.info(f"extract_simple_factors: peeled {g!r} (k = {p.k})")

    # V·A·V⁻¹ is holomorphic on 𝒜_{r,1} after peeling; coefficients are read on S¹
    conj_vals = _conjugated(current, a_func)(circle_points(1.0, tol.samples))
    residue, structure = DelaunayResidue.from_loop(MatrixLoop.from_samples(conj_vals, radius=1.0))
    lam = circle_points(r, 64, offset=0.5)
    original = c0(lam)
    rebuilt = factor_product(factors, lam) @ current(lam)
    recon = float(np.max(op_norm(rebuilt - original) / op_norm(original)))
    v_loop = LoopFunction(current, Annulus.disk(1.0), radius=r, tag="positive", name="V")
    return ExtractionResult(factors, v_loop, residue, structure, recon, unitarity, poles)
