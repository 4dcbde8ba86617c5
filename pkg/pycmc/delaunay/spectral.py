import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from pycmc.delaunay.residue import DelaunayResidue
from pycmc.loopcore.annulus import Annulus

# cap on the half-integer order k when the region reaches down to λ = 0
MAX_RESONANCE_ORDER = 16


@dataclass
class ResonancePoint:
    """A point λ of 𝒮_A with μ(λ) = k/2."""

    lam: complex
    k: int
    double: bool = False

    @property
    def mu(self) -> float:
        return 0.5 * self.k


@dataclass
class SpectralData:
    """Zeros of det A and the sets built on the ray through them.

    Attributes:
        nu1: complex, zero of det A with |ν₁| <= 1.
        nu2: complex, zero with |ν₂| >= 1 (ν₂ = 1/conj(ν₁)).
        p: complex, unit point where the segment [ν₁, ν₂] meets S¹.
        alpha: complex, −p.
        vacuum: bool, ν₁ = ν₂.
        resonance_points: List[ResonancePoint] in the queried region.
        region: Optional[Annulus], the queried region.
    """

    nu1: complex
    nu2: complex
    p: complex
    alpha: complex
    vacuum: bool
    resonance_points: List[ResonancePoint] = field(default_factory=list)
    region: Optional[Annulus] = None

    @property
    def J_A(self) -> Dict:
        """The radial segment [ν₁, ν₂] (singular set of the third kind integral)."""
        return {"direction": self.p, "t_min": abs(self.nu1), "t_max": abs(self.nu2)}

    @property
    def K_A(self) -> Dict:
        """[0, ν₁] ∪ [ν₂, ∞) on the ray through p."""
        return {"direction": self.p, "segments": [(0.0, abs(self.nu1)), (abs(self.nu2), np.inf)]}

    def distance_to_J(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)
        t = np.real(lam * np.conj(self.p))
        t = np.clip(t, abs(self.nu1), abs(self.nu2))
        return np.abs(lam - t * self.p)

    def on_K(self, lam, tol: float = 1e-12) -> np.ndarray:
        """Whether λ lies on 𝒦_A (within ``tol``)."""
        lam = np.asarray(lam, dtype=complex)
        along = lam * np.conj(self.p)
        on_ray = (np.abs(along.imag) <= tol * np.maximum(1.0, np.abs(lam))) & (along.real >= -tol)
        t = along.real
        outside = (t <= abs(self.nu1) + tol) | (t >= abs(self.nu2) - tol)
        return on_ray & outside

    def on_J(self, lam, tol: float = 1e-12) -> np.ndarray:
        return self.distance_to_J(lam) <= tol

    @property
    def resonance_lambdas(self) -> np.ndarray:
        return np.array([pt.lam for pt in self.resonance_points], dtype=complex)

    def to_dict(self) -> Dict:
        return {
            "nu1": self.nu1,
            "nu2": self.nu2,
            "p": self.p,
            "alpha": self.alpha,
            "vacuum": self.vacuum,
            "resonance_points": [
                {"lam": pt.lam, "k": pt.k, "double": pt.double} for pt in self.resonance_points
            ],
        }

    def stat(self):
        print("Spectral data:")
        print(f"\t- nu1, nu2: {self.nu1:.6g}, {self.nu2:.6g}")
        print(f"\t- p: {self.p:.6g}")
        print(f"\t- resonance points: {len(self.resonance_points)}")


def zeros_of_det(res: DelaunayResidue):
    """(ν₁, ν₂): roots of āb̄λ² + Sλ + ab, |ν₁| <= |ν₂|.

    Both roots lie on the ray through p = −ab/|ab| at distances t, 1/t with
    t + 1/t = S/|ab|.
    """
    s, m = res.S, abs(res.ab)
    p = -res.ab / m
    disc = max(s * s - 4 * m * m, 0.0)
    t = 2 * m / (s + np.sqrt(disc))
    return t * p, p / t


def _polish(coef2: complex, coef1: complex, coef0: complex, lam: complex, steps: int = 3) -> complex:
    for _ in range(steps):
        f = coef2 * lam * lam + coef1 * lam + coef0
        df = 2 * coef2 * lam + coef1
        if df == 0:
            break
        lam = lam - f / df
    return lam


def resonance_points(
    res: DelaunayResidue,
    region: Annulus,
    tol: float = 1e-9,
    max_order: int = MAX_RESONANCE_ORDER,
) -> List[ResonancePoint]:
    """Points of 𝒮_A = {λ : μ(λ) ∈ ½ℤ*} in a region.

    μ = k/2 is the quadratic āb̄λ² + (S − k²/4)λ + ab = 0; the roots are
    polished by Newton steps and kept when μ at the root matches k/2.
    Orders are scanned until the small root leaves the region.
    """
    coef2 = np.conj(res.ab)
    points = []
    for k in range(1, max_order + 1):
        coef1 = res.S - 0.25 * k * k
        roots = np.roots([coef2, coef1, res.ab])
        disc = coef1 * coef1 - 4 * abs(res.ab) ** 2
        double = bool(abs(disc) <= 1e-12 * max(1.0, coef1 * coef1))
        roots = [_polish(coef2, coef1, res.ab, complex(z)) for z in roots]
        if double:
            roots = [0.5 * (roots[0] + roots[1])]
        for lam in roots:
            if not region.contains(lam, slack=1e-12):
                continue
            if abs(res.mu(lam) - 0.5 * k) > tol * max(1.0, k):
                continue
            points.append(ResonancePoint(complex(lam), k, double))
        small = min(abs(z) for z in roots)
        if disc > 0 and small < region.inner:
            break
    points.sort(key=lambda pt: (-abs(pt.lam), pt.k))
    logging.debug(f"resonance_points: {len(points)} points in {region}")
    return points


def spectral_data(res: DelaunayResidue, region: Optional[Annulus] = None) -> SpectralData:
    """ν₁, ν₂, p, α and the resonance points of a residue in a region.

    Args:
        res: DelaunayResidue.
        region: Optional[Annulus], where to collect resonance points. Default
            is the closed unit disk minus the origin (𝒟₁).

    Returns:
        data: SpectralData.
    """
    if region is None:
        region = Annulus.disk(1.0)
    nu1, nu2 = zeros_of_det(res)
    p = -res.ab / abs(res.ab)
    return SpectralData(
        nu1=complex(nu1),
        nu2=complex(nu2),
        p=complex(p),
        alpha=complex(-p),
        vacuum=res.is_vacuum,
        resonance_points=resonance_points(res, region),
        region=region,
    )
