from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Annulus:
    """Annulus 𝒜_{s,r} = {λ : s < |λ| < r} in the spectral plane.

    ``inner = 0`` describes the disk 𝒟_r and ``outer = inf`` the exterior of a
    circle. Membership tests use a relative slack so that points sampled on
    the boundary circles count as inside (loops are analytic on a slightly
    larger annulus).

    Attributes:
        inner: float, inner radius s >= 0.
        outer: float, outer radius r > s (may be ``np.inf``).
    """

    inner: float
    outer: float

    def __post_init__(self):
        assert self.inner >= 0, f"inner radius must be non-negative, got {self.inner}"
        assert self.inner < self.outer, (
            f"inner radius {self.inner} must be smaller than outer radius {self.outer}"
        )

    @classmethod
    def disk(cls, r: float) -> "Annulus":
        return cls(0.0, r)

    @classmethod
    def symmetric(cls, r: float) -> "Annulus":
        """𝒜_{r,1/r}, the domain of r-unitary loops (r < 1)."""
        assert 0 < r <= 1, f"radius must lie in (0, 1], got {r}"
        if r == 1:
            return cls(1.0 - 1e-12, 1.0 + 1e-12)
        return cls(r, 1.0 / r)

    @classmethod
    def plane(cls) -> "Annulus":
        """ℂ* (Laurent polynomials)."""
        return cls(0.0, np.inf)

    @property
    def is_disk(self) -> bool:
        return self.inner == 0

    def contains(self, lam, slack: float = 1e-9):
        mod = np.abs(lam)
        lo = self.inner * (1 - slack)
        hi = self.outer * (1 + slack)
        return (mod >= lo) & (mod <= hi)

    def inverted(self) -> "Annulus":
        """Image under λ ↦ 1/conj(λ)."""
        inner = 0.0 if np.isinf(self.outer) else 1.0 / self.outer
        outer = np.inf if self.inner == 0 else 1.0 / self.inner
        return Annulus(inner, outer)

    def intersect(self, other: "Annulus") -> "Annulus":
        return Annulus(max(self.inner, other.inner), min(self.outer, other.outer))

    def samples(self, n_radial: int = 5, n_angular: int = 64) -> np.ndarray:
        """Grid of λ-samples covering the closed annulus (flattened).

        For a disk the radial grid starts at ``outer / n_radial`` and the
        centre is added as a single point.
        """
        if self.is_disk:
            radii = np.linspace(self.outer / n_radial, self.outer, n_radial)
        else:
            outer = self.outer if np.isfinite(self.outer) else 1.0 / self.inner
            radii = np.geomspace(self.inner, outer, n_radial)
        pts = (radii[:, None] * np.exp(2j * np.pi * np.arange(n_angular) / n_angular)[None, :])
        pts = pts.ravel()
        if self.is_disk:
            pts = np.concatenate([[0.0 + 0.0j], pts])
        return pts

    def __repr__(self):
        return f"Annulus({self.inner:g} < |λ| < {self.outer:g})"


def circle_points(radius: float, m: int, offset: float = 0.0) -> np.ndarray:
    """The m points radius·exp(2πi(j + offset)/m), j = 0..m−1."""
    return radius * np.exp(2j * np.pi * (np.arange(m) + offset) / m)
