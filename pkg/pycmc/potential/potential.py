import logging
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from pycmc.config import DEFAULT_TOLERANCES, Tolerances
from pycmc.delaunay.residue import DelaunayResidue
from pycmc.exceptions import DomainError
from pycmc.loopcore.annulus import circle_points
from pycmc.loopcore.matrix_loop import MatrixLoop


class Potential:
    """Perturbed Delaunay potential ξ = A dz/z + Σ_{k>=0} ξ_k z^k dz.

    Each ξ_k is a loop in λ with at most a simple pole at λ = 0, sitting in
    the upper-right entry only. All z-recursions work on λ-samples: the
    potential is turned into a z-series per λ-sample by ``z_series``.

    Args:
        residue: DelaunayResidue, the dz/z coefficient.
        terms: mapping or iterable of (k, MatrixLoop) pairs.
        z_radius: float, radius of the z-disk the potential lives on.
        radius: float, λ-radius r of the sampling circle C_r.

    **Examples:**
        >>> from pycmc.delaunay import DelaunayResidue
        >>> xi = Potential(DelaunayResidue(0.3, 0.1))
        >>> xi.order is None
        True
    """

    def __init__(
        self,
        residue: DelaunayResidue,
        terms=None,
        z_radius: float = 1.0,
        radius: float = 1.0,
    ):
        assert z_radius > 0, f"z_radius must be positive, got {z_radius}"
        self.residue = residue
        items = terms.items() if isinstance(terms, dict) else (terms or [])
        self.terms: Dict[int, MatrixLoop] = {}
        for k, loop in items:
            k = int(k)
            assert k >= 0, f"z-power of a potential term must be >= 0, got {k}"
            if not isinstance(loop, MatrixLoop):
                loop = MatrixLoop.constant(loop, radius=radius)
            if k in self.terms:
                loop = self.terms[k] + loop
            self.terms[k] = loop
        self.z_radius = float(z_radius)
        self.radius = float(radius)

    def __repr__(self):
        return (
            f"Potential(a={self.residue.a:.4g}, b={self.residue.b:.4g}, c={self.residue.c:.4g}, "
            f"terms={sorted(self.terms)}, z_radius={self.z_radius:g})"
        )

    @property
    def order(self) -> Optional[int]:
        """Smallest k with a nonzero z^k dz term; None for the pure residue."""
        ks = [k for k, loop in self.terms.items() if np.any(np.abs(loop.coeffs) > 0)]
        return min(ks) if ks else None

    @property
    def degree(self) -> int:
        return max(self.terms) if self.terms else -1

    def coefficient(self, k: int) -> MatrixLoop:
        if k in self.terms:
            return self.terms[k]
        return MatrixLoop.constant(np.zeros((2, 2)), radius=self.radius)

    def lam_samples(self, m: Optional[int] = None, tol: Tolerances = DEFAULT_TOLERANCES):
        return circle_points(self.radius, m or tol.samples)

    def matrix(self, z: complex, lam) -> np.ndarray:
        """ξ(z, λ), the dz-coefficient, vectorized over λ."""
        if z == 0:
            raise DomainError("the potential has a pole at z = 0")
        lam = np.asarray(lam, dtype=complex)
        out = self.residue.matrix(lam) / z
        for k, loop in self.terms.items():
            out = out + loop.eval(lam) * z**k
        return out

    def z_series(self, lam, order: int) -> np.ndarray:
        """Coefficients of zξ as a z-series over λ-samples.

        Returns:
            e: array (order, len(λ), 2, 2) with e[0] = A(λ) and
            e[k + 1] = ξ_k(λ).
        """
        lam = np.atleast_1d(np.asarray(lam, dtype=complex)).reshape(-1)
        e = np.zeros((order, lam.size, 2, 2), dtype=complex)
        e[0] = self.residue.matrix(lam)
        for k, loop in self.terms.items():
            if k + 1 < order:
                e[k + 1] = loop.eval(lam)
            elif np.any(np.abs(loop.coeffs) > 0):
                logging.debug(f"Potential.z_series: term z^{k} beyond order {order} dropped")
        return e

    def term_samples(self, lam) -> Tuple[np.ndarray, np.ndarray]:
        """(A(λ), stacked ξ_k(λ) for k = 0..degree) for fast evaluation."""
        lam = np.atleast_1d(np.asarray(lam, dtype=complex)).reshape(-1)
        e = self.z_series(lam, self.degree + 2)
        return e[0], e[1:]

    @classmethod
    def from_series(
        cls,
        residue: DelaunayResidue,
        e: np.ndarray,
        radius: float,
        z_radius: float = 1.0,
        rtol: float = 1e-14,
    ) -> "Potential":
        """Inverse of ``z_series``: e[k + 1] sampled at C_r gives ξ_k."""
        scale = max(1.0, float(np.abs(e[0]).max()))
        terms = []
        for k in range(1, len(e)):
            if np.abs(e[k]).max() <= rtol * scale:
                continue
            terms.append((k - 1, MatrixLoop.from_samples(e[k], radius=radius)))
        return cls(residue, terms, z_radius=z_radius, radius=radius)

    @classmethod
    def from_config(
        cls,
        residue: DelaunayResidue,
        perturbation: Iterable[Dict],
        radius: float = 1.0,
        z_radius: float = 1.0,
    ) -> "Potential":
        """Builds ξ from config items {k, lambda_power, matrix}."""
        terms: List[Tuple[int, MatrixLoop]] = []
        for item in perturbation:
            m = np.array(
                [[complex(*entry) if isinstance(entry, (list, tuple)) else complex(entry) for entry in row]
                 for row in item["matrix"]],
                dtype=complex,
            )
            loop = MatrixLoop.monomial(int(item.get("lambda_power", 0)), m, radius=radius)
            terms.append((int(item["k"]), loop))
        return cls(residue, terms, z_radius=z_radius, radius=radius)

    def validate(self, tol: Tolerances = DEFAULT_TOLERANCES) -> Dict:
        """Pole structure and trace of every term.

        Returns:
            report: Dict with pole_violation, trace_max and passed.
        """
        pole, trace = 0.0, 0.0
        for loop in self.terms.values():
            for k, c in zip(loop.indices, loop.coeffs):
                if k < -1:
                    pole = max(pole, float(np.abs(c).max()))
                elif k == -1:
                    pole = max(pole, abs(c[0, 0]), abs(c[1, 0]), abs(c[1, 1]))
                trace = max(trace, abs(c[0, 0] + c[1, 1]))
        return {
            "pole_violation": float(pole),
            "trace_max": float(trace),
            "passed": bool(pole < tol.equality and trace < tol.equality),
        }

    def to_dict(self) -> Dict:
        return {
            "a": [self.residue.a.real, self.residue.a.imag],
            "b": [self.residue.b.real, self.residue.b.imag],
            "c": self.residue.c,
            "terms": [[k, self.terms[k].to_dict()] for k in sorted(self.terms)],
            "z_radius": self.z_radius,
            "radius": self.radius,
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "Potential":
        res = DelaunayResidue(complex(*d["a"]), complex(*d["b"]), d.get("c", 0.0))
        terms = [(k, MatrixLoop.from_dict(loop)) for k, loop in d.get("terms", [])]
        return cls(res, terms, z_radius=d.get("z_radius", 1.0), radius=d.get("radius", 1.0))
