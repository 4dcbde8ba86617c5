from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from pycmc.exceptions import InvalidResidueError, PoleError
from pycmc.loopcore.linalg import sinhc, sqrt_principal
from pycmc.loopcore.matrix_loop import MatrixLoop


@dataclass(frozen=True)
class DelaunayResidue:
    """Delaunay residue A(λ) = [[c, aλ⁻¹ + b̄], [b + āλ, −c]].

    A is traceless, satisfies A* = A and has a simple pole at λ = 0 in the
    upper-right entry only. Its eigenvalue with non-negative real part is μ.

    Attributes:
        a: complex, nonzero.
        b: complex, nonzero.
        c: float.

    **Examples:**
        >>> res = DelaunayResidue(0.25, 0.25)
        >>> res.is_vacuum
        True
    """

    a: complex
    b: complex
    c: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))
        if np.imag(self.c) != 0:
            raise InvalidResidueError(f"c must be real, got {self.c}")
        object.__setattr__(self, "c", float(np.real(self.c)))
        if self.a == 0 or self.b == 0:
            raise InvalidResidueError(f"a and b must be nonzero, got a={self.a}, b={self.b}")

    @property
    def S(self) -> float:
        """|a|² + |b|² + c²."""
        return abs(self.a) ** 2 + abs(self.b) ** 2 + self.c**2

    @property
    def ab(self) -> complex:
        return self.a * self.b

    @property
    def is_vacuum(self) -> bool:
        return bool(np.isclose(abs(self.a), abs(self.b), rtol=0, atol=1e-14) and self.c == 0)

    @property
    def alpha(self) -> complex:
        """ab/|ab|, the unit point opposite to where 𝒥_A meets S¹."""
        return self.ab / abs(self.ab)

    def matrix(self, lam):
        """A(λ), vectorized over λ.

        Raises:
            PoleError: at λ = 0.
        """
        lam = np.asarray(lam, dtype=complex)
        if np.any(lam == 0):
            raise PoleError("the Delaunay residue has a pole at λ = 0")
        out = np.empty(lam.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = self.c
        out[..., 1, 1] = -self.c
        out[..., 0, 1] = self.a / lam + np.conj(self.b)
        out[..., 1, 0] = self.b + np.conj(self.a) * lam
        return out

    def mu_squared(self, lam):
        """μ² = −det A = S + ab/λ + āb̄λ."""
        lam = np.asarray(lam, dtype=complex)
        return self.S + self.ab / lam + np.conj(self.ab) * lam

    def mu(self, lam):
        """Eigenvalue of A(λ) with Re μ >= 0 (Im μ >= 0 on ties)."""
        return sqrt_principal(self.mu_squared(lam))

    def loop(self, radius: float = 1.0) -> MatrixLoop:
        coeffs = np.zeros((3, 2, 2), dtype=complex)
        coeffs[0, 0, 1] = self.a
        coeffs[1] = [[self.c, np.conj(self.b)], [self.b, -self.c]]
        coeffs[2, 1, 0] = np.conj(self.a)
        return MatrixLoop(coeffs, -1, radius=radius, tag="hermitian")

    @classmethod
    def from_loop(cls, loop: MatrixLoop) -> Tuple["DelaunayResidue", float]:
        """Parses a loop back into (a, b, c).

        Returns:
            (res, residual): the residue and the structure residual, i.e. the
            size of everything that does not fit the Delaunay form
            (coefficients outside −1..1, wrong entries, hermitian mismatch).
        """
        x_m1, x_0, x_1 = (loop.coefficient(k) for k in (-1, 0, 1))
        a = x_m1[0, 1]
        b = 0.5 * (x_0[1, 0] + np.conj(x_0[0, 1]))
        c = 0.5 * (x_0[0, 0] - x_0[1, 1])
        pieces = [
            abs(x_m1[0, 0]),
            abs(x_m1[1, 0]),
            abs(x_m1[1, 1]),
            abs(x_1[0, 0]),
            abs(x_1[0, 1]),
            abs(x_1[1, 1]),
            abs(x_1[1, 0] - np.conj(a)),
            abs(x_0[1, 0] - np.conj(x_0[0, 1])),
            abs(x_0[0, 0] + x_0[1, 1]),
            abs(np.imag(c)),
        ]
        ks = loop.indices
        outside = (ks < -1) | (ks > 1)
        if np.any(outside):
            pieces.append(float(np.abs(loop.coeffs[outside]).max()))
        residual = float(max(pieces))
        if abs(a) == 0 or abs(b) == 0:
            raise InvalidResidueError("loop does not parse as a Delaunay residue (a or b vanishes)")
        return cls(a, b, float(np.real(c))), residual

    def to_dict(self) -> Dict:
        return {
            "a_re": self.a.real,
            "a_im": self.a.imag,
            "b_re": self.b.real,
            "b_im": self.b.imag,
            "c": self.c,
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "DelaunayResidue":
        return cls(
            complex(d["a_re"], d.get("a_im", 0.0)),
            complex(d["b_re"], d.get("b_im", 0.0)),
            d.get("c", 0.0),
        )


def residue_matrix(res: DelaunayResidue, lam):
    return res.matrix(lam)


def mu(res: DelaunayResidue, lam):
    return res.mu(lam)


def exp_xy(res: DelaunayResidue, lam):
    """(x, y) = (cos 2πμ, sin(2πμ)/μ), so that exp(2πiA) = x·id + i·y·A."""
    m = res.mu(lam)
    return np.cos(2 * np.pi * m), 2 * np.pi * sinhc(2j * np.pi * m)
