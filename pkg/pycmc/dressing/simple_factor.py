import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from pycmc.exceptions import DegenerateError, PoleError
from pycmc.iwasawa.qr import qr_constant
from pycmc.loopcore.annulus import Annulus, circle_points
from pycmc.loopcore.functional import LoopFunction
from pycmc.loopcore.linalg import IDENTITY, dagger, op_norm
from pycmc.utils import complex_from_pair

# |λ − λ0| below which an evaluation counts as hitting the zero or the pole
POLE_DISTANCE = 1e-14


def _sqrt_cut(w, angle: float):
    """Square root with its branch cut along the ray arg w = angle."""
    turn = np.exp(1j * (angle - np.pi))
    return np.sqrt(np.asarray(w, dtype=complex) / turn) * np.sqrt(turn)


@dataclass(frozen=True)
class Blaschke:
    """Degree one Blaschke factor f = c(λ − λ0)/(λ − 1/λ̄0) with f(1) = 1.

    The square root f^{1/2} is cut along the circular arc from λ0 to 1/λ̄0
    on which arg q = π + arg q(1)/2, q = (λ − λ0)/(λ − 1/λ̄0). For real
    positive λ0 this arc is the half circle over the segment [λ0, 1/λ0], so
    that λ = 1 never lies on the cut; f^{1/2}(1) = 1.

    **Examples:**
        >>> f = Blaschke(0.5)
        >>> abs(f(1.0) - 1) < 1e-15
        True
    """

    lam0: complex

    def __post_init__(self):
        lam0 = complex(self.lam0)
        if lam0 == 0:
            raise DegenerateError("the Blaschke factor needs λ0 ≠ 0")
        if abs(abs(lam0) - 1) < 1e-12:
            raise DegenerateError(f"|λ0| = 1 is degenerate (λ0 = {lam0})")
        object.__setattr__(self, "lam0", lam0)

    @property
    def lam1(self) -> complex:
        return 1 / np.conj(self.lam0)

    @property
    def c(self) -> complex:
        return (1 - self.lam1) / (1 - self.lam0)

    @property
    def cut_angle(self) -> float:
        return np.pi + 0.5 * np.angle(self.q(1.0))

    def q(self, lam):
        lam = np.asarray(lam, dtype=complex)
        return (lam - self.lam0) / (lam - self.lam1)

    def _check(self, lam):
        lam = np.asarray(lam, dtype=complex)
        if np.any(np.abs(lam - self.lam0) < POLE_DISTANCE) or np.any(np.abs(lam - self.lam1) < POLE_DISTANCE):
            raise PoleError(f"simple factor evaluated at its singularity λ0 = {self.lam0}")
        return lam

    def __call__(self, lam):
        return self.c * self.q(self._check(lam))

    def sqrt(self, lam):
        """f^{1/2} on the fixed branch."""
        lam = self._check(lam)
        angle = self.cut_angle
        return _sqrt_cut(self.q(lam), angle) / _sqrt_cut(self.q(1.0), angle)

    def star(self, lam):
        """f*(λ) = conj(f(1/λ̄))."""
        lam = np.asarray(lam, dtype=complex)
        return np.conj(self(1 / np.conj(lam)))

    def star_residual(self, n: int = 64) -> float:
        lam = circle_points(1.0, n, offset=0.5)
        return float(np.max(np.abs(self.star(lam) * self(lam) - 1)))


def blaschke(lam0: complex) -> Blaschke:
    return Blaschke(lam0)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(2)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise DegenerateError("a line of CP¹ needs a nonzero vector")
    return v / norm


def perp(v) -> np.ndarray:
    """Unit vector spanning the orthogonal complement of [v]."""
    v = _unit(v)
    return np.array([-np.conj(v[1]), np.conj(v[0])])


def projector(line) -> np.ndarray:
    """Orthogonal projection π_L = vvᴴ/|v|² onto L = [v]."""
    v = _unit(line)
    return np.outer(v, np.conj(v))


def cp1_distance(l1, l2) -> float:
    """Chordal distance |v₁ ∧ v₂|/(|v₁||v₂|) between two points of CP¹."""
    v1, v2 = _unit(l1), _unit(l2)
    return float(abs(v1[0] * v2[1] - v1[1] * v2[0]))


@dataclass
class SimpleFactor:
    """Simple factor W·(f^{1/2}π_L + f^{−1/2}π_{L⊥}).

    Attributes:
        lam0: complex, zero of the Blaschke factor (pole at 1/λ̄0).
        line: unit 2-vector spanning L.
        W: 2×2 unitary prefactor.
        kind: "unnormalized", "normalized" or "general".
    """

    lam0: complex
    line: np.ndarray
    W: np.ndarray = field(default_factory=lambda: IDENTITY.copy())
    kind: str = "unnormalized"

    def __post_init__(self):
        assert self.kind in ("unnormalized", "normalized", "general"), f"unknown kind {self.kind}"
        self.lam0 = complex(self.lam0)
        self.line = _unit(self.line)
        self.W = np.asarray(self.W, dtype=complex)
        self.f = Blaschke(self.lam0)

    @classmethod
    def normalized(cls, lam0: complex, line) -> "SimpleFactor":
        """W = U⁻¹ where ψ(0) = U·T, so that the value at λ = 0 lies in 𝒯."""
        bare = cls(lam0, line)
        u, _ = qr_constant(bare.psi(0.0))
        return cls(lam0, line, dagger(u), kind="normalized")

    @property
    def pi(self) -> np.ndarray:
        return projector(self.line)

    @property
    def pi_perp(self) -> np.ndarray:
        return projector(perp(self.line))

    def __repr__(self):
        return f"SimpleFactor({self.kind}, λ0={self.lam0:.6g}, line={np.round(self.line, 6)})"

    def psi(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)
        s = self.f.sqrt(lam)[..., None, None]
        return s * self.pi + self.pi_perp / s

    def eval(self, lam) -> np.ndarray:
        return self.W @ self.psi(lam)

    def inverse(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)
        s = self.f.sqrt(lam)[..., None, None]
        return (self.pi / s + s * self.pi_perp) @ dagger(self.W)

    def norm_bound(self, lam) -> np.ndarray:
        """max(|f|^{1/2}, |f|^{−1/2}), the exact operator norm of the factor."""
        mod = np.abs(self.f(lam))
        return np.sqrt(np.maximum(mod, 1 / mod))

    def as_loop(self, radius: float = 1.0) -> LoopFunction:
        return LoopFunction(self.eval, Annulus.plane(), radius=radius, name=repr(self))

    def to_dict(self) -> Dict:
        return {
            "lam0": [self.lam0.real, self.lam0.imag],
            "line": [[z.real, z.imag] for z in self.line],
            "W": [[[z.real, z.imag] for z in row] for row in self.W],
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "SimpleFactor":
        lam0 = complex_from_pair(d["lam0"])
        line = np.array([complex_from_pair(p) for p in d["line"]])
        kind = d.get("kind", "normalized")
        if "W" not in d:
            return cls.normalized(lam0, line) if kind == "normalized" else cls(lam0, line, kind=kind)
        w = np.array([[complex(*p) for p in row] for row in d["W"]])
        return cls(lam0, line, w, kind=kind)


def simple_factor_eval(sf: SimpleFactor, lam) -> np.ndarray:
    return sf.eval(lam)


def sandwich(g: SimpleFactor, x, h: SimpleFactor, lam) -> np.ndarray:
    """g(λ)·X·h(λ)⁻¹ without square roots when g and h share λ0.

    ψ_L X ψ_{L'}⁻¹ = π X π' + f π X π'⊥ + f⁻¹ π⊥ X π' + π⊥ X π'⊥, so the
    product is single valued; for distinct λ0 the plain product is used.

    Args:
        g: SimpleFactor, left factor.
        x: array (..., 2, 2), values at λ.
        h: SimpleFactor, right factor (inverted).
        lam: array of λ matching ``x``.
    """
    lam = np.asarray(lam, dtype=complex)
    x = np.asarray(x, dtype=complex)
    if abs(g.lam0 - h.lam0) > 1e-14:
        return g.eval(lam) @ x @ h.inverse(lam)
    f = g.f(lam)[..., None, None]
    p, q = g.pi, g.pi_perp
    p2, q2 = h.pi, h.pi_perp
    inner = p @ x @ p2 + f * (p @ x @ q2) + (q @ x @ p2) / f + q @ x @ q2
    return g.W @ inner @ dagger(h.W)


def factor_product(factors, lam) -> np.ndarray:
    """g₁(λ)·g₂(λ)···, identity for an empty list."""
    lam = np.asarray(lam, dtype=complex)
    out = np.broadcast_to(IDENTITY, lam.shape + (2, 2)).copy()
    for g in factors:
        out = out @ g.eval(lam)
    return out


def unitarity_residual(func, lam) -> float:
    """sup ‖F(1/λ̄)ᴴF(λ) − id‖ over the given λ."""
    lam = np.asarray(lam, dtype=complex)
    vals = func(lam)
    refl = func(1 / np.conj(lam))
    res = float(np.max(op_norm(dagger(refl) @ vals - IDENTITY)))
    logging.debug(f"unitarity residual {res:.3e} on {lam.size} samples")
    return res
