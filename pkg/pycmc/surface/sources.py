"""Frame sources for meshes.

A source turns a mesh column (fixed x, many y) into the unitary frame on a
λ-stencil around the Sym point, the constant term B₁₁(0) of the positive
factor and the coefficient α of the potential in the coordinate w = x + iy.
"""

import logging
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from pycmc.config import DEFAULT_TOLERANCES, Tolerances
from pycmc.delaunay.frame import DelaunayFrame
from pycmc.delaunay.residue import DelaunayResidue, exp_xy
from pycmc.dressing.dress import DressedFrame
from pycmc.dressing.simple_factor import SimpleFactor
from pycmc.iwasawa.factorization import iwasawa
from pycmc.loopcore.annulus import circle_points
from pycmc.loopcore.linalg import IDENTITY, expm_traceless, op_norm
from pycmc.loopcore.matrix_loop import MatrixLoop
from pycmc.potential.ode import HolomorphicFrame, closing_check, frame_monodromy, monodromy_function
from pycmc.potential.potential import Potential
from pycmc.potential.zap import zap
from pycmc.surface.sym import STENCIL_STEP, stencil

# radius and size of the circle whose mean gives B₁₁(0)
RHO_RADIUS = 0.25
RHO_SAMPLES = 32
CLOSING_TOL = 1e-8
CLOSING_DERIVATIVE_TOL = 1e-6


def _rho_from_circle(b_values: np.ndarray) -> np.ndarray:
    return np.mean(b_values[..., 0, 0], axis=-1).real


def delaunay_closes(res: DelaunayResidue, lam_sym: complex = 1.0) -> bool:
    """exp(2πiA) = ±id at λ_sym with vanishing θ-derivative there."""
    lam = stencil(lam_sym)
    x, y = exp_xy(res, lam)
    m = x[:, None, None] * IDENTITY + 1j * y[:, None, None] * res.matrix(lam)
    value = min(float(op_norm(m[0] - s * IDENTITY)) for s in (1.0, -1.0))
    deriv = float(op_norm((m[1] - 8 * m[2] + 8 * m[3] - m[4]) / (12 * STENCIL_STEP)))
    return bool(value < CLOSING_TOL and deriv < CLOSING_DERIVATIVE_TOL)


def _normal_form(xi: Potential, z_b: complex, tol: Tolerances) -> Callable:
    """λ ↦ z_b^A·P(z_b); P = id when ξ has no perturbation."""
    if not xi.terms:
        log_z = complex(np.log(abs(z_b)), np.angle(z_b))
        return lambda lam: expm_traceless(log_z * xi.residue.matrix(np.atleast_1d(lam)))
    dec = zap(xi, tol=tol)
    return lambda lam: dec.normal_form_at(z_b, lam)


class DelaunaySource:
    """Delaunay frames exp((x + iy)A) = F·B at r = 1.

    Args:
        res: DelaunayResidue.
        route: str, "ode" (any depth) or "closed" (explicit formulas).
        tol: Tolerances.
    """

    name = "delaunay"

    def __init__(self, res: DelaunayResidue, route: str = "ode", tol: Tolerances = DEFAULT_TOLERANCES):
        self.res = res
        self.frame = DelaunayFrame(res, route=route, tol=tol)

    def __repr__(self):
        return f"DelaunaySource({self.res}, route={self.frame.route})"

    @property
    def period(self) -> float:
        return self.frame.rho

    def closed(self, lam_sym: complex = 1.0) -> bool:
        return delaunay_closes(self.res, lam_sym)

    def column(self, x: float, ys, lam) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(F on the stencil (ny, n, 2, 2), B₁₁(0) (ny,), α (ny,))."""
        ys = np.asarray(ys, dtype=float)
        lam = np.asarray(lam, dtype=complex)
        circle = circle_points(RHO_RADIUS, RHO_SAMPLES)
        f, b = self.frame.factors_grid([x], np.concatenate([lam, circle]))
        f0 = f[0, : lam.size]
        rho = _rho_from_circle(b[0, lam.size :])
        frames = np.stack([self.frame.y_shift(y, lam) @ f0 for y in ys])
        return frames, np.full(ys.shape, rho), np.full(ys.shape, self.res.a, dtype=complex)


class PotentialSource:
    """Frames of a perturbed potential: ODE continuation, then r-Iwasawa.

    By default the holomorphic frame starts from z_b^A·P(z_b) at the
    basepoint z_b, with P the z-series of ``zap``, so that Φ = z^A·P has the
    monodromy exp(2πiA) and reduces to the Delaunay frame exp(A log z) when
    ξ is unperturbed.

    Args:
        xi: Potential.
        initial: Optional array (n, 2, 2) on the λ-samples, or a callable
            λ ↦ Φ(z_b); frame at the basepoint.
        basepoint: Optional[complex].
        tol: Tolerances.
    """

    name = "potential"

    def __init__(
        self,
        xi: Potential,
        initial: Optional[Union[np.ndarray, Callable]] = None,
        basepoint: Optional[complex] = None,
        tol: Tolerances = DEFAULT_TOLERANCES,
    ):
        self.xi = xi
        self.tol = tol
        lam = xi.lam_samples(tol=tol)
        z_b = complex(0.5 * xi.z_radius if basepoint is None else basepoint)
        if initial is None:
            initial = _normal_form(xi, z_b, tol)
        # λ ↦ Φ(z_b) when known away from the samples
        self.initial_at = initial if callable(initial) else None
        if callable(initial):
            initial = initial(lam)
        self.holomorphic = HolomorphicFrame(xi, lam=lam, basepoint=z_b, initial=initial, tol=tol)
        self._closing: Dict[complex, Dict] = {}

    def __repr__(self):
        return f"PotentialSource({self.xi!r})"

    def alpha(self, z: complex) -> complex:
        """λ⁻¹-coefficient of the upper-right entry of z·ξ(z)."""
        out = complex(self.xi.residue.a)
        for k, loop in self.xi.terms.items():
            out += complex(loop.coefficient(-1)[0, 1]) * z ** (k + 1)
        return out

    def monodromy(self):
        """Monodromy of the holomorphic frame as a LoopFunction.

        Without ``initial_at`` only the basepoint-normalized monodromy is
        available; it closes exactly when the frame's monodromy does.
        """
        basepoint = self.holomorphic.basepoint
        if self.initial_at is None:
            return monodromy_function(self.xi, basepoint, self.tol)
        return frame_monodromy(self.xi, self.initial_at, basepoint, self.tol)

    def closing_report(self, lam_sym: complex = 1.0) -> Dict:
        """``closing_check`` of the frame's monodromy at λ_sym, cached."""
        key = complex(lam_sym)
        if key not in self._closing:
            self._closing[key] = closing_check(self.monodromy(), lam_sym=lam_sym, radius=self.xi.radius, tol=self.tol)
        return self._closing[key]

    def closed(self, lam_sym: complex = 1.0) -> bool:
        return bool(self.closing_report(lam_sym)["closed"])

    def frame_at(self, x: float, y: float):
        """Iwasawa pair of Φ(e^{x+iy}) on C_r, on the sheet containing y."""
        z = np.exp(complex(x, y))
        winding = int(np.floor((y + np.pi) / (2 * np.pi)))
        phi = self.holomorphic.at(z, winding)
        return iwasawa(MatrixLoop.from_samples(phi, radius=self.xi.radius), self.xi.radius, self.tol)

    def column(self, x: float, ys, lam) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        frames, rhos, alphas = [], [], []
        for y in np.asarray(ys, dtype=float):
            pair = self.frame_at(x, y)
            frames.append(pair.unitary.eval(lam))
            rhos.append(float(pair.positive.coefficient(0)[0, 0].real))
            alphas.append(self.alpha(np.exp(complex(x, y))))
        return np.stack(frames), np.array(rhos), np.array(alphas)


class DressedSource:
    """Delaunay frames dressed by a list of simple factors (bubbletons).

    Args:
        res: DelaunayResidue.
        factors: List[SimpleFactor].
        frame: Optional[DelaunayFrame].
    """

    name = "dressed"

    def __init__(self, res: DelaunayResidue, factors: List[SimpleFactor], frame: Optional[DelaunayFrame] = None):
        self.res = res
        self.factors = list(factors)
        self.dressed = DressedFrame(frame if frame is not None else DelaunayFrame(res), self.factors)
        radii = [abs(g.lam0) for g in self.factors]
        self.rho_radius = RHO_RADIUS * min([1.0] + radii)

    def __repr__(self):
        return f"DressedSource({self.res}, {len(self.factors)} factors)"

    @property
    def period(self) -> float:
        return self.dressed.base.rho

    def closed(self, lam_sym: complex = 1.0) -> bool:
        # g(λ)·M·g(λ)⁻¹ = ±id wherever M = ±id
        return delaunay_closes(self.res, lam_sym)

    def column(self, x: float, ys, lam) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        circle = circle_points(self.rho_radius, RHO_SAMPLES)
        frames, rhos = [], []
        for y in np.asarray(ys, dtype=float):
            frames.append(self.dressed.unitary_at(x, y, lam))
            rhos.append(float(_rho_from_circle(self.dressed.positive_at(x, y, circle))))
        logging.debug(f"DressedSource: column x = {x:g} done")
        ys = np.asarray(ys)
        return np.stack(frames), np.array(rhos), np.full(ys.shape, self.res.a, dtype=complex)
