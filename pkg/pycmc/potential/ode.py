import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp

from pycmc.config import DEFAULT_TOLERANCES, Tolerances
from pycmc.exceptions import DomainError, IntegrationError
from pycmc.loopcore.annulus import Annulus, circle_points
from pycmc.loopcore.functional import LoopFunction
from pycmc.loopcore.linalg import IDENTITY, dagger, det2, identity_like, inv2, op_norm
from pycmc.loopcore.matrix_loop import MatrixLoop
from pycmc.potential.potential import Potential

# waypoints per full turn around z = 0
WAYPOINTS_PER_TURN = 64
# waypoints per e-fold of |z| on radial legs
WAYPOINTS_PER_EFOLD = 4
DET_DRIFT_WARN = 1e-9
# accepted sup ‖M(1/λ̄)ᴴ M(λ) − id‖ on C_r
UNITARITY_TOL = 1e-8


def _generator(a_s: np.ndarray, terms: np.ndarray, z: complex) -> np.ndarray:
    out = a_s / z
    zk = 1.0 + 0j
    for t in terms:
        out = out + t * zk
        zk = zk * z
    return out


def _renormalize(phi: np.ndarray) -> Tuple[np.ndarray, float]:
    d = det2(phi)
    drift = float(np.max(np.abs(d - 1)))
    return phi / np.sqrt(d)[..., None, None], drift


def integrate_path(
    xi: Potential,
    path: Sequence[complex],
    init: np.ndarray,
    lam,
    tol: Tolerances = DEFAULT_TOLERANCES,
    record: bool = False,
) -> Union[np.ndarray, Tuple[np.ndarray, List[np.ndarray]]]:
    """Integrates dΦ = Φξ along the polygon through ``path``.

    Each segment z(t) = z_a + t(z_b − z_a), t ∈ [0, 1], is solved with
    DOP853 for all λ-samples at once; at every waypoint Φ is renormalized by
    (det Φ)^{−1/2}.

    Args:
        xi: Potential.
        path: sequence of nonzero complex waypoints.
        init: array (n, 2, 2), Φ at path[0].
        lam: array of n λ-values.
        tol: Tolerances (ode_rtol, ode_atol).
        record: bool, also return Φ at every waypoint.

    Returns:
        phi: array (n, 2, 2) at path[-1] (and the list of waypoint values).

    Raises:
        DomainError: if a segment passes through z = 0.
        IntegrationError: if the integrator fails; carries Φ at the last
            waypoint reached and that waypoint.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=complex)).reshape(-1)
    path = [complex(p) for p in path]
    a_s, terms = xi.term_samples(lam)
    phi = np.array(init, dtype=complex).reshape(lam.size, 2, 2)
    n = lam.size
    drift = 0.0
    values = [phi.copy()]
    for za, zb in zip(path[:-1], path[1:]):
        dz = zb - za
        if dz == 0:
            values.append(phi.copy())
            continue
        # distance of the segment from the origin
        t_closest = np.clip(-np.real(np.conj(za) * dz) / abs(dz) ** 2, 0.0, 1.0)
        if abs(za + t_closest * dz) <= 1e-12 * max(abs(za), abs(zb)):
            raise DomainError(f"path segment {za} -> {zb} passes through z = 0")

        def rhs(t, state):
            p = state.reshape(n, 2, 2)
            return (p @ _generator(a_s, terms, za + t * dz) * dz).ravel()

        sol = solve_ivp(rhs, (0.0, 1.0), phi.ravel(), method="DOP853", rtol=tol.ode_rtol, atol=tol.ode_atol)
        if sol.status < 0:
            raise IntegrationError(
                f"z-ODE failed on segment {za:.4g} -> {zb:.4g}: {sol.message}", partial=phi, z=za
            )
        phi, d = _renormalize(sol.y[:, -1].reshape(n, 2, 2))
        drift = max(drift, d)
        values.append(phi.copy())
    if drift > DET_DRIFT_WARN:
        logging.warning(f"integrate_path: determinant drift {drift:.3e} corrected")
    else:
        logging.debug(f"integrate_path: {len(path) - 1} segments, det drift {drift:.3e}")
    return (phi, values) if record else phi


def ode_solve(
    xi: Potential,
    path: Sequence[complex],
    phi_init=None,
    r: Optional[float] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> MatrixLoop:
    """Φ at the end of ``path`` as a loop on C_r.

    Args:
        xi: Potential.
        path: sequence of complex waypoints avoiding z = 0.
        phi_init: MatrixLoop, LoopFunction or None (identity), Φ at path[0].
        r: Optional[float], λ-radius, defaults to the potential's.
        tol: Tolerances.

    Returns:
        phi: MatrixLoop sampled on C_r.

    **Examples:**
        >>> from pycmc.delaunay import DelaunayResidue
        >>> xi = Potential(DelaunayResidue(0.25, 0.25))
        >>> phi = ode_solve(xi, [0.5, 0.5])
        >>> bool(np.allclose(phi.eval(1.0), np.eye(2)))
        True
    """
    r = xi.radius if r is None else r
    lam = circle_points(r, tol.samples)
    if phi_init is None:
        init = identity_like(lam.shape)
    else:
        init = phi_init.eval(lam) if hasattr(phi_init, "eval") else np.broadcast_to(phi_init, lam.shape + (2, 2))
    phi = integrate_path(xi, path, init, lam, tol)
    return MatrixLoop.from_samples(phi, radius=r)


def circle_path(radius: float, theta_start: float, theta_end: float) -> List[complex]:
    turns = abs(theta_end - theta_start) / (2 * np.pi)
    m = max(2, int(np.ceil(WAYPOINTS_PER_TURN * turns)) + 1)
    return list(radius * np.exp(1j * np.linspace(theta_start, theta_end, m)))


def radial_path(r_start: float, r_end: float, theta: float) -> List[complex]:
    efolds = abs(np.log(r_end / r_start))
    m = max(2, int(np.ceil(WAYPOINTS_PER_EFOLD * efolds)) + 1)
    return list(np.geomspace(r_start, r_end, m) * np.exp(1j * theta))


class HolomorphicFrame:
    """Solution Φ of dΦ = Φξ on the universal cover of the punctured z-disk.

    Points of the cover are (z, winding), with log z = log|z| + i(Arg z +
    2π·winding) relative to the principal branch at the basepoint. Φ is
    continued from the basepoint radially to |z| and then along the circle.

    Args:
        xi: Potential.
        lam: array of λ-samples; default the M points of C_r.
        basepoint: complex, default 0.5·z_radius.
        initial: Optional array (n, 2, 2), Φ at the basepoint (identity).
        tol: Tolerances.
    """

    def __init__(
        self,
        xi: Potential,
        lam=None,
        basepoint: Optional[complex] = None,
        initial: Optional[np.ndarray] = None,
        tol: Tolerances = DEFAULT_TOLERANCES,
    ):
        self.xi = xi
        self.tol = tol
        self.lam = xi.lam_samples(tol=tol) if lam is None else np.atleast_1d(np.asarray(lam, dtype=complex)).reshape(-1)
        self.basepoint = complex(0.5 * xi.z_radius if basepoint is None else basepoint)
        if self.basepoint == 0:
            raise DomainError("the basepoint must be nonzero")
        self.initial = identity_like(self.lam.shape) if initial is None else np.asarray(initial, dtype=complex)

    def __repr__(self):
        return f"HolomorphicFrame({self.xi!r}, basepoint={self.basepoint:.4g}, n_lambda={self.lam.size})"

    def log(self, z: complex, winding: int = 0) -> complex:
        theta = np.angle(z) + 2 * np.pi * winding
        return complex(np.log(abs(z)), theta)

    def path_to(self, z: complex, winding: int = 0) -> List[complex]:
        if z == 0:
            raise DomainError("z = 0 is the puncture")
        theta_b = float(np.angle(self.basepoint))
        theta = float(np.angle(z)) + 2 * np.pi * winding
        radial = radial_path(abs(self.basepoint), abs(z), theta_b)
        return radial + circle_path(abs(z), theta_b, theta)[1:]

    def at(self, z: complex, winding: int = 0) -> np.ndarray:
        """Φ(z) on the sheet ``winding`` of the cover, shape (n, 2, 2)."""
        return integrate_path(self.xi, self.path_to(z, winding), self.initial, self.lam, self.tol)

    def along_ray(self, moduli: Sequence[float], theta: Optional[float] = None) -> np.ndarray:
        """Φ at successive moduli on the ray at angle θ (default the basepoint's).

        Returns:
            phi: array (len(moduli), n, 2, 2).
        """
        theta_b = float(np.angle(self.basepoint))
        theta = theta_b if theta is None else theta
        start = circle_path(abs(self.basepoint), theta_b, theta)
        phi = integrate_path(self.xi, start, self.initial, self.lam, self.tol)
        out = []
        rad = abs(self.basepoint)
        for m in moduli:
            phi = integrate_path(self.xi, radial_path(rad, m, theta), phi, self.lam, self.tol)
            rad = m
            out.append(phi)
        return np.stack(out)

    def loop_at(self, z: complex, winding: int = 0) -> MatrixLoop:
        return MatrixLoop.from_samples(self.at(z, winding), radius=self.xi.radius)


def _monodromy_values(xi: Potential, basepoint: complex, lam, tol: Tolerances) -> np.ndarray:
    theta = float(np.angle(basepoint))
    path = circle_path(abs(basepoint), theta, theta + 2 * np.pi)
    lam = np.atleast_1d(np.asarray(lam, dtype=complex)).reshape(-1)
    return integrate_path(xi, path, identity_like(lam.shape), lam, tol)


def monodromy(
    xi: Potential,
    basepoint: Optional[complex] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> MatrixLoop:
    """Monodromy M of Φ with Φ(basepoint) = id around one positive turn.

    Φ continued once around z = 0 equals M·Φ. For ξ = A dz/z it is
    exp(2πiA).
    """
    basepoint = complex(0.5 * xi.z_radius if basepoint is None else basepoint)
    if basepoint == 0:
        raise DomainError("the basepoint must be nonzero")
    lam = xi.lam_samples(tol=tol)
    return MatrixLoop.from_samples(_monodromy_values(xi, basepoint, lam, tol), radius=xi.radius)


def monodromy_function(
    xi: Potential,
    basepoint: Optional[complex] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> LoopFunction:
    """Monodromy as a LoopFunction, integrated at whatever λ it is asked for."""
    basepoint = complex(0.5 * xi.z_radius if basepoint is None else basepoint)
    return LoopFunction(
        lambda lam: _monodromy_values(xi, basepoint, lam, tol),
        annulus=Annulus(0.0, np.inf),
        radius=xi.radius,
        name="monodromy",
    )


def frame_monodromy(
    xi: Potential,
    initial: Callable[[np.ndarray], np.ndarray],
    basepoint: Optional[complex] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> LoopFunction:
    """Monodromy of the frame with Φ(basepoint) = initial(λ).

    If M₀ is the monodromy of the frame normalized to id at the basepoint,
    the frame started at Φ₀ has monodromy Φ₀·M₀·Φ₀⁻¹. Closing conditions at
    λ_sym are invariant under this conjugation, unitarity is not.
    """
    basepoint = complex(0.5 * xi.z_radius if basepoint is None else basepoint)

    def func(lam):
        phi0 = np.asarray(initial(lam), dtype=complex)
        return phi0 @ _monodromy_values(xi, basepoint, lam, tol) @ inv2(phi0)

    return LoopFunction(func, annulus=Annulus(0.0, np.inf), radius=xi.radius, name="monodromy")


def monodromy_unitarity(m, radius: Optional[float] = None, n_samples: int = 64) -> float:
    """sup over C_r of ‖M(1/λ̄)ᴴ·M(λ) − id‖."""
    radius = m.radius if radius is None else radius
    lam = circle_points(radius, n_samples)
    reflected = dagger(m.eval(1.0 / np.conj(lam)))
    return float(np.max(op_norm(reflected @ m.eval(lam) - IDENTITY)))


def closing_check(
    m,
    lam_sym: complex = 1.0,
    radius: Optional[float] = None,
    n_samples: int = 64,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Dict:
    """Closing conditions M(λ_sym) = ±id, M′(λ_sym) = 0 and unitarity.

    Args:
        m: MatrixLoop or LoopFunction.
        lam_sym: complex on S¹.
        radius: Optional[float], circle on which unitarity is measured.
        n_samples: int, samples of C_r.
        tol: Tolerances.

    Returns:
        report: Dict with closing_error, sign, derivative, unitarity,
        closed and unitary.
    """
    lam_sym = complex(lam_sym)
    radius = m.radius if radius is None else radius
    value = m.eval(np.array([lam_sym]))[0]
    errs = {+1: float(op_norm(value - IDENTITY)), -1: float(op_norm(value + IDENTITY))}
    sign = min(errs, key=errs.get)
    if isinstance(m, MatrixLoop):
        # θ-derivative at λ_sym = e^{iθ}: Σ i k X_k λ^k
        deriv = m.theta_derivative().eval(np.array([lam_sym]))[0]
    else:
        deriv = m.theta_derivative(np.array([lam_sym]))[0]
    unitarity = monodromy_unitarity(m, radius, n_samples)
    report = {
        "closing_error": errs[sign],
        "sign": sign,
        "derivative": float(op_norm(deriv)),
        "unitarity": unitarity,
    }
    report["closed"] = bool(report["closing_error"] < tol.probe and report["derivative"] < 1e-6)
    report["unitary"] = bool(unitarity < UNITARITY_TOL)
    logging.info(
        f"closing_check: |M(λ)∓id| = {report['closing_error']:.3e}, "
        f"|M'| = {report['derivative']:.3e}, unitarity {unitarity:.3e}"
    )
    return report
