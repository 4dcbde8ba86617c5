import logging
import os
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy.integrate import quad, quad_vec, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.special import ellipk

from pycmc import BASE_CACHE_PATH
from pycmc.delaunay.residue import DelaunayResidue
from pycmc.delaunay.spectral import zeros_of_det
from pycmc.exceptions import DomainError, InvalidResidueError, NearSingularError
from pycmc.utils import create_directory, hash_str, load_pickle, save_pickle

TABLE_SIZE = 4096
PROFILE_RTOL = 1e-13
PROFILE_ATOL = 1e-15
# accepted relative disagreement of the quadrature and ODE periods with the elliptic one
PERIOD_RTOL = 1e-8
# relative distance to 𝒥_A below which the third kind integral is refused
SINGULAR_DISTANCE = 1e-6


@dataclass
class DelaunayProfile:
    """The periodic solution v of (v′)² + v⁴ − 4Sv² + 16|ab|² = 0.

    v(0) = 2|b| and v′(0) = −4|b|c. The table stores one period sampled on a
    uniform grid together with v′ and v″ = −2v³ + 4Sv, interpolated by cubic
    Hermite splines and extended periodically.

    Attributes:
        S: float, |a|² + |b|² + c².
        ab_abs: float, |ab|.
        rho: float, period of v (π/(2|b|) by convention for the vacuum).
        vmin: float, smallest value of v.
        vmax: float, largest value of v.
        vacuum: bool, whether v is constant.
        x: np.ndarray, table grid on [0, ρ].
        v_table: np.ndarray, v on the grid.
        dv_table: np.ndarray, v′ on the grid.
        rho_checks: Dict, period from the quadrature and from ODE turning
            points.
    """

    S: float
    ab_abs: float
    b_abs: float
    rho: float
    vmin: float
    vmax: float
    vacuum: bool
    x: np.ndarray
    v_table: np.ndarray
    dv_table: np.ndarray
    rho_checks: Dict

    def __post_init__(self):
        if not self.vacuum:
            ddv = -2 * self.v_table**3 + 4 * self.S * self.v_table
            self._v = CubicHermiteSpline(self.x, self.v_table, self.dv_table)
            self._dv = CubicHermiteSpline(self.x, self.dv_table, ddv)

    def v(self, x):
        x = np.asarray(x, dtype=float)
        if self.vacuum:
            return np.full(x.shape, 2 * self.b_abs)
        return self._v(np.mod(x, self.rho))

    def dv(self, x):
        x = np.asarray(x, dtype=float)
        if self.vacuum:
            return np.zeros(x.shape)
        return self._dv(np.mod(x, self.rho))

    def energy_residual(self, x=None) -> float:
        """sup of |(v′)² + v⁴ − 4Sv² + 16|ab|²| on the table (or at x)."""
        if x is None:
            v, dv = self.v_table, self.dv_table
        else:
            v, dv = self.v(x), self.dv(x)
        return float(np.max(np.abs(dv**2 + v**4 - 4 * self.S * v**2 + 16 * self.ab_abs**2)))

    def necksize(self) -> Tuple[float, float]:
        return self.vmin, self.vmax

    def to_dict(self) -> Dict:
        return {
            "rho": self.rho,
            "vmin": self.vmin,
            "vmax": self.vmax,
            "vacuum": self.vacuum,
            "rho_checks": self.rho_checks,
            "energy_residual": self.energy_residual(),
        }

    def stat(self):
        print("Delaunay profile:")
        print(f"\t- period rho: {self.rho:.15g}")
        print(f"\t- necksize (vmin, vmax): ({self.vmin:.15g}, {self.vmax:.15g})")
        print(f"\t- vacuum: {self.vacuum}")
        print(f"\t- energy residual: {self.energy_residual():.3e}")


def turning_values(S: float, ab_abs: float) -> Tuple[float, float]:
    """v_min, v_max with v² = 2S ∓ 2√(S² − 4|ab|²).

    Raises:
        InvalidResidueError: if the quartic has no positive root interval.
    """
    disc = S * S - 4 * ab_abs**2
    if disc < -1e-15 * S * S or ab_abs <= 0:
        raise InvalidResidueError(f"profile quartic has no positive root interval (S={S}, |ab|={ab_abs})")
    root = np.sqrt(max(disc, 0.0))
    vmax = np.sqrt(2 * S + 2 * root)
    vmin = 4 * ab_abs / vmax
    return float(vmin), float(vmax)


def period_elliptic(vmin: float, vmax: float) -> float:
    """ρ = 2K(m)/v_max with parameter m = 1 − v_min²/v_max²."""
    return float(2 * ellipk(1 - (vmin / vmax) ** 2) / vmax)


def period_quadrature(vmin: float, vmax: float) -> float:
    """ρ = 2∫ dv/√((v² − v_min²)(v_max² − v²)) with the endpoint weights split off."""
    val, _ = quad(
        lambda v: 1.0 / np.sqrt((v + vmin) * (v + vmax)),
        vmin,
        vmax,
        weight="alg",
        wvar=(-0.5, -0.5),
        epsabs=1e-14,
        epsrel=1e-13,
    )
    return float(2 * val)


def _profile_rhs(S: float):
    def rhs(x, state):
        v, dv = state
        return [dv, -2 * v**3 + 4 * S * v]

    return rhs


def _build_table(res: DelaunayResidue, n_table: int):
    S, ab_abs, b_abs = res.S, abs(res.ab), abs(res.b)
    vmin, vmax = turning_values(S, ab_abs)
    if res.is_vacuum:
        rho = np.pi / (2 * b_abs)
        x = np.array([0.0, rho])
        return rho, vmin, vmax, x, np.full(2, 2 * b_abs), np.zeros(2), {"convention": "pi/(2|b|)"}
    rho = period_elliptic(vmin, vmax)
    rho_quad = period_quadrature(vmin, vmax)

    def turning(x, state):
        return state[1]

    sol = solve_ivp(
        _profile_rhs(S),
        (0.0, 1.6 * rho),
        [2 * b_abs, -4 * b_abs * res.c],
        method="DOP853",
        rtol=PROFILE_RTOL,
        atol=PROFILE_ATOL,
        dense_output=True,
        events=turning,
    )
    if sol.status < 0:
        raise InvalidResidueError(f"profile integration failed: {sol.message}")
    events = [t for t in sol.t_events[0] if t > 1e-9 * rho]
    rho_ode = 2 * (events[1] - events[0]) if len(events) >= 2 else float("nan")
    for name, value in (("quadrature", rho_quad), ("ode", rho_ode)):
        if not abs(value - rho) <= PERIOD_RTOL * rho:
            raise DomainError(f"profile: period from {name} {value:.15g} differs from the elliptic {rho:.15g}")
    x = np.linspace(0.0, rho, n_table + 1)
    table = sol.sol(x)
    checks = {"quadrature": rho_quad, "ode": rho_ode, "elliptic": rho}
    return rho, vmin, vmax, x, table[0], table[1], checks


def profile(
    res: DelaunayResidue,
    n_table: int = TABLE_SIZE,
    use_cache: bool = False,
    refresh_cache: bool = False,
) -> DelaunayProfile:
    """Builds the Delaunay profile of a residue.

    The vacuum (|a| = |b|, c = 0) gives v ≡ 2|b|. Otherwise the second
    order equation v″ = −2v³ + 4Sv is integrated over 1.6 periods with
    turning point events; the period is taken from the complete elliptic
    integral and cross-checked against an algebraic-weight quadrature and
    the ODE turning points.

    Args:
        res: DelaunayResidue.
        n_table: int, number of table intervals per period.
        use_cache: bool, read/write the table under BASE_CACHE_PATH/profiles.
        refresh_cache: bool, rebuild even when a cached table exists.

    Returns:
        prof: DelaunayProfile.

    Raises:
        DomainError: if the quadrature or ODE period differs from the
            elliptic one by more than ``PERIOD_RTOL``.

    **Examples:**
        >>> prof = profile(DelaunayResidue(0.375, 0.125))
        >>> round(prof.vmax, 12), round(prof.vmin, 12)
        (0.75, 0.25)
    """
    key = hash_str(f"{abs(res.a)!r}+{abs(res.b)!r}+{res.c!r}+{n_table}")
    cache_path = os.path.join(BASE_CACHE_PATH, "profiles", f"{key}.pkl")
    if use_cache and os.path.exists(cache_path) and not refresh_cache:
        logging.debug(f"profile: loaded from {cache_path}")
        built = load_pickle(cache_path)
    else:
        built = _build_table(res, n_table)
        if use_cache:
            create_directory(os.path.dirname(cache_path))
            save_pickle(built, cache_path)
    rho, vmin, vmax, x, v, dv, checks = built
    return DelaunayProfile(
        S=res.S,
        ab_abs=abs(res.ab),
        b_abs=abs(res.b),
        rho=float(rho),
        vmin=vmin,
        vmax=vmax,
        vacuum=res.is_vacuum,
        x=x,
        v_table=v,
        dv_table=dv,
        rho_checks=checks,
    )


def necksize(prof: DelaunayProfile) -> Tuple[float, float]:
    return prof.necksize()


def _check_regular(res: DelaunayResidue, lam: np.ndarray):
    nu1, nu2 = zeros_of_det(res)
    p = nu1 / abs(nu1)
    t = np.clip(np.real(lam * np.conj(p)), abs(nu1), abs(nu2))
    dist = np.abs(lam - t * p)
    if np.any(dist <= SINGULAR_DISTANCE * np.maximum(1.0, np.abs(lam))):
        bad = lam[np.argmin(dist)]
        raise NearSingularError(f"λ = {bad:.6g} lies on the singular segment of the profile integral", bad)


def _psi_segment(res: DelaunayResidue, prof: DelaunayProfile, x0: float, x1: float, lam: np.ndarray):
    w = 4 * np.conj(res.ab) * lam
    n = lam.size

    def integrand(t):
        val = 2 * w / (w + prof.v(t) ** 2)
        return np.concatenate([val.real, val.imag])

    out, _ = quad_vec(integrand, x0, x1, epsabs=1e-14, epsrel=1e-12)
    return out[:n] + 1j * out[n:]


def sigma(res: DelaunayResidue, prof: DelaunayProfile, lam) -> np.ndarray:
    """σ(λ) = ψ(ρ, λ)."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    _check_regular(res, lam)
    if prof.vacuum:
        w = 4 * np.conj(res.ab) * lam
        return 2 * w * prof.rho / (w + 4 * prof.b_abs**2)
    return _psi_segment(res, prof, 0.0, prof.rho, lam)


def psi(res: DelaunayResidue, prof: DelaunayProfile, x: float, lam) -> np.ndarray:
    """Third kind integral ψ(x, λ) = ∫₀ˣ 2dt / (1 + v(t)²/(4āb̄λ)).

    Uses ψ(nρ + s) = nσ + ψ(s) for x outside [0, ρ).

    Raises:
        NearSingularError: if some λ lies on 𝒥_A.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    _check_regular(res, lam)
    if prof.vacuum:
        w = 4 * np.conj(res.ab) * lam
        return 2 * w * x / (w + 4 * prof.b_abs**2)
    n = np.floor(x / prof.rho)
    s = x - n * prof.rho
    out = _psi_segment(res, prof, 0.0, s, lam) if s > 0 else np.zeros(lam.shape, dtype=complex)
    if n != 0:
        out = out + n * sigma(res, prof, lam)
    return out


def psi_table(res: DelaunayResidue, prof: DelaunayProfile, xs, lam) -> np.ndarray:
    """ψ at every x of a grid, shape (len(xs), len(λ)), by cumulative segments."""
    xs = np.asarray(xs, dtype=float)
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    _check_regular(res, lam)
    order = np.argsort(xs)
    out = np.zeros((xs.size, lam.size), dtype=complex)
    prev_x = 0.0
    prev_val = np.zeros(lam.size, dtype=complex)
    if xs.size and xs[order[0]] < 0:
        prev_x = xs[order[0]]
        prev_val = psi(res, prof, prev_x, lam)
    for i in order:
        if xs[i] != prev_x:
            if prof.vacuum:
                prev_val = psi(res, prof, xs[i], lam)
            else:
                prev_val = prev_val + _psi_segment(res, prof, prev_x, xs[i], lam)
            prev_x = xs[i]
        out[i] = prev_val
    return out
