import logging
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from pycmc.config import DEFAULT_TOLERANCES, Tolerances
from pycmc.delaunay.profile import DelaunayProfile, profile, psi, sigma
from pycmc.delaunay.residue import DelaunayResidue
from pycmc.exceptions import IntegrationError
from pycmc.loopcore.linalg import expm_traceless, inv2, sqrt_principal


def _beta_half(res: DelaunayResidue) -> complex:
    return complex(np.sqrt(res.b / abs(res.b)))


def closed_form_factorization(
    res: DelaunayResidue, prof: DelaunayProfile, x: float, y: float, lam
) -> Tuple[np.ndarray, np.ndarray]:
    """Explicit Iwasawa factors of exp((x + iy)A) at r = 1.

    With w = 4āb̄λ, h = diag(β^{1/2}, β^{−1/2}) (β = b/|b|) and
    S₁ = [[v² + w, v′ + 2cv], [0, 2(b + āλ)v]]·h, S = S₁/√det S₁, where the
    root is taken as β^{1/2}(4|b|² + w)√(v/2|b|)·√((v² + w)/(4|b|² + w))
    (continuous off 𝒥_A, equal to one at x = 0):

        R = exp((ρ⁻¹σx − ψ)A)·S,
        F = exp((x + iy − ρ⁻¹σx)A)·R,
        B = R⁻¹·exp(ρ⁻¹σxA).

    Args:
        res: DelaunayResidue.
        prof: DelaunayProfile of ``res``.
        x: float.
        y: float.
        lam: complex or array, off 𝒥_A.

    Returns:
        (F, B): arrays of shape lam.shape + (2, 2).

    Raises:
        NearSingularError: if some λ lies on 𝒥_A.
    """
    lam = np.asarray(lam, dtype=complex)
    shape = lam.shape
    lam = lam.reshape(-1)
    a_mat = res.matrix(lam)
    w = 4 * np.conj(res.ab) * lam
    v = float(prof.v(x))
    dv = float(prof.dv(x))
    b_abs = abs(res.b)
    sb = _beta_half(res)

    s1 = np.zeros(lam.shape + (2, 2), dtype=complex)
    s1[:, 0, 0] = (v * v + w) * sb
    s1[:, 0, 1] = (dv + 2 * res.c * v) / sb
    s1[:, 1, 1] = 2 * (res.b + np.conj(res.a) * lam) * v / sb
    root = sb * (4 * b_abs**2 + w) * np.sqrt(v / (2 * b_abs))
    root = root * sqrt_principal((v * v + w) / (4 * b_abs**2 + w))
    s_mat = s1 / root[:, None, None]

    ps = psi(res, prof, x, lam)
    lin = sigma(res, prof, lam) * x / prof.rho
    r_mat = expm_traceless((lin - ps)[:, None, None] * a_mat) @ s_mat
    f_mat = expm_traceless((x + 1j * y - lin)[:, None, None] * a_mat) @ r_mat
    b_mat = inv2(r_mat) @ expm_traceless(lin[:, None, None] * a_mat)
    return f_mat.reshape(shape + (2, 2)), b_mat.reshape(shape + (2, 2))


def theta_matrix(res: DelaunayResidue, v: float, lam: np.ndarray) -> np.ndarray:
    """F⁻¹F′ of the Delaunay unitary factor (x-derivative at y = 0)."""
    beta = res.b / abs(res.b)
    out = np.zeros(lam.shape + (2, 2), dtype=complex)
    out[..., 0, 1] = (-0.5 * v + 2 * res.ab / (lam * v)) / beta
    out[..., 1, 0] = (0.5 * v - 2 * np.conj(res.ab) * lam / v) * beta
    return out


def eta_matrix(res: DelaunayResidue, v: float, dv: float, lam: np.ndarray) -> np.ndarray:
    """B′B⁻¹ of the Delaunay positive factor; polynomial of degree one in λ."""
    beta = res.b / abs(res.b)
    out = np.zeros(lam.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = -0.5 * dv / v
    out[..., 1, 1] = 0.5 * dv / v
    out[..., 0, 1] = v / beta
    out[..., 1, 0] = 4 * np.conj(res.ab) * lam / v * beta
    return out


def frame_odes(
    res: DelaunayResidue,
    prof: DelaunayProfile,
    s_values,
    lam,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Tuple[np.ndarray, np.ndarray]:
    """Integrates F′ = Fθ and B′ = ηB from the identity at x = 0.

    Both generators are analytic on ℂ*, so the factors are obtained at every
    λ ≠ 0, including the segment 𝒥_A where the closed form is singular.

    Args:
        res: DelaunayResidue.
        prof: DelaunayProfile.
        s_values: array of x in [0, ρ].
        lam: array of λ.
        tol: Tolerances (ode_rtol, ode_atol).

    Returns:
        (F, B): arrays of shape (len(s_values), len(λ), 2, 2).

    Raises:
        IntegrationError: if the integrator fails.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=complex)).reshape(-1)
    s_values = np.atleast_1d(np.asarray(s_values, dtype=float))
    n = lam.size
    t_eval = np.unique(np.concatenate([s_values, [0.0]]))
    t_end = float(t_eval[-1])
    init = np.concatenate([np.tile(np.eye(2), (n, 1, 1)).ravel()] * 2).astype(complex)
    if t_end == 0.0:
        eye = np.tile(np.eye(2, dtype=complex), (len(s_values), n, 1, 1))
        return eye, eye.copy()

    def rhs(x, state):
        v = float(prof.v(x))
        dv = float(prof.dv(x))
        f = state[: 4 * n].reshape(n, 2, 2)
        b = state[4 * n :].reshape(n, 2, 2)
        df = f @ theta_matrix(res, v, lam)
        db = eta_matrix(res, v, dv, lam) @ b
        return np.concatenate([df.ravel(), db.ravel()])

    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        init,
        method="DOP853",
        t_eval=t_eval,
        rtol=tol.ode_rtol,
        atol=tol.ode_atol,
    )
    if sol.status < 0:
        raise IntegrationError(f"Delaunay frame integration failed: {sol.message}", partial=sol)
    states = sol.y.T
    index = np.searchsorted(t_eval, s_values)
    f = states[index, : 4 * n].reshape(len(s_values), n, 2, 2)
    b = states[index, 4 * n :].reshape(len(s_values), n, 2, 2)
    return f, b


class DelaunayFrame:
    """Iwasawa factors F, B of exp((x + iy)A) at r = 1, at any depth x.

    The ODE route integrates one period and extends quasiperiodically:
    F(x + nρ) = exp((ρ − σ)A)ⁿ F(x), B(x + nρ) = B(x) exp(σA)ⁿ, where
    exp((ρ − σ)A) = F(ρ) and exp(σA) = B(ρ); the y-dependence is
    F(x, y) = exp(iyA)F(x, 0). The closed route evaluates the explicit
    formulas (valid off 𝒥_A).

    Args:
        res: DelaunayResidue.
        prof: Optional[DelaunayProfile], built if omitted.
        route: str, "ode" or "closed".
        tol: Tolerances.
    """

    def __init__(
        self,
        res: DelaunayResidue,
        prof: Optional[DelaunayProfile] = None,
        route: str = "ode",
        tol: Tolerances = DEFAULT_TOLERANCES,
    ):
        assert route in ("ode", "closed"), f"unknown route {route}"
        self.res = res
        self.prof = prof if prof is not None else profile(res)
        self.route = route
        self.tol = tol

    @property
    def rho(self) -> float:
        return self.prof.rho

    def period_monodromies(self, lam) -> Tuple[np.ndarray, np.ndarray]:
        """(exp((ρ − σ)A), exp(σA)) at λ."""
        f, b = frame_odes(self.res, self.prof, [self.rho], lam, self.tol)
        return f[0], b[0]

    def factors_grid(self, xs, lam) -> Tuple[np.ndarray, np.ndarray]:
        """F(x, 0) and B(x) on an x grid, shapes (len(xs), len(λ), 2, 2)."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        lam = np.atleast_1d(np.asarray(lam, dtype=complex)).reshape(-1)
        if self.route == "closed":
            pairs = [closed_form_factorization(self.res, self.prof, x, 0.0, lam) for x in xs]
            return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])
        shifts = np.floor(xs / self.rho).astype(int)
        s_values = xs - shifts * self.rho
        f, b = frame_odes(self.res, self.prof, np.concatenate([s_values, [self.rho]]), lam, self.tol)
        e_f, e_b = f[-1], b[-1]
        f, b = f[:-1].copy(), b[:-1].copy()
        for n in np.unique(shifts):
            if n == 0:
                continue
            rows = shifts == n
            f[rows] = np.linalg.matrix_power(e_f, int(n))[None] @ f[rows]
            b[rows] = b[rows] @ np.linalg.matrix_power(e_b, int(n))[None]
        logging.debug(f"DelaunayFrame: {len(xs)} x-values, {len(np.unique(shifts))} period shifts")
        return f, b

    def factors(self, x: float, y: float, lam) -> Tuple[np.ndarray, np.ndarray]:
        lam = np.asarray(lam, dtype=complex)
        shape = lam.shape
        f, b = self.factors_grid([x], lam.reshape(-1))
        f = self.y_shift(y, lam.reshape(-1)) @ f[0]
        return f.reshape(shape + (2, 2)), b[0].reshape(shape + (2, 2))

    def unitary_at(self, x: float, y: float, lam):
        return self.factors(x, y, lam)[0]

    def positive_at(self, x: float, lam):
        return self.factors(x, 0.0, lam)[1]

    def y_shift(self, y: float, lam) -> np.ndarray:
        """exp(iyA(λ))."""
        return expm_traceless(1j * y * self.res.matrix(lam))
