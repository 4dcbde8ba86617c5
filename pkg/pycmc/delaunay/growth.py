import logging
from typing import Callable, Dict, Optional

import numpy as np
import pandas as pd
import scipy.linalg
from scipy.stats import linregress
from tqdm import tqdm

from pycmc.config import DEFAULT_TOLERANCES, Tolerances
from pycmc.delaunay.frame import closed_form_factorization, frame_odes
from pycmc.delaunay.profile import DelaunayProfile, profile, sigma
from pycmc.delaunay.residue import DelaunayResidue
from pycmc.delaunay.spectral import spectral_data
from pycmc.exceptions import PycmcError
from pycmc.iwasawa.factorization import iwasawa
from pycmc.loopcore.linalg import expm_traceless, op_norm, sqrt_principal

# distance to 𝒥_A (relative) below which τ is continued through ½ tr B(ρ)
CONTINUATION_DISTANCE = 1e-3
GROWTH_MARGIN = 0.05


def tau(
    res: DelaunayResidue,
    lam,
    prof: Optional[DelaunayProfile] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """Growth exponent τ(λ) = ρ⁻¹ Re(μ(λ)σ(λ)).

    Vacuum: τ = Re(2|b|√(λ/α)) with Re √ >= 0. Near 𝒥_A the integral is
    singular and τ is continued by cosh(μσ) = ½ tr B(ρ, λ), with B(ρ, λ)
    from the positive-factor ODE; the sign is + inside the closed unit disk
    and taken from a nearby regular point outside it.

    Args:
        res: DelaunayResidue.
        lam: complex or array of nonzero λ.
        prof: Optional[DelaunayProfile].
        tol: Tolerances.

    Returns:
        tau: array of the shape of lam.
    """
    lam = np.asarray(lam, dtype=complex)
    shape = lam.shape
    lam = lam.reshape(-1)
    if res.is_vacuum:
        return (2 * abs(res.b) * sqrt_principal(lam / res.alpha)).real.reshape(shape)
    prof = prof if prof is not None else profile(res)
    data = spectral_data(res)
    dist = data.distance_to_J(lam)
    near = dist <= CONTINUATION_DISTANCE * np.maximum(1.0, np.abs(lam))
    out = np.zeros(lam.shape)
    if np.any(~near):
        regular = lam[~near]
        out[~near] = (res.mu(regular) * sigma(res, prof, regular)).real / prof.rho
    if np.any(near):
        close = lam[near]
        _, b = frame_odes(res, prof, [prof.rho], close, tol)
        half_trace = 0.5 * np.trace(b[0], axis1=-2, axis2=-1)
        mag = np.abs(np.arccosh(half_trace).real) / prof.rho
        sign = np.ones(close.shape)
        outside = np.abs(close) > 1
        if np.any(outside):
            probe = close[outside] * np.exp(2j * CONTINUATION_DISTANCE)
            sign[outside] = np.sign((res.mu(probe) * sigma(res, prof, probe)).real)
        out[near] = sign * mag
    return out.reshape(shape)


def tau_grid(
    res: DelaunayResidue,
    points,
    prof: Optional[DelaunayProfile] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> pd.DataFrame:
    """Table with columns λ_re, λ_im, tau, re_mu."""
    points = np.asarray(points, dtype=complex).reshape(-1)
    return pd.DataFrame(
        {
            "lambda_re": points.real,
            "lambda_im": points.imag,
            "tau": tau(res, points, prof, tol),
            "re_mu": res.mu(points).real,
        }
    )


def exp_bound_check(x_map: Callable, mu_map: Callable, samples, dense_checks: int = 16) -> Dict:
    """Certificate c(λ) = ‖exp X(λ)‖ / e^{|Re μ(λ)|} over λ-samples.

    exp X is evaluated as cosh(μ)id + μ⁻¹sinh(μ)X; the first ``dense_checks``
    samples are compared with a dense matrix exponential. The envelope
    ‖exp X‖ <= 2e^{|Re μ|}(1 + ‖X‖/|μ|) is reported as a sanity check.

    Args:
        x_map: Callable, λ-array ↦ traceless matrices (n, 2, 2).
        mu_map: Callable, λ-array ↦ eigenvalues μ (n,).
        samples: array of λ.
        dense_checks: int.

    Returns:
        report: Dict with keys certificate_max, envelope_max, dense_error, passed.
    """
    samples = np.asarray(samples, dtype=complex).reshape(-1)
    x = np.asarray(x_map(samples), dtype=complex)
    mu = np.asarray(mu_map(samples), dtype=complex)
    exp_x = expm_traceless(x)
    norms = op_norm(exp_x)
    grow = np.exp(np.abs(mu.real))
    certificate = norms / grow
    with np.errstate(divide="ignore", invalid="ignore"):
        envelope = np.where(np.abs(mu) > 0, norms / (2 * grow * (1 + op_norm(x) / np.abs(mu))), 0.0)
    dense = [
        float(op_norm(exp_x[i] - scipy.linalg.expm(x[i])) / max(1.0, norms[i]))
        for i in range(min(dense_checks, len(samples)))
    ]
    return {
        "certificate_max": float(certificate.max()),
        "envelope_max": float(np.nanmax(envelope)),
        "dense_error": max(dense) if dense else 0.0,
        "passed": bool(np.nanmax(envelope) <= 1 + 1e-12),
    }


def delaunay_positive_factory(
    res: DelaunayResidue,
    prof: Optional[DelaunayProfile] = None,
) -> Callable:
    """z ↦ (λ ↦ Pos_1(exp(A log z))(λ)) from the closed form (x = log|z|)."""
    prof = prof if prof is not None else profile(res)

    def factory(z):
        x = float(np.log(abs(z)))
        return lambda lam: closed_form_factorization(res, prof, x, 0.0, lam)[1]

    return factory


def iwasawa_positive_factory(
    phi_of_z: Callable, r: float = 1.0, tol: Tolerances = DEFAULT_TOLERANCES
) -> Callable:
    """z ↦ Pos_r(Φ(z)) evaluator, with Φ(z) a loop-like object."""

    def factory(z):
        return iwasawa(phi_of_z(z), r, tol).positive_at

    return factory


def growth_measure(
    frame_factory: Callable,
    res: DelaunayResidue,
    z_values,
    lam_points,
    prof: Optional[DelaunayProfile] = None,
    margin: float = GROWTH_MARGIN,
    verbose: bool = True,
) -> pd.DataFrame:
    """Fits the growth exponent of ‖Pos(z)(λ)‖ as |z| → 0.

    Per λ the slope of log‖Pos‖ against −log|z| is fitted by least squares
    and compared with τ(λ) and Re μ(λ).

    Args:
        frame_factory: Callable, z ↦ callable λ-array ↦ positive factor values.
        res: DelaunayResidue.
        z_values: array of z (moduli decreasing towards 0).
        lam_points: array of λ.
        prof: Optional[DelaunayProfile].
        margin: float, allowed excess of the slope.
        verbose: bool, show a progress bar.

    Returns:
        report: DataFrame with columns lambda_re, lambda_im, slope, tau,
        re_mu, ok_tau, ok_mu, failures.
    """
    z_values = np.asarray(z_values, dtype=complex).reshape(-1)
    lam_points = np.asarray(lam_points, dtype=complex).reshape(-1)
    logs = np.full((len(z_values), len(lam_points)), np.nan)
    failures = [0] * len(lam_points)
    for i, z in enumerate(tqdm(z_values, desc="growth", disable=not verbose)):
        try:
            pos = frame_factory(z)
            logs[i] = np.log(op_norm(pos(lam_points)))
        except PycmcError as e:
            logging.warning(f"growth_measure: factorization failed at |z| = {abs(z):.3e}: {e}")
            for j in range(len(lam_points)):
                failures[j] += 1
    depth = -np.log(np.abs(z_values))
    slopes = np.full(len(lam_points), np.nan)
    for j in range(len(lam_points)):
        ok = np.isfinite(logs[:, j])
        if ok.sum() >= 2:
            slopes[j] = linregress(depth[ok], logs[ok, j]).slope
    taus = tau(res, lam_points, prof)
    re_mu = res.mu(lam_points).real
    return pd.DataFrame(
        {
            "lambda_re": lam_points.real,
            "lambda_im": lam_points.imag,
            "slope": slopes,
            "tau": taus,
            "re_mu": re_mu,
            "ok_tau": slopes <= taus + margin,
            "ok_mu": slopes <= re_mu + margin,
            "failures": failures,
        }
    )
