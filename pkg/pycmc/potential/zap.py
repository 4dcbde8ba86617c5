import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from pycmc.config import DEFAULT_TOLERANCES, Tolerances
from pycmc.delaunay.spectral import ResonancePoint, spectral_data
from pycmc.exceptions import InconsistencyError, ResonanceError
from pycmc.loopcore.annulus import Annulus
from pycmc.loopcore.linalg import expm_traceless, identity_like, inv2, op_norm
from pycmc.loopcore.matrix_loop import MatrixLoop
from pycmc.potential import series
from pycmc.potential.lcalc import L_inverse
from pycmc.potential.potential import Potential

EXTRA_TERMS = 8
MAX_TERMS = 200
PROBE_ANGLE = np.pi / 3
# relative width of the annulus around C_r searched for resonance points
RESONANCE_BAND = 1e-3


def zap_coefficients(xi: Potential, lam, order: int) -> np.ndarray:
    """P_0 = id, P_k = 𝓛_k⁻¹(Σ_{i+j=k−1} P_i B_j) per λ-sample.

    Args:
        xi: Potential.
        lam: array of λ.
        order: int, number of coefficients P_0..P_{order−1}.

    Returns:
        p: array (order, len(λ), 2, 2).

    Raises:
        ResonanceError: if some 𝓛_k is singular at a sample.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=complex)).reshape(-1)
    e = xi.z_series(lam, max(order, 2))
    a_s, b = e[0], e[1:]
    p = np.zeros((order, lam.size, 2, 2), dtype=complex)
    p[0] = identity_like(lam.shape)
    for k in range(1, order):
        rhs = np.zeros((lam.size, 2, 2), dtype=complex)
        for i in range(k):
            j = k - 1 - i
            if j < len(b):
                rhs += p[i] @ b[j]
        if np.any(rhs):
            p[k] = L_inverse(a_s, k, rhs, lam=lam)
    return p


def z_power_a(a_s: np.ndarray, log_z: complex) -> np.ndarray:
    """exp(A log z) on the branch given by ``log_z``."""
    return expm_traceless(log_z * a_s)


@dataclass
class ZapDecomposition:
    """Φ = C(λ)·exp(A(λ) log z)·P(z, λ) on λ-samples.

    Attributes:
        xi: Potential.
        lam: array of λ-samples (the M points of C_r).
        c: array (n, 2, 2), the z-independent factor C at the samples.
        p_coeffs: array (K + 1, n, 2, 2), P_0 = id, ..., P_K.
        probe_error: float, disagreement of C between the two probes.
        domain_punctures: List[ResonancePoint], resonance points excluded.
    """

    xi: Potential
    lam: np.ndarray
    c: np.ndarray
    p_coeffs: np.ndarray
    probe_error: float = 0.0
    domain_punctures: List[ResonancePoint] = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.p_coeffs) - 1

    @property
    def radius(self) -> float:
        return self.xi.radius

    def __repr__(self):
        return f"ZapDecomposition(K={self.K}, n_lambda={self.lam.size}, probe_error={self.probe_error:.2e})"

    def P(self, z: complex) -> np.ndarray:
        return series.evaluate(self.p_coeffs, z)

    def P_at(self, z: complex, lam) -> np.ndarray:
        """P(z) at arbitrary λ (the recursion is rerun at those λ)."""
        return series.evaluate(zap_coefficients(self.xi, lam, self.K + 1), z)

    def P_loops(self) -> List[MatrixLoop]:
        return [MatrixLoop.from_samples(p, radius=self.radius) for p in self.p_coeffs[1:]]

    def C_loop(self) -> MatrixLoop:
        return MatrixLoop.from_samples(self.c, radius=self.radius)

    def phi(self, z: complex, winding: int = 0) -> np.ndarray:
        """C·z^A·P(z) at the samples, log z = log|z| + i(Arg z + 2π·winding)."""
        log_z = complex(np.log(abs(z)), np.angle(z) + 2 * np.pi * winding)
        return self.c @ z_power_a(self.xi.residue.matrix(self.lam), log_z) @ self.P(z)

    def normal_form_at(self, z: complex, lam) -> np.ndarray:
        """z^A·P(z) at arbitrary λ, principal branch of log z."""
        lam = np.atleast_1d(np.asarray(lam, dtype=complex)).reshape(-1)
        log_z = complex(np.log(abs(z)), np.angle(z))
        return z_power_a(self.xi.residue.matrix(lam), log_z) @ self.P_at(z, lam)

    def coefficient_norms(self) -> np.ndarray:
        return np.max(op_norm(self.p_coeffs), axis=-1)

    def reconstruction_residual(self, z_radius: Optional[float] = None, n_points: int = 16) -> float:
        """sup ‖P′ + [A, P]/z − Pξ̃‖ / ‖P‖ over a z-circle, ξ̃ = ξ − A/z.

        This is the ODE residual of C·z^A·P with the factor C z^A stripped.
        """
        z_radius = 0.5 * self.xi.z_radius if z_radius is None else z_radius
        a_s, terms = self.xi.term_samples(self.lam)
        dp = series.derivative(self.p_coeffs)
        worst = 0.0
        for z in z_radius * np.exp(2j * np.pi * np.arange(n_points) / n_points):
            p = series.evaluate(self.p_coeffs, z)
            pz = series.evaluate(dp, z)
            rest = series.evaluate(terms, z) if len(terms) else np.zeros_like(p)
            res = pz + (a_s @ p - p @ a_s) / z - p @ rest
            worst = max(worst, float(np.max(op_norm(res) / op_norm(p))))
        return worst

    def to_dict(self) -> Dict:
        return {
            "K": self.K,
            "probe_error": self.probe_error,
            "coefficient_norms": self.coefficient_norms(),
            "reconstruction_residual": self.reconstruction_residual(),
            "domain_punctures": [p.lam for p in self.domain_punctures],
        }

    def stat(self):
        print(f"Statistics of {self!r}:")
        print(f"\t- truncation order K: {self.K}")
        print(f"\t- probe disagreement: {self.probe_error:.3e}")
        print(f"\t- |P_K|: {self.coefficient_norms()[-1]:.3e}")


def _check_resonance(xi: Potential) -> List[ResonancePoint]:
    r = xi.radius
    band = Annulus(r * (1 - RESONANCE_BAND), r * (1 + RESONANCE_BAND))
    points = spectral_data(xi.residue, band).resonance_points
    if points:
        raise ResonanceError(f"resonance point on C_{r:g} (k = {points[0].k})", lam=points[0].lam)
    return spectral_data(xi.residue, Annulus.disk(r)).resonance_points


def zap(
    xi: Potential,
    phi_probe: Optional[Callable] = None,
    K: Optional[int] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
    lam=None,
) -> ZapDecomposition:
    """z^A·P decomposition of a solution of dΦ = Φξ.

    P is computed by the recursion P_k = 𝓛_k⁻¹(Σ_{i+j=k−1} P_i B_j) per
    λ-sample. C = Φ(z₀)(z₀^A P(z₀))⁻¹ at z₀ = 0.5·z_radius, and the same at
    z₀e^{iπ/3} must agree.

    Args:
        xi: Potential.
        phi_probe: Optional callable (z, winding) ↦ Φ at the λ-samples, e.g.
            ``HolomorphicFrame.at``. If None, C = id.
        K: Optional[int], truncation order; default the perturbation order
            plus 8, increased until the last term is negligible at z₀.
        tol: Tolerances (probe, samples).
        lam: Optional λ-samples; default the M points of C_r.

    Returns:
        ZapDecomposition.

    Raises:
        ResonanceError: if C_r meets the resonance set.
        InconsistencyError: if the two probes disagree.
    """
    punctures = _check_resonance(xi)
    lam = xi.lam_samples(tol=tol) if lam is None else np.atleast_1d(np.asarray(lam, dtype=complex)).reshape(-1)
    n = xi.order if xi.order is not None else 0
    z0 = 0.5 * xi.z_radius
    order = (K if K is not None else n + EXTRA_TERMS) + 1
    p = zap_coefficients(xi, lam, order)
    if K is None:
        while order < MAX_TERMS:
            # last few terms, some powers may vanish identically
            tail = max(float(np.max(op_norm(p[k]))) * z0**k for k in range(max(1, order - 3), order))
            if tail < 0.1 * tol.probe:
                break
            order = min(MAX_TERMS, 2 * order)
            p = zap_coefficients(xi, lam, order)
        else:
            logging.warning(f"zap: coefficients still significant at order {order}")
    a_s = xi.residue.matrix(lam)

    def c_at(z):
        log_z = complex(np.log(abs(z)), np.angle(z))
        local = z_power_a(a_s, log_z) @ series.evaluate(p, z)
        return phi_probe(z, 0) @ inv2(local)

    if phi_probe is None:
        c = identity_like(lam.shape)
        probe_error = 0.0
    else:
        z1 = z0 * np.exp(1j * PROBE_ANGLE)
        c = c_at(z0)
        c1 = c_at(z1)
        probe_error = float(np.max(op_norm(c - c1) / np.maximum(1.0, op_norm(c))))
        if probe_error > tol.probe:
            raise InconsistencyError(f"zap probes disagree by {probe_error:.3e}")
    dec = ZapDecomposition(xi, lam, c, p, probe_error, punctures)
    logging.debug(f"zap: {dec!r}")
    return dec
