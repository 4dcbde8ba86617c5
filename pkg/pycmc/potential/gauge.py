"""Positive gauges and coordinate changes that normalize a potential.

A potential is handled through zξ as a z-series over λ-samples (leading
coefficient A). A gauge g acts by ξ.g = g⁻¹ξg + g⁻¹dg, i.e.

    z(ξ.g) = g⁻¹(zξ)g + g⁻¹·z g′,

and a coordinate change z = t(w) pulls zξ back to E(t(w))·w t′(w)/t(w).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from pycmc.config import DEFAULT_TOLERANCES, Tolerances
from pycmc.exceptions import DomainError, HolomorphyError, ShrinkDomainError
from pycmc.loopcore.linalg import adj2, det2, identity_like, op_norm
from pycmc.loopcore.matrix_loop import MatrixLoop
from pycmc.potential import series
from pycmc.potential.lcalc import L_inverse, l_holo_residual
from pycmc.potential.ode import circle_path, integrate_path
from pycmc.potential.potential import Potential

DEFAULT_ORDER = 32
NEWTON_MAXITER = 50


@dataclass
class GaugeTransform:
    """A z-power series g(z, λ) = Σ g_k(λ) z^k with g_0 = id, det g = 1.

    Attributes:
        coeffs: array (order, n, 2, 2) over the λ-samples ``lam``.
        lam: array of λ-samples on C_r.
        radius: float, r.
        report: Dict, diagnostics of the construction.
    """

    coeffs: np.ndarray
    lam: np.ndarray
    radius: float
    report: Dict = field(default_factory=dict)

    @property
    def order(self) -> int:
        return len(self.coeffs)

    def __repr__(self):
        return f"GaugeTransform(order={self.order}, n_lambda={self.lam.size}, r={self.radius:g})"

    @classmethod
    def identity(cls, lam, order: int, radius: float) -> "GaugeTransform":
        coeffs = np.zeros((order, len(lam), 2, 2), dtype=complex)
        coeffs[0] = identity_like((len(lam),))
        return cls(coeffs, np.asarray(lam), radius)

    @classmethod
    def from_leading(cls, c: np.ndarray, n: int, lam, order: int, radius: float) -> "GaugeTransform":
        """g = h + diag(q, 0), h = id + C zⁿ, q = (1 − det h)/h₂₂ as a series.

        With C traceless, 1 − det h = −det C·z^{2n} and
        1/h₂₂ = Σ_m (−C₂₂ zⁿ)^m.
        """
        g = cls.identity(lam, order, radius)
        coeffs = g.coeffs.copy()
        if n < order:
            coeffs[n] += c
        d = det2(c)
        term = -d
        k = 2 * n
        while k < order:
            coeffs[k, :, 0, 0] += term
            term = term * (-c[:, 1, 1])
            k += n
        return cls(coeffs, g.lam, radius)

    def at(self, z: complex) -> np.ndarray:
        return series.evaluate(self.coeffs, z)

    def loop_at(self, z: complex) -> MatrixLoop:
        return MatrixLoop.from_samples(self.at(z), radius=self.radius)

    def inverse_coeffs(self) -> np.ndarray:
        # det g = 1 as a series, so g⁻¹ is the coefficientwise adjugate
        return adj2(self.coeffs)

    def mul(self, other: "GaugeTransform") -> "GaugeTransform":
        return GaugeTransform(series.mat_mul(self.coeffs, other.coeffs), self.lam, self.radius)

    def det_error(self, z_radius: float, n_points: int = 16) -> float:
        worst = 0.0
        for z in z_radius * np.exp(2j * np.pi * np.arange(n_points) / n_points):
            worst = max(worst, float(np.max(np.abs(det2(self.at(z)) - 1))))
        return worst

    def negative_tail(self) -> float:
        """Largest λ-negative part of the coefficients (zero for a positive gauge)."""
        tails = [MatrixLoop.from_samples(c, radius=self.radius).negative_tail() for c in self.coeffs[1:] if np.any(c)]
        return max(tails) if tails else 0.0


def gauge_series(e: np.ndarray, g: GaugeTransform) -> np.ndarray:
    """z(ξ.g) from zξ (both as z-series)."""
    order = len(e)
    gc = g.coeffs[:order]
    ginv = adj2(gc)
    z_dg = np.arange(len(gc)).reshape(-1, 1, 1, 1) * gc
    return series.mat_mul(series.mat_mul(ginv, e, order), gc, order) + series.mat_mul(ginv, z_dg, order)


def gauge_action(xi: Potential, g: GaugeTransform) -> Potential:
    """ξ.g = g⁻¹ξg + g⁻¹dg, computed on the λ-samples of g.

    **Examples:**
        >>> from pycmc.delaunay import DelaunayResidue
        >>> from pycmc.loopcore import circle_points
        >>> xi = Potential(DelaunayResidue(0.3, 0.1))
        >>> g = GaugeTransform.identity(circle_points(1.0, 64), 8, 1.0)
        >>> gauge_action(xi, g).order is None
        True
    """
    e = xi.z_series(g.lam, g.order)
    return Potential.from_series(xi.residue, gauge_series(e, g), g.radius, xi.z_radius)


def _inequality(xi: Potential, lam, n: int) -> Tuple[float, float]:
    re_mu = xi.residue.mu(lam).real
    lo, hi = float(re_mu.min()), float(re_mu.max())
    if not (lo <= 0.5 * n < hi):
        raise DomainError(
            f"gauge normalization at order {n} needs min Re μ <= {n}/2 < max Re μ on C_r, "
            f"got [{lo:.6g}, {hi:.6g}]"
        )
    return lo, hi


def _kappa(res, b_loop: MatrixLoop) -> complex:
    return 0.5 * (b_loop.coefficient(-1)[0, 1] / res.a + b_loop.coefficient(0)[1, 0] / res.b)


def _normalize_series(
    xi: Potential, e: np.ndarray, n: int, lam: np.ndarray, tol: Tolerances
) -> Tuple[GaugeTransform, complex, np.ndarray]:
    res = xi.residue
    r = xi.radius
    _inequality(xi, lam, n)
    b_s = e[n]
    b_loop = MatrixLoop.from_samples(b_s, radius=r)
    kappa = complex(_kappa(res, b_loop))
    a_s = e[0]
    x_s = kappa * a_s - b_s
    holo_tol = max(tol.equality, 1e-9)
    holo_residual = l_holo_residual(res.loop(r), MatrixLoop.from_samples(x_s, radius=r), tol=holo_tol)
    if not holo_residual < holo_tol:
        raise HolomorphyError(
            f"normalize_gauge: κA − B keeps a λ⁻¹ term of size {holo_residual:.3e} at order {n}",
            n=n,
            residual=holo_residual,
        )
    c = L_inverse(a_s, n, x_s, lam=lam)
    c22_max = float(np.abs(c[:, 1, 1]).max())
    if c22_max * xi.z_radius**n >= 1.0:
        safe = (1.0 / c22_max) ** (1.0 / n) if c22_max > 0 else np.inf
        raise ShrinkDomainError(
            f"h₂₂ = 1 + C₂₂zⁿ vanishes on |z| <= {xi.z_radius:g}; use z_radius < {safe:.6g}"
        )
    g = GaugeTransform.from_leading(c, n, lam, len(e), r)
    e_new = gauge_series(e, g)
    kappa_residual = float(np.max(op_norm(e_new[n] - kappa * a_s)))
    g.report = {
        "n": n,
        "kappa": kappa,
        "holomorphic_residual": holo_residual,
        "trace_max": float(np.abs(c[:, 0, 0] + c[:, 1, 1]).max()),
        "det_error": g.det_error(0.5 * xi.z_radius),
        "kappa_residual": kappa_residual,
        "negative_tail": g.negative_tail(),
    }
    logging.debug(f"normalize_gauge: order {n}, κ = {kappa:.6g}, residual {kappa_residual:.2e}")
    return g, kappa, e_new


def normalize_gauge(
    xi: Potential,
    n: int,
    order: Optional[int] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Tuple[GaugeTransform, complex, Potential]:
    """Gauge the z^{n−1} coefficient B of ξ into κA.

    κ = ½(lim_{λ→0} B₁₂/A₁₂ + B₂₁/A₂₁) makes C = 𝓛ₙ⁻¹(κA − B)
    λ-holomorphic; g = h + diag(q, 0) with h = id + Czⁿ has det g = 1.

    Args:
        xi: Potential with ξ = A dz/z + O(z^{n−1})dz.
        n: int >= 1.
        order: Optional[int], z-series length.
        tol: Tolerances.

    Returns:
        (g, κ, ξ′): GaugeTransform (diagnostics in ``g.report``), κ and
        ξ′ = ξ.g = A dz/z + κA z^{n−1}dz + O(zⁿ)dz.

    Raises:
        DomainError: if min Re μ <= n/2 < max Re μ fails on C_r.
        ShrinkDomainError: if h₂₂ vanishes on the z-disk.
    """
    assert n >= 1, "normalization order must be >= 1"
    order = order or max(DEFAULT_ORDER, xi.degree + 2, 3 * n + 2)
    lam = xi.lam_samples(tol=tol)
    e = xi.z_series(lam, order)
    g, kappa, e_new = _normalize_series(xi, e, n, lam, tol)
    return g, kappa, Potential.from_series(xi.residue, e_new, xi.radius, xi.z_radius)


@dataclass
class CoordinateChange:
    """w = σ(z) = z + (κ/n) z^{n+1}.

    Pulling (z⁻¹ + κz^{n−1})dz back by z = σ⁻¹(w) gives w⁻¹dw + O(w^{2n−1})dw.

    Attributes:
        kappa: complex.
        n: int >= 1.
        radius: float, disk on which σ must be invertible.
    """

    kappa: complex
    n: int
    radius: float = 1.0

    def __post_init__(self):
        assert self.n >= 1, "coordinate change order must be >= 1"
        # |σ′ − 1| < 1 on the disk makes σ injective there
        if abs(self.kappa) * (self.n + 1) / self.n * self.radius**self.n >= 1.0:
            raise ShrinkDomainError(
                f"σ(z) = z + ({self.kappa:.4g}/{self.n})z^{self.n + 1} is not invertible on |z| <= {self.radius:g}"
            )

    def forward(self, z):
        z = np.asarray(z, dtype=complex)
        return z + (self.kappa / self.n) * z ** (self.n + 1)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return 1 + self.kappa * (self.n + 1) / self.n * z**self.n

    def inverse(self, w, tol: float = 1e-15):
        """z with σ(z) = w, by Newton's method from z = w."""
        w = np.asarray(w, dtype=complex)
        z = w.copy()
        for _ in range(NEWTON_MAXITER):
            step = (self.forward(z) - w) / self.derivative(z)
            z = z - step
            if np.all(np.abs(step) <= tol * np.maximum(1.0, np.abs(w))):
                return z
        raise ShrinkDomainError(f"Newton inverse of σ did not converge (last step {np.max(np.abs(step)):.2e})")

    def forward_series(self, order: int) -> np.ndarray:
        s = np.zeros(order, dtype=complex)
        s[1] = 1.0
        if self.n + 1 < order:
            s[self.n + 1] += self.kappa / self.n
        return s

    def inverse_series(self, order: int) -> np.ndarray:
        return series.reversion(self.forward_series(order), order)

    def pullback(self, e: np.ndarray) -> np.ndarray:
        """w·(pulled back ξ) from zξ, with z = σ⁻¹(w)."""
        order = len(e)
        t = self.inverse_series(order)
        dt = series.derivative(t)
        w_over_t = series.scalar_inv(np.concatenate([t[1:], [0]]), order)
        factor = series.scalar_mul(dt, w_over_t, order)
        return series.scale(factor, series.compose(e, t, order), order)

    def check(self, n_points: int = 64) -> Dict:
        """Newton round trip and the pulled back form on samples."""
        w = 0.5 * self.radius * np.exp(2j * np.pi * np.arange(n_points) / n_points)
        z = self.inverse(w)
        roundtrip = float(np.max(np.abs(self.forward(z) - w)))
        order = 2 * self.n + 4
        form = np.zeros(order, dtype=complex)
        form[0] = 1.0
        if self.n < order:
            form[self.n] = self.kappa
        pulled = self.pullback(form)
        pulled[0] -= 1.0
        residual = float(np.max(np.abs(pulled[1 : self.n + 1]))) if self.n >= 1 else 0.0
        return {"roundtrip": roundtrip, "pullback_residual": residual}


def coordinate_change(kappa: complex, n: int, radius: float = 1.0) -> CoordinateChange:
    return CoordinateChange(complex(kappa), n, radius)


@dataclass
class GaugePipelineResult:
    """Normalized potential with the composite gauge and coordinate map.

    Attributes:
        xi: Potential, the normalized potential in the w-coordinate.
        gauge: GaugeTransform, G(z) in the original coordinate, so that
            Ψ(σ(z)) = Φ(z)G(z).
        coordinate: array, the scalar series of the composite w = σ(z).
        changes: List[CoordinateChange], the individual steps.
        steps: List[Dict], per order diagnostics.
        monodromy_error: Optional[float], ‖M_Φ − M_Ψ‖ on the samples.
    """

    xi: Potential
    gauge: GaugeTransform
    coordinate: np.ndarray
    changes: List[CoordinateChange] = field(default_factory=list)
    steps: List[Dict] = field(default_factory=list)
    monodromy_error: Optional[float] = None

    def w_of_z(self, z: complex) -> complex:
        return complex(series.evaluate(self.coordinate, z))

    def to_dict(self) -> Dict:
        return {
            "steps": self.steps,
            "monodromy_error": self.monodromy_error,
            "order": self.xi.order,
        }

    def stat(self):
        print(f"Statistics of gauge pipeline ({len(self.steps)} steps):")
        for step in self.steps:
            print(f"\t- order {step['n']}: κ = {step['kappa']:.6g}, residual {step['kappa_residual']:.2e}")
        if self.monodromy_error is not None:
            print(f"\t- monodromy error: {self.monodromy_error:.3e}")


def _monodromy_error(
    xi: Potential, eta: Potential, gauge: GaugeTransform, coordinate: np.ndarray, tol: Tolerances
) -> float:
    lam = gauge.lam
    z_b = 0.25 * xi.z_radius
    phi_loop = integrate_path(xi, circle_path(z_b, 0.0, 2 * np.pi), identity_like(lam.shape), lam, tol)
    w_b = complex(series.evaluate(coordinate, z_b))
    theta = float(np.angle(w_b))
    g_b = gauge.at(z_b)
    psi_loop = integrate_path(eta, circle_path(abs(w_b), theta, theta + 2 * np.pi), g_b, lam, tol)
    m_psi = psi_loop @ adj2(g_b)
    return float(np.max(op_norm(m_psi - phi_loop)))


def gauge_pipeline(
    xi: Potential,
    n_target: int,
    order: Optional[int] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
    check_monodromy: bool = True,
) -> GaugePipelineResult:
    """Alternates normalize_gauge and coordinate_change for k = 1..n_target.

    The result satisfies Aw⁻¹dw + O(w^{n_target})dw. The composite gauge in
    the original coordinate is G(z) = g₁(z)·g₂(σ₁(z))·…, the composite map
    w = σ_n ∘ … ∘ σ₁(z).

    Args:
        xi: Potential with ξ = A dz/z + O(z⁰)dz.
        n_target: int >= 1.
        order: Optional[int], z-series length.
        tol: Tolerances.
        check_monodromy: bool, compare the monodromies of Φ and Ψ.

    Raises:
        DomainError: if min Re μ <= ½ and n_target/2 < max Re μ fail on C_r.
    """
    assert n_target >= 1, "n_target must be >= 1"
    order = order or max(DEFAULT_ORDER, xi.degree + 2, 4 * n_target + 4)
    lam = xi.lam_samples(tol=tol)
    re_mu = xi.residue.mu(lam).real
    if not (re_mu.min() <= 0.5 and 0.5 * n_target < re_mu.max()):
        raise DomainError(
            f"gauge pipeline needs min Re μ <= 1/2 and {n_target}/2 < max Re μ on C_r, "
            f"got [{re_mu.min():.6g}, {re_mu.max():.6g}]"
        )
    e = xi.z_series(lam, order)
    total = GaugeTransform.identity(lam, order, xi.radius)
    coordinate = np.zeros(order, dtype=complex)
    coordinate[1] = 1.0
    changes, steps = [], []
    current = xi
    for k in range(1, n_target + 1):
        g, kappa, e = _normalize_series(current, e, k, lam, tol)
        total = GaugeTransform(
            series.mat_mul(total.coeffs, series.compose(g.coeffs, coordinate, order), order), lam, xi.radius
        )
        cc = coordinate_change(kappa, k, xi.z_radius)
        e = cc.pullback(e)
        coordinate = series.compose(cc.forward_series(order), coordinate, order)
        changes.append(cc)
        steps.append(dict(g.report, **cc.check()))
        current = Potential.from_series(xi.residue, e, xi.radius, xi.z_radius)
    result = GaugePipelineResult(current, total, coordinate, changes, steps)
    if check_monodromy:
        result.monodromy_error = _monodromy_error(xi, current, total, coordinate, tol)
        logging.info(f"gauge_pipeline: monodromy preserved to {result.monodromy_error:.3e}")
    return result
