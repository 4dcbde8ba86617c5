import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from scipy.stats import linregress
from tqdm import tqdm

from pycmc.config import DEFAULT_TOLERANCES, Tolerances
from pycmc.delaunay.frame import DelaunayFrame
from pycmc.delaunay.residue import DelaunayResidue
from pycmc.exceptions import DomainError, PycmcError
from pycmc.iwasawa.factorization import iwasawa
from pycmc.loopcore.annulus import Annulus, circle_points
from pycmc.loopcore.functional import LoopFunction, evaluate
from pycmc.loopcore.linalg import IDENTITY, inv2, op_norm
from pycmc.potential.ode import UNITARITY_TOL, HolomorphicFrame, frame_monodromy, monodromy_unitarity
from pycmc.potential.potential import Potential
from pycmc.potential.zap import ZapDecomposition, zap

SLOPE_MARGIN = 0.1
# errors below this are round-off and excluded from slope fits
NOISE_FLOOR = 1e-13


@dataclass
class ConvergenceReport:
    """Outcome of ``frame_convergence``.

    Attributes:
        rows: DataFrame with columns z, arg, unitary_err, positive_err,
            cauchy_err, failure.
        n: Optional[int], perturbation order of ξ.
        floor: float, (n + 1) − 2·max Re μ on C_r.
        unitary_slope: float, fitted decay exponent of the unitary ratio.
        positive_slope: float, fitted decay exponent of the positive ratio.
        checks: Dict, direct route, monodromyFB and monodromy unitarity.
        passed: bool.
    """

    rows: pd.DataFrame
    n: Optional[int]
    floor: float
    unitary_slope: float = float("nan")
    positive_slope: float = float("nan")
    checks: Dict = field(default_factory=dict)
    passed: bool = False

    def to_dict(self) -> Dict:
        return {
            "n": self.n,
            "floor": self.floor,
            "unitary_slope": self.unitary_slope,
            "positive_slope": self.positive_slope,
            "checks": self.checks,
            "passed": self.passed,
            "rows": self.rows.to_dict(orient="list"),
        }

    def to_csv(self, path: str):
        self.rows[["z", "arg", "unitary_err", "positive_err", "cauchy_err"]].to_csv(
            path, float_format="%.17g", index=False
        )

    def stat(self):
        print("Statistics of frame convergence:")
        print(f"\t- number of depths: {len(self.rows)}")
        print(f"\t- perturbation order: {self.n}")
        print(f"\t- slope floor: {self.floor:.4f}")
        print(f"\t- unitary slope: {self.unitary_slope:.4f}")
        print(f"\t- positive slope: {self.positive_slope:.4f}")
        print(f"\t- passed: {self.passed}")


def _fit_slope(z_abs: np.ndarray, errs: np.ndarray) -> float:
    ok = np.isfinite(errs) & (errs > NOISE_FLOOR)
    if ok.sum() < 2:
        return float("nan")
    return float(linregress(np.log(z_abs[ok]), np.log(errs[ok])).slope)


class _FactoredFrame:
    """Φ(z) = C·F₀·Q·B₀ with Q = B₀PB₀⁻¹ at one point z = e^{x+iy}."""

    def __init__(self, dec: ZapDecomposition, frame: DelaunayFrame, c, z: complex):
        self.dec = dec
        self.frame = frame
        self.c = c
        self.z = complex(z)
        self.x = float(np.log(abs(z)))
        self.y = float(np.angle(z))

    def _c(self, lam):
        return IDENTITY if self.c is None else evaluate(self.c, lam)

    def reference(self, lam):
        """C·F₀ at λ."""
        return self._c(lam) @ self.frame.unitary_at(self.x, self.y, lam)

    def perturbed(self, lam):
        """C·F₀·Q at λ."""
        f0, b0 = self.frame.factors(self.x, self.y, lam)
        q = b0 @ self.dec.P_at(self.z, lam) @ inv2(b0)
        return self._c(lam) @ f0 @ q


def _initial_function(dec: ZapDecomposition, c, z0: complex):
    """λ ↦ Φ(z₀) = C z₀^A P(z₀)."""

    def func(lam):
        init = dec.normal_form_at(z0, lam)
        return init if c is None else evaluate(c, lam) @ init

    return func


def _phi_function(xi: Potential, dec: ZapDecomposition, c, z: complex, winding: int, tol: Tolerances):
    """λ ↦ Φ(z) by the z-ODE from Φ(z₀) = C z₀^A P(z₀)."""
    z0 = 0.5 * xi.z_radius
    initial = _initial_function(dec, c, z0)

    def func(lam):
        return HolomorphicFrame(xi, lam, z0, initial(lam), tol).at(z, winding)

    return func


def _monodromy_unitarity(xi: Potential, dec: ZapDecomposition, c, tol: Tolerances) -> float:
    """Unitarity defect on C_r of the monodromy of Φ = C z^A P."""
    z0 = 0.5 * xi.z_radius
    return monodromy_unitarity(frame_monodromy(xi, _initial_function(dec, c, z0), z0, tol), xi.radius)


def frame_convergence(
    xi: Potential,
    z_sequence,
    res: Optional[DelaunayResidue] = None,
    c=None,
    tol: Tolerances = DEFAULT_TOLERANCES,
    direct_check: bool = True,
    n_angular: int = 64,
    verbose: bool = True,
) -> ConvergenceReport:
    """Convergence of the perturbed frame to the Delaunay frame as z → 0.

    For Φ = C z^A P with unitary monodromy, the ratios
    Uni_r(CΦ₀)⁻¹Uni_r(Φ) (on 𝒜_r) and Pos_r(Φ)Pos_r(CΦ₀)⁻¹ (on 𝒟_r)
    tend to id, Φ₀ = exp(A log z). With F₀, B₀ the r = 1 factors of Φ₀,
    Φ = C·F₀·(B₀PB₀⁻¹)·B₀ and B₀ is positive with B₀(0) ∈ 𝒯, so
    Uni_r(Φ) = Uni_r(CF₀Q) and Pos_r(Φ) = Pos_r(CF₀Q)B₀: only the moderately
    growing loops CF₀Q and CF₀ are factored.

    Args:
        xi: Potential, ξ = A dz/z + O(zⁿ)dz.
        z_sequence: array of z with |z| decreasing towards 0.
        res: Optional[DelaunayResidue], defaults to ``xi.residue``.
        c: optional loop-like C (identity if None).
        tol: Tolerances.
        direct_check: bool, also factor Φ from the z-ODE at the shallowest z
            and compare, and check Pos at z and z·e^{2πi}.
        n_angular: int, angular samples of 𝒜_r and 𝒟_r.
        verbose: bool, show a progress bar.

    Returns:
        ConvergenceReport.

    Raises:
        DomainError: if max Re μ >= (n + 1)/2 on C_r.
        ResonanceError: if C_r meets the resonance set.
    """
    res = xi.residue if res is None else res
    r = xi.radius
    z_sequence = np.atleast_1d(np.asarray(z_sequence, dtype=complex))
    lam_r = circle_points(r, tol.samples)
    max_re_mu = float(res.mu(lam_r).real.max())
    n = xi.order
    floor = (n if n is not None else np.inf) + 1 - 2 * max_re_mu
    if n is not None and floor <= 0:
        raise DomainError(
            f"max Re μ = {max_re_mu:.6g} >= (n + 1)/2 = {(n + 1) / 2:g}; normalize the potential first"
        )
    dec = zap(xi, tol=tol)
    frame = DelaunayFrame(res, route="ode", tol=tol)
    annulus = Annulus.symmetric(r)
    ann_lam = annulus.samples(3 if r < 1 else 1, n_angular)
    disk_lam = Annulus.disk(r).samples(4, n_angular)
    sub_lam = circle_points(1.0, n_angular)
    skip_reference = c is None and r == 1.0

    rows: List[Dict] = []
    for z in tqdm(z_sequence, desc="frame convergence", disable=not verbose):
        row = {"z": abs(z), "arg": float(np.angle(z)), "failure": ""}
        try:
            ff = _FactoredFrame(dec, frame, c, z)
            pair_q = iwasawa(LoopFunction(ff.perturbed, radius=r), r, tol)
            if skip_reference:
                u0 = LoopFunction(ff.reference, radius=r)
                p0_disk = np.broadcast_to(IDENTITY, disk_lam.shape + (2, 2))
            else:
                pair_0 = iwasawa(LoopFunction(ff.reference, radius=r), r, tol)
                u0 = LoopFunction(pair_0.unitary.eval, radius=r)
                p0_disk = pair_0.positive_at(disk_lam)
            ratio = LoopFunction(lambda lam: inv2(u0.eval(lam)) @ pair_q.unitary_at(lam), radius=r)
            row["unitary_err"] = float(np.max(op_norm(ratio.eval(ann_lam) - IDENTITY)))
            row["positive_err"] = float(np.max(op_norm(pair_q.positive_at(disk_lam) @ inv2(p0_disk) - IDENTITY)))
            row["cauchy_err"] = float(np.max(op_norm(ratio.theta_derivative(sub_lam))))
        except PycmcError as e:
            logging.warning(f"frame_convergence: failure at |z| = {abs(z):.3e}: {e}")
            row.update(unitary_err=np.nan, positive_err=np.nan, cauchy_err=np.nan, failure=str(e))
        rows.append(row)
    table = pd.DataFrame(rows)
    z_abs = table["z"].to_numpy()
    report = ConvergenceReport(
        rows=table,
        n=n,
        floor=float(floor),
        unitary_slope=_fit_slope(z_abs, table["unitary_err"].to_numpy()),
        positive_slope=_fit_slope(z_abs, table["positive_err"].to_numpy()),
    )
    report.checks["monodromy_unitarity"] = _monodromy_unitarity(xi, dec, c, tol)
    if direct_check:
        z_shallow = z_sequence[np.argmax(np.abs(z_sequence))]
        report.checks.update(_direct_checks(xi, dec, frame, c, z_shallow, tol, disk_lam, ann_lam))
    report.passed = _judge(report)
    logging.info(
        f"frame_convergence: slopes {report.unitary_slope:.3f} / {report.positive_slope:.3f}, "
        f"floor {report.floor:.3f}, passed {report.passed}"
    )
    return report


def _direct_checks(xi, dec, frame, c, z, tol, disk_lam, ann_lam) -> Dict:
    r = xi.radius
    out: Dict = {}
    try:
        pair = iwasawa(LoopFunction(_phi_function(xi, dec, c, z, 0, tol), radius=r), r, tol)
        ff = _FactoredFrame(dec, frame, c, z)
        pair_q = iwasawa(LoopFunction(ff.perturbed, radius=r), r, tol)
        out["direct_unitary_error"] = float(
            np.max(op_norm(pair.unitary_at(ann_lam) - pair_q.unitary_at(ann_lam)))
        )
        _, b0 = frame.factors(np.log(abs(z)), 0.0, disk_lam[disk_lam != 0])
        pos_direct = pair.positive_at(disk_lam[disk_lam != 0])
        pos_factored = pair_q.positive_at(disk_lam[disk_lam != 0]) @ b0
        out["direct_positive_error"] = float(
            np.max(op_norm(pos_direct - pos_factored) / np.maximum(1.0, op_norm(pos_direct)))
        )
        pair_w = iwasawa(LoopFunction(_phi_function(xi, dec, c, z, 1, tol), radius=r), r, tol)
        out["monodromy_fb_error"] = float(
            np.max(op_norm(pair_w.positive_at(disk_lam) @ inv2(pair.positive_at(disk_lam)) - IDENTITY))
        )
    except PycmcError as e:
        logging.warning(f"frame_convergence: direct route failed: {e}")
        out["direct_failure"] = str(e)
    return out


def _judge(report: ConvergenceReport) -> bool:
    table = report.rows
    if table["failure"].astype(bool).any():
        return False
    if report.n is None:
        ok = bool(np.nanmax(table[["unitary_err", "positive_err"]].to_numpy()) < 1e-8)
    else:
        floor = report.floor - SLOPE_MARGIN
        slopes = [s for s in (report.unitary_slope, report.positive_slope) if np.isfinite(s)]
        ok = all(s >= floor for s in slopes)
    checks = report.checks
    ok = ok and checks.get("monodromy_unitarity", 0.0) < UNITARITY_TOL
    ok = ok and checks.get("monodromy_fb_error", 0.0) < 1e-8
    return bool(ok and "direct_failure" not in checks)
