"""Numerical checks of how simple factors behave along Delaunay ends.

All reports are plain dicts or DataFrames so they can be written next to
the other verification artifacts.
"""

import logging
from typing import Callable, Dict, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import linregress

from pycmc.delaunay.frame import DelaunayFrame
from pycmc.delaunay.residue import DelaunayResidue
from pycmc.dressing.dress import dress, eigenline, h_line
from pycmc.dressing.simple_factor import SimpleFactor, cp1_distance, sandwich, unitarity_residual
from pycmc.exceptions import DegenerateError
from pycmc.loopcore.annulus import circle_points
from pycmc.loopcore.functional import evaluate
from pycmc.loopcore.linalg import IDENTITY, contour_coefficient, expm_traceless, inv2, op_norm

# distances below this are at round-off level and excluded from rate fits
DISTANCE_FLOOR = 1e-12


def default_region(lam0: complex, m: int = 32) -> np.ndarray:
    """S¹ and the circle of radius |λ0|/2, both away from λ0 and 1/λ̄0."""
    return np.concatenate([circle_points(1.0, m, offset=0.5), circle_points(0.5 * abs(lam0), m, offset=0.5)])


def _ratio_deviation(h1: SimpleFactor, h2: SimpleFactor, lam) -> float:
    ratio = sandwich(h1, np.broadcast_to(IDENTITY, lam.shape + (2, 2)), h2, lam)
    return float(np.max(op_norm(ratio - IDENTITY)))


def simple_factor_limit_check(
    L1_seq: Sequence,
    L2_seq: Sequence,
    lam0: complex,
    region=None,
) -> Dict:
    """sup ‖h₁h₂⁻¹ − id‖ over a region along two sequences of lines.

    Args:
        L1_seq: sequence of 2-vectors.
        L2_seq: sequence of 2-vectors, same length.
        lam0: complex, common singularity.
        region: Optional array of λ away from λ0 and 1/λ̄0.

    Returns:
        report: Dict with ``rows`` (DataFrame index, line_distance,
        deviation, norm_ratio), ``decaying`` and ``bounded``.
    """
    assert len(L1_seq) == len(L2_seq), "line sequences must have equal length"
    lam = default_region(lam0) if region is None else np.asarray(region, dtype=complex).reshape(-1)
    rows = []
    for i, (l1, l2) in enumerate(zip(L1_seq, L2_seq)):
        h1 = SimpleFactor.normalized(lam0, l1)
        h2 = SimpleFactor.normalized(lam0, l2)
        norm_ratio = float(np.max(op_norm(h1.eval(lam)) / h1.norm_bound(lam)))
        rows.append(
            {
                "index": i,
                "line_distance": cp1_distance(l1, l2),
                "deviation": _ratio_deviation(h1, h2, lam),
                "norm_ratio": norm_ratio,
            }
        )
    rows = pd.DataFrame(rows)
    dev = rows["deviation"].to_numpy()
    decaying = bool(len(dev) < 2 or dev[-1] <= dev[0] + 1e-12)
    bounded = bool(np.all(rows["norm_ratio"] <= 1 + 1e-9))
    return {"rows": rows, "decaying": decaying, "bounded": bounded}


def exp_limit_check(res: DelaunayResidue, lam0: complex, L, x_sequence) -> Dict:
    """Distance of exp(xA(λ0))·L to the (−μ)-eigenline as x → −∞.

    Raises:
        DegenerateError: if μ(λ0) = 0 or L is the (+μ)-eigenline, which
            exp(xA) fixes.
    """
    mu0 = complex(res.mu(lam0))
    if abs(mu0) < 1e-8:
        raise DegenerateError(f"μ vanishes at λ0 = {lam0}")
    a0 = res.matrix(np.array([lam0]))[0]
    l_plus, l_minus = eigenline(a0, mu0), eigenline(a0, -mu0)
    if cp1_distance(L, l_plus) < 1e-8:
        raise DegenerateError("the line is the fixed eigenline of exp(xA(λ0))")
    xs = np.asarray(x_sequence, dtype=float)
    dist = np.array([cp1_distance(expm_traceless(x * a0) @ np.asarray(L, dtype=complex), l_minus) for x in xs])
    ok = dist > DISTANCE_FLOOR
    rate = linregress(np.abs(xs[ok]), np.log(dist[ok])).slope if ok.sum() >= 2 else np.nan
    return {
        "rows": pd.DataFrame({"x": xs, "distance": dist}),
        "rate": float(rate),
        "expected_rate": float(-2 * mu0.real),
        "l_minus": l_minus,
    }


def bubbleton_asymptotics_check(
    res: DelaunayResidue,
    lam0: complex,
    L1,
    L2,
    x_sequence,
    y: float = 0.0,
    region=None,
    frame: Optional[DelaunayFrame] = None,
) -> Dict:
    """Compares two bubbletons dressed with lines L1, L2 at the same λ0.

    With F_i = g_i F h_i⁻¹ the two comparison quantities are
    F₁⁻¹(g₁g₂⁻¹)F₂ and Pos₁Pos₂⁻¹; both equal h₁h₂⁻¹, which tends to id as
    x → −∞ because both lines F(x, λ0)⁻¹L_i approach the (+μ)-eigenline.

    Raises:
        DegenerateError: if L1 or L2 is the excluded (−μ)-eigenline.
    """
    mu0 = complex(res.mu(lam0))
    a0 = res.matrix(np.array([lam0]))[0]
    excluded = eigenline(a0, -mu0)
    for line in (L1, L2):
        if cp1_distance(line, excluded) < 1e-8:
            raise DegenerateError("bubbleton lines must differ from the (−μ)-eigenline of A(λ0)")
    frame = frame if frame is not None else DelaunayFrame(res)
    # off S¹ the r = 1 frame grows with |x|
    lam = circle_points(1.0, 32, offset=0.5) if region is None else np.asarray(region, dtype=complex).reshape(-1)
    g1 = SimpleFactor.normalized(lam0, L1)
    g2 = SimpleFactor.normalized(lam0, L2)
    g12 = sandwich(g1, np.broadcast_to(IDENTITY, lam.shape + (2, 2)), g2, lam)
    rows = []
    for x in np.asarray(x_sequence, dtype=float):
        f0 = frame.unitary_at(x, y, np.array([lam0]))[0]
        h1 = SimpleFactor.normalized(lam0, h_line(f0, L1))
        h2 = SimpleFactor.normalized(lam0, h_line(f0, L2))
        f = frame.unitary_at(x, y, lam)
        f1 = sandwich(g1, f, h1, lam)
        f2 = sandwich(g2, f, h2, lam)
        uni = float(np.max(op_norm(inv2(f1) @ g12 @ f2 - IDENTITY)))
        rows.append(
            {
                "x": x,
                "unitary_comparison": uni,
                "positive_comparison": _ratio_deviation(h1, h2, lam),
                "line_distance": cp1_distance(h1.line, h2.line),
            }
        )
    rows = pd.DataFrame(rows)
    uni = rows["unitary_comparison"].to_numpy()
    decaying = bool(len(uni) < 2 or uni[-1] <= uni[0] + 1e-12)
    logging.info(f"bubbleton asymptotics at λ0 = {lam0:.6g}: final comparison {uni[-1]:.3e}")
    return {
        "rows": rows,
        "decaying": decaying,
        "exp_limit": (
            exp_limit_check(res, lam0, L1, x_sequence) if cp1_distance(L1, eigenline(a0, mu0)) > 1e-8 else None
        ),
    }


def conjugation_check(g1: SimpleFactor, g2: SimpleFactor, X, m: int = 64) -> Dict:
    """Removability and star symmetry of g₁·X·g₂⁻¹ for factors with one λ0.

    Returns:
        report: Dict with the relative index −1 coefficients at λ0 and at
        1/λ̄0, the line condition dist(X(λ0)L₂, L₁), and the unitarity and
        hermitian residuals of X and of the product on S¹.
    """
    if abs(g1.lam0 - g2.lam0) > 1e-14:
        raise DegenerateError("conjugation_check needs factors with a common singularity")
    lam0, lam1 = g1.lam0, g1.f.lam1

    def product(lam):
        lam = np.asarray(lam, dtype=complex)
        return sandwich(g1, evaluate(X, lam), g2, lam)

    poles = {}
    for key, center in (("pole_lam0", lam0), ("pole_lam1", lam1)):
        rho = 0.3 * min(abs(center), abs(lam1) - abs(lam0))
        c_m1 = contour_coefficient(product, center, rho, k=-1, m=m)
        c_0 = contour_coefficient(product, center, rho, k=0, m=m)
        poles[key] = float(op_norm(c_m1) / max(1.0, op_norm(c_0)))
    x0 = evaluate(X, np.array([lam0]))[0]
    s1 = circle_points(1.0, m, offset=0.5)
    xs, ps = evaluate(X, s1), product(s1)
    x_star = np.conj(np.swapaxes(xs, -1, -2))
    p_star = np.conj(np.swapaxes(ps, -1, -2))
    return {
        **poles,
        "line_condition": cp1_distance(x0 @ g2.line, g1.line),
        "x_unitarity": float(np.max(op_norm(x_star @ xs - IDENTITY))),
        "x_hermitian": float(np.max(op_norm(x_star - xs))),
        "unitarity": unitarity_residual(product, s1),
        "hermitian": float(np.max(op_norm(p_star - ps))),
    }


def bridge_check(F1, F2, lam0: complex, L, region=None) -> Dict:
    """Dresses two nearby unitary frames by one factor and compares.

    Returns:
        report: Dict with ``before`` = sup ‖F₂⁻¹F₁ − id‖, ``unitary_after`` =
        sup ‖F̃₂⁻¹F̃₁ − id‖ and ``positive_after`` = sup ‖h₁h₂⁻¹ − id‖.
    """
    lam = circle_points(1.0, 32, offset=0.5) if region is None else np.asarray(region, dtype=complex).reshape(-1)
    g = SimpleFactor.normalized(lam0, L)
    d1, d2 = dress(g, F1), dress(g, F2)
    before = float(np.max(op_norm(inv2(evaluate(F2, lam)) @ evaluate(F1, lam) - IDENTITY)))
    after = float(np.max(op_norm(inv2(d2.unitary(lam)) @ d1.unitary(lam) - IDENTITY)))
    return {
        "before": before,
        "unitary_after": after,
        "positive_after": _ratio_deviation(d1.h, d2.h, lam),
        "line_distance": cp1_distance(d1.h.line, d2.h.line),
    }


def dressed_positive_factory(res: DelaunayResidue, g: SimpleFactor, frame: Optional[DelaunayFrame] = None) -> Callable:
    """z ↦ (λ ↦ h(z)·B(z)(λ)), the positive factor of g·exp(A log z).

    Feeds ``growth_measure`` to check that dressing keeps the growth bound.
    """
    frame = frame if frame is not None else DelaunayFrame(res)

    def factory(z):
        x, y = float(np.log(abs(z))), float(np.angle(z))
        f0 = frame.unitary_at(x, y, np.array([g.lam0]))[0]
        h = SimpleFactor.normalized(g.lam0, h_line(f0, g.line))
        return lambda lam: h.eval(lam) @ frame.positive_at(x, lam)

    return factory
