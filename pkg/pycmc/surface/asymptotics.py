"""Harness measuring how a perturbed end approaches its Delaunay model.

Windows are one period ρ long and counted from the top of the mesh
downwards, window k covering x ∈ (x_max − (k+1)ρ, x_max − kρ]. Each window
is aligned to the reference window by its own rigid motion.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import linregress
from tqdm import tqdm

from pycmc.config import DEFAULT_TOLERANCES, Tolerances
from pycmc.exceptions import AlignmentError
from pycmc.potential.gauge import GaugeTransform, gauge_action
from pycmc.potential.potential import Potential
from pycmc.surface.alignment import fit_screw, procrustes
from pycmc.surface.mesh import SurfaceMesh, build_mesh, make_grid, x_derivative
from pycmc.surface.sources import PotentialSource
from pycmc.surface.sym import stencil, sym_from_stencil

COLUMNS = ["window_k", "c0_dev", "c1_dev", "c1_dev_2h", "metric_ratio_dev", "normal_dev"]
DEV_COLUMNS = ["c0_dev", "c1_dev", "metric_ratio_dev", "normal_dev"]
# deviations below this are round-off and excluded from slope fits
NOISE_FLOOR = 1e-13
# step of the finite differences in associated_family_check
FORM_STEP = 1e-3
# f′(0) ≈ Σ w_j f(d_j)/h for d = (−2, −1, 1, 2)·h
FOURTH_ORDER_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12


@dataclass
class EndAsymptoticsReport:
    """Outcome of ``end_asymptotics``.

    Attributes:
        rows: DataFrame with one row per window (see ``COLUMNS``).
        slopes: Dict, fitted slope of log(deviation) against k per column.
        monotone_tail: Dict, whether each deviation decreases over the last
            ``tail`` windows.
        final: Dict, deviations at the deepest window.
    """

    rows: pd.DataFrame
    period: float
    slopes: Dict = field(default_factory=dict)
    monotone_tail: Dict = field(default_factory=dict)
    final: Dict = field(default_factory=dict)

    def passed(self, threshold: float = 1e-3) -> bool:
        return bool(all(self.monotone_tail.values()) and all(v < threshold for v in self.final.values()))

    def to_dict(self) -> Dict:
        return {
            "period": self.period,
            "slopes": self.slopes,
            "monotone_tail": self.monotone_tail,
            "final": self.final,
            "rows": self.rows.to_dict(orient="list"),
        }

    def to_csv(self, path: str):
        self.rows[COLUMNS].to_csv(path, float_format="%.17g", index=False)

    def stat(self):
        print("Statistics of end asymptotics:")
        print(f"\t- number of windows: {len(self.rows)}")
        for key in DEV_COLUMNS:
            print(f"\t- {key}: final {self.final.get(key, np.nan):.3e}, slope {self.slopes.get(key, np.nan):.4f}")


def _fit_slope(k: np.ndarray, dev: np.ndarray) -> float:
    ok = np.isfinite(dev) & (dev > NOISE_FLOOR)
    if ok.sum() < 2:
        return float("nan")
    return float(linregress(k[ok], np.log(dev[ok])).slope)


def _monotone(dev: np.ndarray, tail: int) -> bool:
    d = dev[-tail:]
    d = d[np.isfinite(d)]
    # round-off plateaus count as decreasing
    return bool(np.all((np.diff(d) <= 0) | (d[1:] < 1e2 * NOISE_FLOOR)))


def _sup(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.nanmax(values)) if np.any(np.isfinite(values)) else float("nan")


def _window_deviation(mesh, reference, sel, fx, fy, fx2, rx, ry, rx2) -> Dict:
    R, t, c0 = procrustes(mesh.points[sel], reference.points[sel])
    rot = lambda v: v[sel] @ R.T
    c1 = max(
        _sup(np.linalg.norm(rot(fx) - rx[sel], axis=-1)),
        _sup(np.linalg.norm(rot(fy) - ry[sel], axis=-1)),
    )
    c1_2h = max(
        _sup(np.linalg.norm(rot(fx2) - rx2[sel], axis=-1)),
        _sup(np.linalg.norm(rot(fy) - ry[sel], axis=-1)),
    )
    metric = _sup(np.abs(mesh.metric[sel] / reference.metric[sel] - 1))
    n_rot = rot(mesh.normals)
    # the orientation of the normal is a convention of each source
    normal = min(
        _sup(np.linalg.norm(n_rot - s * reference.normals[sel], axis=-1)) for s in (1.0, -1.0)
    )
    return {"c0_dev": c0, "c1_dev": c1, "c1_dev_2h": c1_2h, "metric_ratio_dev": metric, "normal_dev": normal}


def end_asymptotics(
    mesh: SurfaceMesh,
    reference: SurfaceMesh,
    period: float,
    windows: Optional[int] = None,
    tail: int = 5,
    verbose: bool = True,
) -> EndAsymptoticsReport:
    """Per-window deviations of a perturbed mesh from its Delaunay model.

    Args:
        mesh: perturbed SurfaceMesh.
        reference: Delaunay SurfaceMesh on the same grid.
        period: float, ρ.
        windows: Optional[int], number of windows (default: as many as fit).
        tail: int, number of deepest windows that must be monotone.
        verbose: bool.

    Returns:
        EndAsymptoticsReport.

    Raises:
        AlignmentError: if a window cannot be aligned.
    """
    assert mesh.shape == reference.shape, "mesh and reference must share the grid"
    assert np.allclose(mesh.xs, reference.xs) and np.allclose(mesh.ys, reference.ys), "grids differ"
    xs = mesh.xs
    n_fit = int(np.floor((xs[-1] - xs[0]) / period + 1e-9))
    windows = n_fit if windows is None else min(windows, n_fit)
    if windows < 1:
        raise AlignmentError(f"the x range is shorter than one period {period:.6g}")
    fx, fy = mesh.tangents()
    rx, ry = reference.tangents()
    fx2 = x_derivative(mesh.points, mesh.hx, step=2)
    rx2 = x_derivative(reference.points, reference.hx, step=2)
    rows = []
    for k in tqdm(range(windows), desc="end asymptotics", disable=not verbose):
        top = xs[-1] - k * period
        cols = (xs <= top + 1e-12) & (xs > top - period + 1e-12)
        sel = np.zeros(mesh.shape, dtype=bool)
        sel[cols] = True
        sel &= ~(mesh.failures | reference.failures)
        row = {"window_k": k, "x_top": float(top)}
        row.update(_window_deviation(mesh, reference, sel, fx, fy, fx2, rx, ry, rx2))
        rows.append(row)
        logging.debug(f"end_asymptotics: window {k}: {row}")
    rows = pd.DataFrame(rows)
    k = rows["window_k"].to_numpy(dtype=float)
    slopes = {c: _fit_slope(k, rows[c].to_numpy()) for c in DEV_COLUMNS}
    monotone = {c: _monotone(rows[c].to_numpy(), min(tail, windows)) for c in DEV_COLUMNS}
    final = {c: float(rows[c].iloc[-1]) for c in DEV_COLUMNS}
    report = EndAsymptoticsReport(rows, float(period), slopes, monotone, final)
    logging.info(f"end_asymptotics: {windows} windows, final deviations {final}")
    return report


def _form_at(source, xs, ys, lam_sym: complex, H: float, h: float):
    """(E, F, G) on the grid from fourth order central differences of step h."""
    lam = stencil(lam_sym)
    offsets = h * np.array([-2.0, -1.0, 1.0, 2.0])
    ny = len(ys)
    fx, fy = [], []
    for x in xs:
        cols = np.stack([sym_from_stencil(source.column(float(x + d), ys, lam)[0], H) for d in offsets])
        fx.append(np.einsum("j,jik->ik", FOURTH_ORDER_WEIGHTS, cols) / h)
        shifted = (ys[:, None] + offsets[None, :]).reshape(-1)
        rows = sym_from_stencil(source.column(float(x), shifted, lam)[0], H).reshape(ny, len(offsets), 3)
        fy.append(np.einsum("j,ijk->ik", FOURTH_ORDER_WEIGHTS, rows) / h)
    fx, fy = np.stack(fx), np.stack(fy)
    return np.sum(fx * fx, axis=-1), np.sum(fx * fy, axis=-1), np.sum(fy * fy, axis=-1)


def associated_family_check(
    source, grid: Dict, lam_syms: Sequence[complex], H: float = 1.0, h: float = FORM_STEP
) -> Dict:
    """Compares first fundamental forms of Sym surfaces at several λ_sym ∈ S¹.

    Tangents are taken by fourth order central differences of step ``h``
    around each grid point, evaluated directly from the source, so the
    comparison does not depend on the grid spacing.

    Returns:
        Dict with ``rows`` (lam_sym, E_dev, F_dev, G_dev relative to the first
        λ_sym, scaled by its E) and ``max_dev``.
    """
    xs, ys = make_grid(grid, closed_y=False)
    forms = [_form_at(source, xs, ys, lam, H, h) for lam in lam_syms]
    base = forms[0]
    scale = base[0]
    rows = []
    for lam, form in zip(lam_syms, forms):
        rows.append(
            {
                "lam_sym": complex(lam),
                "E_dev": _sup(np.abs(form[0] - base[0]) / scale),
                "F_dev": _sup(np.abs(form[1] - base[1]) / scale),
                "G_dev": _sup(np.abs(form[2] - base[2]) / scale),
            }
        )
    rows = pd.DataFrame(rows)
    max_dev = float(np.nanmax(rows[["E_dev", "F_dev", "G_dev"]].to_numpy()))
    logging.info(f"associated_family_check: {len(lam_syms)} Sym points, max deviation {max_dev:.3e}")
    return {"rows": rows, "max_dev": max_dev}


def gauge_invariance_check(
    xi: Potential,
    g: GaugeTransform,
    grid: Dict,
    lam_sym: complex = 1.0,
    H: float = 1.0,
    tol: Tolerances = DEFAULT_TOLERANCES,
    verbose: bool = False,
) -> Dict:
    """Meshes of ξ and of ξ.g agree up to one rigid motion.

    The gauged frame starts from Φ(z_b)·g(z_b), so that it equals Φg.

    Returns:
        Dict with the procrustes ``residual``, the raw ``difference`` before
        alignment, and the rotation ``R`` and translation ``t``.
    """
    src = PotentialSource(xi, tol=tol)
    z_b = src.holomorphic.basepoint
    assert np.allclose(src.holomorphic.lam, g.lam), "the gauge must live on the potential's λ-samples"
    gauged = PotentialSource(gauge_action(xi, g), initial=src.holomorphic.initial @ g.at(z_b), basepoint=z_b, tol=tol)
    m1 = build_mesh(src, grid, lam_sym, H, verbose=verbose)
    m2 = build_mesh(gauged, grid, lam_sym, H, verbose=verbose)
    R, t, residual = procrustes(m2.points, m1.points)
    difference = _sup(np.linalg.norm(m2.points - m1.points, axis=-1))
    logging.info(f"gauge_invariance_check: residual {residual:.3e}, raw difference {difference:.3e}")
    return {"residual": residual, "difference": difference, "R": R, "t": t}


def screw_periodicity_check(
    source, period: float, xs, ys, lam_sym: complex = 1.0, H: float = 1.0
) -> Dict:
    """Fits f(x + ρ, y) = R f(x, y) + t on a few columns.

    Args:
        source: frame source with ``column``.
        period: float, ρ.
        xs: array of x values.
        ys: array of y values.
        lam_sym: complex.
        H: float.

    Returns:
        Dict from ``fit_screw`` (R, t, angle, axis, pitch, residual,
        relative_residual).
    """
    lam = stencil(lam_sym)
    a, b = [], []
    for x in np.asarray(xs, dtype=float):
        for shift, out in ((0.0, a), (period, b)):
            frames, _, _ = source.column(x + shift, ys, lam)
            out.append(sym_from_stencil(frames, H))
    report = fit_screw(np.stack(a), np.stack(b))
    logging.info(f"screw_periodicity_check: residual {report['residual']:.3e}, angle {report['angle']:.6g}")
    return report
