import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from tqdm import tqdm

from pycmc.exceptions import PycmcError
from pycmc.surface.sym import metric_from_rho, normals_from_frames, stencil, sym_from_stencil


def x_derivative(arr: np.ndarray, h: float, step: int = 1) -> np.ndarray:
    """Fourth order central difference along axis 0 with spacing step·h.

    The 2·step edge rows on each side are NaN.
    """
    s = step
    out = np.full(arr.shape, np.nan)
    if arr.shape[0] > 4 * s:
        out[2 * s : -2 * s] = (
            arr[: -4 * s] - 8 * arr[s : -3 * s] + 8 * arr[3 * s : -s] - arr[4 * s :]
        ) / (12 * s * h)
    return out


def y_derivative(arr: np.ndarray, h: float, periodic: bool) -> np.ndarray:
    """Derivative along axis 1: spectral when periodic, fourth order otherwise."""
    if periodic:
        n = arr.shape[1]
        k = np.fft.fftfreq(n, d=h / (2 * np.pi))
        shape = [1] * arr.ndim
        shape[1] = n
        spectrum = np.fft.fft(arr, axis=1) * (1j * k).reshape(shape)
        if n % 2 == 0:
            idx = [slice(None)] * arr.ndim
            idx[1] = n // 2
            spectrum[tuple(idx)] = 0
        return np.fft.ifft(spectrum, axis=1).real
    return np.swapaxes(x_derivative(np.swapaxes(arr, 0, 1), h), 0, 1)


@dataclass
class SurfaceMesh:
    """Immersion sampled on a rectangle of the coordinate w = x + iy.

    Attributes:
        xs: np.ndarray (nx,), uniform.
        ys: np.ndarray (ny,), uniform; the y-period is not repeated when
            ``closed_y`` is set.
        points: np.ndarray (nx, ny, 3).
        normals: np.ndarray (nx, ny, 3).
        metric: np.ndarray (nx, ny), conformal factor w with |f_x| = |f_y| = w.
        H: float, mean curvature.
        lam_sym: complex, Sym point.
        closed_y: bool, whether the mesh closes up in y.
        failures: np.ndarray (nx, ny) of bool, vertices that could not be built.
        source: str, name of the frame source.
    """

    xs: np.ndarray
    ys: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    metric: np.ndarray
    H: float = 1.0
    lam_sym: complex = 1.0
    closed_y: bool = False
    failures: Optional[np.ndarray] = None
    source: str = ""
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.failures is None:
            self.failures = np.zeros(self.metric.shape, dtype=bool)

    def __repr__(self):
        return f"SurfaceMesh({self.source}, {self.shape[0]}×{self.shape[1]}, closed_y={self.closed_y})"

    @property
    def shape(self):
        return self.metric.shape

    @property
    def n_vertices(self) -> int:
        return int(np.prod(self.shape))

    @property
    def hx(self) -> float:
        return float(self.xs[1] - self.xs[0]) if len(self.xs) > 1 else 1.0

    @property
    def hy(self) -> float:
        return float(self.ys[1] - self.ys[0]) if len(self.ys) > 1 else 1.0

    def tangents(self):
        """(f_x, f_y) by finite differences, NaN where not available."""
        return x_derivative(self.points, self.hx), y_derivative(self.points, self.hy, self.closed_y)

    def conformality_residual(self) -> float:
        """sup (||f_x| − |f_y|| + |f_x·f_y|)/w²."""
        fx, fy = self.tangents()
        nx, ny = np.linalg.norm(fx, axis=-1), np.linalg.norm(fy, axis=-1)
        res = (np.abs(nx - ny) * self.metric + np.abs(np.sum(fx * fy, axis=-1))) / self.metric**2
        return float(np.nanmax(res))

    def metric_residual(self) -> float:
        """sup ||f_x|/w − 1|, the finite difference check of the metric formula."""
        fx, _ = self.tangents()
        return float(np.nanmax(np.abs(np.linalg.norm(fx, axis=-1) / self.metric - 1)))

    def normal_residual(self) -> Dict:
        fx, fy = self.tangents()
        unit = float(np.max(np.abs(np.linalg.norm(self.normals, axis=-1) - 1)))
        ortho = np.maximum(
            np.abs(np.sum(self.normals * fx, axis=-1)) / np.linalg.norm(fx, axis=-1),
            np.abs(np.sum(self.normals * fy, axis=-1)) / np.linalg.norm(fy, axis=-1),
        )
        return {"unit": unit, "orthogonality": float(np.nanmax(ortho))}

    def to_dict(self) -> Dict:
        return {
            "source": self.source,
            "shape": list(self.shape),
            "x_range": [float(self.xs[0]), float(self.xs[-1])],
            "H": self.H,
            "lam_sym": self.lam_sym,
            "closed_y": self.closed_y,
            "failures": int(self.failures.sum()),
            "conformality_residual": self.conformality_residual(),
            "metric_residual": self.metric_residual(),
            "normal_residual": self.normal_residual(),
        }

    def stat(self):
        print(f"Statistics of {self!r}:")
        print(f"\t- Number of vertices: {self.n_vertices}")
        print(f"\t- Number of failed vertices: {int(self.failures.sum())}")
        print(f"\t- Conformality residual: {self.conformality_residual():.3e}")
        print(f"\t- Metric residual: {self.metric_residual():.3e}")

    def to_obj(self, path: str, weld: Optional[bool] = None):
        write_obj(self, path, weld)


def write_obj(mesh: SurfaceMesh, path: str, weld: Optional[bool] = None):
    """Writes v/vn/f records; quads are split into two triangles.

    With ``weld`` (default ``mesh.closed_y``) the last y-column is joined to
    the first. Faces touching a failed vertex are left out.
    """
    weld = mesh.closed_y if weld is None else weld
    nx, ny = mesh.shape
    index = np.arange(nx * ny).reshape(nx, ny) + 1
    bad = mesh.failures
    jmax = ny if weld else ny - 1
    with open(path, "w") as f:
        f.write(f"# pycmc {mesh.source} mesh {nx}x{ny}\n")
        for p in mesh.points.reshape(-1, 3):
            f.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        for n in mesh.normals.reshape(-1, 3):
            f.write(f"vn {n[0]:.17g} {n[1]:.17g} {n[2]:.17g}\n")
        for i in range(nx - 1):
            for j in range(jmax):
                j1 = (j + 1) % ny
                if bad[i, j] or bad[i + 1, j] or bad[i, j1] or bad[i + 1, j1]:
                    continue
                a, b, c, d = index[i, j], index[i + 1, j], index[i + 1, j1], index[i, j1]
                f.write(f"f {a}//{a} {b}//{b} {c}//{c}\n")
                f.write(f"f {a}//{a} {c}//{c} {d}//{d}\n")
    logging.info(f"write_obj: {nx * ny} vertices to {path}")


def make_grid(grid: Dict, closed_y: bool):
    """xs and ys of a grid dict {x_min, x_max, nx, ny[, y_min, y_max]}."""
    xs = np.linspace(grid["x_min"], grid["x_max"], int(grid["nx"]))
    y_min = grid.get("y_min", 0.0)
    y_max = grid.get("y_max", 2 * np.pi)
    ys = np.linspace(y_min, y_max, int(grid["ny"]), endpoint=not closed_y)
    return xs, ys


def build_mesh(
    source,
    grid: Dict,
    lam_sym: complex = 1.0,
    H: float = 1.0,
    verbose: bool = True,
) -> SurfaceMesh:
    """Sym immersion of a frame source on a grid, column by column.

    Args:
        source: a frame source (``DelaunaySource``, ``PotentialSource`` or
            ``DressedSource``).
        grid: Dict with keys x_min, x_max, nx, ny and optionally y_min,
            y_max (default one turn, 0..2π).
        lam_sym: complex, Sym point on S¹.
        H: float.
        verbose: bool, show a progress bar.

    Returns:
        SurfaceMesh; failed columns are NaN and flagged in ``failures``.
    """
    full_turn = abs(grid.get("y_max", 2 * np.pi) - grid.get("y_min", 0.0) - 2 * np.pi) < 1e-12
    closed_y = bool(full_turn and source.closed(lam_sym))
    xs, ys = make_grid(grid, closed_y)
    lam = stencil(lam_sym)
    nx, ny = len(xs), len(ys)
    points = np.full((nx, ny, 3), np.nan)
    normals = np.full((nx, ny, 3), np.nan)
    metric = np.full((nx, ny), np.nan)
    failures = np.zeros((nx, ny), dtype=bool)
    for i, x in enumerate(tqdm(xs, desc=f"mesh ({source.name})", disable=not verbose)):
        try:
            frames, rho, alpha = source.column(float(x), ys, lam)
        except PycmcError as e:
            logging.warning(f"build_mesh: column x = {x:g} failed: {e}")
            failures[i] = True
            continue
        points[i] = sym_from_stencil(frames, H)
        normals[i] = normals_from_frames(frames[:, 0])
        metric[i] = metric_from_rho(rho, alpha, H)
    mesh = SurfaceMesh(xs, ys, points, normals, metric, H, complex(lam_sym), closed_y, failures, source.name)
    logging.info(f"build_mesh: {mesh!r}, {int(failures.sum())} failed vertices")
    return mesh
