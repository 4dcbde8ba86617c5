import numpy as np
import pytest
from scipy.linalg import expm

from pycmc.delaunay import DelaunayResidue, profile
from pycmc.exceptions import AlignmentError, DomainError
from pycmc.loopcore import IDENTITY, MatrixLoop
from pycmc.potential import GaugeTransform, Potential
from pycmc.surface import (
    DelaunaySource,
    PotentialSource,
    SurfaceMesh,
    associated_family_check,
    build_mesh,
    delaunay_closes,
    end_asymptotics,
    fit_cylinder,
    fit_screw,
    gauge_invariance_check,
    metric_from_B,
    metric_from_rho,
    normal,
    procrustes,
    screw_periodicity_check,
    self_proximity,
    stencil,
    sym,
)
from pycmc.surface.mesh import x_derivative, y_derivative

SHORT_GRID = {"x_min": -2.0, "x_max": 0.0, "nx": 24, "ny": 16}


def _skew(w):
    return np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])


@pytest.fixture
def vacuum_mesh(vacuum_residue):
    return build_mesh(DelaunaySource(vacuum_residue, route="closed"), SHORT_GRID, verbose=False)


def test_sym_basics():
    lam = stencil(1.0)
    assert lam.shape == (5,)
    assert lam[0] == 1.0
    assert np.allclose(np.abs(lam), 1.0)
    assert np.allclose(sym(np.eye(2)), 0.0)
    assert np.allclose(normal(IDENTITY), [0, 0, 1])
    assert metric_from_rho(1.0, 0.25) == pytest.approx(0.5)


def test_metric_from_B():
    B = MatrixLoop.constant(np.diag([2.0, 0.5]))
    assert metric_from_B(B, 0.25) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        metric_from_B(B, 0.0)


def test_delaunay_closes(unduloid_residue, vacuum_residue):
    assert delaunay_closes(unduloid_residue)
    assert delaunay_closes(vacuum_residue)
    assert not delaunay_closes(DelaunayResidue(0.3, 0.1))


def test_vacuum_mesh_is_cylinder(vacuum_mesh):
    assert vacuum_mesh.closed_y
    assert vacuum_mesh.failures.sum() == 0
    assert np.allclose(vacuum_mesh.metric, 0.5)
    cyl = fit_cylinder(vacuum_mesh.points, vacuum_mesh.normals)
    assert cyl["rel_variance"] < 1e-6
    assert cyl["radius"] == pytest.approx(0.5, rel=1e-6)
    assert vacuum_mesh.conformality_residual() < 1e-4
    assert vacuum_mesh.metric_residual() < 1e-4
    normals = vacuum_mesh.normal_residual()
    assert normals["unit"] < 1e-12
    assert normals["orthogonality"] < 1e-4


def test_unduloid_mesh_metric(unduloid_residue):
    prof = profile(unduloid_residue)
    mesh = build_mesh(DelaunaySource(unduloid_residue, route="closed"), SHORT_GRID, verbose=False)
    # 4|ab|/v
    expected = 0.1875 / prof.v(mesh.xs)
    assert np.allclose(mesh.metric, expected[:, None], rtol=1e-6)
    assert mesh.conformality_residual() < 1e-3


def test_unduloid_screw_period(unduloid_residue):
    source = DelaunaySource(unduloid_residue, route="closed")
    ys = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    report = screw_periodicity_check(source, source.period, [-1.0, -0.5, 0.0], ys)
    assert report["relative_residual"] < 1e-6


def test_procrustes_recovers_motion(rng):
    P = rng.normal(size=(20, 3))
    R = expm(_skew([0.3, -0.2, 0.9]))
    t = np.array([1.0, 2.0, 3.0])
    R_fit, t_fit, residual = procrustes(P, P @ R.T + t)
    assert np.allclose(R_fit, R)
    assert np.allclose(t_fit, t)
    assert residual < 1e-12
    assert np.linalg.det(R_fit) == pytest.approx(1.0)


def test_procrustes_degenerate():
    line = np.outer(np.linspace(0, 1, 6), [1.0, 2.0, 3.0])
    with pytest.raises(AlignmentError):
        procrustes(line, line + 1.0)
    with pytest.raises(AlignmentError):
        procrustes(np.eye(3)[:2], np.eye(3)[:2])


def test_fit_screw():
    theta = np.linspace(0, 3, 10)
    a = np.stack([np.cos(theta), np.sin(theta), 0.1 * theta], axis=1)
    R = expm(_skew([0, 0, 0.3]))
    report = fit_screw(a, a @ R.T + [0.0, 0.0, 0.2])
    assert report["angle"] == pytest.approx(0.3)
    assert abs(report["pitch"]) == pytest.approx(0.2)
    assert np.allclose(np.abs(report["axis"]), [0, 0, 1])


def _toy_mesh(rng, nx=3, ny=4):
    xs, ys = np.linspace(0, 1, nx), np.linspace(0, 1, ny)
    points = rng.normal(size=(nx, ny, 3))
    return SurfaceMesh(xs, ys, points, points.copy(), np.ones((nx, ny)), source="toy")


def _count(path, prefix):
    with open(path) as f:
        return sum(line.startswith(prefix) for line in f)


def test_obj_faces(tmp_path, rng):
    mesh = _toy_mesh(rng)
    path = str(tmp_path / "toy.obj")
    mesh.to_obj(path)
    assert _count(path, "v ") == 12
    assert _count(path, "vn ") == 12
    assert _count(path, "f ") == 12
    mesh.to_obj(path, weld=True)
    assert _count(path, "f ") == 16

    mesh.failures[0, 0] = True
    mesh.to_obj(path)
    assert _count(path, "f ") == 10


def test_x_derivative_cubic():
    h = 0.1
    x = h * np.arange(20)
    d = x_derivative(x**3, h)
    assert np.all(np.isnan(d[:2])) and np.all(np.isnan(d[-2:]))
    assert np.allclose(d[2:-2], 3 * x[2:-2] ** 2)
    d2 = x_derivative(x**3, h, step=2)
    assert np.all(np.isnan(d2[:4]))
    assert np.allclose(d2[4:-4], 3 * x[4:-4] ** 2)


def test_y_derivative_periodic():
    y = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    arr = np.stack([np.sin(y), np.cos(2 * y)])
    d = y_derivative(arr, y[1] - y[0], periodic=True)
    assert np.allclose(d, np.stack([np.cos(y), -2 * np.sin(2 * y)]))


def test_end_asymptotics_against_itself(vacuum_residue):
    source = DelaunaySource(vacuum_residue, route="closed")
    grid = {"x_min": -13.0, "x_max": 0.0, "nx": 40, "ny": 8}
    mesh = build_mesh(source, grid, verbose=False)
    report = end_asymptotics(mesh, mesh, source.period, windows=2, verbose=False)
    assert len(report.rows) == 2
    assert report.passed(1e-10)


def test_end_asymptotics_short_range(vacuum_mesh, vacuum_residue):
    period = profile(vacuum_residue).rho
    with pytest.raises(AlignmentError):
        end_asymptotics(vacuum_mesh, vacuum_mesh, period, verbose=False)


def test_self_proximity(vacuum_mesh):
    report = self_proximity(vacuum_mesh.points)
    assert report["close_pairs"] == 0
    assert report["heuristic"]

    grid = np.stack(np.meshgrid(np.arange(5.0), np.arange(5.0), indexing="ij"), axis=-1)
    sheet = np.concatenate([grid, np.zeros((5, 5, 1))], axis=-1)
    sheet[4, 4] = sheet[0, 0] + 0.01
    assert self_proximity(sheet)["close_pairs"] >= 1


@pytest.mark.slow
def test_associated_family_is_isometric(unduloid_residue):
    source = DelaunaySource(unduloid_residue, route="closed")
    grid = {"x_min": -1.0, "x_max": 0.0, "nx": 12, "ny": 12}
    report = associated_family_check(source, grid, [1.0, np.exp(0.4j), np.exp(-1.1j)])
    assert report["max_dev"] < 1e-6
    assert len(report["rows"]) == 3


@pytest.mark.slow
def test_gauge_invariance(unduloid_residue):
    small = np.array([[0.01, 0.02], [0.03, -0.01]], dtype=complex)
    xi = Potential(unduloid_residue, {1: MatrixLoop.constant(small, radius=0.5)}, radius=0.5)
    lam = xi.lam_samples()
    g = GaugeTransform.from_leading(np.broadcast_to(small, lam.shape + (2, 2)).copy(), 1, lam, 16, 0.5)
    grid = {"x_min": -2.0, "x_max": -1.5, "nx": 5, "ny": 4}
    report = gauge_invariance_check(xi, g, grid)
    assert report["residual"] < 1e-6


def _perturbed_unduloid(res):
    small = np.array([[0.01, 0.02], [0.03, -0.01]], dtype=complex)
    return Potential(res, {1: MatrixLoop.constant(small, radius=0.5)}, radius=0.5)


@pytest.mark.slow
def test_potential_source_closing_report(unduloid_residue):
    source = PotentialSource(_perturbed_unduloid(unduloid_residue))
    report = source.closing_report(1.0)
    assert report["unitary"]
    assert source.closed(1.0) == report["closed"]
    # the same frame started from a plain array only knows the basepoint-normalized monodromy
    plain = PotentialSource(source.xi, initial=source.holomorphic.initial)
    assert plain.initial_at is None
    assert plain.closed(1.0) == report["closed"]


@pytest.mark.slow
def test_end_asymptotics_perturbed_unduloid(unduloid_residue):
    source = PotentialSource(_perturbed_unduloid(unduloid_residue))
    reference = DelaunaySource(unduloid_residue)
    period = reference.period
    grid = {"x_min": -1.5 - 2 * period, "x_max": -1.5, "nx": 48, "ny": 8}
    mesh = build_mesh(source, grid, verbose=False)
    ref_mesh = build_mesh(reference, grid, verbose=False)
    assert mesh.failures.sum() == 0
    report = end_asymptotics(mesh, ref_mesh, period, tail=2, verbose=False)
    assert len(report.rows) == 2
    assert all(report.monotone_tail.values())
    assert report.final["c0_dev"] < report.rows["c0_dev"].iloc[0]
    assert report.final["c0_dev"] < 1e-2
