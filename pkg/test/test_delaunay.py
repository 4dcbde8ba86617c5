import sys

import numpy as np
import pytest

from pycmc.delaunay import (
    DelaunayFrame,
    DelaunayResidue,
    closed_form_factorization,
    delaunay_positive_factory,
    exp_bound_check,
    exp_xy,
    growth_measure,
    iwasawa_positive_factory,
    necksize,
    profile,
    psi,
    resonance_points,
    spectral_data,
    tau,
    tau_grid,
    zeros_of_det,
)
from pycmc.exceptions import DomainError, InvalidResidueError, NearSingularError, PoleError
from pycmc.loopcore import IDENTITY, Annulus, LoopFunction, circle_points, dagger, expm_traceless, op_norm


def test_invalid_residue():
    with pytest.raises(InvalidResidueError):
        DelaunayResidue(0.0, 0.25)
    with pytest.raises(InvalidResidueError):
        DelaunayResidue(0.25, 0.25, 0.1j)


def test_residue_scalars(unduloid_residue):
    res = unduloid_residue
    assert res.S == pytest.approx(5 / 32)
    assert res.ab == pytest.approx(3 / 64)
    assert res.alpha == pytest.approx(1.0)
    assert not res.is_vacuum
    assert res.mu(1.0) == pytest.approx(0.5)
    with pytest.raises(PoleError):
        res.matrix(0.0)


def test_residue_matrix_is_hermitian_loop(unduloid_residue):
    res = DelaunayResidue(0.3 + 0.1j, 0.2 - 0.05j, 0.1)
    lam = circle_points(0.6, 7, offset=0.3)
    a = res.matrix(lam)
    assert np.allclose(np.trace(a, axis1=-2, axis2=-1), 0)
    assert np.allclose(dagger(res.matrix(1.0 / np.conj(lam))), a)
    # −det A = μ²
    assert np.allclose(-(a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]), res.mu_squared(lam))


def test_exp_xy_gives_monodromy(unduloid_residue):
    res = unduloid_residue
    lam = np.array([0.3, 0.5j, -0.2 + 0.1j])
    x, y = exp_xy(res, lam)
    m = x[:, None, None] * IDENTITY + 1j * y[:, None, None] * res.matrix(lam)
    assert np.allclose(m, expm_traceless(2j * np.pi * res.matrix(lam)))


def test_from_loop_recovers_residue():
    res = DelaunayResidue(0.3 + 0.1j, 0.2 - 0.05j, 0.1)
    again, residual = DelaunayResidue.from_loop(res.loop(0.5))
    assert residual < 1e-12
    assert again.a == pytest.approx(res.a) and again.b == pytest.approx(res.b) and again.c == pytest.approx(0.1)
    assert DelaunayResidue.from_dict(res.to_dict()) == res


def test_zeros_of_det(unduloid_residue):
    nu1, nu2 = zeros_of_det(unduloid_residue)
    assert nu1 == pytest.approx(-1 / 3)
    assert nu2 == pytest.approx(-3)


def test_resonance_points_unduloid(unduloid_residue):
    points = resonance_points(unduloid_residue, Annulus.disk(1.0))
    first = points[:3]
    assert [p.k for p in first] == [1, 2, 3]
    assert first[0].lam == pytest.approx(1.0, abs=1e-7) and first[0].double
    assert first[1].lam == pytest.approx(9 - np.sqrt(80))
    assert first[2].lam == pytest.approx((134 - np.sqrt(134**2 - 36)) / 6)
    for p in points:
        assert abs(unduloid_residue.mu(p.lam) - p.mu) < 1e-9


def test_resonance_points_vacuum(vacuum_residue):
    data = spectral_data(vacuum_residue)
    assert data.vacuum
    assert data.nu1 == pytest.approx(-1.0) and data.nu2 == pytest.approx(-1.0)
    by_order = {p.k: p.lam for p in data.resonance_points}
    assert by_order[2] == pytest.approx(7 - 4 * np.sqrt(3))
    assert by_order[3] == pytest.approx(17 - 12 * np.sqrt(2))
    assert by_order[4] == pytest.approx(31 - 8 * np.sqrt(15))


def test_resonance_points_in_annulus(unduloid_residue):
    points = resonance_points(unduloid_residue, Annulus(0.02, 0.5))
    assert [p.k for p in points] == [2, 3]


def test_spectral_data_sets(unduloid_residue):
    data = spectral_data(unduloid_residue)
    assert data.p == pytest.approx(-1.0) and data.alpha == pytest.approx(1.0)
    assert data.on_J(-0.5) and not data.on_J(0.5)
    assert data.on_K(-0.1) and data.on_K(-5.0) and not data.on_K(-1.0)
    assert data.distance_to_J(0.5j) == pytest.approx(np.hypot(0.5, 1 / 3))


def test_profile_unduloid(unduloid_residue):
    prof = profile(unduloid_residue)
    assert prof.vmax == pytest.approx(0.75, abs=1e-12)
    assert prof.vmin == pytest.approx(0.25, abs=1e-12)
    assert necksize(prof) == (prof.vmin, prof.vmax)
    assert prof.energy_residual() < 1e-10
    assert prof.energy_residual(np.linspace(-3, 3, 101)) < 1e-8
    assert prof.v(0.0) == pytest.approx(0.25)
    assert prof.v(0.5 * prof.rho) == pytest.approx(0.75, abs=1e-9)
    assert prof.v(0.3 + 2 * prof.rho) == pytest.approx(prof.v(0.3), abs=1e-12)
    for value in prof.rho_checks.values():
        assert value == pytest.approx(prof.rho, rel=1e-8)


def test_profile_vacuum(vacuum_residue):
    prof = profile(vacuum_residue)
    assert prof.vacuum
    assert prof.rho == pytest.approx(2 * np.pi)
    assert np.allclose(prof.v(np.linspace(-5, 5, 11)), 0.5)
    assert prof.energy_residual() < 1e-14


def test_profile_cache_round_trip(unduloid_residue, tmp_path, monkeypatch):
    # pycmc.delaunay.profile is shadowed by the profile() function in the package namespace
    monkeypatch.setattr(sys.modules["pycmc.delaunay.profile"], "BASE_CACHE_PATH", str(tmp_path))
    built = profile(unduloid_residue, n_table=512, use_cache=True)
    cached = profile(unduloid_residue, n_table=512, use_cache=True)
    assert (tmp_path / "profiles").exists()
    assert cached.rho == built.rho and np.array_equal(cached.v_table, built.v_table)


def test_profile_rejects_disagreeing_periods(unduloid_residue, monkeypatch):
    module = sys.modules["pycmc.delaunay.profile"]
    true_period = module.period_quadrature
    monkeypatch.setattr(module, "period_quadrature", lambda vmin, vmax: 1.001 * true_period(vmin, vmax))
    with pytest.raises(DomainError):
        profile(unduloid_residue)


def test_psi_refuses_singular_segment(unduloid_residue):
    prof = profile(unduloid_residue)
    with pytest.raises(NearSingularError):
        psi(unduloid_residue, prof, 0.4, np.array([-0.5]))


def test_closed_form_at_origin(unduloid_residue):
    lam = circle_points(1.0, 8, offset=0.5)
    f, b = closed_form_factorization(unduloid_residue, profile(unduloid_residue), 0.0, 0.0, lam)
    assert np.allclose(f, IDENTITY) and np.allclose(b, IDENTITY)


def test_closed_form_factors_exp(unduloid_residue):
    res = unduloid_residue
    x, y = -1.1, 0.4
    lam = circle_points(1.0, 16, offset=0.25)
    f, b = closed_form_factorization(res, profile(res), x, y, lam)
    assert np.max(op_norm(f @ b - expm_traceless((x + 1j * y) * res.matrix(lam)))) < 1e-10
    assert np.max(op_norm(dagger(f) @ f - IDENTITY)) < 1e-10


@pytest.mark.slow
def test_ode_route_matches_closed_form(unduloid_residue):
    res = unduloid_residue
    prof = profile(res)
    # offset keeps C_0.5 off the singular segment [−3, −1/3]
    lam = np.concatenate([circle_points(1.0, 16, offset=0.25), circle_points(0.5, 4, offset=0.5)])
    ode = DelaunayFrame(res, prof, route="ode")
    closed = DelaunayFrame(res, prof, route="closed")
    for x in (0.4, -1.5 * prof.rho):
        f1, b1 = ode.factors(x, 0.3, lam)
        f2, b2 = closed.factors(x, 0.3, lam)
        assert np.max(op_norm(f1 - f2)) < 1e-8
        assert np.max(op_norm(b1 - b2) / op_norm(b2)) < 1e-8


def test_tau_vacuum(vacuum_residue):
    assert tau(vacuum_residue, 1.0) == pytest.approx(0.5)
    assert tau(vacuum_residue, 0.25) == pytest.approx(0.25)
    grid = tau_grid(vacuum_residue, circle_points(1.0, 8))
    assert list(grid.columns) == ["lambda_re", "lambda_im", "tau", "re_mu"]
    assert grid["tau"].iloc[0] == pytest.approx(0.5)


def test_tau_unduloid_on_unit_circle(unduloid_residue):
    lam = circle_points(1.0, 16, offset=0.25)
    values = tau(unduloid_residue, lam)
    assert np.all(np.isfinite(values))
    assert tau(unduloid_residue, 1.0) >= 0


def test_exp_bound_certificate(unduloid_residue):
    res = unduloid_residue
    samples = Annulus(0.3, 1.0).samples(4, 32)
    report = exp_bound_check(lambda lam: 2 * res.matrix(lam), lambda lam: 2 * res.mu(lam), samples)
    assert report["passed"]
    assert report["dense_error"] < 1e-10


@pytest.mark.slow
def test_growth_matches_tau_vacuum(vacuum_residue):
    res = vacuum_residue
    z_values = np.exp(-np.linspace(6.0, 18.0, 7))
    lam = np.array([0.5, 0.5j, 0.9])
    report = growth_measure(delaunay_positive_factory(res), res, z_values, lam, verbose=False)
    assert report["ok_tau"].all()
    assert np.allclose(report["slope"], report["tau"], atol=0.02)


@pytest.mark.slow
def test_growth_bounded_by_tau_unduloid(unduloid_residue):
    res = unduloid_residue
    r = 0.5
    z_values = np.geomspace(1e-1, 1e-4, 6)
    # off the negative real axis, which carries the singular segment
    lam = np.concatenate([circle_points(r, 4, offset=0.5), circle_points(0.5 * r, 2, offset=0.25)])

    def phi_of_z(z):
        return LoopFunction(lambda l: expm_traceless(np.log(z) * res.matrix(l)), radius=r)

    report = growth_measure(iwasawa_positive_factory(phi_of_z, r), res, z_values, lam, verbose=False)
    assert (report["failures"] == 0).all()
    assert report["ok_tau"].all()
    assert (report["slope"] <= report["tau"] + 0.05).all()
    assert (report["tau"] <= report["re_mu"] + 1e-8).all()
