import sys

import numpy as np
import pytest

from pycmc.config import Tolerances
from pycmc.delaunay import DelaunayResidue
from pycmc.exceptions import DomainError, HolomorphyError, ResonanceError, ShrinkDomainError
from pycmc.loopcore import IDENTITY, MatrixLoop, circle_points, expm_traceless, op_norm
from pycmc.potential import (
    CoordinateChange,
    GaugeTransform,
    HolomorphicFrame,
    L_apply,
    L_holo_check,
    L_inverse,
    Potential,
    closing_check,
    frame_convergence,
    frame_monodromy,
    gauge_action,
    gauge_pipeline,
    l_dense,
    l_eigenvalues,
    l_holo_residual,
    monodromy,
    monodromy_function,
    monodromy_unitarity,
    normalize_gauge,
    ode_solve,
    series,
    zap,
    zap_coefficients,
)

SMALL = np.array([[0.01, 0.02], [0.03, -0.01]], dtype=complex)


def _perturbed(res, k=1, radius=0.5, scale=1.0):
    return Potential(res, {k: MatrixLoop.constant(scale * SMALL, radius=radius)}, radius=radius)


def test_pure_potential(unduloid_residue):
    xi = Potential(unduloid_residue)
    assert xi.order is None and xi.degree == -1
    assert xi.validate()["passed"]
    with pytest.raises(DomainError):
        xi.matrix(0.0, 1.0)
    assert np.allclose(xi.matrix(0.5, 1.0), 2 * unduloid_residue.matrix(1.0))


def test_potential_from_config(unduloid_residue):
    items = [
        {"k": 2, "matrix": [[[0, 0], [0.1, 0]], [[0, 0], [0, 0]]]},
        {"k": 2, "lambda_power": -1, "matrix": [[[0, 0], [0, 0.5]], [[0, 0], [0, 0]]]},
    ]
    xi = Potential.from_config(unduloid_residue, items, radius=0.5)
    assert xi.order == 2
    assert xi.coefficient(2).kmin == -1
    assert xi.validate()["passed"]
    again = Potential.from_dict(xi.to_dict())
    assert np.allclose(again.matrix(0.3, 0.7), xi.matrix(0.3, 0.7))


def test_validate_flags_pole_structure(unduloid_residue):
    bad = Potential(unduloid_residue, {0: MatrixLoop.monomial(-1, [[0, 0], [1, 0]])})
    report = bad.validate()
    assert not report["passed"] and report["pole_violation"] == pytest.approx(1.0)
    traced = Potential(unduloid_residue, {0: MatrixLoop.constant(IDENTITY)})
    assert traced.validate()["trace_max"] == pytest.approx(2.0)


def test_z_series_layout(unduloid_residue):
    xi = _perturbed(unduloid_residue, k=1)
    lam = circle_points(0.5, 8)
    e = xi.z_series(lam, 4)
    assert e.shape == (4, 8, 2, 2)
    assert np.allclose(e[0], unduloid_residue.matrix(lam))
    assert np.allclose(e[2], SMALL) and np.allclose(e[1], 0) and np.allclose(e[3], 0)


def test_ode_solve_trivial_path(vacuum_residue):
    phi = ode_solve(Potential(vacuum_residue), [0.5, 0.5])
    assert np.allclose(phi.eval(1.0), IDENTITY)


def test_holomorphic_frame_of_pure_residue(unduloid_residue):
    res = unduloid_residue
    lam = circle_points(1.0, 16, offset=0.5)
    a_s = res.matrix(lam)
    frame = HolomorphicFrame(Potential(res), lam, basepoint=0.5, initial=expm_traceless(np.log(0.5) * a_s))
    assert np.max(op_norm(frame.at(0.1) - expm_traceless(np.log(0.1) * a_s))) < 1e-8
    z = 0.2 * np.exp(1j)
    assert np.max(op_norm(frame.at(z) - expm_traceless(complex(np.log(0.2), 1.0) * a_s))) < 1e-8
    # one more sheet of the cover
    log_z = complex(np.log(0.2), 1.0 + 2 * np.pi)
    assert np.max(op_norm(frame.at(z, winding=1) - expm_traceless(log_z * a_s))) < 1e-8


@pytest.mark.slow
def test_monodromy_of_pure_residue(unduloid_residue):
    res = unduloid_residue
    m = monodromy(Potential(res))
    lam = circle_points(1.0, 16, offset=0.5)
    assert np.max(op_norm(m.eval(lam) - expm_traceless(2j * np.pi * res.matrix(lam)))) < 1e-8
    report = closing_check(m)
    assert report["closed"] and report["sign"] == -1


def test_closing_check_exact_monodromy(unduloid_residue, vacuum_residue):
    for res in (unduloid_residue, vacuum_residue):
        m = MatrixLoop.from_function(lambda lam: expm_traceless(2j * np.pi * res.matrix(lam)))
        report = closing_check(m)
        assert report["closed"] and report["unitary"]
        assert report["closing_error"] < 1e-10 and report["derivative"] < 1e-8
    off = DelaunayResidue(0.3, 0.1)
    m = MatrixLoop.from_function(lambda lam: expm_traceless(2j * np.pi * off.matrix(lam)))
    assert not closing_check(m)["closed"]


def test_L_apply():
    a = np.array([[0, 1], [2, 0]], dtype=complex)
    assert np.allclose(L_apply(a, 3, np.eye(2)), 3 * np.eye(2))


def test_L_inverse_inverts(unduloid_residue, rng):
    a = unduloid_residue.matrix(circle_points(0.5, 8))
    x = rng.normal(size=(8, 2, 2)) + 1j * rng.normal(size=(8, 2, 2))
    for n in (1, 2, 3):
        y = L_inverse(a, n, x)
        assert np.allclose(L_apply(a, n, y), x)


def test_L_inverse_at_resonance():
    a = np.diag([1.0, -1.0]).astype(complex)
    with pytest.raises(ResonanceError):
        L_inverse(a, 2, np.eye(2))
    assert np.allclose(L_apply(a, 1, L_inverse(a, 1, np.eye(2))), np.eye(2))


def test_l_eigenvalues_match_dense():
    a = np.array([[0.2, 0.5], [0.3, -0.2]], dtype=complex)
    mu = np.sqrt(0.2**2 + 0.15)
    expected = np.sort_complex(np.array([3, 3, 3 + 2 * mu, 3 - 2 * mu], dtype=complex))
    assert np.allclose(np.sort_complex(l_eigenvalues(a, 3)), expected)
    assert np.allclose(np.sort_complex(np.linalg.eigvals(l_dense(a, 3))), expected)


def test_L_holo_check(unduloid_residue):
    a = unduloid_residue.loop()
    assert L_holo_check(a, MatrixLoop.identity())
    assert not L_holo_check(a, a)
    # a·X₂₁(0) + b·X₁₂,₋₁ = 0
    x = MatrixLoop([[[0, 1], [0, 0]], [[0, 0], [-1 / 3, 0]]], -1)
    assert L_holo_check(a, x)
    with pytest.raises(DomainError):
        L_holo_check(a, MatrixLoop.monomial(-1, [[1, 0], [0, -1]]))


def test_l_holo_residual(unduloid_residue):
    a = unduloid_residue.loop()
    assert l_holo_residual(a, MatrixLoop.identity()) == 0.0
    # λ⁻¹ coefficient a·X₂₁(0) + b·X₁₂,₋₁ with X = A
    assert l_holo_residual(a, a) == pytest.approx(2 * unduloid_residue.a * unduloid_residue.b)


def test_normalize_gauge_rejects_wrong_kappa(unduloid_residue, monkeypatch):
    monkeypatch.setattr(sys.modules["pycmc.potential.gauge"], "_kappa", lambda res, b_loop: 0.3)
    with pytest.raises(HolomorphyError) as info:
        normalize_gauge(_perturbed(unduloid_residue, k=0), 1)
    assert isinstance(info.value, DomainError)
    assert info.value.n == 1
    # 2ab·κ − a·B₂₁(0) for the constant perturbation
    res = unduloid_residue
    assert info.value.residual == pytest.approx(abs(2 * res.a * res.b * 0.3 - res.a * SMALL[1, 0]), rel=1e-6)


def test_gauge_from_leading_has_unit_determinant():
    lam = circle_points(0.5, 64)
    c = np.broadcast_to(SMALL, (64, 2, 2)).copy()
    g = GaugeTransform.from_leading(c, 1, lam, 16, 0.5)
    assert g.det_error(0.5) < 1e-12
    assert g.negative_tail() < 1e-12
    assert np.max(op_norm(series.evaluate(g.inverse_coeffs(), 0.3) @ g.at(0.3) - IDENTITY)) < 1e-12


def test_gauge_action(unduloid_residue):
    lam = circle_points(0.5, 64)
    xi = Potential(unduloid_residue, radius=0.5)
    assert gauge_action(xi, GaugeTransform.identity(lam, 8, 0.5)).order is None
    c = np.broadcast_to(SMALL, (64, 2, 2)).copy()
    gauged = gauge_action(xi, GaugeTransform.from_leading(c, 1, lam, 16, 0.5))
    assert gauged.order == 0
    # leading new term 𝓛₁(C)
    expected = L_apply(unduloid_residue.matrix(lam), 1, c)
    assert np.max(op_norm(gauged.coefficient(0).eval(lam) - expected)) < 1e-12


def test_coordinate_change():
    cc = CoordinateChange(0.3, 2, 1.0)
    report = cc.check()
    assert report["roundtrip"] < 1e-13
    assert report["pullback_residual"] < 1e-12
    z = np.array([0.1, 0.2j])
    assert np.allclose(cc.inverse(cc.forward(z)), z)
    with pytest.raises(ShrinkDomainError):
        CoordinateChange(2.0, 1, 1.0)


def test_gauge_pipeline_domain(unduloid_residue):
    xi = _perturbed(unduloid_residue, k=0)
    with pytest.raises(DomainError):
        gauge_pipeline(xi, 2)


@pytest.mark.slow
def test_gauge_pipeline_normalizes(unduloid_residue):
    xi = _perturbed(unduloid_residue, k=0)
    result = gauge_pipeline(xi, 1)
    assert result.xi.order is None or result.xi.order >= 1
    assert result.monodromy_error < 1e-8
    assert result.gauge.det_error(0.25) < 1e-10


def test_zap_pure_residue(vacuum_residue):
    dec = zap(Potential(vacuum_residue, radius=0.5))
    assert np.allclose(dec.p_coeffs[1:], 0)
    assert np.allclose(dec.c, IDENTITY)
    z = 0.3 * np.exp(0.4j)
    assert np.allclose(dec.phi(z), expm_traceless(np.log(z) * vacuum_residue.matrix(dec.lam)))


def test_zap_coefficients_recursion(unduloid_residue):
    xi = _perturbed(unduloid_residue, k=1)
    lam = circle_points(0.5, 8, offset=0.5)
    p = zap_coefficients(xi, lam, 3)
    assert p.shape == (3, 8, 2, 2)
    assert np.allclose(p[0], IDENTITY)
    assert np.allclose(p[1], 0)
    small = np.broadcast_to(SMALL, (8, 2, 2))
    assert np.allclose(p[2], L_inverse(unduloid_residue.matrix(lam), 2, small))


def test_zap_reconstruction(unduloid_residue):
    dec = zap(_perturbed(unduloid_residue, k=1))
    assert dec.K >= 9
    assert dec.reconstruction_residual() < 1e-10
    assert np.allclose(dec.P_at(0.2, dec.lam[:4]), dec.P(0.2)[:4])


def test_zap_rejects_resonant_circle(unduloid_residue):
    # λ = 1 is a double resonance of the unduloid
    with pytest.raises(ResonanceError):
        zap(Potential(unduloid_residue, radius=1.0))


@pytest.mark.slow
def test_zap_probes_agree(unduloid_residue):
    xi = _perturbed(unduloid_residue, k=1)
    frame = HolomorphicFrame(xi)
    dec = zap(xi, phi_probe=frame.at)
    assert dec.probe_error < Tolerances().probe
    z = 0.2 * np.exp(0.7j)
    assert np.max(op_norm(dec.phi(z) - frame.at(z)) / op_norm(frame.at(z))) < 1e-7


def test_frame_convergence_domain(unduloid_residue):
    with pytest.raises(DomainError):
        frame_convergence(_perturbed(unduloid_residue, k=0), [0.1, 0.01], verbose=False)


@pytest.mark.slow
def test_frame_convergence_pure_residue(vacuum_residue):
    xi = Potential(vacuum_residue, radius=0.5)
    report = frame_convergence(xi, [0.1, 0.03, 0.01], direct_check=False, verbose=False)
    assert report.n is None
    assert report.passed
    assert report.rows["unitary_err"].max() < 1e-8


@pytest.mark.slow
def test_normal_form_frame_has_unitary_monodromy(unduloid_residue):
    xi = _perturbed(unduloid_residue)
    dec = zap(xi)
    z_b = 0.5 * xi.z_radius
    m = frame_monodromy(xi, lambda lam: dec.normal_form_at(z_b, lam), z_b)
    report = closing_check(m, 1.0, radius=xi.radius)
    assert report["unitary"]
    assert report["unitarity"] == pytest.approx(monodromy_unitarity(m, xi.radius))
    lam = circle_points(xi.radius, 8, offset=0.5)
    a_s = unduloid_residue.matrix(lam)
    assert np.max(op_norm(m.eval(lam) - expm_traceless(2j * np.pi * a_s))) < 1e-8
    # normalized to id at z_b the monodromy is only conjugate to a unitary loop
    assert monodromy_unitarity(monodromy_function(xi, z_b), xi.radius) > 1e-4


@pytest.mark.slow
def test_frame_convergence_perturbed(unduloid_residue):
    xi = _perturbed(unduloid_residue)
    z_seq = np.geomspace(0.1, 1e-4, 6)
    report = frame_convergence(xi, z_seq, res=unduloid_residue, direct_check=False, verbose=False)
    assert report.n == 1
    assert report.checks["monodromy_unitarity"] < 1e-8
    assert report.floor > 0
    assert report.unitary_slope >= report.floor - 0.1
    assert report.positive_slope >= report.floor - 0.1
    assert report.passed
