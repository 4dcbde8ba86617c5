import numpy as np
import pytest

from pycmc.delaunay import DelaunayFrame
from pycmc.dressing import (
    Blaschke,
    DressedFrame,
    SimpleFactor,
    bridge_check,
    conjugation_check,
    cp1_distance,
    dress,
    exp_limit_check,
    extract_simple_factors,
    factor_product,
    load_scenario,
    save_scenario,
    simple_factor_limit_check,
    special_dressing,
    validate_special_dressing,
)
from pycmc.dressing.simple_factor import unitarity_residual
from pycmc.exceptions import DegenerateError, PoleError
from pycmc.iwasawa import is_upper_positive
from pycmc.loopcore import (
    IDENTITY,
    SU2_BASIS,
    LoopFunction,
    circle_points,
    contour_coefficient,
    det2,
    expm_traceless,
    op_norm,
)

LAM0 = 0.3 + 0.2j
S1 = circle_points(1.0, 32, offset=0.5)
# vacuum resonance point with μ = 1
BUBBLETON_LAM0 = 7 - 4 * np.sqrt(3)


def _unitary_loop(t=0.3):
    """exp(t(λ + λ⁻¹)e₁), unitary on S¹ and holomorphic on ℂ*."""
    return LoopFunction(lambda lam: expm_traceless(t * (lam + 1 / lam)[:, None, None] * SU2_BASIS[0]))


def test_blaschke():
    f = Blaschke(0.5)
    assert abs(f(1.0) - 1) < 1e-15
    assert f.star_residual() < 1e-12
    lam = np.concatenate([S1, [0.0, 0.2j, -0.3]])
    assert np.allclose(f.sqrt(lam) ** 2, f(lam))
    assert abs(f.sqrt(1.0) - 1) < 1e-15
    with pytest.raises(PoleError):
        f(0.5)


@pytest.mark.parametrize("lam0", [0.0, 1j, -1.0])
def test_blaschke_degenerate(lam0):
    with pytest.raises(DegenerateError):
        Blaschke(lam0)


def test_simple_factor_normalized():
    g = SimpleFactor.normalized(LAM0, [1, 1j])
    lam = np.concatenate([S1, circle_points(0.1, 8)])
    assert np.allclose(det2(g.eval(lam)), 1.0)
    assert np.allclose(g.eval(lam) @ g.inverse(lam), IDENTITY)
    assert is_upper_positive(g.eval(np.array([0.0]))[0])
    assert unitarity_residual(g.eval, S1) < 1e-12
    assert np.allclose(op_norm(g.eval(lam)), g.norm_bound(lam))


def test_simple_factor_dict_round_trip():
    g = SimpleFactor.normalized(LAM0, [0.2, 1 - 1j])
    h = SimpleFactor.from_dict(g.to_dict())
    assert h.kind == "normalized"
    assert np.allclose(h.eval(S1), g.eval(S1))


def test_factor_product_empty():
    assert np.allclose(factor_product([], S1), IDENTITY)


def test_dress_identity_frame():
    g = SimpleFactor.normalized(0.3, [1, 1j])
    f_new, h = dress(g, np.eye(2))
    assert cp1_distance(h.line, g.line) < 1e-14
    assert np.allclose(f_new(np.array([0.7j, 2.0])), IDENTITY)


def test_dress_constant_unitary_stays_constant():
    u = expm_traceless(0.4 * SU2_BASIS[1])
    g = SimpleFactor.normalized(LAM0, [1, 0.5])
    f_new, _ = dress(g, u)
    values = f_new(np.concatenate([S1, [0.1, 3.0j]]))
    assert np.allclose(values, values[0])


def test_dress_removes_singularities():
    g = SimpleFactor.normalized(0.3, [1, 1j])
    result = dress(g, _unitary_loop(), B=np.eye(2))
    assert result.unitarity_residual < 1e-9
    for center in (g.lam0, g.f.lam1):
        c_m1 = contour_coefficient(result.unitary, center, 0.05, k=-1)
        c_0 = contour_coefficient(result.unitary, center, 0.05, k=0)
        assert op_norm(c_m1) < 1e-8 * max(1.0, op_norm(c_0))
    assert is_upper_positive(result.positive(np.array([0.0]))[0])


def test_dressed_frame_unitary(vacuum_residue):
    base = DelaunayFrame(vacuum_residue, route="closed")
    dressed = DressedFrame(base, [SimpleFactor.normalized(0.3, [1, 1j])])
    assert unitarity_residual(lambda lam: dressed.unitary_at(-1.0, 0.5, lam), S1) < 1e-9


def test_special_dressing(vacuum_residue):
    g = special_dressing(vacuum_residue, 0.3)
    report = validate_special_dressing(vacuum_residue, g)
    assert report["pole_residue"] < 1e-8
    assert report["mu2_residual"] < 1e-10
    assert report["det_residual"] < 1e-10


@pytest.mark.parametrize("lam0", [0.0, 1.5, 1j])
def test_special_dressing_outside_disk(vacuum_residue, lam0):
    with pytest.raises(DegenerateError):
        special_dressing(vacuum_residue, lam0)


def test_extraction_round_trip(vacuum_residue):
    g = SimpleFactor.normalized(BUBBLETON_LAM0, [1, 0.5j])
    r = 0.5 * BUBBLETON_LAM0
    c_plus = LoopFunction(lambda lam: factor_product([g], lam), radius=r, tag="positive")
    result = extract_simple_factors(c_plus, vacuum_residue, r=r)
    assert len(result.poles) == 1
    assert abs(result.poles[0] - BUBBLETON_LAM0) < 1e-10
    assert result.reconstruction_residual < 1e-7
    assert result.structure_residual < 1e-7
    assert result.monodromy_unitarity < 1e-8
    factors, _ = result
    assert [f.kind for f in factors] == ["normalized"]


def test_extraction_without_factors(vacuum_residue):
    r = 0.5 * BUBBLETON_LAM0
    result = extract_simple_factors(LoopFunction.identity(radius=r), vacuum_residue, r=r)
    assert result.poles == []
    assert result.reconstruction_residual < 1e-12
    assert result.structure_residual < 1e-10
    assert abs(result.residue.a - vacuum_residue.a) < 1e-8
    assert abs(result.residue.b - vacuum_residue.b) < 1e-8


def test_exp_limit_rate(vacuum_residue):
    report = exp_limit_check(vacuum_residue, 0.3, [1, 0], -np.arange(3.0, 11.0))
    assert abs(report["rate"] - report["expected_rate"]) < 1e-2
    assert report["rows"]["distance"].is_monotonic_decreasing


def test_simple_factor_limit():
    lines = [[1, 1j]] * 3
    report = simple_factor_limit_check(lines, lines, LAM0)
    assert report["rows"]["deviation"].max() < 1e-12
    assert report["bounded"]

    approach = [[1, 1.0 / k] for k in (2, 8, 32, 128)]
    report = simple_factor_limit_check([[1, 0]] * 4, approach, LAM0)
    assert report["decaying"]
    assert report["rows"]["line_distance"].is_monotonic_decreasing


def test_conjugation_check():
    u = np.array([[np.cos(0.7), -np.sin(0.7)], [np.sin(0.7), np.cos(0.7)]], dtype=complex)
    l1 = np.array([1, 0.5j])
    g1 = SimpleFactor.normalized(LAM0, l1)
    g2 = SimpleFactor.normalized(LAM0, np.linalg.solve(u, l1))
    report = conjugation_check(g1, g2, u)
    assert report["line_condition"] < 1e-12
    assert report["pole_lam0"] < 1e-10
    assert report["pole_lam1"] < 1e-10
    assert report["unitarity"] < 1e-10

    with pytest.raises(DegenerateError):
        conjugation_check(g1, SimpleFactor.normalized(0.5, l1), u)


def test_bridge_check_equal_frames():
    f = _unitary_loop()
    report = bridge_check(f, f, 0.3, [1, 1j])
    assert report["before"] < 1e-14
    assert report["unitary_after"] < 1e-10
    assert report["positive_after"] < 1e-10


def test_scenario_round_trip(tmp_path, vacuum_residue):
    g = SimpleFactor.normalized(BUBBLETON_LAM0, [1, 0.5j])
    path = str(tmp_path / "scenario.json")
    save_scenario(path, vacuum_residue, [g])
    res, factors = load_scenario(path)
    assert (res.a, res.b) == (vacuum_residue.a, vacuum_residue.b)
    assert len(factors) == 1
    assert np.allclose(factors[0].W, g.W)
    assert np.allclose(factors[0].eval(S1), g.eval(S1))
