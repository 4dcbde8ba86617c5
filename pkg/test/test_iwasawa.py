import numpy as np
import pytest

from pycmc.delaunay import closed_form_factorization, profile
from pycmc.config import Tolerances
from pycmc.exceptions import DomainError, FactorizationError, SingularLoopError
from pycmc.iwasawa import dress_loop, is_upper_positive, iwasawa, positive_ratio, qr_constant, rq_constant, shift_split
from pycmc.loopcore import IDENTITY, LoopFunction, MatrixLoop, circle_points, dagger, expm_traceless, inv2, op_norm

NILPOTENT = np.array([[0.2, 0.1], [-0.4, -0.2]], dtype=complex)
LOWER = np.array([[1, 0], [0.3j, 1]], dtype=complex)


def _delaunay_exp(res, x, y):
    return LoopFunction(lambda lam: expm_traceless((x + 1j * y) * res.matrix(lam)))


def _positive_y():
    """L·(id + λN), det ≡ 1, holomorphic, Y(0) lower triangular."""
    return MatrixLoop([LOWER, LOWER @ NILPOTENT], 0)


@pytest.mark.parametrize(
    "m",
    [np.eye(2), np.diag([2.0, 0.5]), np.array([[0, -1], [1, 0]]), np.array([[1 + 1j, 2], [0.5j, 1 - 0.5j]])],
)
def test_qr_constant(m):
    u, t = qr_constant(m)
    assert np.allclose(u @ t, m)
    assert np.allclose(dagger(u) @ u, IDENTITY)
    assert is_upper_positive(t)


def test_qr_constant_examples():
    u, t = qr_constant(np.eye(2))
    assert np.allclose(u, IDENTITY) and np.allclose(t, IDENTITY)
    u, t = qr_constant(np.diag([2.0, 0.5]))
    assert np.allclose(u, IDENTITY) and np.allclose(t, np.diag([2.0, 0.5]))
    _, t = qr_constant([[0, -1], [1, 0]])
    assert np.allclose(t, IDENTITY)
    with pytest.raises(SingularLoopError):
        qr_constant([[1, 1], [1, 1]])


def test_rq_constant():
    m = np.array([[1 + 1j, 2], [0.5j, 1 - 0.5j]])
    t, u = rq_constant(m)
    assert np.allclose(t @ u, m)
    assert np.allclose(u @ dagger(u), IDENTITY)
    assert is_upper_positive(t)


def test_iwasawa_of_identity():
    pair = iwasawa(MatrixLoop.identity())
    assert np.allclose(pair.positive_at(0.0), IDENTITY)
    assert np.allclose(pair.unitary_at(0.5j), IDENTITY)


def test_iwasawa_matches_closed_form(unduloid_residue):
    res = unduloid_residue
    x, y = -0.7, 0.2
    pair = iwasawa(_delaunay_exp(res, x, y))
    assert pair.relative_residual < 1e-9
    assert is_upper_positive(pair.positive_at(0.0))
    lam = circle_points(1.0, 16, offset=0.25)
    f, b = closed_form_factorization(res, profile(res), x, y, lam)
    assert np.max(op_norm(pair.unitary_at(lam) - f)) < 1e-8
    assert np.max(op_norm(pair.positive_at(lam) - b)) < 1e-8
    inner = circle_points(0.2, 8)
    _, b_inner = closed_form_factorization(res, profile(res), x, y, inner)
    assert np.max(op_norm(pair.positive_at(inner) - b_inner)) < 1e-8


def test_r_iwasawa_inside_unit_circle(vacuum_residue):
    r = 0.5
    phi = _delaunay_exp(vacuum_residue, 0.3, 0.2)
    pair = iwasawa(phi, r=r)
    assert pair.relative_residual < 1e-9
    lam = circle_points(r, 32, offset=0.5)
    assert np.max(op_norm(pair.unitary_at(lam) @ pair.positive_at(lam) - phi(lam))) < 1e-8
    # F is r-unitary: F(1/λ̄)ᴴ F(λ) = id on C_r
    star = dagger(pair.unitary_at(1.0 / np.conj(lam)))
    assert np.max(op_norm(star @ pair.unitary_at(lam) - IDENTITY)) < 1e-8
    assert is_upper_positive(pair.positive_at(0.0))


def _random_exp_loop(rng, scale=0.1):
    """exp of a random traceless Laurent polynomial of degree ±2."""
    coeffs = rng.normal(size=(5, 2, 2)) + 1j * rng.normal(size=(5, 2, 2))
    coeffs -= 0.5 * np.trace(coeffs, axis1=1, axis2=2)[:, None, None] * IDENTITY
    loop = MatrixLoop(scale * coeffs, -2)
    return LoopFunction(lambda lam: expm_traceless(loop.eval(lam)))


@pytest.mark.slow
def test_r_iwasawa_at_high_bandwidth(rng):
    # 2048 samples on C_0.5 put r^{-k} beyond the float range at the band edge
    tol = Tolerances(bandwidth=256, max_bandwidth=256)
    lam = circle_points(0.5, 32, offset=0.5)
    for _ in range(5):
        phi = _random_exp_loop(rng)
        pair = iwasawa(phi, r=0.5, tol=tol)
        assert np.all(np.isfinite(pair.unitary.coeffs)) and np.all(np.isfinite(pair.positive.coeffs))
        assert pair.relative_residual < 1e-9
        assert pair.unitarity_residual < 1e-9
        assert pair.positivity_residual < 1e-8
        assert np.max(op_norm(pair.unitary_at(lam) @ pair.positive_at(lam) - phi(lam))) < 1e-8


def test_iwasawa_rejects_non_finite_samples():
    def broken(lam):
        out = np.broadcast_to(IDENTITY, np.shape(lam) + (2, 2)).copy()
        out[0, 0, 1] = np.nan
        return out

    with pytest.raises(FactorizationError):
        iwasawa(LoopFunction(broken), r=0.5)


def test_dress_loop_by_identity(vacuum_residue):
    phi = _delaunay_exp(vacuum_residue, 0.3, 0.0)
    lam = circle_points(1.0, 8, offset=0.5)
    a, b = iwasawa(phi), dress_loop(IDENTITY, phi)
    assert np.max(op_norm(a.positive_at(lam) - b.positive_at(lam))) < 1e-10


def test_shift_split_with_identity(vacuum_residue):
    u = shift_split(_delaunay_exp(vacuum_residue, 0.3, 0.2), MatrixLoop.identity())
    assert np.allclose(u, IDENTITY, atol=1e-10)


def test_shift_split_identities(vacuum_residue):
    x = _delaunay_exp(vacuum_residue, 0.3, 0.2)
    y = _positive_y()
    pair = iwasawa(x)
    u = shift_split(x, y, pair=pair, verify=True)
    assert np.allclose(dagger(u) @ u, IDENTITY)
    joint = iwasawa(lambda lam: x(lam) @ y(lam))
    lam = circle_points(1.0, 8, offset=0.5)
    expected = dagger(u) @ pair.positive_at(lam) @ y(lam) @ inv2(pair.positive_at(lam))
    assert np.max(op_norm(positive_ratio(joint, pair, lam) - expected)) < 1e-8


def test_shift_split_rejects_negative_loop(vacuum_residue):
    y = MatrixLoop([[[0, 1], [0, 0]], IDENTITY], -1)
    with pytest.raises(DomainError):
        shift_split(_delaunay_exp(vacuum_residue, 0.3, 0.2), y)
