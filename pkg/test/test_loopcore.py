import numpy as np
import pytest
import scipy.linalg

from pycmc.exceptions import DomainError, PoleError, SingularLoopError
from pycmc.loopcore import (
    IDENTITY,
    SU2_BASIS,
    Annulus,
    LoopFunction,
    MatrixLoop,
    cauchy_derivative_bound,
    circle_points,
    contour_coefficient,
    dagger,
    det2,
    expm_traceless,
    from_r3,
    inv2,
    op_norm,
    sqrt_principal,
    sup_norm,
    to_r3,
)

NILPOTENT = np.array([[0.2, 0.1], [-0.4, -0.2]], dtype=complex)


def _random_laurent(rng, kmin=-2, kmax=2):
    coeffs = rng.normal(size=(kmax - kmin + 1, 2, 2)) + 1j * rng.normal(size=(kmax - kmin + 1, 2, 2))
    return MatrixLoop(coeffs, kmin)


def test_monomial_eval():
    loop = MatrixLoop.monomial(-1, [[0, 1], [0, 0]])
    assert loop.eval(2.0)[0, 1] == 0.5
    assert loop.kmin == loop.kmax == -1
    with pytest.raises(PoleError):
        loop.eval(0.0)


def test_from_samples_recovers_coefficients(rng):
    loop = _random_laurent(rng)
    lam = circle_points(0.8, 64)
    rebuilt = MatrixLoop.from_samples(loop.eval(lam), radius=0.8)
    for k in range(-2, 3):
        assert np.allclose(rebuilt.coefficient(k), loop.coefficient(k), atol=1e-11)
    assert op_norm(rebuilt.coefficient(5)) < 1e-11


def test_from_samples_stays_finite_on_small_circle():
    loop = MatrixLoop([NILPOTENT.T, IDENTITY, NILPOTENT], -1, radius=0.5)
    lam = circle_points(0.5, 4096)
    rebuilt = MatrixLoop.from_samples(loop.eval(lam), radius=0.5)
    assert np.all(np.isfinite(rebuilt.coeffs))
    assert rebuilt.kmax < 8
    mid = circle_points(0.5, 64, offset=0.5)
    assert np.max(op_norm(rebuilt.eval(mid) - loop.eval(mid))) < 1e-12
    assert np.isfinite(rebuilt.negative_tail())


def test_from_function_adapts_to_entire_function():
    loop = MatrixLoop.from_function(lambda lam: expm_traceless(lam[:, None, None] * SU2_BASIS[2]))
    lam = circle_points(1.0, 17, offset=0.3)
    exact = expm_traceless(lam[:, None, None] * SU2_BASIS[2])
    assert np.max(op_norm(loop.eval(lam) - exact)) < 1e-10
    assert loop.kmin >= 0


def test_product_and_sum_are_pointwise(rng):
    x, y = _random_laurent(rng), _random_laurent(rng, -1, 3)
    lam = circle_points(1.3, 11, offset=0.2)
    assert np.allclose((x @ y).eval(lam), x.eval(lam) @ y.eval(lam))
    assert np.allclose((x + y).eval(lam), x.eval(lam) + y.eval(lam))
    assert np.allclose((x - 2 * y).eval(lam), x.eval(lam) - 2 * y.eval(lam))


def test_star_reflects_through_unit_circle(rng):
    x = _random_laurent(rng)
    lam = circle_points(0.7, 9, offset=0.1)
    assert np.allclose(x.star().eval(lam), dagger(x.eval(1.0 / np.conj(lam))))
    assert x.star().radius == pytest.approx(1.0)


def test_inverse_of_sl2_loop_is_exact():
    lower = np.array([[1, 0], [0.3j, 1]])
    y = MatrixLoop([lower, lower @ NILPOTENT], 0)
    inv = y.inv()
    lam = circle_points(1.0, 16)
    assert np.max(op_norm((y @ inv).eval(lam) - IDENTITY)) < 1e-13
    assert y.is_positive()


def test_inverse_raises_on_singular_loop():
    with pytest.raises(SingularLoopError):
        MatrixLoop.constant([[1, 0], [0, 0]]).inv()
    with pytest.raises(SingularLoopError):
        inv2(np.zeros((2, 2)))


def test_theta_derivative_of_monomial():
    loop = MatrixLoop.monomial(3, IDENTITY)
    lam = circle_points(1.0, 8)
    expected = 3j * lam[:, None, None] ** 3 * IDENTITY
    assert np.allclose(loop.theta_derivative().eval(lam), expected)
    assert np.allclose(LoopFunction(loop.eval).theta_derivative(lam), expected, atol=1e-9)


def test_negative_tail():
    loop = MatrixLoop([[[0, 1], [0, 0]], IDENTITY], -1, radius=0.5)
    assert loop.negative_tail() == pytest.approx(2.0)
    assert not loop.is_positive()


def test_dict_round_trip(rng):
    loop = _random_laurent(rng)
    again = MatrixLoop.from_dict(loop.to_dict())
    assert again.kmin == loop.kmin and np.allclose(again.coeffs, loop.coeffs)


def test_annulus_membership_and_inversion():
    ann = Annulus(0.5, 2.0)
    assert list(ann.contains(np.array([0.5, 1.0, 2.0, 2.5, 0.1]))) == [True, True, True, False, False]
    inv = Annulus(0.25, 4.0).inverted()
    assert inv.inner == pytest.approx(0.25) and inv.outer == pytest.approx(4.0)
    assert Annulus.disk(1.0).inverted().outer == np.inf
    assert Annulus.symmetric(0.5).intersect(Annulus.disk(1.0)).outer == 1.0
    with pytest.raises(AssertionError):
        Annulus(1.0, 0.5)


def test_loop_function_domain():
    loop = LoopFunction(lambda lam: np.broadcast_to(IDENTITY, lam.shape + (2, 2)), Annulus.disk(0.5))
    assert np.allclose(loop(0.2), IDENTITY)
    with pytest.raises(DomainError):
        loop.eval(1.0)
    assert loop.star().annulus.inner == pytest.approx(2.0)


def test_loop_function_algebra():
    f = LoopFunction(lambda lam: expm_traceless((lam + 1 / lam)[:, None, None] * SU2_BASIS[0]))
    lam = circle_points(1.0, 12)
    assert np.max(op_norm((f @ f.inv())(lam) - IDENTITY)) < 1e-13
    # (λ + 1/λ)e₁ is skew-hermitian on S¹
    assert np.max(op_norm((f.star() @ f)(lam) - IDENTITY)) < 1e-13


def test_expm_traceless_matches_scipy(rng):
    x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    x -= 0.5 * np.trace(x) * np.eye(2)
    assert np.allclose(expm_traceless(x), scipy.linalg.expm(x), atol=1e-12)
    assert np.allclose(expm_traceless(np.zeros((2, 2))), IDENTITY)


def test_r3_identification():
    assert np.allclose(to_r3(SU2_BASIS), np.eye(3))
    v = np.array([0.3, -1.2, 2.0])
    assert np.allclose(to_r3(from_r3(v)), v)
    assert np.allclose(det2(from_r3(v)), np.dot(v, v))


def test_sqrt_principal_branch():
    assert sqrt_principal(-1.0) == pytest.approx(1j)
    assert sqrt_principal(4.0) == pytest.approx(2.0)
    assert sqrt_principal(-4.0 - 1e-20j).imag > 0


def test_contour_coefficient():
    res = contour_coefficient(lambda l: 1.0 / (l - 0.3), 0.3, 0.01, k=-1)
    assert abs(res - 1) < 1e-12
    val = contour_coefficient(lambda l: np.exp(l), 0.0, 0.5, k=0)
    assert abs(val - 1) < 1e-14


def test_sup_norm_and_cauchy_bound():
    assert sup_norm(MatrixLoop.identity(), 1.0) == 1.0
    loop = MatrixLoop.monomial(2, IDENTITY)
    assert sup_norm(loop, Annulus.disk(0.5)) == pytest.approx(0.25)
    report = cauchy_derivative_bound(loop, Annulus(0.5, 0.8), Annulus(0.25, 1.0))
    assert report["passed"]
    assert report["derivative_sup"] == pytest.approx(2 * 0.8**2, rel=1e-12)
