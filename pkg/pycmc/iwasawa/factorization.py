import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.linalg

from pycmc.config import DEFAULT_TOLERANCES, Tolerances
from pycmc.exceptions import FactorizationError
from pycmc.iwasawa.qr import qr_constant
from pycmc.loopcore.annulus import Annulus, circle_points
from pycmc.loopcore.functional import evaluate
from pycmc.loopcore.linalg import IDENTITY, dagger, inv2, op_norm
from pycmc.loopcore.matrix_loop import MatrixLoop

# accepted reconstruction residual, relative to sup ‖Φ‖ on C_r
ACCEPT_RTOL = 1e-9
# above this the factorization is reported as failed instead of degraded
FAIL_RTOL = 1e-6
NEWTON_STEPS = 4


@dataclass
class IwasawaPair:
    """r-Iwasawa factors Φ = F·B.

    Attributes:
        unitary: MatrixLoop, F = Uni_r(Φ), valid on 𝒜_{r,1/r}.
        positive: MatrixLoop, B = Pos_r(Φ), holomorphic on 𝒟_r with B(0) ∈ 𝒯.
        residual: float, sup of ‖F·B − Φ‖ on C_r midpoint samples.
        unitarity_residual: float, sup of ‖F*·F − id‖ on C_r and S¹.
        positivity_residual: float, size of the discarded negative tail of B
            plus the lower-left entry of B(0).
        bandwidth: int, truncation order N of the Toeplitz system.
        radius: float, r.
        scale: float, sup of ‖Φ‖ on C_r.
    """

    unitary: MatrixLoop
    positive: MatrixLoop
    residual: float
    unitarity_residual: float = 0.0
    positivity_residual: float = 0.0
    bandwidth: int = 0
    radius: float = 1.0
    scale: float = 1.0

    @property
    def relative_residual(self) -> float:
        return self.residual / max(1.0, self.scale)

    def unitary_at(self, lam):
        return self.unitary.eval(lam)

    def positive_at(self, lam):
        return self.positive.eval(lam)

    def to_dict(self) -> Dict:
        return {
            "radius": self.radius,
            "bandwidth": self.bandwidth,
            "residual": self.residual,
            "unitarity_residual": self.unitarity_residual,
            "positivity_residual": self.positivity_residual,
            "unitary": self.unitary.to_dict(),
            "positive": self.positive.to_dict(),
        }

    def stat(self):
        print(f"Iwasawa factorization on C_{self.radius:g}:")
        print(f"\t- bandwidth: {self.bandwidth}")
        print(f"\t- reconstruction residual: {self.residual:.3e}")
        print(f"\t- unitarity residual: {self.unitarity_residual:.3e}")
        print(f"\t- positivity residual: {self.positivity_residual:.3e}")

    def __repr__(self):
        return (
            f"IwasawaPair(r={self.radius:g}, N={self.bandwidth}, "
            f"residual={self.residual:.2e})"
        )


def _fourier(values: np.ndarray) -> np.ndarray:
    return np.fft.fft(values, axis=0) / values.shape[0]


def _synthesize(coeffs: np.ndarray, ks: np.ndarray, m: int) -> np.ndarray:
    """Values Σ_k c_k ζ^k at the m-th roots of unity ζ_l = exp(2πil/m)."""
    pad = np.zeros((m, 2, 2), dtype=complex)
    np.add.at(pad, np.mod(ks, m), coeffs)
    return np.fft.ifft(pad, axis=0) * m


def _blocks_to_dense(blocks: np.ndarray) -> np.ndarray:
    rows, cols = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(2 * rows, 2 * cols)


def _solve_gram(x: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Block Toeplitz Cholesky solve of the Wiener–Hopf system on S¹.

    With G = Φᴴ Φ on S¹ and y = B⁻¹ = Σ_{j=0}^{N} ŷ_j λ^j, the conditions
    (G y)_k = 0 for k = 1..N and (G y)_0 = id determine ŷ.
    """
    m = x.shape[0]
    gh = _fourier(dagger(x) @ x)
    idx = np.arange(n + 1)
    big = _blocks_to_dense(gh[np.mod(idx[:, None] - idx[None, :], m)])
    big = 0.5 * (big + dagger(big))
    rhs = np.zeros((2 * (n + 1), 2), dtype=complex)
    rhs[:2] = IDENTITY
    try:
        factor = scipy.linalg.cho_factor(big, lower=False)
    except np.linalg.LinAlgError as e:
        raise FactorizationError(f"Gram Toeplitz matrix is not positive definite: {e}")
    y = scipy.linalg.cho_solve(factor, rhs).reshape(n + 1, 2, 2)
    return y, idx


def _solve_two_circle(x: np.ndarray, xi: np.ndarray, r: float, n: int):
    """Coupled Toeplitz system for r < 1.

    x = Φ(rζ), xi = Φ(rζ)⁻ᴴ. F(rζ) = x·y and F(ζ/r) = xi·w with y holomorphic
    in ζ and w antiholomorphic (ŵ_0 = id); analyticity of F on the annulus
    means [x y]^_k = r^{2k}[xi w]^_k for all k.
    """
    m = x.shape[0]
    xh, xih = _fourier(x), _fourier(xi)
    k = np.arange(-n, n + 1)
    jy = np.arange(0, n + 1)
    jw = np.arange(-n, 0)
    r2 = r ** (2 * np.abs(k))
    cy = np.where(k >= 0, 1.0, -r2)
    cw = np.where(k >= 0, -r2, 1.0)
    ay = cy[:, None, None, None] * xh[np.mod(k[:, None] - jy[None, :], m)]
    aw = cw[:, None, None, None] * xih[np.mod(k[:, None] - jw[None, :], m)]
    big = _blocks_to_dense(np.concatenate([ay, aw], axis=1))
    rhs = (-(cw[:, None, None] * xih[np.mod(k, m)])).reshape(2 * (2 * n + 1), 2)
    try:
        lu = scipy.linalg.lu_factor(big, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as e:
        raise FactorizationError(f"two-circle Toeplitz system failed: {e}")
    sol = scipy.linalg.lu_solve(lu, rhs)
    for _ in range(2):
        sol = sol + scipy.linalg.lu_solve(lu, rhs - big @ sol)
    sol = sol.reshape(2 * n + 1, 2, 2)
    y = sol[: n + 1]
    w = np.concatenate([sol[n + 1 :], IDENTITY[None]], axis=0)
    return y, jy, w, np.arange(-n, 1)


def _normalizer(y0: np.ndarray) -> np.ndarray:
    """Upper triangular R with positive diagonal and Rᴴ R = ŷ_0⁻¹."""
    y0 = 0.5 * (y0 + dagger(y0))
    try:
        gram = np.linalg.inv(y0)
        gram = 0.5 * (gram + dagger(gram))
        return scipy.linalg.cholesky(gram, lower=False)
    except np.linalg.LinAlgError as e:
        raise FactorizationError(f"normalization of B(0) failed: {e}")


def _newton_refine(x: np.ndarray, ys: np.ndarray, steps: int = NEWTON_STEPS) -> np.ndarray:
    """Wilson–Newton refinement of y = B⁻¹ on S¹.

    With Δ = Fᴴ F − id, B ← (id + X)B where X is the positive part of Δ and
    X_0 = strict upper(Δ_0) + ½ diag(Δ_0).
    """
    m = x.shape[0]
    for step in range(steps):
        f = x @ ys
        delta = dagger(f) @ f - IDENTITY
        err = float(op_norm(delta).max())
        logging.debug(f"iwasawa newton step {step}: unitarity defect {err:.3e}")
        if err < 1e-14:
            break
        dh = _fourier(delta)
        ks = np.arange(m // 2)
        xk = dh[: m // 2].copy()
        xk[0] = np.triu(dh[0], 1) + 0.5 * np.diag(np.diag(dh[0]).real)
        ys = ys @ inv2(IDENTITY + _synthesize(xk, ks, m))
    return ys


def _assemble_unitary(inner: np.ndarray, outer: Optional[np.ndarray], r: float) -> MatrixLoop:
    """Laurent coefficients of F from its values on C_r (and C_{1/r})."""
    m = inner.shape[0]
    ks = np.rint(np.fft.fftfreq(m, d=1.0 / m)).astype(int)
    ch = _fourier(inner)
    if outer is None:
        coeffs = ch
    else:
        dh = _fourier(outer)
        # F_k = ĉ_k r^{-k} for k ≤ 0 and F_k = d̂_k r^{k} for k > 0: both decay as r^{|k|}
        coeffs = np.where((ks <= 0)[:, None, None], ch, dh) * (r ** np.abs(ks))[:, None, None]
    order = np.argsort(ks)
    return MatrixLoop(
        coeffs[order],
        int(ks[order][0]),
        radius=r,
        annulus=Annulus.symmetric(r),
        tag="unitary",
        samples_hint=m,
        circles=(r, 1.0 / r),
    ).trim()


def _require_finite(n: int, **arrays) -> None:
    for name, value in arrays.items():
        if not np.all(np.isfinite(value)):
            raise FactorizationError(f"iwasawa: non-finite {name} at N={n}")


def _factor_once(phi, r: float, n: int, tol: Tolerances) -> IwasawaPair:
    m = max(8 * n, tol.samples)
    zeta = circle_points(1.0, m)
    x = evaluate(phi, r * zeta)
    _require_finite(n, samples=x)
    scale = float(op_norm(x).max())
    if r < 1:
        xi = dagger(inv2(x, tol.singular))
        yh, yk, wh, wk = _solve_two_circle(x, xi, r, n)
    else:
        yh, yk = _solve_gram(x, n)
    _require_finite(n, toeplitz_solution=yh)
    rn = _normalizer(yh[0])
    ys = _synthesize(yh @ dagger(rn), yk, m)
    if r < 1:
        ws = _synthesize(wh @ dagger(rn), wk, m)
        unitary = _assemble_unitary(x @ ys, xi @ ws, r)
    else:
        ys = _newton_refine(x, ys)
        unitary = _assemble_unitary(x @ ys, None, r)
    _require_finite(n, positive_samples=ys, unitary_coefficients=unitary.coeffs)
    positive_full = MatrixLoop.from_samples(inv2(ys, tol.singular), radius=r)
    neg_tail = positive_full.negative_tail()
    kmax = max(positive_full.kmax, 0)
    positive = MatrixLoop(
        positive_full.coefficient_range(0, kmax),
        0,
        radius=r,
        tag="positive",
        samples_hint=m,
        truncation_residual=positive_full.truncation_residual,
    )

    u, _ = qr_constant(positive.coefficient(0), tol.singular)
    positive = positive._like(dagger(u) @ positive.coeffs, 0, tag="positive")
    unitary = unitary._like(unitary.coeffs @ u, unitary.kmin, tag="unitary")

    lam_mid = r * circle_points(1.0, m, 0.5)
    phi_mid = evaluate(phi, lam_mid)
    fb = unitary.eval(lam_mid) @ positive.eval(lam_mid)
    _require_finite(n, reconstruction=fb)
    residual = float(op_norm(fb - phi_mid).max())
    f_in = unitary.eval(lam_mid)
    uni = float(op_norm(dagger(unitary.eval(1.0 / np.conj(lam_mid))) @ f_in - IDENTITY).max())
    if r < 1:
        f_s1 = unitary.eval(circle_points(1.0, m, 0.5))
        uni = max(uni, float(op_norm(dagger(f_s1) @ f_s1 - IDENTITY).max()))
    b0 = positive.coefficient(0)
    pos_res = neg_tail / max(1.0, scale) + abs(b0[1, 0])
    _require_finite(n, unitarity_residual=uni, positivity_residual=pos_res)
    return IwasawaPair(
        unitary=unitary,
        positive=positive,
        residual=residual,
        unitarity_residual=uni,
        positivity_residual=pos_res,
        bandwidth=n,
        radius=r,
        scale=scale,
    )


def iwasawa(
    phi,
    r: float = 1.0,
    tol: Tolerances = DEFAULT_TOLERANCES,
    bandwidth: Optional[int] = None,
) -> IwasawaPair:
    """r-Iwasawa factorization Φ = Uni_r(Φ)·Pos_r(Φ).

    Only values of Φ on C_r are used. For r = 1 the positive factor comes
    from the Wiener–Hopf system of the Gram loop Φᴴ Φ (block Toeplitz
    Cholesky) followed by Wilson–Newton refinement; for r < 1 a coupled
    Toeplitz system links C_r with the reflected circle C_{1/r}. The result
    is normalized by B(0) ∈ 𝒯. The truncation order N starts at
    ``tol.bandwidth`` and doubles until the reconstruction residual and the
    unitarity residual are below 1e-9 (relative to sup ‖Φ‖ on C_r).

    Args:
        phi: MatrixLoop, LoopFunction, callable or constant matrix; must be
            defined on C_r with det ≈ 1.
        r: float, radius in (0, 1].
        tol: Tolerances.
        bandwidth: Optional[int], initial N (default ``tol.bandwidth``).

    Returns:
        pair: IwasawaPair.

    Raises:
        DomainError: if Φ cannot be evaluated on C_r.
        FactorizationError: if the Toeplitz system is not positive definite
            or the residual stays above 1e-6, or if a residual is not finite.

    **Examples:**
        >>> pair = iwasawa(MatrixLoop.identity())
        >>> bool(np.allclose(pair.positive_at(0.0), np.eye(2)))
        True
    """
    assert 0 < r <= 1, f"radius must lie in (0, 1], got {r}"
    if isinstance(phi, MatrixLoop) and phi.kmin == phi.kmax == 0:
        u, t = qr_constant(phi.coefficient(0), tol.singular)
        return IwasawaPair(
            unitary=MatrixLoop.constant(u, radius=r, tag="unitary"),
            positive=MatrixLoop.constant(t, radius=r, tag="positive"),
            residual=float(op_norm(u @ t - phi.coefficient(0))),
            radius=r,
            scale=float(op_norm(phi.coefficient(0))),
        )
    n = bandwidth or tol.bandwidth
    best = None
    while True:
        try:
            pair = _factor_once(phi, r, n, tol)
        except FactorizationError as e:
            if best is None:
                raise
            logging.warning(f"iwasawa: {e}; keeping the result at N={best.bandwidth}")
            break
        if best is None or max(pair.relative_residual, pair.unitarity_residual) < max(
            best.relative_residual, best.unitarity_residual
        ):
            best = pair
        if pair.relative_residual <= ACCEPT_RTOL and pair.unitarity_residual <= ACCEPT_RTOL:
            return pair
        if 2 * n > tol.max_bandwidth:
            break
        logging.debug(
            f"iwasawa: residual {pair.relative_residual:.3e}, "
            f"unitarity {pair.unitarity_residual:.3e} at N={n}, doubling"
        )
        n *= 2
    worst = max(best.relative_residual, best.unitarity_residual)
    if worst > FAIL_RTOL:
        raise FactorizationError(
            f"iwasawa did not converge: residual {worst:.3e} at N={best.bandwidth}"
        )
    logging.warning(f"iwasawa: accepted degraded factorization with residual {worst:.3e}")
    return best


def dress_loop(c, x, r: float = 1.0, tol: Tolerances = DEFAULT_TOLERANCES) -> IwasawaPair:
    """Iwasawa factorization of the product C·X (dressing of X by C)."""
    def product(lam):
        return evaluate(c, lam) @ evaluate(x, lam)

    return iwasawa(product, r, tol)
