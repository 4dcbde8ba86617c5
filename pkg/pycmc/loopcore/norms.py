from typing import Dict, Union

import numpy as np

from pycmc.loopcore.annulus import Annulus, circle_points
from pycmc.loopcore.functional import LoopFunction, evaluate
from pycmc.loopcore.linalg import op_norm
from pycmc.loopcore.matrix_loop import MatrixLoop


def region_samples(region, n_radial: int = 5, n_angular: int = 64) -> np.ndarray:
    """λ-samples of a region: an Annulus, a circle radius, or explicit points."""
    if isinstance(region, Annulus):
        return region.samples(n_radial, n_angular)
    if np.ndim(region) == 0:
        return circle_points(float(region), n_angular)
    return np.asarray(region, dtype=complex).ravel()


def sup_norm(
    loop,
    region: Union[Annulus, float, np.ndarray],
    n_radial: int = 5,
    n_angular: int = 64,
) -> float:
    """Sampled supremum of the operator norm of a loop over a region.

    Args:
        loop: MatrixLoop, LoopFunction or callable.
        region: Annulus, circle radius, or array of λ-samples.
        n_radial: int, number of radii for annuli.
        n_angular: int, number of angles per radius.

    Returns:
        sup: float.

    **Examples:**
        >>> sup_norm(MatrixLoop.identity(), 1.0)
        1.0
    """
    lam = region_samples(region, n_radial, n_angular)
    return float(op_norm(evaluate(loop, lam)).max())


def theta_derivative_values(loop, lam) -> np.ndarray:
    if isinstance(loop, MatrixLoop):
        return loop.theta_derivative().eval(lam)
    if not isinstance(loop, LoopFunction):
        loop = LoopFunction(loop)
    return loop.theta_derivative(lam)


def cauchy_derivative_bound(loop, inner: Annulus, outer: Annulus, n_angular: int = 64) -> Dict:
    """Compares the θ-derivative on ``inner`` with the Cauchy estimate from ``outer``.

    For λ in the inner annulus at distance d from the boundary of the outer
    one, ‖∂_θX(λ)‖ ≤ |λ|·sup_outer‖X‖ / d.

    Returns:
        report: Dict with keys derivative_sup, cauchy_bound, passed.
    """
    assert outer.inner <= inner.inner and inner.outer <= outer.outer, (
        "inner annulus must lie inside the outer one"
    )
    lam = inner.samples(5, n_angular)
    deriv = op_norm(theta_derivative_values(loop, lam))
    outer_sup = sup_norm(loop, outer, 7, n_angular)
    mod = np.abs(lam)
    dist = np.minimum(mod - outer.inner, outer.outer - mod)
    bound = mod * outer_sup / np.maximum(dist, 1e-300)
    return {
        "derivative_sup": float(deriv.max()),
        "cauchy_bound": float(bound.min()),
        "passed": bool(np.all(deriv <= bound * (1 + 1e-9))),
    }
