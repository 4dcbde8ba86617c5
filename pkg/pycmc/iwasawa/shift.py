import logging
from typing import Optional

import numpy as np

from pycmc.config import DEFAULT_TOLERANCES, Tolerances
from pycmc.exceptions import DomainError, InconsistencyError
from pycmc.iwasawa.factorization import IwasawaPair, iwasawa
from pycmc.iwasawa.qr import qr_constant
from pycmc.loopcore.annulus import circle_points
from pycmc.loopcore.functional import evaluate
from pycmc.loopcore.linalg import dagger, inv2, op_norm
from pycmc.loopcore.matrix_loop import MatrixLoop

SHIFT_RTOL = 1e-8


def shift_split(
    x,
    y_positive,
    r: float = 1.0,
    tol: Tolerances = DEFAULT_TOLERANCES,
    pair: Optional[IwasawaPair] = None,
    verify: bool = False,
) -> np.ndarray:
    """Unitary U with Uni_r(XY) = Uni_r(X)·U and Pos_r(XY) = U⁻¹·Pos_r(X)·Y.

    Writing X = F·B, the product B·Y is positive, so only its value at 0 has
    to be brought back into 𝒯: U is the unitary QR factor of B(0)·Y(0).

    Args:
        x: loop-like, the loop X.
        y_positive: loop-like, holomorphic on 𝒟_r (not necessarily normalized).
        r: float, radius.
        tol: Tolerances.
        pair: Optional[IwasawaPair], precomputed factorization of X.
        verify: bool, recompute Iwasawa(XY) and compare both identities.

    Returns:
        u: 2×2 unitary.

    Raises:
        DomainError: if Y has a non-trivial negative Laurent part.
        InconsistencyError: if ``verify`` and the identities fail.
    """
    if isinstance(y_positive, MatrixLoop) and not y_positive.is_positive(tol.equality):
        raise DomainError(f"shift_split needs a positive loop, got negative tail {y_positive.negative_tail():.3e}")
    if pair is None:
        pair = iwasawa(x, r, tol)
    y0 = evaluate(y_positive, 0.0)
    u, _ = qr_constant(pair.positive.coefficient(0) @ y0, tol.singular)
    if verify:
        def product(lam):
            return evaluate(x, lam) @ evaluate(y_positive, lam)

        joint = iwasawa(product, r, tol)
        lam = circle_points(r, 64, 0.5)
        err_f = op_norm(joint.unitary_at(lam) - pair.unitary_at(lam) @ u).max()
        b_xy = dagger(u) @ pair.positive_at(lam) @ evaluate(y_positive, lam)
        scale = max(1.0, float(op_norm(b_xy).max()))
        err_b = op_norm(joint.positive_at(lam) - b_xy).max() / scale
        logging.debug(f"shift_split check: unitary {err_f:.3e}, positive {err_b:.3e}")
        if max(err_f, err_b) > SHIFT_RTOL:
            raise InconsistencyError(
                f"shift identities violated: unitary {err_f:.3e}, positive {err_b:.3e}"
            )
    return u


def positive_ratio(pair_a: IwasawaPair, pair_b: IwasawaPair, lam) -> np.ndarray:
    """Pos(a)·Pos(b)⁻¹ at λ."""
    return pair_a.positive_at(lam) @ inv2(pair_b.positive_at(lam))
