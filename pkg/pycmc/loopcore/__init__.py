from .annulus import Annulus, circle_points
from .functional import LoopFunction, as_loop_function, evaluate
from .linalg import (
    IDENTITY,
    SU2_BASIS,
    adj2,
    commutator,
    contour_coefficient,
    dagger,
    det2,
    expm_traceless,
    from_r3,
    inv2,
    op_norm,
    sinhc,
    sqrt_principal,
    to_r3,
)
from .matrix_loop import MatrixLoop
from .norms import cauchy_derivative_bound, region_samples, sup_norm
