from .convergence import ConvergenceReport, frame_convergence
from .gauge import (
    CoordinateChange,
    GaugePipelineResult,
    GaugeTransform,
    coordinate_change,
    gauge_action,
    gauge_pipeline,
    gauge_series,
    normalize_gauge,
)
from .lcalc import L_apply, L_holo_check, L_inverse, l_dense, l_eigenvalues, l_holo_residual
from .ode import (
    HolomorphicFrame,
    closing_check,
    frame_monodromy,
    integrate_path,
    monodromy,
    monodromy_function,
    monodromy_unitarity,
    ode_solve,
)
from .potential import Potential
from .zap import ZapDecomposition, zap, zap_coefficients
