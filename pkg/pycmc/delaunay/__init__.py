from .frame import DelaunayFrame, closed_form_factorization, eta_matrix, frame_odes, theta_matrix
from .growth import (
    delaunay_positive_factory,
    exp_bound_check,
    growth_measure,
    iwasawa_positive_factory,
    tau,
    tau_grid,
)
from .profile import DelaunayProfile, necksize, profile, psi, psi_table, sigma
from .residue import DelaunayResidue, exp_xy, mu, residue_matrix
from .spectral import ResonancePoint, SpectralData, resonance_points, spectral_data, zeros_of_det
