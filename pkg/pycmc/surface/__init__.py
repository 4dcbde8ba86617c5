from .alignment import apply_motion, fit_cylinder, fit_screw, procrustes, self_proximity
from .asymptotics import (
    EndAsymptoticsReport,
    associated_family_check,
    end_asymptotics,
    gauge_invariance_check,
    screw_periodicity_check,
)
from .mesh import SurfaceMesh, build_mesh, make_grid, write_obj
from .sources import DelaunaySource, DressedSource, PotentialSource, delaunay_closes
from .sym import (
    metric_from_B,
    metric_from_rho,
    moving_frame,
    normal,
    normals_from_frames,
    stencil,
    sym,
    sym_from_stencil,
)
