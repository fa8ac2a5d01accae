"""normlab: numerical laboratory for planar measure geometry under
arbitrary norms."""

from normlab._kernels import BACKEND as kernel_backend
from normlab.barycenter import (
    barycenter_pairing_check,
    decay_scan,
    nonlinear_barycenter,
    polarization_average,
)
from normlab.density import (
    annuli_packing_check,
    density_profile,
    estimate_alpha,
    radial_integral_check,
    strong_cone_check,
    uniformity_check,
)
from normlab.geometry import (
    Cone,
    LinearMap2,
    boundary_normal,
    classify_monotonicity,
    cone_contains,
    farthest_boundary_point,
    find_two_strict_directions,
    quantitative_monotonicity,
    shear_for_weak_monotonicity,
)
from normlab.measures import (
    IfsSpec,
    PointMeasure,
    ball_mass,
    blow_up,
    four_corner_spec,
    gen_ifs,
    gen_lebesgue,
    gen_lebesgue_grid,
    gen_segment,
    push_forward,
    read_pmsr,
    write_pmsr,
)
from normlab.norms import (
    eval_norm,
    euclidean,
    grad_norm_sq,
    linear_image,
    lp,
    non_differentiability_rays,
    polarization,
    polygon,
    random_polygon,
    taylor_remainder,
)
from normlab.touching import (
    ParallelogramSpec,
    classify_touches,
    lipschitz_graph_scan,
    touching_radius,
)

__version__ = "0.1.0"

__all__ = [
    "kernel_backend",
    "barycenter_pairing_check", "decay_scan", "nonlinear_barycenter", "polarization_average",
    "annuli_packing_check", "density_profile", "estimate_alpha",
    "radial_integral_check", "strong_cone_check", "uniformity_check",
    "Cone", "LinearMap2", "boundary_normal", "classify_monotonicity", "cone_contains",
    "farthest_boundary_point", "find_two_strict_directions",
    "quantitative_monotonicity", "shear_for_weak_monotonicity",
    "IfsSpec", "PointMeasure", "ball_mass", "blow_up", "four_corner_spec",
    "gen_ifs", "gen_lebesgue", "gen_lebesgue_grid", "gen_segment",
    "push_forward", "read_pmsr", "write_pmsr",
    "eval_norm", "euclidean", "grad_norm_sq", "linear_image", "lp",
    "non_differentiability_rays", "polarization", "polygon", "random_polygon",
    "taylor_remainder",
    "ParallelogramSpec", "classify_touches", "lipschitz_graph_scan", "touching_radius",
]
