"""Exact Floyd metrics on balls in Cayley graphs of finitely generated groups."""

from .floyd import (
    FloydBracket,
    basepoint_change_check,
    edge_floyd_length,
    floyd_distance,
    floyd_metric,
    metric_comparison_check,
    path_floyd_length,
)
from .functions import (
    affine_distortion,
    distortion,
    exponential,
    identity_distortion,
    inverse_polynomial,
    inverse_power,
    parse_distortion,
    parse_scaling,
)
from .groups import build_ball, load_group, normal_form, parse_group_spec, word_distance
from .karlsson import check_admissible, empirical_scan, karlsson_radius
from .maps import (
    EquivalenceRelation,
    MapSpec,
    check_condition_6,
    check_condition_13,
    lipschitz_constant,
    quasiconvexity_scan,
    shortcut_pseudometric,
    verify_lipschitz,
)
from .paths import classify_path, enumerate_geodesics, far_point_floyd_check, hull, ray_cauchy_check

__version__ = "0.1.0"
