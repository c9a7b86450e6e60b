"""Two-dimensional acoustic obstacle scattering and single-measurement
identification experiments."""

__version__ = "0.1.0"

from .farfield import (DirectionGrid, FarFieldMatrix, FarFieldPattern, add_noise,
                       l2_distance, relative_distance, rotate_predict, translate_pattern,
                       trig_interpolate)
from .geometry import (BoundaryCondition, Obstacle, RigidMotion, circle, ellipse, kite,
                       rounded_triangle, trig_curve)
from .identify import (IdentifyConfig, ShapeDictionary, identify, precompute, result_to_text,
                       separability_check, shipped_catalog)
from .mc import (ExperimentConfig, SuccessConfig, distinguish_experiment,
                 identification_success_rate, k_scan, stability_profile)
from .scatter import (IncidentPlaneWave, MfsConfig, disk_far_field_series, far_field,
                      solve)

__all__ = [
    "DirectionGrid", "FarFieldMatrix", "FarFieldPattern", "add_noise", "l2_distance",
    "relative_distance", "rotate_predict", "translate_pattern", "trig_interpolate",
    "BoundaryCondition", "Obstacle", "RigidMotion", "circle", "ellipse", "kite",
    "rounded_triangle", "trig_curve", "IdentifyConfig", "ShapeDictionary", "identify",
    "precompute", "result_to_text", "separability_check", "shipped_catalog",
    "ExperimentConfig", "SuccessConfig", "distinguish_experiment",
    "identification_success_rate", "k_scan", "stability_profile", "IncidentPlaneWave",
    "MfsConfig", "disk_far_field_series", "far_field", "solve",
]
