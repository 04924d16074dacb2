"""Tops, spinning metrics and contact circles on three-dimensional frame models.

A model is a chart (or the unit sphere in R^4) with three vector fields that
are declared orthonormal.  Everything is computed from the frame: brackets,
the Levi-Civita connection, curvature, geodesics and the dual coframe.
"""

from .expr import FDConfig, parse, to_source, compile_expr, eval_expr
from .models import (Domain, FrameModel, builtin_model, chart_model, permute_frame, rotate_frame,
                     transform_frame, top_table)
from .frame_calc import (christoffel, curvature_tensor, field_properties, jacobi_residual,
                         sectional_curvature, structure_functions)
from .geodesics import integrate_geodesics, rotation_speed, sample_velocities, verify_top_conditions
from .forms import (FormCircle, circle_report, contact_value, k_cartan_normalize, k_cartan_residual,
                    reeb_field)
from .tops import (FrameTransform, apply_transform, build_top, classify_top, extract_spinning_data,
                   is_admissible_transform, rotation_speed_law, verify_spinning_metric)

__all__ = [
    "FDConfig", "parse", "to_source", "compile_expr", "eval_expr",
    "Domain", "FrameModel", "builtin_model", "chart_model", "permute_frame", "rotate_frame",
    "transform_frame", "top_table",
    "christoffel", "curvature_tensor", "field_properties", "jacobi_residual",
    "sectional_curvature", "structure_functions",
    "integrate_geodesics", "rotation_speed", "sample_velocities", "verify_top_conditions",
    "FormCircle", "circle_report", "contact_value", "k_cartan_normalize", "k_cartan_residual", "reeb_field",
    "FrameTransform", "apply_transform", "build_top", "classify_top", "extract_spinning_data",
    "is_admissible_transform", "rotation_speed_law", "verify_spinning_metric",
]
