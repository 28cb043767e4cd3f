"""Numerical laboratory for homogeneous cones of the Alt-Phillips energy.

Desk-scale verification of the cone-classification machinery around the
classical obstacle problem: the sphere-integral inequality on parabola
cones and its symmetric equality cases, the dimension-reduction identity,
the 2-homogenizing transform, and the concentration of minimizing cones
toward symmetric profiles as the exponent approaches 1.
"""

from .backend import backend_name
from .cones import (Exponent, HalfSpaceCone, Interpolation, ParabolaCone,
                    SymmetricCone, eval_parabola, flat_cone_eval,
                    gradient_parabola, interpolate, linf_distance_quadratics,
                    make_exponent, nearest_symmetric, t_bar,
                    tangential_gradient)
from .inequality import (InequalityVerdict, QReport, Q_direct, Q_expanded,
                         dimension_reduction_check, q_integrand, q_report,
                         q_second_derivative, q_value, random_parabola,
                         verify_inequality)
from .solver import (GridField, SolverConfig, contact_fraction,
                     discrete_energy, el_residual, green_identity_check,
                     homogeneity_defect, linf_distance_to_cone, make_field,
                     minimize, read_field, transform_field,
                     transformed_residual, write_field)
from .sphere import (SphereRule, build_rule, integrate, richardson_error,
                     surface_area, wallis)

__version__ = "0.1.0"
