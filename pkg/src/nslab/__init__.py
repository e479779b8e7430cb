"""nslab: wave-front dynamics in the quasiclassical limit on Riemannian
coordinate charts.

The library integrates Hamilton rays, the phase-reparametrized front
equations and the equivalent Newtonian normal-shift system, and checks
the structural identities tying them together (phase level-set
coincidence, first-integral conservation, force-field equivalence).
"""

__version__ = "0.1.0"

from .errors import (AnisotropyError, ConfigError, DegenerateMetricError,
                     DegenerateSlopeError, DomainError, EvaluationError,
                     ExpressionError, FrontShiftError, IntegrationError,
                     IrregularDataError, LegendreInversionError,
                     NewtonConvergenceError, NoAdmissibleNuError, NslabError,
                     NumericError, OrientationError, ShapeError,
                     SingularParametrizationError, TransversalityError,
                     VelocityRangeError)
from .geometry import (MetricChart, christoffel_at, conformal_chart,
                       covariant_rate, diagonal_chart, euclidean_chart,
                       polar_chart, raw_covector_rate, raw_vector_rate,
                       sphere_chart, vector_covariant_rate)
from .symbol import (ExtendedScalar, PhaseField, PolySymbol, apply_transport,
                     eikonal_residual, free_eikonal, half_quadratic,
                     isotropic_medium, linear_index, metric_eikonal,
                     quartic_medium, quartic_norm, symmetrize)
from .legendre import (EnergyField, SphericalLagrangian, StateP, StateU,
                       StateV, build_energy, check_gradient_identity,
                       energy_from_function, lagrangian_value,
                       quadratic_medium_lagrangian, radial_momentum,
                       spherical_from_symbol, to_momentum, to_velocity)
from .forces import (ForceField, make_force, normal_shift_force, projectors,
                     wavefront_force)
from .flow import (ConservationReport, HamiltonFlow, NewtonianFlow,
                   StepperConfig, Trajectory, WavefrontFlow,
                   conservation_report, hamilton_rates, integrate,
                   newtonian_rates, wavefront_rates)
from .front import (FrontMesh, NewtonianSetup, ShiftResult, build_front,
                    circle_embedding, circle_params, latitude_embedding,
                    matched_initial, normality_deviation, phase_spread,
                    plane_embedding, segment_embedding, shell_initial,
                    shift_front, solve_nu)
from .expressions import Expression, parse_expression
