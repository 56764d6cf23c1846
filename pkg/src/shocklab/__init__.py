"""Numerical laboratory for dispersive phase transitions in even matrix models."""

__version__ = "0.1.0"

from .couplings import CouplingVector
from .errors import (BlowUpError, ConfigError, InadmissibleWeightError,
                     InstabilityError, InvalidInputError, InvalidProbeError,
                     MultivaluedRegionError, NoBranchError, NoConvergenceError,
                     NonphysicalSolutionError, OutOfRangeError, PrecisionError,
                     QuadratureFailureError, ShocklabError)
from .lattice import (LatticeWindow, OrderParameterTrace, order_parameter,
                      solve_string, string_jacobian, string_residual, v_explicit,
                      v_general)
from .flows import (FlowLeg, FlowResult, FlowSchedule, LaxMatrix, flow_rhs,
                    integrate_flow, matrix_flow_rhs, spectrum_drift)
from .oracle import (OracleResult, WeightSpec, gaussian_tau, hankel_result,
                     hankel_tau, moments, stieltjes_recurrence)
from .continuum import (Discriminant, EquationOfState, PhasePoint, Root, RootSet,
                        TransportCheck, catastrophe_points, chi, classify,
                        critical_set, discriminant, eos_coefficients,
                        equilibrium_branch, free_energy, solve_eos,
                        transport_consistency)
from .shocks import (ComparisonReport, ConvergenceStudy, OscillationScan, compare,
                     convergence_study, detect_oscillations)
from .presets import PRESETS, Preset, get_preset, run_preset

__all__ = [name for name in dir() if not name.startswith("_")]
