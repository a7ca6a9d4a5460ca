"""Pathwise-mild and weak solvers for quasilinear parabolic SPDEs in one space dimension."""

from .errors import (AssemblyError, BlowUpError, BuildError, ConfigurationError, DomainError,
                     FixedPointError, ParameterConditionError, QuasimildError, SolverError)
from .evolution import (EvolutionFamily, TimeMesh, adjoint_family, build_family, check_T_properties,
                        fundamental_identity_residual, propagator, smoothing_diagnostics)
from .fractional import dalpha_norm, default_rho_grid, domain_comparison_constant, fractional_power
from .grid import BoundaryCondition, SpatialGrid, build_grid
from .models import DiffusionModel, SigmaSpec, bounded_diffusion_model, linear_heat_model, skt_model
from .noise import (NoisePath, SolverTag, Trajectory, hoelder_seminorm, hs_norm_sq, ito_cumulative,
                    ito_integral, sample_path, sample_refinable_path, sigma_apply)
from .operators import OperatorMatrix, assemble_operator, bilinear_form
from .solvers import (ResidualReport, SolverConfig, cross_solver_gap, mild_residual,
                      solve_linear_pathwise_mild, solve_quasilinear_fixed_point, solve_weak_galerkin,
                      stochastic_convolution_oracle, weak_residual)

__version__ = "0.1.0"
