"""High order time integration: integral deferred correction over operator splitting."""

from .errors import (EvaluationError, LinearSolveError, NewtonError, PoleError,
                     SolverError, StepperError, UnsupportedSchemeError, UsageError)
from .idc import (ErrorProblem, IDCConfig, IDCLevelResult, correct_once, idc_solve,
                  predict, residual_integrals, solve_macro_interval)
from .ode import (DiagonalLinearOperator, MatrixLinearOperator, SplitIVP,
                  Trajectory, ZeroOperator, eval_split_rhs)
from .polyint import (DifferentiationMatrix, IntegrationMatrix, UniformNodeSet,
                      differentiation_matrix, integration_matrix, lagrange_eval,
                      partial_integral, sobolev_norm)
from .steppers import (ButcherTableauARK, NewtonConfig, adi_step, adi_tableau,
                       ark_step, get_stepper, lie_trotter_step, lie_trotter_tableau,
                       newton_solve, strang_step, strang_tableau)
from .banded import BandedMatrix
from .stencils import StencilOperator, build_stencil, fd_weights
from .pde2d import (CoefficientField, DirectionalDiffusionOperator, Grid2D,
                    PointwiseSourceOperator, SemiDiscreteSystem, adi_pde_step,
                    assemble_J, error_problem_bc, pointwise_reaction_solve,
                    write_field_snapshot)
from .problems import (PDEProblem, PROBLEM_BUILDERS, example1, example2, example3,
                       fhn, schnakenberg)
from .stability import (StabilityScan, amplification, amplification_field,
                        scan_region, stability_boundary_real_axis)
from .harness import (ConvergenceReport, RunConfig, run_convergence,
                      run_simulation, run_stability)

__version__ = "0.1.0"
