"""gradest: gradient estimation from noisy function values.

Seven derivative-free gradient estimators (finite differences, linear
interpolation, Gaussian and sphere smoothing), the closed-form error and
sample-size guarantees that go with them under bounded noise, and a
line-search DFO driver plus experiment harness built on top.
"""
from .core import (NoiseModel, NoisyOracle, ObjectiveFunction, eval_noisy,
                   get_problem, make_linear, make_powell_singular,
                   make_quadratic, make_rosenbrock, make_sincos,
                   make_standard_problems, make_trigonometric)
from .sampling import (DirectionSet, RngStream, coordinate_directions,
                       gaussian_directions, interpolation_directions,
                       monte_carlo_moment, orthonormal_directions,
                       sphere_directions)
from .estimators import (METHODS, EstimatorConfig, GradientEstimate,
                         SingularDirections, ZeroGradient, bsg, cbsg, cfd,
                         cgsg, estimate, estimate_with_retry, ffd, gsg,
                         linear_interp, relative_error)
from .bounds import (BoundQuery, BoundReport, bernstein_sample_size,
                     chebyshev_sample_size, condition_table,
                     deterministic_error_bound, error_floor,
                     ffd_exact_sigma_interval, smoothing_bias_bound,
                     variance_kappa)
from .optimizer import (IterationRecord, LineSearchConfig, NotDescent,
                        OptimizationTrace, StepFailure, armijo_search,
                        fixed_step_dfo, lbfgs_direction, run_dfo)
from .experiments import (ExperimentSpec, ProfileData, SolverSpec,
                          parse_solver, run_bound_validation,
                          run_optimizer_benchmark, run_relative_error_sweep,
                          run_theta_distribution)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # core
    "ObjectiveFunction", "NoiseModel", "NoisyOracle", "eval_noisy",
    "make_sincos", "make_linear", "make_quadratic", "make_rosenbrock",
    "make_powell_singular", "make_trigonometric", "make_standard_problems",
    "get_problem",
    # sampling
    "RngStream", "DirectionSet", "coordinate_directions",
    "gaussian_directions", "sphere_directions", "orthonormal_directions",
    "interpolation_directions", "monte_carlo_moment",
    # estimators
    "METHODS", "GradientEstimate", "EstimatorConfig", "SingularDirections",
    "ZeroGradient", "ffd", "cfd", "linear_interp", "gsg", "cgsg", "bsg",
    "cbsg", "relative_error", "estimate", "estimate_with_retry",
    # bounds
    "BoundQuery", "BoundReport", "deterministic_error_bound",
    "smoothing_bias_bound", "variance_kappa", "chebyshev_sample_size",
    "bernstein_sample_size", "condition_table", "ffd_exact_sigma_interval",
    "error_floor",
    # optimizer
    "LineSearchConfig", "IterationRecord", "OptimizationTrace", "NotDescent",
    "StepFailure", "armijo_search", "lbfgs_direction", "run_dfo",
    "fixed_step_dfo",
    # experiments
    "ExperimentSpec", "SolverSpec", "ProfileData", "parse_solver",
    "run_relative_error_sweep", "run_theta_distribution",
    "run_bound_validation", "run_optimizer_benchmark",
]
