"""Mini-batch semi-stochastic proximal gradient descent (mS2GD)."""

from .data import LabeledDataset, SyntheticSpec, generate_synthetic, normalize_rows, parse_libsvm
from .problem import CompositeProblem, Regularizer, logistic_component, ridge_component
from .sampling import alpha, build_inner_distribution, make_rng, sample_minibatch
from .solver import SolverConfig, ms2gd_run, prox_gd_reference, prox_sgd_run
from .theory import RateInputs, plan, rho_general, rho_simplified, speedup_curve

__version__ = "0.1.0"

__all__ = [
    "LabeledDataset",
    "SyntheticSpec",
    "generate_synthetic",
    "normalize_rows",
    "parse_libsvm",
    "CompositeProblem",
    "Regularizer",
    "logistic_component",
    "ridge_component",
    "alpha",
    "build_inner_distribution",
    "make_rng",
    "sample_minibatch",
    "SolverConfig",
    "ms2gd_run",
    "prox_gd_reference",
    "prox_sgd_run",
    "RateInputs",
    "plan",
    "rho_general",
    "rho_simplified",
    "speedup_curve",
]
