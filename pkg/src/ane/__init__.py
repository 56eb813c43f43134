"""Adaptive network enhancement for least-squares approximation with
two-layer ReLU networks."""

from .driver import AneConfig, RunReport, amr_integration, amr_only, ane_fixed_mesh, ane_full, fixed_network, relative_error
from .estimator import AdaptiveReLURegressor, ReLUNetworkRegressor
from .exceptions import (
    ANEError,
    ConfigError,
    DegenerateElementError,
    DegenerateNeuronError,
    DivergenceError,
    NonFiniteSampleError,
    RefinementBudgetError,
    SingularSystemError,
)
from .network import ReluModel, evaluate, evaluate_batch, load_model, normalize, parameter_count, save_model
from .optimize import TrainConfig, adam_train
from .quadrature import Domain, QuadMesh, WeightedPoints, refine_cells, uniform_mesh
from .targets import make_target

__version__ = "0.1.0"

__all__ = [
    "AdaptiveReLURegressor",
    "ReLUNetworkRegressor",
    "AneConfig",
    "RunReport",
    "TrainConfig",
    "ReluModel",
    "Domain",
    "QuadMesh",
    "WeightedPoints",
    "ane_fixed_mesh",
    "ane_full",
    "amr_integration",
    "amr_only",
    "fixed_network",
    "relative_error",
    "adam_train",
    "evaluate",
    "evaluate_batch",
    "normalize",
    "parameter_count",
    "save_model",
    "load_model",
    "uniform_mesh",
    "refine_cells",
    "make_target",
    "ANEError",
    "ConfigError",
    "DegenerateElementError",
    "DegenerateNeuronError",
    "DivergenceError",
    "NonFiniteSampleError",
    "RefinementBudgetError",
    "SingularSystemError",
]
