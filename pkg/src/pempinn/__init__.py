"""PEM electrolyzer membrane-degradation simulator and physics-informed
calibration engine.

Subpackage map: constants (registry and config), electrochem (voltage
model), degradation (radical chemistry and thinning), simulator (trajectory
and dataset generation), autodiff/network (differentiation engine and MLP),
training (composite loss, Adam, metrics), cli (pipeline commands).
"""

__version__ = "0.1.0"

from .constants import (
    OperatingConditions,
    PhysicsParameters,
    default_conditions,
    default_parameters,
)
from .simulator import Dataset, Trajectory, generate_dataset, integrate_trajectory
from .training import Metrics, TrainingConfig, evaluate, train

__all__ = [
    "__version__",
    "PhysicsParameters",
    "OperatingConditions",
    "default_parameters",
    "default_conditions",
    "Trajectory",
    "Dataset",
    "integrate_trajectory",
    "generate_dataset",
    "TrainingConfig",
    "Metrics",
    "train",
    "evaluate",
]
