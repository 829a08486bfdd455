"""Trainable linear-elastic spring networks.

Build triangular lattices, solve their statics, get exact stiffness
gradients from one forward and one adjoint solve, and train spring
constants with Adam on behaviour, regression and classification tasks.
"""
from .adjoint import GradientReport, adjoint_load, batch_gradient, gradient
from .fd_oracle import FdConfig, fd_gradient, step_sweep
from .lattice import LatticeSpec, Network, build_triangular_lattice, prune_bond, validate
from .losses import MSE, CrossEntropy, Quadratic, loss_gradient, loss_value
from .statics import (DofMap, LoadCase, Solution, StaticsOperator, ZeroModeError,
                      compatibility_matrix, assemble_stiffness, detect_zero_modes, solve_statics)
from .tasks import BehaviorTask, IrisTask, RegressionTask, demo_network
from .trainer import AdamState, TrainConfig, TrainRecord, adam_step, retrain, train

__all__ = [
    "GradientReport", "adjoint_load", "batch_gradient", "gradient",
    "FdConfig", "fd_gradient", "step_sweep",
    "LatticeSpec", "Network", "build_triangular_lattice", "prune_bond", "validate",
    "MSE", "CrossEntropy", "Quadratic", "loss_gradient", "loss_value",
    "DofMap", "LoadCase", "Solution", "StaticsOperator", "ZeroModeError",
    "compatibility_matrix", "assemble_stiffness", "detect_zero_modes", "solve_statics",
    "BehaviorTask", "IrisTask", "RegressionTask", "demo_network",
    "AdamState", "TrainConfig", "TrainRecord", "adam_step", "retrain", "train",
]
