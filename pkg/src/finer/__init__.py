"""Coordinate networks with variable-periodic activations.

Submodules: ``net`` (MLP, init, gradients), ``optim`` (Adam, training),
``ntk`` (tangent kernels), ``images`` / ``sdf`` (fitting tasks),
``geometry`` (marching cubes and metrics), ``cli``.
"""
from ._accel import active_backend, backend
from .activations import ActivationFamily, finer, gaussian, identity, relu, sine
from .errors import ConfigError, ContractError, ConvergenceError, NonFiniteError
from .net import InitScheme, Mlp, forward, init_mlp, predict

__all__ = [
    "ActivationFamily", "ConfigError", "ContractError", "ConvergenceError", "InitScheme", "Mlp",
    "NonFiniteError", "active_backend", "backend", "finer", "forward", "gaussian", "identity",
    "init_mlp", "predict", "relu", "sine",
]
__version__ = "0.1.0"
