"""Acoustic scattering control in a 1D latent space.

A 2D damped wave-equation environment with actuated disk scatterers, a
trainable surrogate that encodes observations and designs into a 1D latent
wave system with its own learned absorbing layer, exact discrete-adjoint
training, and random-shooting model-predictive control on top.
"""

from .env import AcousticEnv, Design, MediumParams, Observation, default_design
from .errors import BlowUpError, ConfigError, GradientError, ParameterError
from .grid import Field, Grid1D, Grid2D
from .kernels import backend_name, has_native
from .latent import LatentConditions, LatentState, rollout, sinusoidal_embed
from .mpc import MpcConfig, control_episode, plan
from .pml import LatentPmlParams, build_ramp, realize_latent_pml, zero_profile
from .training import (
    SurrogateModel,
    TrainConfig,
    adjoint_gradients,
    build_model,
    evaluate_horizon,
    load_model,
    loss,
    save_model,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AcousticEnv",
    "BlowUpError",
    "ConfigError",
    "Design",
    "Field",
    "GradientError",
    "Grid1D",
    "Grid2D",
    "LatentConditions",
    "LatentPmlParams",
    "LatentState",
    "MediumParams",
    "MpcConfig",
    "Observation",
    "ParameterError",
    "SurrogateModel",
    "TrainConfig",
    "adjoint_gradients",
    "backend_name",
    "build_model",
    "build_ramp",
    "control_episode",
    "default_design",
    "evaluate_horizon",
    "has_native",
    "load_model",
    "loss",
    "plan",
    "realize_latent_pml",
    "rollout",
    "save_model",
    "sinusoidal_embed",
    "train",
    "zero_profile",
    "__version__",
]
