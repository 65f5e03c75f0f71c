"""SVGD-based training of energy models: SteinCD, Stein score matching and SteinGAN."""
__version__ = "0.1.0"

from .energy import DiagonalGaussian, GaussianBernoulliRBM, GaussianMixtureEnergy, GBRBMParams, QuadraticModel
from .generator import MlpGenerator
from .kernels import KernelSpec
from .learners import OptimizerState, TrainConfig
from .numerics import ParamLayout, RngStream
from .steingan import SteinGanState, train

__all__ = [
    "DiagonalGaussian",
    "GaussianBernoulliRBM",
    "GaussianMixtureEnergy",
    "GBRBMParams",
    "KernelSpec",
    "MlpGenerator",
    "OptimizerState",
    "ParamLayout",
    "QuadraticModel",
    "RngStream",
    "SteinGanState",
    "TrainConfig",
    "train",
]
