"""dropgen: generation-phase dropout for GANs.

Train DCGAN-style models with inverted dropout, then reuse dropout at
generation time -- with independently controllable drop and scale
probabilities -- to produce many distinct outputs from a single latent.
Ships the training loop, the variety-measurement experiment matrix, and a
local serving API for interactive exploration.
"""

from .layers import DropoutSpec, DropoutMask, LayerStack, dropout_forward
from .models import (DiscriminatorSpec, GenerationConfig, GeneratorSpec,
                     build_discriminator, build_generator, generate)
from .tensor import Tensor, elementwise, conv2d, conv2d_transpose
from .training import TrainConfig, TrainLog, train_gan
from .variety import ExperimentMatrix, VarietyReport, run_matrix, variety_std

__version__ = "0.1.0"

__all__ = [
    "Tensor", "elementwise", "conv2d", "conv2d_transpose",
    "DropoutSpec", "DropoutMask", "LayerStack", "dropout_forward",
    "GeneratorSpec", "DiscriminatorSpec", "GenerationConfig",
    "build_generator", "build_discriminator", "generate",
    "TrainConfig", "TrainLog", "train_gan",
    "ExperimentMatrix", "VarietyReport", "run_matrix", "variety_std",
]
