"""Spectral-preserving mixture of neural-operator experts for velocity-model inversion."""

from .errors import (InvalidConfig, InvalidInput, InvalidState, NumericalError, OracleTooLarge,
                     PremiseViolation, SpamoeError)
from .metrics import band_energies, hl_ratio, radial_grid
from .model import ModelConfig, SpamoeModel, build_model
from .tensor import dft_centered, idft_centered, load_tensor, save_tensor

__version__ = "0.1.0"

__all__ = [
    "InvalidConfig", "InvalidInput", "InvalidState", "NumericalError", "OracleTooLarge",
    "PremiseViolation", "SpamoeError", "band_energies", "hl_ratio", "radial_grid", "ModelConfig",
    "SpamoeModel", "build_model", "dft_centered", "idft_centered", "load_tensor", "save_tensor",
]
