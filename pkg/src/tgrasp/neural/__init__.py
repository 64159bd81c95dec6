"""Autodiff core, layers, optimizer, checkpoints."""

from . import autodiff, layers
from .autodiff import DiffArray, backward, leaf
from .checkpoint import load_params, save_params
from .layers import kl_standard_normal, reparameterize
from .optim import ParamStore, adam_step

__all__ = ["DiffArray", "ParamStore", "adam_step", "autodiff", "backward",
           "kl_standard_normal", "layers", "leaf", "load_params",
           "reparameterize", "save_params"]
