"""Convolutional autoencoder with hand-written reverse-mode gradients."""

from .network import (CaeModel, LayerSpec, build_architecture, decode, encode, init_params,
                      load, reconstruct, save, zero_params)
from .ops import conv2d, conv_transpose2d, rmse_loss
from .training import TrainConfig, grad_check, train

__all__ = [
    "CaeModel", "LayerSpec", "TrainConfig", "build_architecture", "conv2d", "conv_transpose2d",
    "decode", "encode", "grad_check", "init_params", "load", "reconstruct", "rmse_loss", "save",
    "train", "zero_params",
]
