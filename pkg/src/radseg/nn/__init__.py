"""Minimal from-scratch layer set for 1D segmentation networks."""

from radseg.nn.layers import (
    BatchNorm1d,
    Conv1d,
    ConvTranspose1d,
    MaxPool1d,
    ReLU,
    Sequential,
    Sigmoid,
    activation,
    concat_channels,
    sigmoid,
    split_channels,
)
from radseg.nn.losses import loss
from radseg.nn.module import Module
from radseg.nn.optim import AdamState, adam_step

__all__ = [
    "AdamState", "BatchNorm1d", "Conv1d", "ConvTranspose1d", "MaxPool1d", "Module", "ReLU",
    "Sequential", "Sigmoid", "activation", "adam_step", "concat_channels", "loss", "sigmoid",
    "split_channels",
]
