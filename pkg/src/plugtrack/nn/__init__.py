from .layers import (BatchNorm, Dense, Dropout, DropoutStreams, LayerSpec,
                     LSTM, ReLU, Sequential, Sigmoid, build_layer,
                     count_parameters)
from .optim import Adam
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Adam", "BatchNorm", "Dense", "Dropout", "DropoutStreams", "LSTM",
    "LayerSpec", "ReLU", "Sequential", "Sigmoid", "build_layer",
    "count_parameters", "load_checkpoint", "save_checkpoint",
]
