"""Native classifiers (random forest, 1-D CNN) and model persistence."""

from .cnn import ConvBlock, ConvNet, ConvNetClassifier, loss_and_gradients, train_network
from .forest import RandomForestModel
from .persistence import load_model, save_model

__all__ = [
    "RandomForestModel",
    "ConvBlock",
    "ConvNet",
    "ConvNetClassifier",
    "loss_and_gradients",
    "train_network",
    "save_model",
    "load_model",
]
