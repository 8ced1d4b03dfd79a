from .losses import loss_classification, loss_discriminator, loss_generator, mmd_rbf
from .model import DaModel, build_model, load_model, model_from_spec, save_model
from .train import (
    TrainConfig,
    discriminator_accuracy,
    params_digest,
    train,
    train_adversarial,
    train_cold,
    train_supervised,
    train_warm,
)

__all__ = [
    "DaModel", "TrainConfig", "build_model", "discriminator_accuracy", "loss_classification",
    "load_model", "loss_discriminator", "loss_generator", "mmd_rbf", "model_from_spec", "save_model", "params_digest", "train",
    "train_adversarial", "train_cold", "train_supervised", "train_warm",
]
