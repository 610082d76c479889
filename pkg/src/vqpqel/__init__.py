"""Variational quantum perceptron search for mislabeled examples, and an ensemble classifier built on it."""

__version__ = "0.1.0"

from .encoding import LabeledDataset, RegisterLayout, build_phi_k, normalize
from .ensemble import EnsembleConfig, EnsembleModel, classify, train_ensemble
from .predictor import predict_label
from .simcore import GateOp, NoiseSpec, StateVector
from .training import TrainConfig, TrainingError, train_vqp
from .vqp import VQPModel, init_model, schedule_iterations

__all__ = [
    "EnsembleConfig", "EnsembleModel", "GateOp", "LabeledDataset", "NoiseSpec", "RegisterLayout",
    "StateVector", "TrainConfig", "TrainingError", "VQPModel", "build_phi_k", "classify", "init_model",
    "normalize", "predict_label", "schedule_iterations", "train_ensemble", "train_vqp",
]
