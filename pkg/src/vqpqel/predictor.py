"""Classify new inputs by interfering them with the anchor example.

The new input and the anchor sit on the two branches of one ancilla index
qubit; after the trained U_L1 on the feature register and H on the ancilla,
the probability of reading (first feature qubit, ancilla) = (1, 0) is
compared with the threshold.
"""

from __future__ import annotations

import math

import numpy as np

from . import simcore
from .mpqc import mpqc_gates
from .simcore import GateOp, StateVector
from .vqp import VQPModel

MODES = ("exact", "sampled")


def _feature_dim(model: VQPModel) -> int:
    return 2**model.layout.n_feature_qubits


def _unit(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    norm = np.linalg.norm(x)
    if norm == 0:
        raise ValueError("input has zero norm")
    return x / norm


def build_prediction_state(x_new, model: VQPModel) -> StateVector:
    """(|x̃⟩|0⟩ + |anchor⟩|1⟩)/√2 over the feature qubits plus one ancilla."""
    x = np.asarray(x_new, dtype=float).reshape(-1)
    if x.size != model.layout.M:
        raise ValueError(f"expected {model.layout.M} features, got {x.size}")
    dim = _feature_dim(model)
    grid = np.zeros((dim, 2))
    grid[: x.size, 0] = _unit(x)
    grid[: model.anchor.size, 1] = _unit(model.anchor)
    return StateVector(grid.reshape(-1) / math.sqrt(2))


def prediction_gates(model: VQPModel, hadamard: bool = True) -> list[GateOp]:
    gates = mpqc_gates(model.theta_f)
    if hadamard:
        gates.append(GateOp("H", (model.layout.n_feature_qubits,)))
    return gates


def outcome_distribution(model: VQPModel, x_new, hadamard: bool = True) -> np.ndarray:
    """Exact distribution over (first feature qubit, ancilla) after the prediction circuit."""
    state = simcore.apply_circuit(build_prediction_state(x_new, model), prediction_gates(model, hadamard))
    simcore.record_run(1)
    return simcore.probabilities(state, (0, model.layout.n_feature_qubits))


def prediction_probability(model: VQPModel, x_new, mode: str = "exact", shots: int = 1000,
                           rng: np.random.Generator | None = None, hadamard: bool = True) -> float:
    """Probability of the outcome 10 (first feature qubit 1, ancilla 0)."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    probs = outcome_distribution(model, x_new, hadamard)
    if mode == "exact":
        return float(np.clip(probs[2], 0.0, 1.0))
    if rng is None:
        raise ValueError("sampled mode needs an rng")
    return float(rng.binomial(shots, min(max(probs[2], 0.0), 1.0)) / shots)


def predict_label(model: VQPModel, x_new, threshold: float | None = None, **kwargs) -> tuple[int, float]:
    """Anchor class when P(10) exceeds the threshold, the other class otherwise."""
    threshold = model.threshold if threshold is None else threshold
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    p = prediction_probability(model, x_new, **kwargs)
    return (model.anchor_class if p > threshold else -model.anchor_class), p


def predict_batch(model: VQPModel, features: np.ndarray, threshold: float | None = None,
                  **kwargs) -> tuple[np.ndarray, np.ndarray]:
    out = [predict_label(model, x, threshold, **kwargs) for x in np.atleast_2d(features)] if len(features) else []
    labels = np.array([o[0] for o in out], dtype=int)
    probs = np.array([o[1] for o in out], dtype=float)
    return labels, probs


def accuracy(predicted: np.ndarray, truth: np.ndarray) -> float:
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    return float(np.mean(predicted == truth)) if truth.size else float("nan")
