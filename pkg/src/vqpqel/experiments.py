"""Seeded end-to-end runs of the toy, linear, noise and ensemble experiments.

Every run derives its randomness from its own seed, so results do not depend
on how runs are spread over worker processes.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import datasets
from .encoding import LabeledDataset, RegisterLayout
from .ensemble import EnsembleConfig, classify_batch, train_ensemble, with_config
from .predictor import accuracy, predict_batch
from .training import TrainConfig, train_vqp
from .vqp import ideal_model, index_controlled_x, leakage_probabilities

TOY_THRESHOLDS = (0.55, 0.60, 0.65)
LINEAR_THRESHOLDS = (0.50, 0.60, 0.65)


def _data_rng(seed: int) -> np.random.Generator:
    # kept apart from the training stream so test sets do not shift with training settings
    return np.random.default_rng(np.random.SeedSequence([seed, 1]))


def map_seeds(fn: Callable, seeds: Sequence[int], workers: int = 1) -> list:
    if workers <= 1:
        return [fn(s) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seeds))


@dataclass
class ToyResult:
    seed: int
    final_p: float
    final_loss: float
    angles: list[float]
    accuracy: dict[float, float] = field(default_factory=dict)


def toy_run(seed: int, iterations: int = 100, test_size: int = 200) -> ToyResult:
    data = datasets.toy4(normalized=True)
    k = data.flipped
    config = TrainConfig(iterations=iterations, seed=seed, cycles=1)
    model, trace = train_vqp(data, k, 1, None, config,
                             fixed_dis=index_controlled_x(RegisterLayout.for_dataset(data), k))
    test = datasets.sample_toy_test(test_size, _data_rng(seed))
    acc = {c: accuracy(predict_batch(model, test.features, c)[0], test.labels) for c in TOY_THRESHOLDS}
    loss = trace.mmd_loss[-1] if len(trace) else float("nan")
    return ToyResult(seed, model.calibrated_p, loss, model.theta_f.flat().tolist(), acc)


@dataclass
class LinearResult:
    seed: int
    layers: int
    noise_p: float
    final_p: float
    final_loss: float
    accuracy: dict[float, float] = field(default_factory=dict)


@dataclass(frozen=True)
class LinearSpec:
    layers: int = 3
    noise_p: float = 0.0
    iterations: int = 100
    test_size: int = 100

    def __call__(self, seed: int) -> LinearResult:
        return linear_run(seed, self.layers, self.noise_p, self.iterations, self.test_size)


def linear_test_set(n: int, rng: np.random.Generator) -> LabeledDataset:
    pos = datasets.sample_linear_test(n - n // 2, 1, rng)
    neg = datasets.sample_linear_test(n // 2, -1, rng)
    return LabeledDataset(np.vstack([pos.features, neg.features]), np.concatenate([pos.labels, neg.labels]))


def linear_run(seed: int, layers: int = 3, noise_p: float = 0.0, iterations: int = 100,
               test_size: int = 100) -> LinearResult:
    data = datasets.linear8(normalized=True)
    config = TrainConfig(iterations=iterations, seed=seed, noise_p=noise_p)
    model, trace = train_vqp(data, data.flipped, layers, layers, config)
    test = linear_test_set(test_size, _data_rng(seed))
    acc = {c: accuracy(predict_batch(model, test.features, c)[0], test.labels) for c in LINEAR_THRESHOLDS}
    loss = trace.mmd_loss[-1] if len(trace) else float("nan")
    return LinearResult(seed, layers, noise_p, model.calibrated_p, loss, acc)


@dataclass
class EnsembleResult:
    seed: int
    far_accuracy: float
    far_accuracy_ungated: float
    mixed_accuracy: float
    mixed_accuracy_ungated: float
    learner_mixed_accuracy: list[float]
    learner_p: list[float]


@dataclass(frozen=True)
class EnsembleSpec:
    train_size: int = 10000
    test_size: int = 300
    margin: float = datasets.FAR_MARGIN
    iterations: int = 100

    def __call__(self, seed: int) -> EnsembleResult:
        return ensemble_run(seed, self.train_size, self.test_size, self.margin, self.iterations)


def ensemble_run(seed: int, train_size: int = 10000, test_size: int = 300,
                 margin: float = datasets.FAR_MARGIN, iterations: int = 100) -> EnsembleResult:
    rng = _data_rng(seed)
    train = datasets.sample_nonlinear(train_size, rng)
    far = datasets.sample_nonlinear(test_size, rng, margin)
    mixed = datasets.sample_nonlinear(test_size, rng)
    config = EnsembleConfig(ratio=8 / train_size, seed=seed)
    model = train_ensemble(train, config, TrainConfig(iterations=iterations, seed=seed))
    ungated = with_config(model, ungated=True)

    def acc(m, d):
        return accuracy(classify_batch(m, d.features), d.labels)

    learners = [accuracy(predict_batch(m, mixed.features)[0], mixed.labels) for m in model.learners]
    return EnsembleResult(seed, acc(model, far), acc(ungated, far), acc(model, mixed), acc(ungated, mixed),
                          learners, [m.calibrated_p for m in model.learners])


def flatten(result) -> dict:
    row = {}
    for key, value in asdict(result).items():
        if isinstance(value, dict):
            row.update({f"{key}@{k}": v for k, v in value.items()})
        elif isinstance(value, list):
            row.update({f"{key}[{i}]": v for i, v in enumerate(value)})
        else:
            row[key] = value
    return row


def write_results(path: str | Path, results: Sequence) -> None:
    rows = [flatten(r) for r in results]
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values) if values else float("nan")


@dataclass
class LeakageRow:
    epsilon: float
    cycles: int
    p_ideal: float
    q_measured: float
    q_predicted: float


def leakage_scan(epsilons: Sequence[float], cycles: Sequence[int], seed: int = 0,
                  N: int = 8, M: int = 4) -> list[LeakageRow]:
    """Exact-mode sweep of disentangler leakage ε against (1−ε)^S·p; the seed picks the marked index."""
    if any(not 0 <= e < 1 for e in epsilons):
        raise ValueError("every epsilon must lie in [0, 1)")
    k = int(np.random.default_rng(seed).integers(N))
    rows = []
    for s in cycles:
        model, state = ideal_model(N, M, k, cycles=s)
        for eps in epsilons:
            p, q = leakage_probabilities(model, state, s, eps)
            rows.append(LeakageRow(float(eps), int(s), p, q, (1 - eps) ** s * p))
    return rows
