"""Bagging-style ensemble of weak VQPs combined by thresholded belief voting."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .encoding import LabeledDataset, normalize
from .predictor import predict_label
from .training import TrainConfig, train_vqp
from .vqp import VQPModel

log = logging.getLogger(__name__)

TIE_LABEL = 1


class EnsembleError(RuntimeError):
    """A weak learner failed; ``learner`` is its position in the ensemble."""

    def __init__(self, learner: int, cause: Exception):
        super().__init__(f"learner {learner} failed: {cause}")
        self.learner = learner


def _default_thresholds() -> dict[int, float]:
    return {1: 0.1, -1: 0.5}


@dataclass
class EnsembleConfig:
    """``thresholds`` maps a learner's flipped anchor label to its decision threshold."""

    T: int = 4
    ratio: float = 0.0008
    scale: float = 5.0
    thresholds: dict[int, float] = field(default_factory=_default_thresholds)
    seed: int = 0
    L1: int = 3
    L2: int = 3
    ungated: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        self.thresholds = {int(k): float(v) for k, v in self.thresholds.items()}
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        if self.scale <= 1:
            raise ValueError("scale must be > 1")
        if set(self.thresholds) != {-1, 1} or not all(0 < v < 1 for v in self.thresholds.values()):
            raise ValueError("thresholds need one value in (0, 1) for each of -1 and +1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_dict(self) -> dict:
        """Everything except ``workers``, which never changes results."""
        d = self.__dict__.copy()
        del d["workers"]
        d["thresholds"] = {str(k): v for k, v in self.thresholds.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleConfig":
        d = dict(d)
        d["thresholds"] = {int(k): v for k, v in d.get("thresholds", _default_thresholds()).items()}
        return cls(**d)


@dataclass
class Subset:
    """A training subset stored with its anchor label already flipped."""

    data: LabeledDataset
    k: int
    source_rows: np.ndarray


@dataclass
class EnsembleModel:
    learners: list[VQPModel]
    config: EnsembleConfig

    def __post_init__(self) -> None:
        if any(m.calibrated_p is None for m in self.learners):
            raise ValueError("every learner must be trained")

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {"config": self.config.to_dict(), "tie_label": TIE_LABEL,
                    "learners": [f"learner_{t}.json" for t in range(len(self.learners))]}
        (directory / "ensemble.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        for name, model in zip(manifest["learners"], self.learners):
            model.save(directory / name)

    @classmethod
    def load(cls, directory: str | Path) -> "EnsembleModel":
        directory = Path(directory)
        manifest = json.loads((directory / "ensemble.json").read_text())
        learners = [VQPModel.load(directory / name) for name in manifest["learners"]]
        return cls(learners, EnsembleConfig.from_dict(manifest["config"]))


def anchor_classes(T: int) -> list[int]:
    """Round-robin anchor classes: −1, +1, −1, …"""
    return [-1 if t % 2 == 0 else 1 for t in range(T)]


def subsample(dataset: LabeledDataset, config: EnsembleConfig, rng: np.random.Generator) -> list[Subset]:
    """T subsets of round(ratio·N) rows; each puts one example of its anchor class
    last and stores that example's label flipped."""
    size = round(config.ratio * dataset.N)
    if size < 2:
        raise ValueError(f"ratio·N = {config.ratio * dataset.N:g} gives fewer than 2 examples")
    labels = dataset.true_labels
    out = []
    for t, cls in enumerate(anchor_classes(config.T)):
        pool = np.flatnonzero(labels == cls)
        if pool.size == 0:
            raise ValueError(f"class {cls:+d} is absent; anchors cannot be spread across classes")
        anchor = int(rng.choice(pool))
        rest = np.delete(np.arange(dataset.N), anchor)
        rows = np.append(rng.choice(rest, size - 1, replace=False), anchor)
        y = labels[rows].copy()
        y[-1] = -y[-1]
        data = LabeledDataset(dataset.features[rows], y, flipped=size - 1)
        out.append(Subset(data, size - 1, rows))
    return out


def _train_one(args) -> VQPModel:
    t, subset, config, train_config, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    data = normalize(subset.data, "uniform")
    threshold = config.thresholds[int(subset.data.labels[subset.k])]
    try:
        model, _ = train_vqp(data, subset.k, config.L1, config.L2, train_config,
                             threshold=threshold, rng=rng)
    except Exception as exc:  # noqa: BLE001 - re-raised with the learner identity
        raise EnsembleError(t, exc) from exc
    return model


def train_ensemble(dataset: LabeledDataset, config: EnsembleConfig,
                   train_config: TrainConfig | None = None) -> EnsembleModel:
    """Train the T weak learners; results do not depend on ``config.workers``."""
    train_config = train_config or TrainConfig()
    seeds = np.random.SeedSequence(config.seed).spawn(config.T + 1)
    subsets = subsample(dataset, config, np.random.default_rng(seeds[0]))
    jobs = [(t, s, config, train_config, seeds[t + 1]) for t, s in enumerate(subsets)]
    if config.workers == 1:
        learners = [_train_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            learners = list(pool.map(_train_one, jobs))
    for t, m in enumerate(learners):
        log.info("learner %d: anchor class %+d, P(k) %.4f", t, m.anchor_class, m.calibrated_p)
    return EnsembleModel(learners, config)


def belief(model: VQPModel, x_new, scale: float, ungated: bool = False) -> float:
    """scale·y·|p − C_T| when the learner's vote y equals its flipped anchor label, else 0."""
    label, p = predict_label(model, x_new)
    if not ungated and label != model.flipped_label:
        return 0.0
    return scale * label * abs(p - model.threshold)


def beliefs(ensemble: EnsembleModel, x_new) -> np.ndarray:
    cfg = ensemble.config
    return np.array([belief(m, x_new, cfg.scale, cfg.ungated) for m in ensemble.learners])


def classify(ensemble: EnsembleModel, x_new) -> int:
    total = float(np.sum(beliefs(ensemble, x_new)))
    if total == 0:
        return TIE_LABEL
    return 1 if total > 0 else -1


def classify_batch(ensemble: EnsembleModel, features: np.ndarray) -> np.ndarray:
    return np.array([classify(ensemble, x) for x in np.atleast_2d(features)] if len(features) else [], dtype=int)


def with_config(ensemble: EnsembleModel, **changes) -> EnsembleModel:
    return EnsembleModel(ensemble.learners, replace(ensemble.config, **changes))
