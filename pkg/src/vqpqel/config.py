"""Strict TOML/JSON run configuration for the command line."""

from __future__ import annotations

import json
import os
import subprocess
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .ensemble import EnsembleConfig
from .training import KernelSpec, TrainConfig

SEED_ENV = "VQPQEL_SEED"
DISENTANGLERS = ("mpqc", "index_controlled")


class ConfigError(ValueError):
    pass


_TRAIN_KEYS = {
    "dataset": str, "k": int, "stored_label_flipped": bool, "L1": int, "L2": int,
    "iterations": int, "shots": int, "lr": float, "sigma": (float, list), "mode": str,
    "noise": float, "seed": int, "cycles": int, "schedule": str, "init_scale": float,
    "threshold": float, "disentangler": str, "dis_span": str, "eval_trajectories": int,
}
_ENSEMBLE_KEYS = {
    "T": int, "ratio": float, "scale": float, "threshold_pos": float, "threshold_neg": float,
    "ungated": bool, "workers": int,
}


@dataclass
class RunConfig:
    dataset: Path | None = None
    k: int | None = None
    stored_label_flipped: bool = True
    L1: int = 3
    L2: int = 3
    threshold: float = 0.5
    disentangler: str = "mpqc"
    train: TrainConfig = field(default_factory=TrainConfig)
    ensemble: EnsembleConfig | None = None

    def to_dict(self) -> dict:
        t = self.train
        d = {
            "dataset": str(self.dataset) if self.dataset else None,
            "k": self.k, "stored_label_flipped": self.stored_label_flipped,
            "L1": self.L1, "L2": self.L2, "threshold": self.threshold, "disentangler": self.disentangler,
            "iterations": t.iterations, "shots": t.shots, "lr": t.learning_rate,
            "sigma": list(t.kernel.bandwidths), "mode": t.mode, "noise": t.noise_p, "seed": t.seed,
            "cycles": t.cycles, "schedule": t.schedule_rule, "init_scale": t.init_scale,
            "dis_span": t.dis_span, "eval_trajectories": t.eval_trajectories,
        }
        if self.ensemble is not None:
            d["ensemble"] = self.ensemble.to_dict()
        return d


def _typed(key: str, value, expected):
    kinds = expected if isinstance(expected, tuple) else (expected,)
    if float in kinds and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if bool not in kinds and isinstance(value, bool):
        raise ConfigError(f"{key}: expected {kinds[0].__name__}, got a boolean")
    if not isinstance(value, kinds):
        raise ConfigError(f"{key}: expected {' or '.join(k.__name__ for k in kinds)}, got {type(value).__name__}")
    return value


def load_raw(path: str | Path) -> dict:
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text)
        return tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc


def parse_config(raw: dict, base_dir: Path | None = None, seed: int | None = None) -> RunConfig:
    """Validate ``raw``; unknown keys are errors. ``seed`` overrides the file."""
    raw = dict(raw)
    ens_raw = raw.pop("ensemble", None)
    unknown = set(raw) - set(_TRAIN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    v = {k: _typed(k, val, _TRAIN_KEYS[k]) for k, val in raw.items()}
    if seed is None:
        seed = v.get("seed", default_seed())
    sigma = v.get("sigma", 0.3)
    cycles = v.get("cycles")
    try:
        train = TrainConfig(
            iterations=v.get("iterations", 100), shots=v.get("shots", 20), learning_rate=v.get("lr", 0.02),
            kernel=KernelSpec(tuple(sigma) if isinstance(sigma, list) else (sigma,)),
            mode=v.get("mode", "sampled"), seed=seed, noise_p=v.get("noise", 0.0),
            schedule_rule=v.get("schedule", "paper_sqrt"), cycles=cycles or None,
            init_scale=v.get("init_scale", 0.1), eval_trajectories=v.get("eval_trajectories", 2000),
            dis_span=v.get("dis_span", "feature"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if train.schedule_rule not in ("paper_sqrt", "optimal"):
        raise ConfigError(f"schedule must be paper_sqrt or optimal, got {train.schedule_rule!r}")
    if train.dis_span not in ("feature", "full"):
        raise ConfigError(f"dis_span must be feature or full, got {train.dis_span!r}")
    if not 0 <= train.noise_p <= 1 / 3:
        raise ConfigError("noise must lie in [0, 1/3]")
    disentangler = v.get("disentangler", "mpqc")
    if disentangler not in DISENTANGLERS:
        raise ConfigError(f"disentangler must be one of {DISENTANGLERS}")
    threshold = v.get("threshold", 0.5)
    if not 0 < threshold < 1:
        raise ConfigError("threshold must lie in (0, 1)")
    dataset = v.get("dataset")
    if dataset is not None:
        dataset = Path(dataset)
        if base_dir is not None and not dataset.is_absolute():
            dataset = base_dir / dataset
    cfg = RunConfig(dataset=dataset, k=v.get("k"), stored_label_flipped=v.get("stored_label_flipped", True),
                    L1=v.get("L1", 3), L2=v.get("L2", 3), threshold=threshold,
                    disentangler=disentangler, train=train)
    if cfg.L1 < 1 or cfg.L2 < 1:
        raise ConfigError("L1 and L2 must be >= 1")
    if ens_raw is not None:
        cfg.ensemble = replace(_parse_ensemble(ens_raw, seed), L1=cfg.L1, L2=cfg.L2)
        if cfg.k is not None:
            raise ConfigError("k is chosen by subsampling when an ensemble block is present")
    elif cfg.k is None:
        raise ConfigError("k is required for a single VQP")
    return cfg


def _parse_ensemble(raw, seed: int) -> EnsembleConfig:
    if not isinstance(raw, dict):
        raise ConfigError("ensemble must be a table")
    unknown = set(raw) - set(_ENSEMBLE_KEYS)
    if unknown:
        raise ConfigError(f"unknown ensemble keys: {', '.join(sorted(unknown))}")
    v = {k: _typed(f"ensemble.{k}", val, _ENSEMBLE_KEYS[k]) for k, val in raw.items()}
    try:
        return EnsembleConfig(
            T=v.get("T", 4), ratio=v.get("ratio", 0.0008), scale=v.get("scale", 5.0),
            thresholds={1: v.get("threshold_pos", 0.1), -1: v.get("threshold_neg", 0.5)},
            seed=seed, ungated=v.get("ungated", False), workers=v.get("workers", 1))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path, seed: int | None = None) -> RunConfig:
    path = Path(path)
    return parse_config(load_raw(path), path.parent, seed)


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                             text=True, cwd=Path(__file__).resolve().parent, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"
