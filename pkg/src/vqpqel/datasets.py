"""Fixed datasets and seeded generators for the linear, nonlinear and toy experiments."""

from __future__ import annotations

import math

import numpy as np

from .encoding import LabeledDataset, normalize

FAR_MARGIN = math.pi / 12
NONLINEAR_BAND = (math.pi / 3, 2 * math.pi / 3)


def linear8(normalized: bool = False) -> LabeledDataset:
    """Eight 4-feature examples; the last one carries the deliberate mislabel (+1)."""
    r2, r3 = math.sqrt(2), math.sqrt(3)
    x = np.array([
        [0.6, 0.8, -1 / r2, -1 / r2],
        [1.0, 0.0, -1 / r3, -math.sqrt(2 / 3)],
        [0.0, 1.0, -1 / 3, -math.sqrt(8) / 3],
        [0.5, r3 / 2, -1.0, 0.0],
        [0.8, 0.6, -r3 / 3, -math.sqrt(6) / 3],
        [math.sqrt(6 / 7), 1 / math.sqrt(7), -math.sqrt(5) / 5, -math.sqrt(20) / 5],
        [-r3 / 3, -r3 / 6, 0.6, 0.8],
        [-r3 / 3, -r3 / 6, 0.6, 0.8],
    ])
    y = np.array([1, 1, 1, 1, 1, 1, -1, 1])
    data = LabeledDataset(x, y, flipped=7)
    return normalize(data, "uniform") if normalized else data


def sample_linear_test(n: int, class_label: int, rng: np.random.Generator) -> LabeledDataset:
    """Unit vectors (cos a, sin a, cos b, sin b) on the side of the linear boundary given by ``class_label``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if class_label not in (-1, 1):
        raise ValueError("class_label must be -1 or +1")
    a = rng.uniform(0, math.pi / 2, n)
    b = rng.uniform(math.pi, 1.5 * math.pi, n)
    if class_label == -1:
        a, b = a + math.pi, b - math.pi
    x = np.column_stack([np.cos(a), np.sin(a), np.cos(b), np.sin(b)])
    return LabeledDataset(x, np.full(n, class_label))


def nonlinear_label(theta1) -> np.ndarray:
    t = np.asarray(theta1, dtype=float)
    return np.where((t >= NONLINEAR_BAND[0]) & (t <= NONLINEAR_BAND[1]), -1, 1)


def sample_nonlinear(n: int, rng: np.random.Generator, margin: float = 0.0) -> LabeledDataset:
    """Points (cos t1, sin t1, cos t2, sin t2) labeled −1 inside the middle band of t1.

    With ``margin`` > 0 no t1 lies within ``margin`` of either band edge.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if margin < 0:
        raise ValueError("margin must be >= 0")
    t1 = rng.uniform(0, math.pi, n)
    if margin > 0:
        near = _near_edge(t1, margin)
        while near.any():
            t1[near] = rng.uniform(0, math.pi, int(near.sum()))
            near = _near_edge(t1, margin)
    t2 = rng.uniform(0, math.pi, n)
    x = np.column_stack([np.cos(t1), np.sin(t1), np.cos(t2), np.sin(t2)])
    return LabeledDataset(x, nonlinear_label(t1))


def _near_edge(t1: np.ndarray, margin: float) -> np.ndarray:
    return np.min([np.abs(t1 - e) for e in NONLINEAR_BAND], axis=0) < margin


def toy4(normalized: bool = False) -> LabeledDataset:
    """Three copies of (1, 0) labeled +1 and (0, 1) whose true label −1 is stored flipped."""
    x = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    data = LabeledDataset(x, np.array([1, 1, 1, 1]), flipped=3)
    return normalize(data, "uniform") if normalized else data


def toy_label(theta) -> np.ndarray:
    t = np.mod(np.asarray(theta, dtype=float), 2 * math.pi)
    return np.where(t < math.pi, -1, 1)


def sample_toy_test(n: int = 200, rng: np.random.Generator | None = None) -> LabeledDataset:
    """Points on the unit circle, −1 on the upper half (angle in [0, π))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng or np.random.default_rng(0)
    t = rng.uniform(0, 2 * math.pi, n)
    return LabeledDataset(np.column_stack([np.cos(t), np.sin(t)]), toy_label(t))
