"""Classical data to amplitudes: normalization, the mislabeled superposition,
state-preparation synthesis for gate accounting, and the preparation operator
used by the generalized diffusion."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .simcore import GateOp, StateVector

NORMALIZATIONS = ("raw", "uniform", "global")


class EncodingError(ValueError):
    pass


@dataclass
class LabeledDataset:
    """``features`` is (N, M); ``labels`` are ±1.

    ``flipped`` marks an example whose stored label is already the deliberate
    mislabel (the fixed linear dataset ships that way); ``true_labels``
    undoes it.
    """

    features: np.ndarray
    labels: np.ndarray
    normalization: str = "raw"
    flipped: int | None = None

    def __post_init__(self) -> None:
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=int).reshape(-1)
        if self.features.shape[0] != self.labels.size:
            raise EncodingError("features and labels disagree on the number of examples")
        if self.labels.size and not np.all(np.isin(self.labels, (-1, 1))):
            raise EncodingError("labels must be -1 or +1")
        if self.normalization not in NORMALIZATIONS:
            raise EncodingError(f"unknown normalization {self.normalization!r}")

    @property
    def N(self) -> int:
        return self.features.shape[0]

    @property
    def M(self) -> int:
        return self.features.shape[1]

    @property
    def true_labels(self) -> np.ndarray:
        y = self.labels.copy()
        if self.flipped is not None:
            y[self.flipped] = -y[self.flipped]
        return y

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        idx = list(indices)
        return LabeledDataset(self.features[idx], self.true_labels[idx], "raw")


@dataclass(frozen=True)
class RegisterLayout:
    """Feature register first (qubit 0 upward), index register after it."""

    M: int
    N: int

    @property
    def n_feature_qubits(self) -> int:
        return math.ceil(math.log2(self.M)) if self.M > 1 else 0

    @property
    def n_index_qubits(self) -> int:
        return math.ceil(math.log2(self.N)) if self.N > 1 else 0

    @property
    def n_qubits(self) -> int:
        return self.n_feature_qubits + self.n_index_qubits

    @property
    def feature_qubits(self) -> tuple[int, ...]:
        return tuple(range(self.n_feature_qubits))

    @property
    def index_qubits(self) -> tuple[int, ...]:
        nf = self.n_feature_qubits
        return tuple(range(nf, nf + self.n_index_qubits))

    @classmethod
    def for_dataset(cls, dataset: LabeledDataset) -> "RegisterLayout":
        return cls(dataset.M, dataset.N)


@dataclass
class PrepCircuit:
    gates: list[GateOp] = field(default_factory=list)

    @property
    def single_qubit_count(self) -> int:
        return sum(1 for g in self.gates if len(g.targets) == 1)

    @property
    def two_qubit_count(self) -> int:
        return sum(1 for g in self.gates if len(g.targets) == 2)

    @property
    def total(self) -> int:
        return len(self.gates)


# ---------------------------------------------------------------------------

def normalize(dataset: LabeledDataset, mode: str = "uniform") -> LabeledDataset:
    """Rescale examples: ``uniform`` gives every example squared norm 1/N,
    ``global`` divides everything by the square root of the total squared norm."""
    x = dataset.features
    norms = np.sqrt(np.sum(x**2, axis=1))
    if np.any(norms == 0):
        raise EncodingError("dataset contains an all-zero example")
    if mode == "uniform":
        x = x / norms[:, None] / np.sqrt(dataset.N)
    elif mode == "global":
        x = x / np.sqrt(np.sum(x**2))
    else:
        raise EncodingError(f"unknown normalization mode {mode!r}")
    return replace(dataset, features=x, normalization=mode)


def _check_normalized(dataset: LabeledDataset, tol: float = 1e-9) -> None:
    sq = np.sum(dataset.features**2, axis=1)
    if dataset.normalization == "uniform" and np.allclose(sq, 1.0 / dataset.N, atol=tol):
        return
    if dataset.normalization == "global" and abs(sq.sum() - 1.0) < tol:
        return
    raise EncodingError("dataset must be normalized (uniform or global) before encoding")


def amplitude_index(j: int, i: int, layout: RegisterLayout) -> int:
    return (j << layout.n_index_qubits) | i


def build_phi_k(dataset: LabeledDataset, k: int, layout: RegisterLayout | None = None) -> StateVector:
    """|Φ^k⟩: amplitude y_i x_ji on |j⟩_F|i⟩_I with the sign of example k flipped."""
    _check_normalized(dataset)
    if not 0 <= k < dataset.N:
        raise EncodingError(f"k={k} out of range for N={dataset.N}")
    layout = layout or RegisterLayout.for_dataset(dataset)
    signs = dataset.true_labels.astype(float)
    signs[k] = -signs[k]
    signed = dataset.features * signs[:, None]  # (N, M)
    grid = np.zeros((2**layout.n_feature_qubits, 2**layout.n_index_qubits))
    grid[: dataset.M, : dataset.N] = signed.T
    return StateVector(grid.reshape(-1))


def anchor_vector(dataset: LabeledDataset, k: int) -> np.ndarray:
    """Unit-norm feature vector of the flipped example, -y_k x_k."""
    v = -dataset.true_labels[k] * dataset.features[k]
    return v / np.linalg.norm(v)


def index_weights(dataset: LabeledDataset, layout: RegisterLayout | None = None) -> np.ndarray:
    """Probability of each index-register basis state under the encoding (zero on padding)."""
    layout = layout or RegisterLayout.for_dataset(dataset)
    w = np.zeros(2**layout.n_index_qubits)
    w[: dataset.N] = np.sum(dataset.features**2, axis=1)
    total = w.sum()
    if total <= 0:
        raise EncodingError("dataset cannot be normalized")
    return w / total


# ---------------------------------------------------------------------------
# state preparation by uniformly controlled RY rotations

def _gray(i: int) -> int:
    return i ^ (i >> 1)


def multiplexed_ry(angles: np.ndarray, controls: Sequence[int], target: int,
                   atol: float = 1e-12) -> list[GateOp]:
    """Uniformly controlled RY: angle ``angles[c]`` when the controls read ``c``
    (first control most significant). Gray-code CNOT ladder decomposition."""
    angles = np.asarray(angles, dtype=float)
    k = len(controls)
    if angles.size != 2**k:
        raise ValueError("need 2**len(controls) angles")
    if np.allclose(angles, angles[0], atol=atol):
        return [] if abs(angles[0]) < atol else [GateOp("RY", (target,), angle=float(angles[0]))]
    size = 2**k
    grays = [_gray(i) for i in range(size)]
    signs = np.array([[(-1) ** bin(c & g).count("1") for g in grays] for c in range(size)])
    thetas = signs.T @ angles / size
    gates = []
    for i in range(size):
        if abs(thetas[i]) > atol:
            gates.append(GateOp("RY", (target,), angle=float(thetas[i])))
        changed = grays[i] ^ grays[(i + 1) % size]
        bit = changed.bit_length() - 1
        gates.append(GateOp("CNOT", (controls[k - 1 - bit], target)))
    return gates


def _prep_in_order(amps: np.ndarray, order: Sequence[int]) -> list[GateOp]:
    n = len(order)
    t = amps.reshape((2,) * n).transpose(order).reshape(-1) if n else amps
    gates = []
    for level in range(n):
        blocks = t.reshape(2**level, 2, 2 ** (n - level - 1))
        if level == n - 1:
            a0, a1 = blocks[:, 0, 0], blocks[:, 1, 0]
        else:
            a0 = np.linalg.norm(blocks[:, 0, :], axis=1)
            a1 = np.linalg.norm(blocks[:, 1, :], axis=1)
        angles = 2 * np.arctan2(a1, a0)
        gates += multiplexed_ry(angles, [order[q] for q in range(level)], order[level])
    return gates


def synthesize_state_prep(target, optimize_order: bool = True) -> PrepCircuit:
    """Circuit taking |0…0⟩ to the real ``target`` amplitudes.

    With ``optimize_order`` every wire ordering of up to 6 qubits is tried and
    the shortest circuit kept (reordering only relabels wires).
    """
    amps = np.asarray(target.amplitudes if isinstance(target, StateVector) else target)
    if np.iscomplexobj(amps):
        if np.max(np.abs(amps.imag)) > 1e-12:
            raise EncodingError("only real amplitudes are supported")
        amps = amps.real
    amps = amps.astype(float)
    if abs(np.sum(amps**2) - 1.0) > 1e-9:
        raise EncodingError("target state is not normalized")
    n = int(round(math.log2(amps.size)))
    if 2**n != amps.size:
        raise EncodingError("target length must be a power of two")
    orders = itertools.permutations(range(n)) if optimize_order and n <= 6 else [tuple(range(n))]
    best = None
    for order in orders:
        gates = _prep_in_order(amps, order)
        if best is None or len(gates) < len(best):
            best = gates
    return PrepCircuit(best or [])


def householder_completion(v: np.ndarray) -> np.ndarray:
    """Real orthogonal matrix whose first column is the unit vector ``v``."""
    v = np.asarray(v, dtype=float)
    e0 = np.zeros_like(v)
    e0[0] = 1.0
    u = e0 - v
    nu = u @ u
    if nu < 1e-30:
        return np.eye(v.size)
    return np.eye(v.size) - 2.0 * np.outer(u, u) / nu


def build_prep_operator_A(dataset: LabeledDataset, layout: RegisterLayout | None = None,
                          full_state: bool = False) -> GateOp:
    """Unitary A with A|0…0⟩ equal to the encoded index superposition
    (or the whole encoded state when ``full_state``)."""
    layout = layout or RegisterLayout.for_dataset(dataset)
    if full_state:
        _check_normalized(dataset)
        grid = np.zeros((2**layout.n_feature_qubits, 2**layout.n_index_qubits))
        grid[: dataset.M, : dataset.N] = (dataset.features * dataset.true_labels[:, None]).T
        v = grid.reshape(-1)
        v = v / np.linalg.norm(v)
        targets = tuple(range(layout.n_qubits))
    else:
        v = np.sqrt(index_weights(dataset, layout))
        targets = layout.index_qubits
    return GateOp("UNITARY", targets, matrix=householder_completion(v))


# ---------------------------------------------------------------------------
# CSV: header row, M feature columns, then a label column

def write_dataset_csv(dataset: LabeledDataset, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(dataset.M)] + ["label"])
        for x, y in zip(dataset.features, dataset.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def read_csv_table(path: str | Path) -> tuple[np.ndarray, np.ndarray | None]:
    """Features and (if the last header is ``label``) labels from a CSV file."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise EncodingError(f"{path}: missing header row")
    header, body = rows[0], [r for r in rows[1:] if r]
    has_label = header[-1].strip().lower() in ("label", "y")
    width = len(header) - (1 if has_label else 0)
    if not body:
        return np.zeros((0, width)), (np.zeros(0, dtype=int) if has_label else None)
    data = np.array([[float(v) for v in r] for r in body])
    if has_label:
        return data[:, :-1], data[:, -1].astype(int)
    return data, None


def read_dataset_csv(path: str | Path) -> LabeledDataset:
    features, labels = read_csv_table(path)
    if labels is None:
        raise EncodingError(f"{path}: no label column")
    return LabeledDataset(features, labels)
