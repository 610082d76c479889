"""Pure statevector simulator.

Qubit 0 is the most significant bit of a basis-state index. Internally every
kernel works on a batch of states with shape ``(B, 2**n)``; rotation angles may
be scalars or length-``B`` arrays so that many parameter-shifted copies of one
circuit run in a single pass.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ("RX", "RY", "RZ", "H", "X", "Y", "Z", "S", "SDG", "T", "TDG",
              "CNOT", "CZ", "CCNOT", "MCZ", "UNITARY")
_INVERSES = {"S": "SDG", "SDG": "S", "T": "TDG", "TDG": "T"}

_ARITY = {"RX": 1, "RY": 1, "RZ": 1, "H": 1, "X": 1, "Y": 1, "Z": 1, "S": 1, "SDG": 1, "T": 1, "TDG": 1,
          "CNOT": 2, "CZ": 2, "CCNOT": 3}

_SQRT1_2 = 1.0 / np.sqrt(2.0)
_FIXED = {
    "H": np.array([[_SQRT1_2, _SQRT1_2], [_SQRT1_2, -_SQRT1_2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.diag([1, 1j]),
    "SDG": np.diag([1, -1j]),
    "T": np.diag([1, np.exp(0.25j * np.pi)]),
    "TDG": np.diag([1, np.exp(-0.25j * np.pi)]),
}
_PAULIS = (_FIXED["X"], _FIXED["Y"], _FIXED["Z"])


class GateError(ValueError):
    """Invalid gate for the state it is applied to."""


@dataclass
class GateOp:
    """One gate. Controlled kinds list controls first and the target last.

    ``angle`` may be an array of shape ``(B,)`` when the gate is applied to a
    batch; ``tag`` is free-form metadata (parameter references, accounting
    labels) ignored by the simulator.
    """

    kind: str
    targets: tuple[int, ...]
    angle: float | np.ndarray | None = None
    matrix: np.ndarray | None = None
    tag: object = None

    def __post_init__(self) -> None:
        self.targets = tuple(int(t) for t in self.targets)
        if self.kind not in GATE_KINDS:
            raise GateError(f"unknown gate kind {self.kind!r}")
        if len(set(self.targets)) != len(self.targets) or not self.targets:
            raise GateError(f"targets must be distinct and nonempty, got {self.targets}")
        arity = _ARITY.get(self.kind)
        if arity is not None and len(self.targets) != arity:
            raise GateError(f"{self.kind} acts on {arity} qubit(s), got {len(self.targets)}")
        if self.kind in ROTATIONS and self.angle is None:
            raise GateError(f"{self.kind} needs an angle")
        if self.kind == "UNITARY":
            if self.matrix is None:
                raise GateError("UNITARY gate needs a matrix")
            m = np.asarray(self.matrix, dtype=complex)
            dim = 2 ** len(self.targets)
            if m.shape != (dim, dim):
                raise GateError(f"matrix shape {m.shape} does not match {len(self.targets)} targets")
            if not np.allclose(m.conj().T @ m, np.eye(dim), atol=1e-10):
                raise GateError("UNITARY matrix is not unitary")
            self.matrix = m

    def inverse(self) -> "GateOp":
        if self.kind in ROTATIONS:
            return GateOp(self.kind, self.targets, angle=-self.angle, tag=self.tag)
        if self.kind == "UNITARY":
            return GateOp("UNITARY", self.targets, matrix=self.matrix.conj().T, tag=self.tag)
        return GateOp(_INVERSES.get(self.kind, self.kind), self.targets, tag=self.tag)


@dataclass
class NoiseSpec:
    """Symmetric Pauli channel: X, Y and Z each with probability ``gate_noise_p``
    on every qubit a gate touches, sampled as trajectories."""

    gate_noise_p: float = 0.0
    enabled: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.gate_noise_p <= 1.0 / 3.0:
            raise ValueError(f"gate_noise_p must lie in [0, 1/3], got {self.gate_noise_p}")

    @property
    def active(self) -> bool:
        return self.enabled and self.gate_noise_p > 0.0


@dataclass
class Counts:
    counts: dict[str, int]
    shots: int

    def __post_init__(self) -> None:
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to shots")

    def frequencies(self) -> dict[str, float]:
        return {k: v / self.shots for k, v in self.counts.items()}


@dataclass
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        n = int(round(np.log2(amps.size))) if amps.size else -1
        if n < 0 or 2**n != amps.size:
            raise ValueError(f"amplitude count {amps.size} is not a power of two")
        self.amplitudes = amps

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.amplitudes.size)))

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy())


# ---------------------------------------------------------------------------
# run accounting

@dataclass
class RunCounter:
    circuits: int = 0
    cycles: int = 0


_active_counters: list[RunCounter] = []


@contextmanager
def count_runs() -> Iterator[RunCounter]:
    """Count circuit executions (and Grover cycles) issued inside the block."""
    counter = RunCounter()
    _active_counters.append(counter)
    try:
        yield counter
    finally:
        _active_counters.remove(counter)


def record_run(circuits: int, cycles: int = 0) -> None:
    for c in _active_counters:
        c.circuits += circuits
        c.cycles += cycles


# ---------------------------------------------------------------------------
# gate matrices

def rotation_matrix(kind: str, angle) -> np.ndarray:
    """R_P(θ) = exp(-iθP/2). Returns (2, 2) or (B, 2, 2) for array angles."""
    a = np.asarray(angle, dtype=float)
    c = np.cos(a / 2)
    s = np.sin(a / 2)
    out = np.zeros(a.shape + (2, 2), dtype=complex)
    if kind == "RX":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
    elif kind == "RY":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
    elif kind == "RZ":
        out[..., 0, 0] = np.exp(-0.5j * a)
        out[..., 1, 1] = np.exp(0.5j * a)
    else:
        raise GateError(f"{kind} is not a rotation")
    return out


def _controlled(base: np.ndarray, n_controls: int) -> np.ndarray:
    dim = 2 ** (n_controls + 1)
    m = np.eye(dim, dtype=complex)
    m[-2:, -2:] = base
    return m


def gate_matrix(gate: GateOp) -> np.ndarray:
    """Unitary of ``gate`` on its own targets (first target = most significant)."""
    k = gate.kind
    if k in ROTATIONS:
        return rotation_matrix(k, gate.angle)
    if k in _FIXED:
        return _FIXED[k]
    if k == "CNOT":
        return _controlled(_FIXED["X"], 1)
    if k == "CZ":
        return _controlled(_FIXED["Z"], 1)
    if k == "CCNOT":
        return _controlled(_FIXED["X"], 2)
    if k == "MCZ":
        m = np.eye(2 ** len(gate.targets), dtype=complex)
        m[-1, -1] = -1
        return m
    return gate.matrix


def toffoli_gates(c0: int, c1: int, target: int, tag: object = None) -> list[GateOp]:
    """CCNOT as 10 single-qubit gates (H, T, T†, S) and 6 CNOTs."""
    seq = [("H", (target,)), ("CNOT", (c1, target)), ("TDG", (target,)), ("CNOT", (c0, target)),
           ("T", (target,)), ("CNOT", (c1, target)), ("TDG", (target,)), ("CNOT", (c0, target)),
           ("TDG", (c1,)), ("T", (target,)), ("H", (target,)), ("CNOT", (c0, c1)), ("TDG", (c1,)),
           ("CNOT", (c0, c1)), ("T", (c0,)), ("S", (c1,))]
    return [GateOp(kind, qubits, tag=tag) for kind, qubits in seq]


def lower_mcz(targets: Sequence[int], tag: object = None, inner_tag: object = None) -> list[GateOp]:
    """Multi-controlled Z in elementary gates where a standard form exists
    (Z, CZ, or H·CCNOT·H on three qubits); wider gates are kept whole."""
    targets = tuple(targets)
    if len(targets) == 1:
        return [GateOp("Z", targets, tag=tag)]
    if len(targets) == 2:
        return [GateOp("CZ", targets, tag=tag)]
    if len(targets) == 3:
        c0, c1, t = targets
        return [GateOp("H", (t,), tag=tag)] + toffoli_gates(c0, c1, t, inner_tag) + [GateOp("H", (t,), tag=tag)]
    return [GateOp("MCZ", targets, tag=tag)]


# ---------------------------------------------------------------------------
# kernels on batches

def _check_targets(targets: Sequence[int], n: int) -> None:
    for t in targets:
        if not 0 <= t < n:
            raise GateError(f"target {t} out of range for {n} qubits")


def apply_matrix(psi: np.ndarray, matrix: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Apply ``matrix`` ((d, d) or (B, d, d)) to ``targets`` of batched ``psi`` (B, 2**n)."""
    _check_targets(targets, n)
    k = len(targets)
    batch = psi.shape[0]
    t = psi.reshape((batch,) + (2,) * n)
    axes = [1 + q for q in targets]
    t = np.moveaxis(t, axes, list(range(n + 1 - k, n + 1)))
    moved_shape = t.shape
    t = t.reshape(batch, -1, 2**k)
    if matrix.ndim == 2:
        t = t @ matrix.T
    else:
        t = np.einsum("brj,bij->bri", t, matrix)
    t = t.reshape(moved_shape)
    t = np.moveaxis(t, list(range(n + 1 - k, n + 1)), axes)
    return np.ascontiguousarray(t).reshape(batch, 2**n)


def _apply_diagonal_phase(psi: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    # -1 on basis states where every target bit is 1 (Z, CZ, MCZ)
    _check_targets(targets, n)
    idx = np.arange(2**n)
    mask = np.ones(2**n, dtype=bool)
    for q in targets:
        mask &= ((idx >> (n - 1 - q)) & 1).astype(bool)
    out = psi.copy()
    out[:, mask] *= -1
    return out


def apply_gate_batch(psi: np.ndarray, gate: GateOp, n: int) -> np.ndarray:
    if gate.kind in ("Z", "CZ", "MCZ"):
        return _apply_diagonal_phase(psi, gate.targets, n)
    return apply_matrix(psi, gate_matrix(gate), gate.targets, n)


def _apply_pauli_noise(psi: np.ndarray, targets: Sequence[int], n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    draws = rng.random((psi.shape[0], len(targets)))
    for col, q in enumerate(targets):
        u = draws[:, col]
        for which in range(3):
            hit = np.flatnonzero((u >= which * p) & (u < (which + 1) * p))
            if hit.size:
                psi[hit] = apply_matrix(psi[hit], _PAULIS[which], (q,), n)
    return psi


def run_batch(psi: np.ndarray, gates: Iterable[GateOp], n: int,
              noise: NoiseSpec | None = None, rng: np.random.Generator | None = None) -> np.ndarray:
    """Run ``gates`` on a batch of states; with active noise each row is one trajectory."""
    psi = np.array(psi, dtype=complex, copy=True)
    if psi.ndim == 1:
        psi = psi[None, :]
    noisy = noise is not None and noise.active
    if noisy and rng is None:
        raise ValueError("noisy simulation needs an rng")
    for gate in gates:
        psi = apply_gate_batch(psi, gate, n)
        if noisy:
            psi = _apply_pauli_noise(psi, gate.targets, n, noise.gate_noise_p, rng)
    record_run(psi.shape[0])
    return psi


def marginal_batch(psi: np.ndarray, n: int, subset: Sequence[int]) -> np.ndarray:
    """Marginal distributions (B, 2**len(subset)); subset order sets bit significance."""
    subset = list(subset)
    if not subset or len(set(subset)) != len(subset):
        raise ValueError("qubit subset must be nonempty and distinct")
    _check_targets(subset, n)
    batch = psi.shape[0]
    probs = (np.abs(psi) ** 2).reshape((batch,) + (2,) * n)
    rest = [1 + q for q in range(n) if q not in subset]
    if rest:
        probs = probs.sum(axis=tuple(rest))
    # remaining axes are in ascending qubit order; reorder to subset order
    order = np.argsort(np.argsort(subset))
    probs = np.transpose(probs, [0] + [1 + int(i) for i in order])
    return probs.reshape(batch, 2 ** len(subset))


# ---------------------------------------------------------------------------
# single-state API

def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    n = state.n_qubits
    return StateVector(apply_gate_batch(state.amplitudes[None, :], gate, n)[0])


def apply_circuit(state: StateVector, gates: Sequence[GateOp]) -> StateVector:
    return StateVector(run_batch(state.amplitudes, gates, state.n_qubits)[0])


def apply_noisy_circuit(state: StateVector, gates: Sequence[GateOp], noise: NoiseSpec,
                        rng: np.random.Generator) -> StateVector:
    """One Pauli-noise trajectory of ``gates``; returns that trajectory's pure state."""
    return StateVector(run_batch(state.amplitudes, gates, state.n_qubits, noise=noise, rng=rng)[0])


def probabilities(state: StateVector, qubit_subset: Sequence[int]) -> np.ndarray:
    return marginal_batch(state.amplitudes[None, :], state.n_qubits, qubit_subset)[0]


def format_outcome(index: int, width: int) -> str:
    return format(index, f"0{width}b")


def sample_counts(state: StateVector, qubit_subset: Sequence[int], shots: int,
                  rng: np.random.Generator) -> Counts:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = probabilities(state, qubit_subset)
    probs = np.clip(probs.real, 0, None)
    draws = rng.multinomial(shots, probs / probs.sum())
    width = len(qubit_subset)
    counts = {format_outcome(i, width): int(c) for i, c in enumerate(draws) if c}
    return Counts(counts, shots)
