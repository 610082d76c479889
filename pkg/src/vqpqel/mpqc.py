"""Multi-layer parameterized circuits: blocks of RX, RY, RZ on every register
qubit followed by an ascending CNOT chain."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .simcore import GateOp, StateVector, apply_circuit

AXES = ("RX", "RY", "RZ")


@dataclass(frozen=True)
class ParamRef:
    """Links a rotation gate to a trainable angle: gate angle = coeff * theta[group][index]."""

    group: str
    index: int
    coeff: float = 1.0


@dataclass
class MPQCParams:
    angles: np.ndarray  # (L, q, 3) radians, axis order RX, RY, RZ
    register: tuple[int, ...]

    def __post_init__(self) -> None:
        self.angles = np.asarray(self.angles, dtype=float)
        self.register = tuple(int(r) for r in self.register)
        if self.angles.ndim != 3 or self.angles.shape[1:] != (len(self.register), 3):
            raise ValueError(
                f"angles must have shape (L, {len(self.register)}, 3), got {self.angles.shape}")
        if not np.all(np.isfinite(self.angles)):
            raise ValueError("angles must be finite")

    @property
    def layers(self) -> int:
        return self.angles.shape[0]

    @property
    def size(self) -> int:
        return self.angles.size

    def flat(self) -> np.ndarray:
        return self.angles.reshape(-1).copy()

    def with_flat(self, values: Sequence[float]) -> "MPQCParams":
        return MPQCParams(np.asarray(values, dtype=float).reshape(self.angles.shape), self.register)

    def to_json(self) -> list[float]:
        return [float(v) for v in self.angles.reshape(-1)]

    @classmethod
    def from_json(cls, values: Sequence[float], layers: int, register: Sequence[int]) -> "MPQCParams":
        return cls(np.asarray(values, dtype=float).reshape(layers, len(register), 3), tuple(register))

    @classmethod
    def zeros(cls, layers: int, register: Sequence[int]) -> "MPQCParams":
        return cls(np.zeros((layers, len(register), 3)), tuple(register))

    @classmethod
    def random(cls, layers: int, register: Sequence[int], rng: np.random.Generator,
               scale: float = 0.1) -> "MPQCParams":
        return cls(rng.uniform(-scale, scale, size=(layers, len(register), 3)), tuple(register))


def param_count(layers: int, width: int) -> int:
    if layers < 1 or width < 1:
        raise ValueError("layers and width must be >= 1")
    return 3 * width * layers


def build_block_circuit(block_angles, register: Sequence[int], group: str | None = None,
                        offset: int = 0) -> list[GateOp]:
    block_angles = np.asarray(block_angles, dtype=float)
    register = tuple(register)
    if block_angles.shape != (len(register), 3):
        raise ValueError(f"expected {len(register)} x 3 angles, got shape {block_angles.shape}")
    gates = []
    for qi, qubit in enumerate(register):
        for ai, axis in enumerate(AXES):
            tag = ParamRef(group, offset + 3 * qi + ai) if group is not None else None
            gates.append(GateOp(axis, (qubit,), angle=float(block_angles[qi, ai]), tag=tag))
    for a, b in zip(register[:-1], register[1:]):
        gates.append(GateOp("CNOT", (a, b)))
    return gates


def mpqc_gates(params: MPQCParams, group: str | None = None, inverse: bool = False) -> list[GateOp]:
    """Gate list of the whole MPQC; ``inverse`` gives its adjoint with negated param refs."""
    gates = []
    block = len(params.register) * 3
    for layer in range(params.layers):
        gates += build_block_circuit(params.angles[layer], params.register, group, layer * block)
    if not inverse:
        return gates
    out = []
    for g in reversed(gates):
        inv = g.inverse()
        if isinstance(g.tag, ParamRef):
            inv.tag = ParamRef(g.tag.group, g.tag.index, -g.tag.coeff)
        out.append(inv)
    return out


def apply_mpqc(state: StateVector, params: MPQCParams) -> StateVector:
    if max(params.register) >= state.n_qubits:
        raise ValueError("MPQC register does not fit the state")
    return apply_circuit(state, mpqc_gates(params))
