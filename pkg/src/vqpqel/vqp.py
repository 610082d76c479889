"""Grover-style search with a trainable oracle and disentangler.

One cycle is: oracle (U_L1 on the feature register in the first cycle, U_dis†
afterwards) → Z on the first feature qubit → U_dis → diffusion about the
encoded index superposition.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import simcore
from .encoding import (LabeledDataset, RegisterLayout, anchor_vector, build_phi_k, householder_completion,
                       index_weights, normalize)
from .mpqc import MPQCParams, ParamRef, mpqc_gates
from .simcore import GateOp, NoiseSpec, StateVector

SCHEDULE_RULES = ("paper_sqrt", "optimal")
DIS_SPANS = ("feature", "full")
PHASE_TAG = "phase_flip"
DIFFUSION_TAG = "diffusion"
ERROR_TAG = "dis_error"
TOFFOLI_TAG = "toffoli"


@dataclass(frozen=True)
class GroverSchedule:
    iterations: int
    theta: float


def schedule_iterations(N: int, rule: str = "paper_sqrt") -> GroverSchedule:
    """``paper_sqrt``: round(√N); ``optimal``: round((π − 2θ)/4θ) with sin θ = 1/√N."""
    if N < 2:
        raise ValueError("need N >= 2")
    theta = math.asin(1.0 / math.sqrt(N))
    if rule == "paper_sqrt":
        s = round(math.sqrt(N))
    elif rule == "optimal":
        s = round((math.pi - 2 * theta) / (4 * theta))
    else:
        raise ValueError(f"unknown schedule rule {rule!r}")
    return GroverSchedule(max(1, int(s)), theta)


@dataclass
class VQPModel:
    theta_f: MPQCParams
    theta_d: MPQCParams | None
    layout: RegisterLayout
    k: int
    anchor: np.ndarray
    flipped_label: int
    threshold: float = 0.5
    calibrated_p: float | None = None
    fixed_dis: list[GateOp] | None = None
    weights: np.ndarray | None = None  # index superposition |s|²; None means uniform
    dis_error: float = 0.0
    cycles: int = 1

    def __post_init__(self) -> None:
        self.anchor = np.asarray(self.anchor, dtype=float)
        if not 0 <= self.k < self.layout.N:
            raise ValueError("k out of range")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")
        if self.layout.n_feature_qubits < 1:
            raise ValueError("VQP needs at least one feature qubit")
        if (self.theta_d is None) == (self.fixed_dis is None):
            raise ValueError("give exactly one of theta_d and fixed_dis")

    @property
    def anchor_class(self) -> int:
        """True class of the mislabeled example."""
        return -self.flipped_label

    @property
    def n_params(self) -> int:
        return self.theta_f.size + (self.theta_d.size if self.theta_d is not None else 0)

    def flat_params(self) -> np.ndarray:
        parts = [self.theta_f.flat()]
        if self.theta_d is not None:
            parts.append(self.theta_d.flat())
        return np.concatenate(parts)

    def with_flat_params(self, values) -> "VQPModel":
        values = np.asarray(values, dtype=float)
        nf = self.theta_f.size
        theta_d = self.theta_d.with_flat(values[nf:]) if self.theta_d is not None else None
        return replace(self, theta_f=self.theta_f.with_flat(values[:nf]), theta_d=theta_d)

    def diffusion_vector(self) -> np.ndarray:
        n = 2**self.layout.n_index_qubits
        if self.weights is None:
            return np.full(n, 1.0 / math.sqrt(n))
        return np.sqrt(np.asarray(self.weights, dtype=float))

    # serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        def mpqc(p):
            return None if p is None else {"layers": p.layers, "register": list(p.register), "angles": p.to_json()}

        return {
            "theta_f": mpqc(self.theta_f),
            "theta_d": mpqc(self.theta_d),
            "layout": {"M": self.layout.M, "N": self.layout.N},
            "k": self.k,
            "anchor": [float(v) for v in self.anchor],
            "flipped_label": int(self.flipped_label),
            "C_T": self.threshold,
            "calibrated_p": self.calibrated_p,
            "fixed_dis": None if self.fixed_dis is None else [_gate_to_dict(g) for g in self.fixed_dis],
            "weights": None if self.weights is None else [float(w) for w in self.weights],
            "dis_error": self.dis_error,
            "cycles": self.cycles,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VQPModel":
        def mpqc(p):
            return None if p is None else MPQCParams.from_json(p["angles"], p["layers"], p["register"])

        return cls(
            theta_f=mpqc(d["theta_f"]),
            theta_d=mpqc(d["theta_d"]),
            layout=RegisterLayout(d["layout"]["M"], d["layout"]["N"]),
            k=d["k"],
            anchor=np.array(d["anchor"]),
            flipped_label=d["flipped_label"],
            threshold=d["C_T"],
            calibrated_p=d["calibrated_p"],
            fixed_dis=None if d["fixed_dis"] is None else [_gate_from_dict(g) for g in d["fixed_dis"]],
            weights=None if d["weights"] is None else np.array(d["weights"]),
            dis_error=d.get("dis_error", 0.0),
            cycles=d.get("cycles", 1),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "VQPModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _gate_to_dict(g: GateOp) -> dict:
    d = {"kind": g.kind, "targets": list(g.targets)}
    if g.angle is not None:
        d["angle"] = float(g.angle)
    if g.matrix is not None:
        d["matrix_re"] = g.matrix.real.tolist()
        d["matrix_im"] = g.matrix.imag.tolist()
    return d


def _gate_from_dict(d: dict) -> GateOp:
    matrix = None
    if "matrix_re" in d:
        matrix = np.array(d["matrix_re"]) + 1j * np.array(d["matrix_im"])
    return GateOp(d["kind"], tuple(d["targets"]), angle=d.get("angle"), matrix=matrix)


# ---------------------------------------------------------------------------
# model construction

def index_controlled_x(layout: RegisterLayout, k: int, target: int = 0) -> list[GateOp]:
    """X on feature qubit ``target`` iff the index register reads ``k``."""
    idx = layout.index_qubits
    n = len(idx)
    flips = [GateOp("X", (q,)) for pos, q in enumerate(idx) if not (k >> (n - 1 - pos)) & 1]
    if n == 1:
        core = GateOp("CNOT", (idx[0], target))
    elif n == 2:
        core = GateOp("CCNOT", (idx[0], idx[1], target))
    else:
        dim = 2 ** (n + 1)
        m = np.eye(dim, dtype=complex)
        m[-2:, -2:] = [[0, 1], [1, 0]]
        core = GateOp("UNITARY", tuple(idx) + (target,), matrix=m)
    return flips + [core] + list(flips)


def init_model(dataset: LabeledDataset, k: int, L1: int, L2: int | None, rng: np.random.Generator,
               init_scale: float = 0.1, threshold: float = 0.5, cycles: int = 1,
               fixed_dis: list[GateOp] | None = None, diffusion: str = "auto",
               dis_span: str = "feature") -> VQPModel:
    """Fresh model for normalized ``dataset``; angles uniform in [−init_scale, init_scale].

    ``dis_span="full"`` lets the disentangler act on both registers.
    """
    layout = RegisterLayout.for_dataset(dataset)
    reg = layout.feature_qubits
    if dis_span not in DIS_SPANS:
        raise ValueError(f"dis_span must be one of {DIS_SPANS}")
    dis_reg = reg if dis_span == "feature" else tuple(range(layout.n_qubits))
    theta_f = MPQCParams.random(L1, reg, rng, init_scale)
    theta_d = None if fixed_dis is not None else MPQCParams.random(L2, dis_reg, rng, init_scale)
    return VQPModel(theta_f, theta_d, layout, k, anchor_vector(dataset, k),
                    flipped_label=-int(dataset.true_labels[k]), threshold=threshold,
                    fixed_dis=fixed_dis, weights=_diffusion_weights(dataset, layout, diffusion),
                    cycles=cycles)


def _diffusion_weights(dataset: LabeledDataset, layout: RegisterLayout, diffusion: str):
    w = index_weights(dataset, layout)
    uniform = np.allclose(w, 1.0 / w.size, atol=1e-12)
    if diffusion == "hadamard":
        if not uniform:
            raise ValueError("hadamard diffusion needs uniform weights over a power-of-two index set")
        return None
    if diffusion == "prep" or (diffusion == "auto" and not uniform):
        return w
    if diffusion == "auto":
        return None
    raise ValueError(f"unknown diffusion mode {diffusion!r}")


def ideal_dataset(N: int, M: int = 2, k: int | None = None) -> LabeledDataset:
    """Dataset whose ideal oracle is the identity: every example is |0…0⟩ except
    the mislabeled one, which sits on the |1⟩ branch of the first feature qubit."""
    k = N - 1 if k is None else k
    layout = RegisterLayout(M, N)
    x = np.zeros((N, M))
    x[:, 0] = 1.0
    x[k] = 0.0
    x[k, 2 ** (layout.n_feature_qubits - 1)] = 1.0
    y = np.ones(N, dtype=int)
    y[k] = -1
    return normalize(LabeledDataset(x, y), "uniform")


def ideal_model(N: int, M: int = 2, k: int | None = None, cycles: int = 1) -> tuple[VQPModel, StateVector]:
    """Exact Grover oracle: identity U_L1 and an index-controlled X disentangler."""
    data = ideal_dataset(N, M, k)
    k = N - 1 if k is None else k
    layout = RegisterLayout(M, N)
    model = VQPModel(MPQCParams.zeros(0, layout.feature_qubits), None, layout, k,
                     anchor_vector(data, k), flipped_label=1, fixed_dis=index_controlled_x(layout, k),
                     cycles=cycles)
    return model, build_phi_k(data, k, layout)


# ---------------------------------------------------------------------------
# circuit pieces

def oracle_gates(model: VQPModel) -> list[GateOp]:
    return mpqc_gates(model.theta_f, group="f")


def phase_flip_gate(model: VQPModel) -> GateOp:
    return GateOp("Z", (model.layout.feature_qubits[0],), tag=PHASE_TAG)


def disentangler_gates(model: VQPModel, inverse: bool = False) -> list[GateOp]:
    if model.fixed_dis is not None:
        gates = [GateOp(g.kind, g.targets, g.angle, g.matrix) for g in model.fixed_dis]
        return [g.inverse() for g in reversed(gates)] if inverse else gates
    return mpqc_gates(model.theta_d, group="d", inverse=inverse)


def error_gate(model: VQPModel, cycle_index: int) -> GateOp | None:
    """Leakage of weight ε from |0…0⟩_F into a feature basis state that rotates with the cycle."""
    if model.dis_error <= 0:
        return None
    reg = model.layout.feature_qubits
    dim = 2 ** len(reg)
    partner = 1 + cycle_index % (dim - 1)
    g = math.asin(math.sqrt(model.dis_error))
    m = np.eye(dim)
    m[0, 0] = m[partner, partner] = math.cos(g)
    m[partner, 0] = math.sin(g)
    m[0, partner] = -math.sin(g)
    return GateOp("UNITARY", reg, matrix=m, tag=ERROR_TAG)


def diffusion_matrix(vector: np.ndarray) -> np.ndarray:
    """2|s⟩⟨s| − I."""
    s = np.asarray(vector, dtype=complex).reshape(-1, 1)
    return 2 * (s @ s.conj().T) - np.eye(s.size)


def diffusion_gates(layout: RegisterLayout, weights: np.ndarray | None = None,
                    decompose: bool = False) -> list[GateOp]:
    """Reflection about the encoded index superposition.

    The decomposed form (H or A†, X layer, MCZ, X layer, H or A) equals the
    exact reflection up to a global phase of −1; a three-qubit MCZ is further
    lowered to H·CCNOT·H with the CCNOT in elementary gates.
    """
    idx = layout.index_qubits
    n = len(idx)
    vec = np.full(2**n, 2 ** (-n / 2)) if weights is None else np.sqrt(np.asarray(weights, dtype=float))
    if not decompose:
        return [GateOp("UNITARY", idx, matrix=diffusion_matrix(vec), tag=DIFFUSION_TAG)]
    if weights is None:
        pre = [GateOp("H", (q,), tag=DIFFUSION_TAG) for q in idx]
        post = [GateOp("H", (q,), tag=DIFFUSION_TAG) for q in idx]
    else:
        a = householder_completion(vec)
        pre = [GateOp("UNITARY", idx, matrix=a.T, tag=DIFFUSION_TAG)]
        post = [GateOp("UNITARY", idx, matrix=a, tag=DIFFUSION_TAG)]
    xs = [GateOp("X", (q,), tag=DIFFUSION_TAG) for q in idx]
    mcz = simcore.lower_mcz(idx, tag=DIFFUSION_TAG, inner_tag=TOFFOLI_TAG)
    return pre + xs + mcz + [GateOp("X", (q,), tag=DIFFUSION_TAG) for q in idx] + post


def cycle_gates(model: VQPModel, cycle_index: int, decompose: bool = False) -> list[GateOp]:
    if cycle_index < 0:
        raise ValueError("cycle_index must be >= 0")
    gates = oracle_gates(model) if cycle_index == 0 else disentangler_gates(model, inverse=True)
    gates = gates + [phase_flip_gate(model)] + disentangler_gates(model)
    err = error_gate(model, cycle_index)
    if err is not None:
        gates.append(err)
    return gates + diffusion_gates(model.layout, model.weights, decompose)


def vqp_circuit(model: VQPModel, cycles: int | None = None, decompose: bool = False) -> list[GateOp]:
    cycles = model.cycles if cycles is None else cycles
    gates: list[GateOp] = []
    for c in range(cycles):
        gates += cycle_gates(model, c, decompose)
    return gates


# ---------------------------------------------------------------------------
# single-state operations

def _check_layout(state: StateVector, model: VQPModel) -> None:
    if state.n_qubits != model.layout.n_qubits:
        raise ValueError(f"state has {state.n_qubits} qubits, layout needs {model.layout.n_qubits}")


def apply_phase_oracle(state: StateVector, model: VQPModel, first_cycle: bool = True) -> StateVector:
    _check_layout(state, model)
    pre = oracle_gates(model) if first_cycle else disentangler_gates(model, inverse=True)
    return simcore.apply_circuit(state, pre + [phase_flip_gate(model)])


def apply_disentangler(state: StateVector, model: VQPModel, inverse: bool = False) -> StateVector:
    _check_layout(state, model)
    return simcore.apply_circuit(state, disentangler_gates(model, inverse))


def apply_diffusion(state: StateVector, layout: RegisterLayout, mode: str = "hadamard",
                    operator: GateOp | None = None, decompose: bool = False) -> StateVector:
    """``hadamard`` reflects about the uniform index state; ``learned_A`` about
    ``operator``|0…0⟩ where ``operator`` is a UNITARY on the index register."""
    if mode == "hadamard":
        return simcore.apply_circuit(state, diffusion_gates(layout, None, decompose))
    if mode == "learned_A":
        if operator is None:
            raise ValueError("learned_A mode needs the preparation operator")
        vec = np.asarray(operator.matrix)[:, 0]
        if decompose:
            idx = layout.index_qubits
            gates = ([GateOp("UNITARY", idx, matrix=operator.matrix.conj().T)]
                     + [GateOp("X", (q,)) for q in idx] + simcore.lower_mcz(idx)
                     + [GateOp("X", (q,)) for q in idx] + [GateOp("UNITARY", idx, matrix=operator.matrix)])
        else:
            gates = [GateOp("UNITARY", layout.index_qubits, matrix=diffusion_matrix(vec))]
        return simcore.apply_circuit(state, gates)
    raise ValueError(f"unknown diffusion mode {mode!r}")


def grover_cycle(state: StateVector, model: VQPModel, cycle_index: int) -> StateVector:
    _check_layout(state, model)
    out = simcore.apply_circuit(state, cycle_gates(model, cycle_index))
    simcore.record_run(0, cycles=1)
    return out


def index_distribution(state: StateVector, layout: RegisterLayout) -> np.ndarray:
    return simcore.probabilities(state, layout.index_qubits)


def mislabel_probability(state: StateVector, model: VQPModel) -> float:
    """Σ_j |⟨j, k|ψ⟩|²."""
    return float(index_distribution(state, model.layout)[model.k])


def inject_disentangler_error(model: VQPModel, epsilon: float) -> VQPModel:
    """Model whose forward U_dis leaks weight ε off the ideal feature branch each cycle.

    Every cycle rotates |0…0⟩_F toward a different feature basis state, so the
    leaked amplitude of one cycle is not rotated back by the next; with a
    single feature qubit this is RY(2·arcsin√ε) on that qubit.
    """
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    return replace(model, dis_error=float(epsilon))


def run_model(model: VQPModel, state: StateVector, cycles: int | None = None) -> StateVector:
    cycles = model.cycles if cycles is None else cycles
    out = simcore.apply_circuit(state, vqp_circuit(model, cycles))
    simcore.record_run(0, cycles=cycles)
    return out


def leakage_probabilities(model: VQPModel, state: StateVector, cycles: int, epsilon: float) -> tuple[float, float]:
    """(p, q): ideal success probability and the probability of landing on the
    ideal disentangled feature state together with index k under error ε."""
    ideal = run_model(replace(model, dis_error=0.0), state, cycles)
    nf, ni = model.layout.n_feature_qubits, model.layout.n_index_qubits
    grid = ideal.amplitudes.reshape(2**nf, 2**ni)
    column = grid[:, model.k]
    p = float(np.sum(np.abs(column) ** 2))
    feature_state = column / np.sqrt(p)
    noisy = run_model(inject_disentangler_error(model, epsilon), state, cycles)
    amp = np.vdot(feature_state, noisy.amplitudes.reshape(2**nf, 2**ni)[:, model.k])
    return p, float(abs(amp) ** 2)


# ---------------------------------------------------------------------------
# batched evaluation used by training

@dataclass
class ShiftPlan:
    """Rows of a batch: row 0 unshifted, rows 2i+1 / 2i+2 shift occurrence i by ±π/2."""

    gates: list[GateOp]
    occurrences: list[tuple[int, ParamRef]] = field(default_factory=list)

    @property
    def batch(self) -> int:
        return 1 + 2 * len(self.occurrences)

    def prepend(self, gates: Sequence[GateOp]) -> "ShiftPlan":
        n = len(gates)
        return ShiftPlan(list(gates) + self.gates, [(pos + n, ref) for pos, ref in self.occurrences])


def _param_group_offset(model: VQPModel, group: str) -> int:
    return 0 if group == "f" else model.theta_f.size


def shift_plan(model: VQPModel, cycles: int, decompose: bool, shift: bool = True,
               only: Sequence[int] | None = None) -> ShiftPlan:
    gates = vqp_circuit(model, cycles, decompose)
    occurrences = []
    if shift:
        for pos, g in enumerate(gates):
            if isinstance(g.tag, ParamRef):
                flat = _param_group_offset(model, g.tag.group) + g.tag.index
                if only is None or flat in only:
                    occurrences.append((pos, g.tag))
    return ShiftPlan(gates, occurrences)


def run_plan(plan: ShiftPlan, state: StateVector, n: int, repeats: int = 1,
             noise: NoiseSpec | None = None, rng: np.random.Generator | None = None) -> np.ndarray:
    """Final states, shape (plan.batch * repeats, 2**n); rows of one circuit are contiguous."""
    batch = plan.batch
    gates = list(plan.gates)
    for i, (pos, _) in enumerate(plan.occurrences):
        g = gates[pos]
        angles = np.full(batch, float(g.angle))
        angles[2 * i + 1] += math.pi / 2
        angles[2 * i + 2] -= math.pi / 2
        if repeats > 1:
            angles = np.repeat(angles, repeats)
        gates[pos] = GateOp(g.kind, g.targets, angle=angles, tag=g.tag)
    psi0 = np.repeat(state.amplitudes[None, :], batch * repeats, axis=0)
    return simcore.run_batch(psi0, gates, n, noise=noise, rng=rng)
