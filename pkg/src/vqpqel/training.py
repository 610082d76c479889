"""MMD training of the oracle and disentangler with parameter-shift gradients."""

from __future__ import annotations

import csv
import functools
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import simcore
from .encoding import LabeledDataset, build_phi_k, synthesize_state_prep
from .simcore import GateOp, NoiseSpec, StateVector
from .vqp import VQPModel, init_model, run_plan, schedule_iterations, shift_plan

log = logging.getLogger(__name__)

MODES = ("exact", "sampled")


class TrainingError(RuntimeError):
    """Non-finite loss or gradient."""


@dataclass(frozen=True)
class KernelSpec:
    bandwidths: tuple[float, ...] = (0.3,)

    def __post_init__(self) -> None:
        object.__setattr__(self, "bandwidths", tuple(float(s) for s in self.bandwidths))
        if not self.bandwidths or any(s <= 0 for s in self.bandwidths):
            raise ValueError("bandwidths must be positive")


@dataclass
class TrainConfig:
    iterations: int = 100
    shots: int = 20
    learning_rate: float = 0.02
    kernel: KernelSpec = field(default_factory=KernelSpec)
    mode: str = "sampled"
    seed: int = 0
    noise_p: float = 0.0
    schedule_rule: str = "paper_sqrt"
    cycles: int | None = None  # overrides schedule_rule
    init_scale: float = 0.1
    eval_trajectories: int = 2000
    dis_span: str = "feature"

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")

    @property
    def noise(self) -> NoiseSpec | None:
        return NoiseSpec(self.noise_p) if self.noise_p > 0 else None


@dataclass
class LossTrace:
    mmd_loss: list[float] = field(default_factory=list)
    p_mislabeled: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.mmd_loss)

    def append(self, loss: float, p: float) -> None:
        self.mmd_loss.append(float(loss))
        self.p_mislabeled.append(float(p))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "mmd_loss", "p_mislabeled"])
            for i, (l, p) in enumerate(zip(self.mmd_loss, self.p_mislabeled)):
                w.writerow([i, repr(l), repr(p)])


def kernel_eval(x: int, y: int, kernel: KernelSpec) -> float:
    d2 = float(x - y) ** 2
    return sum(math.exp(-d2 / (2 * s)) for s in kernel.bandwidths) / len(kernel.bandwidths)


def kernel_matrix(size: int, kernel: KernelSpec) -> np.ndarray:
    idx = np.arange(size, dtype=float)
    d2 = (idx[:, None] - idx[None, :]) ** 2
    return np.mean([np.exp(-d2 / (2 * s)) for s in kernel.bandwidths], axis=0)


def mmd_loss(q: np.ndarray, p: np.ndarray, kernel: KernelSpec) -> float:
    """E_{q,q}K − 2 E_{q,p}K + E_{p,p}K over integer outcomes."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.shape != p.shape:
        raise ValueError("q and p must share a support")
    K = kernel_matrix(q.size, kernel)
    return float(q @ K @ q - 2 * q @ K @ p + p @ K @ p)


def target_distribution(model: VQPModel) -> np.ndarray:
    p = np.zeros(2**model.layout.n_index_qubits)
    p[model.k] = 1.0
    return p


def _index_marginals(states: np.ndarray, model: VQPModel) -> np.ndarray:
    return simcore.marginal_batch(states, model.layout.n_qubits, model.layout.index_qubits)


def _sample_rows(marginals: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    probs = np.clip(marginals, 0, None)
    probs /= probs.sum(axis=1, keepdims=True)
    return rng.multinomial(shots, probs) / shots


def _sample_trajectories(marginals: np.ndarray, rows: int, shots: int, rng: np.random.Generator) -> np.ndarray:
    # one outcome per trajectory; each circuit's shots are its `shots` consecutive trajectories
    probs = np.clip(marginals, 0, None)
    cdf = np.cumsum(probs / probs.sum(axis=1, keepdims=True), axis=1)
    u = rng.random((marginals.shape[0], 1))
    outcome = np.minimum((u > cdf).sum(axis=1), marginals.shape[1] - 1)
    hist = np.zeros((rows, marginals.shape[1]))
    np.add.at(hist, (np.repeat(np.arange(rows), shots), outcome), 1.0)
    return hist / shots


@dataclass
class Evaluation:
    """Index distributions of an unshifted circuit and its ±π/2 shifted copies."""

    q_used: np.ndarray  # (B, D) distributions entering the loss and gradient
    q_reference: np.ndarray  # (D,) best available estimate of the unshifted distribution
    occurrences: list


@functools.lru_cache(maxsize=64)
def _prep_for(amplitudes: bytes) -> tuple[GateOp, ...]:
    return tuple(synthesize_state_prep(np.frombuffer(amplitudes, dtype=complex)).gates)


def _prep_gates(state: StateVector) -> list[GateOp]:
    return list(_prep_for(np.ascontiguousarray(state.amplitudes).tobytes()))


def evaluate(model: VQPModel, state: StateVector, cycles: int, mode: str, shots: int,
             rng: np.random.Generator | None, noise: NoiseSpec | None = None,
             shift: bool = True, only: Sequence[int] | None = None,
             trajectories: int | None = None) -> Evaluation:
    noisy = noise is not None and noise.active
    plan = shift_plan(model, cycles, decompose=noisy, shift=shift, only=only)
    if noisy:
        # noisy runs start from |0…0⟩ and pay for the state preparation circuit too
        plan = plan.prepend(_prep_gates(state))
        reps = shots if mode == "sampled" else (trajectories or shots)
        zero = StateVector.zero(model.layout.n_qubits)
        states = run_plan(plan, zero, model.layout.n_qubits, repeats=reps, noise=noise, rng=rng)
        marg = _index_marginals(states, model)
        mean = marg.reshape(plan.batch, reps, -1).mean(axis=1)
        q_used = _sample_trajectories(marg, plan.batch, reps, rng) if mode == "sampled" else mean
        q_ref = mean[0]
    else:
        states = run_plan(plan, state, model.layout.n_qubits)
        marg = _index_marginals(states, model)
        q_used = _sample_rows(marg, shots, rng) if mode == "sampled" else marg
        q_ref = marg[0]
    simcore.record_run(0, cycles=cycles)
    return Evaluation(q_used, q_ref, plan.occurrences)


def estimate_index_distribution(model: VQPModel, phi_k_state: StateVector, schedule=None,
                                mode: str = "exact", shots: int = 20,
                                rng: np.random.Generator | None = None,
                                noise: NoiseSpec | None = None, trajectories: int = 2000) -> np.ndarray:
    """Index-register distribution after the full search circuit.

    Exact mode under noise averages ``trajectories`` trajectory distributions.
    """
    cycles = model.cycles if schedule is None else schedule.iterations
    ev = evaluate(model, phi_k_state, cycles, mode, shots, rng, noise, shift=False, trajectories=trajectories)
    return ev.q_used[0] if mode == "sampled" else ev.q_reference


def _gradient(model: VQPModel, ev: Evaluation, K: np.ndarray, p: np.ndarray) -> np.ndarray:
    grad = np.zeros(model.n_params)
    q = ev.q_used[0]
    for i, (_, ref) in enumerate(ev.occurrences):
        dq = ev.q_used[2 * i + 1] - ev.q_used[2 * i + 2]
        flat = ref.index + (0 if ref.group == "f" else model.theta_f.size)
        grad[flat] += ref.coeff * (dq @ K @ q - dq @ K @ p)
    return grad


def loss_and_gradient(model: VQPModel, state: StateVector, cycles: int, config: TrainConfig,
                      rng: np.random.Generator | None = None,
                      only: Sequence[int] | None = None) -> tuple[float, float, np.ndarray]:
    """(reference loss, reference P(k), gradient over all flat parameters).

    A parameter used by several gates gets one ±π/2 shift pair per occurrence.
    """
    ev = evaluate(model, state, cycles, config.mode, config.shots, rng, config.noise, only=only)
    p = target_distribution(model)
    K = kernel_matrix(p.size, config.kernel)
    grad = _gradient(model, ev, K, p)
    q_ref = ev.q_reference
    loss = float(q_ref @ K @ q_ref - 2 * q_ref @ K @ p + p @ K @ p)
    return loss, float(q_ref[model.k]), grad


def parameter_shift_gradient(model: VQPModel, data_state: StateVector, schedule, config: TrainConfig,
                             param_index: int, rng: np.random.Generator | None = None) -> float:
    if not 0 <= param_index < model.n_params:
        raise IndexError(f"param_index {param_index} out of range ({model.n_params} parameters)")
    cycles = model.cycles if schedule is None else schedule.iterations
    _, _, grad = loss_and_gradient(model, data_state, cycles, config, rng, only=[param_index])
    return float(grad[param_index])


def final_probability(model: VQPModel, state: StateVector, config: TrainConfig,
                      rng: np.random.Generator) -> tuple[float, float]:
    """(loss, P(k)) of the model, noise-averaged when the config carries noise."""
    q = estimate_index_distribution(model, state, None, "exact", rng=rng, noise=config.noise,
                                    trajectories=config.eval_trajectories)
    return mmd_loss(q, target_distribution(model), config.kernel), float(q[model.k])


def train_vqp(dataset: LabeledDataset, k: int, L1: int, L2: int | None, config: TrainConfig,
              fixed_dis: list[GateOp] | None = None, threshold: float = 0.5,
              rng: np.random.Generator | None = None) -> tuple[VQPModel, LossTrace]:
    """Gradient descent on the MMD between the index distribution and δ_k.

    Angles of U_L1 and U_dis start uniform in ±init_scale and are updated jointly.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    cycles = config.cycles or schedule_iterations(dataset.N, config.schedule_rule).iterations
    model = init_model(dataset, k, L1, L2, rng, config.init_scale, threshold, cycles, fixed_dis,
                       dis_span=config.dis_span)
    state = build_phi_k(dataset, k)
    trace = LossTrace()
    theta = model.flat_params()
    for it in range(config.iterations):
        model = model.with_flat_params(theta)
        loss, pk, grad = loss_and_gradient(model, state, cycles, config, rng)
        if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
            raise TrainingError(f"non-finite loss or gradient at iteration {it} (loss={loss})")
        trace.append(loss, pk)
        theta = theta - config.learning_rate * grad
        log.debug("iter %d loss %.4f p %.4f", it, loss, pk)
    model = model.with_flat_params(theta)
    _, pk = final_probability(model, state, config, rng)
    return replace(model, calibrated_p=pk), trace
