import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vqpqel import simcore
from vqpqel.simcore import GateError, GateOp, NoiseSpec, StateVector

import oracle

ONE_QUBIT = ["RX", "RY", "RZ", "H", "X", "Y", "Z", "S", "SDG", "T", "TDG"]


def random_circuit(n, length, rng):
    gates = []
    for _ in range(length):
        kinds = ONE_QUBIT + (["CNOT", "CZ"] if n >= 2 else []) + (["CCNOT", "UNITARY"] if n >= 3 else [])
        kind = rng.choice(kinds)
        if kind in ONE_QUBIT:
            q = (int(rng.integers(n)),)
            angle = float(rng.uniform(-np.pi, np.pi)) if kind.startswith("R") else None
            gates.append(GateOp(kind, q, angle=angle))
        elif kind == "UNITARY":
            width = int(rng.integers(1, min(n, 3) + 1))
            qs = tuple(int(q) for q in rng.choice(n, width, replace=False))
            gates.append(GateOp(kind, qs, matrix=oracle.random_unitary(2**width, rng)))
        else:
            width = 3 if kind == "CCNOT" else 2
            gates.append(GateOp(kind, tuple(int(q) for q in rng.choice(n, width, replace=False))))
    return gates


def test_hadamard_on_zero():
    out = simcore.apply_gate(StateVector.zero(1), GateOp("H", (0,)))
    assert np.allclose(out.amplitudes, [0.7071067811865476] * 2, atol=1e-12)


def test_rx_zero_is_identity():
    psi = StateVector(oracle.random_state(2, np.random.default_rng(0)))
    out = simcore.apply_gate(psi, GateOp("RX", (1,), angle=0.0))
    assert np.allclose(out.amplitudes, psi.amplitudes, atol=1e-14)


def test_cz_phases():
    s11 = StateVector(np.eye(4)[3])
    s10 = StateVector(np.eye(4)[2])
    assert np.allclose(simcore.apply_gate(s11, GateOp("CZ", (0, 1))).amplitudes, -np.eye(4)[3])
    assert np.allclose(simcore.apply_gate(s10, GateOp("CZ", (0, 1))).amplitudes, np.eye(4)[2])


def test_qubit_zero_is_most_significant():
    out = simcore.apply_gate(StateVector.zero(3), GateOp("X", (0,)))
    assert np.argmax(np.abs(out.amplitudes)) == 0b100


def test_gate_validation():
    with pytest.raises(GateError):
        GateOp("CNOT", (0, 0))
    with pytest.raises(GateError):
        GateOp("RX", (0,))
    with pytest.raises(GateError):
        GateOp("UNITARY", (0,), matrix=np.array([[1, 1], [0, 1]]))
    with pytest.raises(GateError):
        simcore.apply_gate(StateVector.zero(2), GateOp("X", (2,)))


def test_empty_circuit_and_involution():
    psi = StateVector(oracle.random_state(3, np.random.default_rng(1)))
    assert np.allclose(simcore.apply_circuit(psi, []).amplitudes, psi.amplitudes)
    hh = [GateOp("H", (0,)), GateOp("H", (0,))]
    assert np.allclose(simcore.apply_circuit(psi, hh).amplitudes, psi.amplitudes, atol=1e-12)


@pytest.mark.parametrize("seed", range(40))
def test_random_three_qubit_circuits_match_dense(seed):
    rng = np.random.default_rng(seed)
    gates = random_circuit(3, int(rng.integers(1, 11)), rng)
    psi = oracle.random_state(3, rng)
    expected = oracle.circuit_unitary(gates, 3) @ psi
    got = simcore.apply_circuit(StateVector(psi), gates).amplitudes
    assert np.max(np.abs(got - expected)) < 1e-10


def test_inverse_undoes_gate():
    rng = np.random.default_rng(5)
    gates = random_circuit(4, 12, rng)
    psi = StateVector(oracle.random_state(4, rng))
    back = simcore.apply_circuit(simcore.apply_circuit(psi, gates), [g.inverse() for g in reversed(gates)])
    assert np.allclose(back.amplitudes, psi.amplitudes, atol=1e-10)


def test_batched_angles_match_single_runs():
    rng = np.random.default_rng(2)
    psi = oracle.random_state(2, rng)
    angles = rng.uniform(-3, 3, 5)
    batch = simcore.run_batch(np.repeat(psi[None], 5, axis=0), [GateOp("RY", (1,), angle=angles),
                                                                  GateOp("CNOT", (1, 0))], 2)
    for row, a in zip(batch, angles):
        single = simcore.apply_circuit(StateVector(psi), [GateOp("RY", (1,), angle=float(a)), GateOp("CNOT", (1, 0))])
        assert np.allclose(row, single.amplitudes, atol=1e-12)


def test_toffoli_decomposition_is_exact():
    gates = simcore.toffoli_gates(0, 1, 2)
    assert sum(len(g.targets) == 1 for g in gates) == 10
    assert sum(g.kind == "CNOT" for g in gates) == 6
    u = oracle.circuit_unitary(gates, 3)
    assert np.allclose(u, oracle.local_matrix("CCNOT", 3), atol=1e-12)


@pytest.mark.parametrize("width", [1, 2, 3, 4])
def test_lower_mcz_matches_mcz(width):
    qs = tuple(range(width))
    u = oracle.circuit_unitary(simcore.lower_mcz(qs), width)
    expected = np.eye(2**width)
    expected[-1, -1] = -1
    assert np.allclose(u, expected, atol=1e-12)


# noise -----------------------------------------------------------------

def test_zero_noise_equals_noiseless():
    rng = np.random.default_rng(3)
    gates = random_circuit(3, 8, rng)
    psi = StateVector(oracle.random_state(3, rng))
    noisy = simcore.apply_noisy_circuit(psi, gates, NoiseSpec(0.0), np.random.default_rng(0))
    assert np.allclose(noisy.amplitudes, simcore.apply_circuit(psi, gates).amplitudes, atol=1e-12)


def test_noise_probability_validated():
    with pytest.raises(ValueError):
        NoiseSpec(0.5)


def test_single_qubit_noise_flips_at_expected_rate():
    # X or Y after an identity-like gate flips |0> -> |1> with probability 2p
    p, reps = 0.05, 20000
    psi0 = np.repeat(StateVector.zero(1).amplitudes[None], reps, axis=0)
    out = simcore.run_batch(psi0, [GateOp("RX", (0,), angle=0.0)], 1, NoiseSpec(p), np.random.default_rng(11))
    flipped = np.mean(np.abs(out[:, 1]) ** 2)
    sigma = np.sqrt(2 * p * (1 - 2 * p) / reps)
    assert abs(flipped - 2 * p) < 4 * sigma


def test_noise_trajectories_are_seeded():
    gates = [GateOp("H", (0,)), GateOp("CNOT", (0, 1))]
    runs = [simcore.apply_noisy_circuit(StateVector.zero(2), gates, NoiseSpec(0.2), np.random.default_rng(4))
            for _ in range(2)]
    assert np.array_equal(runs[0].amplitudes, runs[1].amplitudes)


# measurement -----------------------------------------------------------

def test_uniform_marginal():
    psi = StateVector(np.full(4, 0.5))
    assert np.allclose(simcore.probabilities(psi, [0]), [0.5, 0.5])


@pytest.mark.parametrize("subset", [[0], [3], [1, 2], [2, 0], [0, 1, 2, 3], [3, 1, 0]])
def test_marginals_match_oracle(subset):
    psi = oracle.random_state(4, np.random.default_rng(6))
    got = simcore.probabilities(StateVector(psi), subset)
    assert np.allclose(got, oracle.marginal(psi, 4, subset), atol=1e-10)


def test_sampling_deterministic_state():
    counts = simcore.sample_counts(StateVector(np.eye(4)[3]), [0, 1], 37, np.random.default_rng(0))
    assert counts.counts == {"11": 37}


def test_sampling_binomial_bound():
    shots = 10**6
    counts = simcore.sample_counts(StateVector(np.full(2, 2**-0.5)), [0], shots, np.random.default_rng(8))
    assert abs(counts.counts["0"] - shots / 2) < 3 * np.sqrt(shots / 4)


def test_sampling_is_seeded():
    psi = StateVector(oracle.random_state(3, np.random.default_rng(9)))
    a = simcore.sample_counts(psi, [0, 2], 500, np.random.default_rng(1))
    b = simcore.sample_counts(psi, [0, 2], 500, np.random.default_rng(1))
    assert a == b


def test_run_counter():
    with simcore.count_runs() as counter:
        simcore.record_run(3, cycles=2)
    simcore.record_run(1)
    assert (counter.circuits, counter.cycles) == (3, 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 4))
def test_circuits_preserve_norm(seed, n):
    rng = np.random.default_rng(seed)
    gates = random_circuit(n, 10, rng)
    out = simcore.apply_circuit(StateVector(oracle.random_state(n, rng)), gates)
    assert abs(out.norm() - 1) < 1e-10
