import numpy as np
import pytest

from vqpqel import mpqc, simcore
from vqpqel.mpqc import MPQCParams
from vqpqel.simcore import StateVector

import oracle


def test_two_qubit_block_layout():
    gates = mpqc.build_block_circuit(np.zeros((2, 3)), (0, 1))
    assert [g.kind for g in gates] == ["RX", "RY", "RZ", "RX", "RY", "RZ", "CNOT"]
    assert gates[-1].targets == (0, 1)


def test_single_qubit_block_has_no_cnot():
    gates = mpqc.build_block_circuit(np.zeros((1, 3)), (0,))
    assert len(gates) == 3
    assert np.allclose(oracle.circuit_unitary(gates, 1), np.eye(2), atol=1e-12)


def test_three_qubit_block_matches_dense():
    rng = np.random.default_rng(0)
    angles = rng.uniform(-np.pi, np.pi, (3, 3))
    gates = mpqc.build_block_circuit(angles, (0, 1, 2))
    assert sum(g.kind == "CNOT" for g in gates) == 2 and len(gates) == 11
    expected = np.eye(8, dtype=complex)
    for q in range(3):
        for a, kind in enumerate(("RX", "RY", "RZ")):
            expected = oracle.embed(oracle.rotation(kind, angles[q, a]), (q,), 3) @ expected
    expected = oracle.embed(oracle.local_matrix("CNOT", 2), (0, 1), 3) @ expected
    expected = oracle.embed(oracle.local_matrix("CNOT", 2), (1, 2), 3) @ expected
    assert np.allclose(oracle.circuit_unitary(gates, 3), expected, atol=1e-12)


def test_zero_params_act_trivially_on_zero_state():
    out = mpqc.apply_mpqc(StateVector.zero(3), MPQCParams.zeros(4, (0, 1, 2)))
    assert np.allclose(out.amplitudes, StateVector.zero(3).amplitudes, atol=1e-12)


def test_small_toy_angles_are_close_to_identity():
    u = oracle.circuit_unitary(mpqc.mpqc_gates(MPQCParams(np.array([[[0.02, 0.01, 0.16]]]), (0,))), 1)
    # trace distance between U|psi><psi|U^dag and |psi><psi|, maximised over pure inputs
    eig = np.linalg.eigvals(u)
    spread = np.max(np.abs(np.angle(eig[:, None] / eig[None, :])))
    assert np.sin(spread / 2) < 0.1


def test_two_layers_equal_two_blocks():
    rng = np.random.default_rng(1)
    params = MPQCParams.random(2, (0, 1), rng, 1.0)
    psi = StateVector(oracle.random_state(2, rng))
    once = simcore.apply_circuit(psi, mpqc.build_block_circuit(params.angles[0], (0, 1)))
    twice = simcore.apply_circuit(once, mpqc.build_block_circuit(params.angles[1], (0, 1)))
    assert np.allclose(mpqc.apply_mpqc(psi, params).amplitudes, twice.amplitudes, atol=1e-12)


def test_inverse_gates_undo_circuit():
    rng = np.random.default_rng(2)
    params = MPQCParams.random(3, (1, 2), rng, 1.0)
    u = oracle.circuit_unitary(mpqc.mpqc_gates(params) + mpqc.mpqc_gates(params, inverse=True), 3)
    assert np.allclose(u, np.eye(8), atol=1e-12)


def test_inverse_tags_negate_coefficients():
    params = MPQCParams.zeros(1, (0,))
    tags = [g.tag for g in mpqc.mpqc_gates(params, group="d", inverse=True)]
    assert all(t.coeff == -1.0 for t in tags)
    assert [t.index for t in tags] == [2, 1, 0]


@pytest.mark.parametrize("layers,width,count", [(3, 2, 18), (1, 1, 3), (5, 2, 30)])
def test_param_count(layers, width, count):
    assert mpqc.param_count(layers, width) == count
    assert MPQCParams.zeros(layers, tuple(range(width))).size == count


def test_param_shape_validated():
    with pytest.raises(ValueError):
        MPQCParams(np.zeros((1, 2, 2)), (0, 1))
    with pytest.raises(ValueError):
        mpqc.param_count(0, 2)
