"""Brute-force dense-matrix reference, written without the package's kernels.

Every gate is expanded to a full 2^n x 2^n matrix with explicit basis-state
loops, so it shares no index arithmetic with the tensor-reshape simulator.
"""

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1, 1j])
T = np.diag([1, np.exp(1j * np.pi / 4)])
PAULI = {"RX": X, "RY": Y, "RZ": Z}
FIXED = {"H": H, "X": X, "Y": Y, "Z": Z, "S": S, "SDG": S.conj(), "T": T, "TDG": T.conj()}


def rotation(kind, angle):
    # exp(-i a P / 2) via the Pauli identity cos - i sin P
    return np.cos(angle / 2) * I2 - 1j * np.sin(angle / 2) * PAULI[kind]


def local_matrix(kind, n_targets, angle=None, matrix=None):
    if kind in PAULI:
        return rotation(kind, angle)
    if kind in FIXED:
        return FIXED[kind]
    if kind == "UNITARY":
        return np.asarray(matrix, dtype=complex)
    dim = 2**n_targets
    m = np.eye(dim, dtype=complex)
    if kind in ("CNOT", "CCNOT"):
        m[dim - 2:, dim - 2:] = X
    elif kind in ("CZ", "MCZ"):
        m[dim - 1, dim - 1] = -1
    else:
        raise ValueError(kind)
    return m


def embed(local, targets, n):
    """Full matrix of ``local`` acting on ``targets`` (qubit 0 most significant)."""
    dim = 2**n
    full = np.zeros((dim, dim), dtype=complex)
    k = len(targets)

    def bit(x, q):
        return (x >> (n - 1 - q)) & 1

    for col in range(dim):
        sub_in = sum(bit(col, q) << (k - 1 - i) for i, q in enumerate(targets))
        for sub_out in range(2**k):
            amp = local[sub_out, sub_in]
            if amp == 0:
                continue
            row = col
            for i, q in enumerate(targets):
                want = (sub_out >> (k - 1 - i)) & 1
                if bit(row, q) != want:
                    row ^= 1 << (n - 1 - q)
            full[row, col] += amp
    return full


def circuit_unitary(gates, n):
    u = np.eye(2**n, dtype=complex)
    for g in gates:
        u = embed(local_matrix(g.kind, len(g.targets), g.angle, g.matrix), g.targets, n) @ u
    return u


def marginal(psi, n, subset):
    probs = np.zeros(2 ** len(subset))
    for x, a in enumerate(psi):
        key = 0
        for q in subset:
            key = (key << 1) | ((x >> (n - 1 - q)) & 1)
        probs[key] += abs(a) ** 2
    return probs


def random_state(n, rng):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)


def random_unitary(dim, rng):
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    return q * (np.diag(r) / np.abs(np.diag(r)))
