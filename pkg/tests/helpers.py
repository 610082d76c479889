import numpy as np

from vqpqel import datasets
from vqpqel.encoding import RegisterLayout, build_phi_k
from vqpqel.mpqc import MPQCParams
from vqpqel.vqp import index_controlled_x, init_model


def toy_model(angles=(0.0, 0.0, 0.0), threshold=0.5):
    """The 4-example toy problem with the index-controlled X disentangler."""
    data = datasets.toy4(normalized=True)
    layout = RegisterLayout.for_dataset(data)
    model = init_model(data, 3, 1, None, np.random.default_rng(0), threshold=threshold, cycles=1,
                       fixed_dis=index_controlled_x(layout, 3))
    model.theta_f = MPQCParams(np.asarray(angles, dtype=float).reshape(1, 1, 3), layout.feature_qubits)
    return model, build_phi_k(data, 3)


def exact_loss(model, state, cycles, config):
    from vqpqel.training import estimate_index_distribution, mmd_loss, target_distribution
    from vqpqel.vqp import GroverSchedule
    q = estimate_index_distribution(model, state, GroverSchedule(cycles, 0.0), "exact")
    return mmd_loss(q, target_distribution(model), config.kernel)


def gradient_case(seed):
    """A seeded random model whose loss depends on its parameters, with its state and cycle count."""
    from vqpqel.encoding import LabeledDataset, normalize
    rng = np.random.default_rng(seed)
    kind = seed % 3
    if kind == 0:
        model, state = toy_model(rng.uniform(-np.pi, np.pi, 3))
        return model, state, 1
    n = 4 if kind == 1 else 8
    m = 2 if kind == 1 else 4
    data = normalize(LabeledDataset(rng.normal(size=(n, m)), rng.choice([-1, 1], n)))
    k = int(rng.integers(n))
    cycles = int(rng.integers(1, 3))
    model = init_model(data, k, int(rng.integers(1, 3)), 1, rng, init_scale=np.pi, cycles=cycles,
                       dis_span="full")
    return model, build_phi_k(data, k), cycles


def finite_difference(model, state, cycles, config, h=1e-4):
    theta = model.flat_params()
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (exact_loss(model.with_flat_params(up), state, cycles, config)
                   - exact_loss(model.with_flat_params(down), state, cycles, config)) / (2 * h)
    return grad


def relative_error(estimate, reference):
    scale = max(np.linalg.norm(reference), 1e-12)
    return float(np.linalg.norm(estimate - reference) / scale)
