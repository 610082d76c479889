import math

import numpy as np
import pytest

from vqpqel import datasets, training
from vqpqel.training import KernelSpec, TrainConfig, TrainingError
from vqpqel.encoding import build_phi_k
from vqpqel.vqp import GroverSchedule, ideal_model, init_model

from helpers import exact_loss, finite_difference, gradient_case, relative_error, toy_model

SIGMA = KernelSpec((0.3,))


def test_kernel_diagonal_and_value():
    assert training.kernel_eval(3, 3, SIGMA) == 1.0
    assert training.kernel_eval(2, 3, SIGMA) == pytest.approx(0.18887560283756183, abs=1e-12)


def test_kernel_matrix_multi_bandwidth_is_mean():
    k = training.kernel_matrix(4, KernelSpec((0.3, 1.0)))
    assert k[0, 1] == pytest.approx((math.exp(-1 / 0.6) + math.exp(-0.5)) / 2)


def test_kernel_rejects_bad_bandwidth():
    with pytest.raises(ValueError):
        KernelSpec((0.0,))


def test_mmd_zero_on_equal_distributions():
    q = np.random.default_rng(0).dirichlet(np.ones(8))
    assert abs(training.mmd_loss(q, q, SIGMA)) < 1e-12


# frozen: 2(1 - exp(-d²/0.6)) for d = |i - k|
@pytest.mark.parametrize("i,k,expected", [(0, 1, 1.6222487943248765), (5, 3, 1.9974547323973204),
                                          (4, 7, 1.999999388195359), (2, 2, 0.0)])
def test_mmd_between_deltas(i, k, expected):
    q, p = np.eye(8)[i], np.eye(8)[k]
    assert training.mmd_loss(q, p, SIGMA) == pytest.approx(expected, abs=1e-12)


def test_ideal_toy_distribution_is_delta():
    model, phi = ideal_model(4)
    q = training.estimate_index_distribution(model, phi, None, "exact")
    assert np.allclose(q, np.eye(4)[3], atol=1e-9)


def test_sampled_distribution_is_seeded():
    model, phi = toy_model((0.3, 0.2, 0.1))
    a = training.estimate_index_distribution(model, phi, None, "sampled", 20, np.random.default_rng(1))
    b = training.estimate_index_distribution(model, phi, None, "sampled", 20, np.random.default_rng(1))
    assert np.array_equal(a, b) and a.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(9))
def test_parameter_shift_matches_finite_difference(seed):
    model, state, cycles = gradient_case(seed)
    config = TrainConfig(mode="exact")
    _, _, grad = training.loss_and_gradient(model, state, cycles, config)
    assert relative_error(grad, finite_difference(model, state, cycles, config)) < 1e-4


def test_single_parameter_gradient_agrees_with_full():
    model, state, cycles = gradient_case(4)
    config = TrainConfig(mode="exact")
    _, _, grad = training.loss_and_gradient(model, state, cycles, config)
    for i in (0, model.n_params - 1):
        g = training.parameter_shift_gradient(model, state, GroverSchedule(cycles, 0.0), config, i)
        assert g == pytest.approx(grad[i], abs=1e-12)
    with pytest.raises(IndexError):
        training.parameter_shift_gradient(model, state, None, config, model.n_params)


def test_feature_local_disentangler_has_zero_gradient():
    data = datasets.linear8(normalized=True)
    model, _ = training.train_vqp(data, 7, 3, 3, TrainConfig(iterations=0, mode="exact"))
    _, _, grad = training.loss_and_gradient(model, build_phi_k(data, 7), 3, TrainConfig(mode="exact"))
    assert np.max(np.abs(grad)) < 1e-12


def test_converged_toy_gradient_is_small():
    model, phi = toy_model((0.02, 0.01, 0.16))
    _, _, grad = training.loss_and_gradient(model, phi, 1, TrainConfig(mode="exact"))
    assert np.all(np.abs(grad) < 0.05)


def test_toy_training_reaches_high_probability():
    data = datasets.toy4(normalized=True)
    model, _ = toy_model()
    trained, trace = training.train_vqp(data, 3, 1, None, TrainConfig(seed=3, cycles=1), fixed_dis=model.fixed_dis)
    assert trained.calibrated_p >= 0.95
    assert len(trace) == 100


def test_small_learning_rate_reduces_loss():
    data = datasets.toy4(normalized=True)
    model, phi = toy_model()
    config = TrainConfig(iterations=50, learning_rate=0.002, mode="exact", cycles=1, init_scale=1.0, seed=2)
    trained, trace = training.train_vqp(data, 3, 1, None, config, fixed_dis=model.fixed_dis)
    assert exact_loss(trained, phi, 1, config) < trace.mmd_loss[0]
    rises = sum(b > a for a, b in zip(trace.mmd_loss, trace.mmd_loss[1:]))
    assert rises <= 0.05 * (len(trace) - 1)


def test_zero_learning_rate_keeps_parameters():
    data = datasets.toy4(normalized=True)
    model, _ = toy_model()
    config = TrainConfig(iterations=5, learning_rate=0.0, mode="exact", cycles=1, seed=4)
    start, _ = training.train_vqp(data, 3, 1, None, TrainConfig(iterations=0, cycles=1, seed=4),
                                  fixed_dis=model.fixed_dis)
    trained, trace = training.train_vqp(data, 3, 1, None, config, fixed_dis=model.fixed_dis)
    assert np.array_equal(trained.flat_params(), start.flat_params())
    assert len(set(trace.mmd_loss)) == 1


def test_zero_iterations_returns_initialization():
    data = datasets.linear8(normalized=True)
    model, trace = training.train_vqp(data, 7, 3, 3, TrainConfig(iterations=0, seed=9))
    assert len(trace) == 0
    fresh = init_model(data, 7, 3, 3, np.random.default_rng(9))
    assert np.array_equal(model.flat_params(), fresh.flat_params())


def test_non_finite_loss_raises(monkeypatch):
    monkeypatch.setattr(training, "loss_and_gradient", lambda *a, **k: (float("nan"), 0.0, np.zeros(3)))
    data = datasets.toy4(normalized=True)
    model, _ = toy_model()
    with pytest.raises(TrainingError):
        training.train_vqp(data, 3, 1, None, TrainConfig(iterations=1, cycles=1), fixed_dis=model.fixed_dis)


def test_training_is_seeded():
    data = datasets.linear8(normalized=True)
    a = training.train_vqp(data, 7, 1, 1, TrainConfig(iterations=3, seed=5, dis_span="full"))
    b = training.train_vqp(data, 7, 1, 1, TrainConfig(iterations=3, seed=5, dis_span="full"))
    assert np.array_equal(a[0].flat_params(), b[0].flat_params())
    assert a[1].mmd_loss == b[1].mmd_loss


def test_trace_csv(tmp_path):
    trace = training.LossTrace()
    trace.append(0.5, 0.25)
    trace.to_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines() == ["iteration,mmd_loss,p_mislabeled", "0,0.5,0.25"]


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(mode="analytic")
    with pytest.raises(ValueError):
        TrainConfig(shots=0)
