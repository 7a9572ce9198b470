import numpy as np
import pytest

from xlnbt.autodiff import Var, vsum
from xlnbt.batchnorm import BatchNormState, batch_norm
from xlnbt.gradcheck import grad_check
from xlnbt.params import ParameterSet


def test_identical_vectors_normalize_to_zero():
    state = BatchNormState.fresh(3)
    batch = [np.array([2.0, -1.0, 5.0])] * 4
    out = batch_norm(batch, state, "train")
    for row in out:
        np.testing.assert_allclose(row, 0.0, atol=1e-6)


def test_plus_minus_one_direct_formula():
    # mean 0, population variance 1 -> outputs -1/+1 up to eps
    state = BatchNormState.fresh(1)
    out = batch_norm([np.array([-1.0]), np.array([1.0])], state, "train")
    np.testing.assert_allclose(out[0], [-1.0], atol=1e-4)
    np.testing.assert_allclose(out[1], [1.0], atol=1e-4)


def test_infer_identity_stats_is_noop():
    state = BatchNormState.fresh(4)
    batch = [np.arange(4.0), np.arange(4.0) * -2]
    out = batch_norm(batch, state, "infer")
    for got, want in zip(out, batch):
        # up to the epsilon in the denominator: scale factor 1/sqrt(1+eps)
        np.testing.assert_allclose(got, want, atol=5e-5)
    np.testing.assert_array_equal(state.running_mean, np.zeros(4))
    np.testing.assert_array_equal(state.running_var, np.ones(4))


def test_train_batch_of_one_rejected():
    state = BatchNormState.fresh(2)
    with pytest.raises(ValueError):
        batch_norm([np.ones(2)], state, "train")


def test_train_output_moments_batch_ge_8():
    rng = np.random.default_rng(11)
    state = BatchNormState.fresh(5)
    batch = [rng.normal(size=5) * 3 + 1 for _ in range(16)]
    out = np.stack(batch_norm(batch, state, "train"))
    assert np.all(np.abs(out.mean(axis=0)) < 1e-6)
    assert np.all(np.abs(out.var(axis=0) - 1.0) < 1e-3)


def test_running_stats_update_only_in_train():
    rng = np.random.default_rng(3)
    state = BatchNormState.fresh(2, momentum=0.5)
    batch = [rng.normal(size=2) for _ in range(4)]
    stacked = np.stack(batch)
    batch_norm(batch, state, "train")
    want_mean = 0.5 * np.zeros(2) + 0.5 * stacked.mean(axis=0)
    want_var = 0.5 * np.ones(2) + 0.5 * stacked.var(axis=0)
    np.testing.assert_allclose(state.running_mean, want_mean)
    np.testing.assert_allclose(state.running_var, want_var)
    before = (state.running_mean.copy(), state.running_var.copy())
    batch_norm(batch, state, "infer")
    np.testing.assert_array_equal(state.running_mean, before[0])
    np.testing.assert_array_equal(state.running_var, before[1])


def test_train_mode_is_differentiable():
    rng = np.random.default_rng(7)
    params = ParameterSet()
    params.add("x", rng.normal(size=(4, 3)))
    weights = rng.normal(size=(4, 3))

    def f(bind):
        state = BatchNormState.fresh(3)
        out = batch_norm(bind["x"], state, "train")
        return vsum(out * weights) + vsum(out**3)

    assert grad_check(f, params) < 1e-6


def test_invalid_state_rejected():
    with pytest.raises(ValueError):
        BatchNormState(np.zeros(2), np.array([1.0, -0.5]))
    with pytest.raises(ValueError):
        BatchNormState(np.zeros(2), np.ones(2), eps=0.0)
