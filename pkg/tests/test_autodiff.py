import numpy as np
import pytest

from xlnbt.autodiff import (
    Var,
    affine,
    bce_with_logits,
    concat,
    dot,
    matmul,
    relu,
    sigmoid,
    stack,
    vmax,
    vmean,
    vsum,
)
from xlnbt.gradcheck import grad_check
from xlnbt.params import ParameterSet


class TestAffine:
    def test_identity(self):
        out = affine(np.eye(2), np.array([1.0, 2.0]), np.zeros(2))
        np.testing.assert_allclose(out.data, [1.0, 2.0])

    def test_zero_matrix(self):
        out = affine(np.zeros((2, 2)), np.array([5.0, -3.0]), np.array([3.0, 4.0]))
        np.testing.assert_allclose(out.data, [3.0, 4.0])

    def test_hand_multiplication(self):
        # ((1,2),(3,4)) @ (1,1) = (1+2, 3+4) = (3, 7)
        w = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = affine(w, np.array([1.0, 1.0]), np.zeros(2))
        np.testing.assert_allclose(out.data, [3.0, 7.0])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            affine(np.eye(2), np.ones(3), np.zeros(2))

    def test_batch_rows(self):
        w = np.array([[1.0, 2.0], [3.0, 4.0]])
        x = np.array([[1.0, 1.0], [0.0, 1.0]])
        out = affine(w, x, np.zeros(2))
        np.testing.assert_allclose(out.data, [[3.0, 7.0], [2.0, 4.0]])


class TestGradCheck:
    def test_linear_is_exact(self):
        params = ParameterSet()
        params.add("w", np.array([1.5, -2.0, 0.5]))
        x = np.array([0.3, 0.7, -1.2])
        err = grad_check(lambda b: dot(b["w"], x), params)
        assert err < 1e-9

    def test_sigmoid_derivative_at_zero(self):
        # analytic value: sigma'(0) = 1/4
        params = ParameterSet()
        params.add("x", np.array([0.0]))
        binding = params.bind()
        out = vsum(sigmoid(binding["x"]))
        out.backward()
        np.testing.assert_allclose(binding["x"].grad, [0.25])
        assert grad_check(lambda b: vsum(sigmoid(b["x"])), params) < 1e-6

    def test_non_finite_value_raises(self):
        params = ParameterSet()
        params.add("x", np.array([1.0]))

        def bad(b):
            from xlnbt.autodiff import log

            return vsum(log(b["x"] - 2.0))  # log of a negative number

        with pytest.raises(ValueError):
            grad_check(bad, params)


class TestEngineGradients:
    """Every primitive composed as in the model checks out against FD."""

    def test_composite_expression(self):
        rng = np.random.default_rng(0)
        params = ParameterSet()
        params.add("w", rng.normal(size=(3, 6)))
        params.add("b", rng.normal(size=3))
        params.add("v", rng.normal(size=3))
        x = rng.normal(size=(4, 6))

        def f(bind):
            h = relu(affine(bind["w"], x, bind["b"]))
            pooled = vmax(h, axis=0)
            gated = sigmoid(pooled) * bind["v"]
            return vmean(gated * gated) + vsum(bind["v"] * 0.1)

        assert grad_check(f, params) < 1e-6

    def test_bce_with_logits_matches_direct_formula(self):
        rng = np.random.default_rng(1)
        z = rng.normal(size=7) * 3
        y = (rng.random(7) > 0.5).astype(float)
        direct = -(y * np.log(1 / (1 + np.exp(-z))) + (1 - y) * np.log(1 - 1 / (1 + np.exp(-z))))
        np.testing.assert_allclose(bce_with_logits(z, y).data, direct, atol=1e-12)

        params = ParameterSet()
        params.add("z", z.copy())
        assert grad_check(lambda b: vmean(bce_with_logits(b["z"], y)), params) < 1e-8

    def test_concat_stack_slice_gradients(self):
        rng = np.random.default_rng(2)
        params = ParameterSet()
        params.add("a", rng.normal(size=4))
        params.add("b", rng.normal(size=4))

        def f(bind):
            m = stack([bind["a"], bind["b"]])
            c = concat([bind["a"], bind["b"]])
            return vsum(m * m) + vsum(c[1:5] * 2.0)

        assert grad_check(f, params) < 1e-8

    def test_matmul_2d_gradients(self):
        rng = np.random.default_rng(3)
        params = ParameterSet()
        params.add("A", rng.normal(size=(3, 4)))
        params.add("B", rng.normal(size=(4, 2)))

        def f(bind):
            return vsum(matmul(bind["A"], bind["B"]) ** 2)

        assert grad_check(f, params) < 1e-7

    def test_max_tie_routes_to_first(self):
        v = Var(np.array([[2.0, 5.0], [2.0, 1.0]]), requires_grad=True)
        out = vsum(vmax(v, axis=0))
        out.backward()
        np.testing.assert_allclose(v.grad, [[1.0, 1.0], [0.0, 0.0]])

    def test_determinism_same_seed(self):
        def run():
            rng = np.random.default_rng(42)
            w = Var(rng.normal(size=(4, 4)), requires_grad=True)
            x = rng.normal(size=4)
            out = vsum(sigmoid(matmul(w, x)))
            out.backward()
            return out.data.copy(), w.grad.copy()

        o1, g1 = run()
        o2, g2 = run()
        assert np.array_equal(o1, o2) and np.array_equal(g1, g2)
