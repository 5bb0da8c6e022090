import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scltpe.exceptions import DegenerateRowError, DimensionError, NumericalError
from scltpe.numcore import (
    AdamHyper, ParamTensor, adam_step, build_mlp, grad_check, l2_normalize_rows,
    l2_normalize_rows_backward, linear_backward, linear_forward, mlp_backward, mlp_forward,
    relu, relu_backward,
)


def test_linear_forward_examples():
    np.testing.assert_array_equal(linear_forward([[1, 2]], np.eye(2), [0, 0]), [[1, 2]])
    np.testing.assert_array_equal(linear_forward([[1, 1]], [[2, 0], [0, 3]], [1, 1]), [[3, 4]])
    W = np.random.default_rng(0).normal(size=(3, 5))
    np.testing.assert_array_equal(linear_forward(np.zeros((2, 3)), W, np.zeros(5)), np.zeros((2, 5)))


def test_linear_shape_errors():
    with pytest.raises(DimensionError):
        linear_forward(np.ones((2, 3)), np.ones((4, 2)), np.zeros(2))
    with pytest.raises(DimensionError):
        linear_forward(np.ones((2, 3)), np.ones((3, 2)), np.zeros(3))
    with pytest.raises(DimensionError):
        linear_backward(np.ones((2, 3)), np.ones((3, 2)), np.ones((2, 3)))


def test_linear_backward_examples():
    dx, dW, db = linear_backward(np.ones((4, 3)), np.ones((3, 2)), np.zeros((4, 2)))
    assert not dx.any() and not dW.any() and not db.any()
    dx, dW, db = linear_backward([[2.0]], [[3.0]], [[1.0]])
    assert dx.tolist() == [[3.0]] and dW.tolist() == [[2.0]] and db.tolist() == [1.0]


def test_linear_backward_matches_finite_differences():
    rng = np.random.default_rng(1)
    x, W, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2)), rng.normal(size=2)
    g = rng.normal(size=(3, 2))  # loss = sum(g * y)

    def f_x(x_):
        return float(np.sum(g * linear_forward(x_, W, b))), linear_backward(x_, W, g)[0]

    def f_W(W_):
        return float(np.sum(g * linear_forward(x, W_, b))), linear_backward(x, W_, g)[1]

    def f_b(b_):
        return float(np.sum(g * linear_forward(x, W, b_))), linear_backward(x, W, g)[2]

    for f, v in ((f_x, x), (f_W, W), (f_b, b)):
        assert grad_check(f, v) < 1e-6


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 4), elements=st.floats(-10, 10)),
       arrays(np.float64, (3, 4), elements=st.floats(-10, 10)))
def test_linear_forward_is_affine(x1, x2):
    rng = np.random.default_rng(0)
    W, b = rng.normal(size=(4, 2)), rng.normal(size=2)
    lhs = linear_forward(x1 + x2, W, b)
    rhs = linear_forward(x1, W, b) + linear_forward(x2, W, b) - b
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12 * max(1.0, np.abs(lhs).max()))


def test_relu_examples():
    np.testing.assert_array_equal(relu([-1.0, 0.0, 2.0]), [0, 0, 2])
    assert relu_backward(np.array([-1.0]), np.array([5.0]))[0] == 0.0
    assert relu_backward(np.array([3.0]), np.array([5.0]))[0] == 5.0


def test_relu_gradient_away_from_zero():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(4, 5))
    x[np.abs(x) < 0.05] = 0.5  # finite differences straddling the kink are meaningless
    g = rng.normal(size=x.shape)
    assert grad_check(lambda v: (float(np.sum(g * relu(v))), relu_backward(v, g)), x) < 1e-6


def test_l2_normalize_examples():
    u, _ = l2_normalize_rows([[3.0, 4.0]])
    np.testing.assert_allclose(u, [[0.6, 0.8]], rtol=0, atol=1e-15)
    unit = np.array([[1.0, 0.0], [0.0, -1.0]])
    np.testing.assert_array_equal(l2_normalize_rows(unit)[0], unit)
    with pytest.raises(DegenerateRowError):
        l2_normalize_rows([[1.0, 1.0], [0.0, 1e-14]])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 3), elements=st.floats(-1e3, 1e3)).filter(
    lambda a: np.all(np.linalg.norm(a, axis=1) > 1e-3)))
def test_l2_normalize_unit_norm(z):
    u, _ = l2_normalize_rows(z)
    assert np.all(np.abs(np.linalg.norm(u, axis=1) - 1.0) < 1e-12)


def test_l2_normalize_backward_matches_finite_differences():
    rng = np.random.default_rng(3)
    z = rng.normal(size=(4, 6))
    g = rng.normal(size=z.shape)

    def f(v):
        u, n = l2_normalize_rows(v)
        return float(np.sum(g * u)), l2_normalize_rows_backward(u, n, g)

    assert grad_check(f, z) < 1e-5


def test_adam_zero_gradient_is_identity():
    p = ParamTensor(np.array([1.0, -2.0]))
    adam_step(p, AdamHyper())
    np.testing.assert_array_equal(p.value, [1.0, -2.0])
    assert not p.adam_m.any() and not p.adam_v.any()
    assert p.step == 1


def test_adam_first_step_has_magnitude_lr():
    p = ParamTensor(np.array([1.0]))
    p.grad[:] = 2.0 * p.value
    adam_step(p, AdamHyper(lr=0.001))
    # m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
    assert p.value[0] == pytest.approx(1.0 - 0.001 * 2.0 / (2.0 + 1e-8), abs=1e-15)
    assert not p.grad.any()


def test_adam_descends_quadratic():
    p = ParamTensor(np.array([1.0]))
    h = AdamHyper(lr=0.01)
    seen = [p.value[0]]
    for _ in range(2):
        p.grad[:] = 2.0 * p.value
        adam_step(p, h)
        seen.append(p.value[0])
    assert seen[0] > seen[1] > seen[2]
    assert p.step == 2


def test_adam_rejects_non_finite_gradient():
    p = ParamTensor(np.array([1.0]))
    p.grad[:] = np.nan
    with pytest.raises(NumericalError):
        adam_step(p, AdamHyper())


@pytest.mark.parametrize("kw", [dict(lr=0), dict(beta1=1.0), dict(beta2=0.0), dict(eps=0)])
def test_adam_hyper_validation(kw):
    with pytest.raises(ValueError):
        AdamHyper(**kw)


def test_param_tensor_shapes_must_agree():
    with pytest.raises(DimensionError):
        ParamTensor(np.zeros(3), grad=np.zeros(2))


def test_grad_check_examples():
    assert grad_check(lambda v: (float(np.sum(v * v)), 2 * v), np.array([1.0, 2.0])) < 1e-7
    assert grad_check(lambda v: (3.0, np.zeros_like(v)), np.array([1.0, 2.0])) == 0.0
    # a wrong gradient is caught
    assert grad_check(lambda v: (float(np.sum(v * v)), v), np.array([1.0, 2.0])) > 0.4


def test_mlp_backward_matches_finite_differences():
    rng = np.random.default_rng(4)
    layers = build_mlp((3, 5, 2), rng)
    x = rng.normal(size=(4, 3))
    g = rng.normal(size=(4, 2))

    def f_x(v):
        out, cache = mlp_forward(layers, v)
        for p in (q for l in layers for q in l.params()):
            p.zero_grad()
        return float(np.sum(g * out)), mlp_backward(layers, cache, g)

    assert grad_check(f_x, x) < 1e-6
    W = layers[0].W

    def f_W(v):
        old = W.value.copy()
        W.value[...] = v
        W.zero_grad()
        out, cache = mlp_forward(layers, x)
        mlp_backward(layers, cache, g)
        grad = W.grad.copy()
        W.value[...] = old
        return float(np.sum(g * out)), grad

    assert grad_check(f_W, W.value.copy()) < 1e-6
