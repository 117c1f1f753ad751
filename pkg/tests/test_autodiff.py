import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ccpda import autodiff as ad
from ccpda.autodiff import DimensionError, Tensor
from conftest import central_difference, max_relative_error


def grad_of(fn, *arrays):
    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    ad.backward(fn(*leaves))
    return [leaf.grad for leaf in leaves]


def numeric_grad(fn, *arrays):
    arrays = [np.array(a, dtype=float) for a in arrays]
    return central_difference(lambda: float(fn(*[Tensor(a) for a in arrays]).data), arrays)


# ---------------------------------------------------------------- matmul

def test_matmul_identity():
    out = ad.matmul(Tensor([[1, 0], [0, 1]]), Tensor([[3], [4]]))
    np.testing.assert_array_equal(out.data, [[3], [4]])


def test_matmul_zero_annihilates():
    out = ad.matmul(Tensor(np.zeros((2, 2))), Tensor(np.random.default_rng(0).normal(size=(2, 5))))
    np.testing.assert_array_equal(out.data, np.zeros((2, 5)))


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(3, 4\).*\(3, 2\)"):
        ad.matmul(Tensor(np.ones((3, 4))), Tensor(np.ones((3, 2))))


@pytest.mark.parametrize("seed", range(20))
def test_matmul_gradient(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
    fn = lambda x, y: ad.sum(ad.matmul(x, y))  # noqa: E731
    for g, n in zip(grad_of(fn, a, b), numeric_grad(fn, a, b)):
        assert max_relative_error(g, n) <= 1e-6


# ---------------------------------------------------------------- relu

def test_relu_values():
    np.testing.assert_array_equal(ad.relu(Tensor([-1.0, 0.0, 2.0])).data, [0, 0, 2])


def test_relu_all_negative():
    (g,) = grad_of(lambda x: ad.sum(ad.relu(x)), -np.arange(1.0, 6.0))
    np.testing.assert_array_equal(g, np.zeros(5))


def test_relu_subgradient_at_zero_is_zero():
    (g,) = grad_of(lambda x: ad.sum(ad.relu(x)), np.array([0.0, 1.0]))
    np.testing.assert_array_equal(g, [0.0, 1.0])


@pytest.mark.parametrize("seed", range(20))
def test_relu_gradient(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(5, 4))
    w = rng.normal(size=(5, 4))
    fn = lambda t: ad.sum(ad.relu(t) * w)  # noqa: E731
    (g,) = grad_of(fn, x)
    (n,) = numeric_grad(fn, x)
    keep = np.abs(x) > 1e-4
    assert max_relative_error(g[keep], n[keep]) <= 1e-6


# ---------------------------------------------------------------- log_softmax

def test_log_softmax_symmetric_row():
    np.testing.assert_allclose(ad.log_softmax(Tensor([[0.0, 0.0]])).data, [[np.log(0.5)] * 2], rtol=0, atol=1e-15)


def test_log_softmax_is_stable_for_large_logits():
    out = ad.log_softmax(Tensor([[1000.0, 0.0]])).data
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, [[0.0, -1000.0]], atol=1e-12)


@given(arrays(np.float64, (4, 6), elements=st.floats(-50, 50)))
@settings(max_examples=50, deadline=None)
def test_softmax_rows_are_distributions(x):
    p = ad.softmax(Tensor(x)).data
    assert np.all(np.isfinite(p)) and np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_log_softmax_gradient(seed):
    rng = np.random.default_rng(seed)
    x, w = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
    fn = lambda t: ad.sum(ad.log_softmax(t) * w)  # noqa: E731
    (g,) = grad_of(fn, x)
    (n,) = numeric_grad(fn, x)
    assert max_relative_error(g, n) <= 1e-6


# ---------------------------------------------------------------- grad_reverse

def test_grad_reverse_forward_is_exact_identity():
    x = Tensor(np.random.default_rng(3).normal(size=(4, 3)), requires_grad=True)
    out = ad.grad_reverse(x, 0.7)
    assert out.data.tobytes() == x.data.tobytes()


def test_grad_reverse_zero_coeff_blocks_gradient():
    (g,) = grad_of(lambda x: ad.sum(ad.grad_reverse(x, 0.0)), np.ones((2, 3)))
    np.testing.assert_array_equal(g, np.zeros((2, 3)))


def test_grad_reverse_flips_sign():
    (g,) = grad_of(lambda x: ad.sum(ad.grad_reverse(x, 1.0)), np.ones((2, 3)))
    np.testing.assert_array_equal(g, -np.ones((2, 3)))


def test_grad_reverse_rejects_negative_coeff():
    with pytest.raises(ValueError):
        ad.grad_reverse(Tensor([1.0]), -1.0)


def test_grad_reverse_scales_two_layer_net():
    rng = np.random.default_rng(11)
    x = rng.normal(size=(5, 3))
    w1, w2 = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))

    def run(reverse):
        p1, p2 = Tensor(w1, requires_grad=True), Tensor(w2, requires_grad=True)
        h = ad.relu(ad.matmul(Tensor(x), p1))
        if reverse:
            h = ad.grad_reverse(h, 0.5)
        ad.backward(ad.sum(ad.log_softmax(ad.matmul(h, p2))))
        return p1.grad, p2.grad

    plain1, plain2 = run(False)
    rev1, rev2 = run(True)
    np.testing.assert_allclose(rev1, -0.5 * plain1, rtol=1e-14, atol=1e-15)
    np.testing.assert_array_equal(rev2, plain2)


# ---------------------------------------------------------------- backward

def test_backward_constant_loss_writes_nothing():
    x = Tensor([1.0, 2.0])
    loss = ad.sum(x * 3.0)
    ad.backward(loss)
    assert x.grad is None


def test_backward_sum_gives_ones():
    (g,) = grad_of(lambda x: ad.sum(x), np.zeros((3, 2)))
    np.testing.assert_array_equal(g, np.ones((3, 2)))


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        ad.backward(x * 2.0)


def test_backward_accumulates_across_calls():
    x = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    ad.backward(ad.sum(x * x))
    ad.backward(ad.sum(x * x))
    np.testing.assert_array_equal(x.grad, 4 * x.data)
    ad.zero_grad([x])
    assert x.grad is None


def test_shared_subexpression_visited_once():
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = x * x
    z = y + y  # diamond: both paths must be summed exactly once each
    order = ad.topological_order(ad.sum(z))
    assert len(order) == len({id(n) for n in order})
    ad.backward(ad.sum(z))
    np.testing.assert_array_equal(x.grad, [8.0])


def test_topological_order_parents_first():
    a = Tensor(np.ones(2), requires_grad=True)
    b = ad.relu(a)
    c = ad.mul(b, a)
    loss = ad.sum(c)
    order = ad.topological_order(loss)
    pos = {id(n): i for i, n in enumerate(order)}
    for node in order:
        for parent in node._parents:
            assert pos[id(parent)] < pos[id(node)]


@pytest.mark.parametrize("seed", range(20))
def test_composite_primitives_gradient(seed):
    rng = np.random.default_rng(100 + seed)
    x, w = rng.normal(size=(6, 3)), rng.normal(size=(3, 5))
    cols = rng.integers(0, 5, size=6)

    def fn(xt, wt):
        p = ad.softmax(ad.matmul(xt, wt))
        return ad.sum(ad.max(p, axis=0)) + ad.mean(ad.log(ad.pick(p, cols))) + ad.sum(p * ad.log(p))

    for g, n in zip(grad_of(fn, x, w), numeric_grad(fn, x, w)):
        assert max_relative_error(g, n) <= 1e-4


def test_log_clamps_zero():
    x = Tensor(np.array([0.0, 1.0]), requires_grad=True)
    out = ad.log(x)
    assert np.isfinite(out.data).all()
    ad.backward(ad.sum(out))
    np.testing.assert_array_equal(x.grad, [0.0, 1.0])


def test_determinism_bit_identical():
    def run():
        rng = np.random.default_rng(5)
        x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 3)), requires_grad=True)
        loss = ad.sum(ad.log_softmax(ad.relu(ad.matmul(x, w))))
        ad.backward(loss)
        return loss.data.tobytes(), x.grad.tobytes(), w.grad.tobytes()

    assert run() == run()
