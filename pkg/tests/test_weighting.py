import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ccpda.autodiff import Tensor
from ccpda.errors import ContractError, EmptyInputError
from ccpda.weighting import CentroidBank, ClassWeights, compute_class_weights, pseudo_label, update_centroids


def random_probs(rng, n, k, temperature=1.0):
    z = rng.normal(size=(n, k)) / temperature
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------- class weights

def test_one_hot_class_zero():
    probs = np.zeros((5, 4))
    probs[:, 0] = 1
    np.testing.assert_array_equal(compute_class_weights(probs).gamma, [1, 0, 0, 0])


def test_uniform_rows_give_all_ones():
    np.testing.assert_array_equal(compute_class_weights(np.full((7, 3), 1 / 3)).gamma, [1, 1, 1])


def test_hand_example():
    gamma = compute_class_weights(np.array([[0.6, 0.4], [0.2, 0.8]])).gamma
    np.testing.assert_allclose(gamma, [0.4 / 0.6, 1.0], rtol=0, atol=1e-9)


def test_empty_target_rejected():
    with pytest.raises(EmptyInputError):
        compute_class_weights(np.zeros((0, 3)))


def test_accepts_tensor():
    probs = Tensor([[0.25, 0.75]])
    np.testing.assert_array_equal(compute_class_weights(probs).gamma, [1 / 3, 1.0])


@pytest.mark.parametrize("seed", range(100))
def test_max_is_one_and_ranking_matches_column_means(seed):
    rng = np.random.default_rng(seed)
    probs = random_probs(rng, rng.integers(1, 40), rng.integers(2, 10), temperature=rng.uniform(0.2, 2))
    gamma = compute_class_weights(probs).gamma
    assert gamma.max() == 1.0
    assert np.all((gamma >= 0) & (gamma <= 1))
    means = probs.mean(axis=0)
    np.testing.assert_array_equal(np.argsort(-gamma, kind="stable"), np.argsort(-means, kind="stable"))


@given(st.integers(0, 10_000), st.floats(1e-4, 0.05), st.floats(0.2, 0.9))
@settings(max_examples=60, deadline=None)
def test_separability_bound(seed, eps, m):
    # class 0 never gets more than eps; class 1 gets at least m in every row
    rng = np.random.default_rng(seed)
    n, k = 30, 5
    probs = np.zeros((n, k))
    probs[:, 0] = rng.uniform(0, eps, size=n)
    probs[:, 1] = m + (1 - m - probs[:, 0]) * rng.uniform(0, 1, size=n)
    rest = rng.dirichlet(np.ones(k - 2), size=n)
    probs[:, 2:] = rest * (1 - probs[:, 0] - probs[:, 1])[:, None]
    gamma = compute_class_weights(probs).gamma
    assert gamma[0] / gamma[1] <= eps / m


def test_split_means():
    g = ClassWeights(np.array([1.0, 0.5, 0.2, 0.0]))
    assert g.split_means([0, 1]) == (0.75, 0.1)


# ---------------------------------------------------------------- pseudo labels

def test_pseudo_label_argmax():
    assert pseudo_label(np.array([[0.1, 0.7, 0.2]])).tolist() == [1]


def test_pseudo_label_tie_goes_to_lowest_index():
    assert pseudo_label(np.array([[0.5, 0.5]])).tolist() == [0]
    assert pseudo_label(np.array([[0.3, 0.35, 0.35]])).tolist() == [1]


def test_pseudo_label_matches_scalar_loop():
    probs = random_probs(np.random.default_rng(0), 100, 6)
    expected = []
    for row in probs:
        best = 0
        for c in range(1, len(row)):
            if row[c] > row[best]:
                best = c
        expected.append(best)
    assert pseudo_label(probs).tolist() == expected


@given(arrays(np.int64, (6, 4), elements=st.integers(-40, 40)), st.sampled_from(["exp", "cube", "affine"]))
@settings(max_examples=60, deadline=None)
def test_pseudo_label_invariant_to_increasing_maps(grid, kind):
    # grid spacing keeps every map strictly increasing in float64 as well
    x = grid / 8.0
    transform = {"exp": np.exp, "cube": lambda v: v ** 3 + v, "affine": lambda v: 3 * v - 7}[kind]
    assert pseudo_label(x).tolist() == pseudo_label(transform(x)).tolist()


# ---------------------------------------------------------------- centroids

def test_first_update_equals_batch_mean():
    bank = CentroidBank(3, 2)
    feats = np.array([[1.0, 2.0], [3.0, 4.0], [10.0, 0.0]])
    update_centroids(bank, Tensor(feats), [0, 0, 2], "source")
    np.testing.assert_array_equal(bank.source[0], [2.0, 3.0])
    np.testing.assert_array_equal(bank.source[2], [10.0, 0.0])
    assert bank.source_ready.tolist() == [True, False, True]
    assert not bank.target_ready.any()


def test_absent_class_unchanged():
    bank = CentroidBank(2, 2)
    bank.update(Tensor([[1.0, 1.0], [5.0, 5.0]]), [0, 1], "target")
    before = bank.target[1].copy()
    bank.update(Tensor([[0.0, 0.0]]), [0], "target")
    np.testing.assert_array_equal(bank.target[1], before)


def test_two_updates_hand_oracle():
    bank = CentroidBank(1, 3, ema_coeff=0.7)
    mu1, mu2 = np.array([1.0, -2.0, 4.0]), np.array([0.5, 3.0, -1.0])
    bank.update(Tensor([mu1 - 1, mu1 + 1]), [0, 0], "source")
    bank.update(Tensor([mu2]), [0], "source")
    np.testing.assert_allclose(bank.source[0], 0.7 * mu1 + 0.3 * mu2, rtol=0, atol=1e-9)


def test_geometric_convergence():
    bank = CentroidBank(1, 2, ema_coeff=0.7)
    bank.update(Tensor([[10.0, -10.0]]), [0], "source")
    mu = np.array([1.0, 2.0])
    prev = np.linalg.norm(bank.source[0] - mu)
    for _ in range(30):
        bank.update(Tensor([mu]), [0], "source")
        err = np.linalg.norm(bank.source[0] - mu)
        assert err == pytest.approx(0.7 * prev, rel=1e-9, abs=1e-300)
        prev = err


def test_out_of_range_label_rejected():
    bank = CentroidBank(2, 2)
    with pytest.raises(ContractError):
        bank.update(Tensor([[1.0, 1.0]]), [2], "source")
    with pytest.raises(ContractError):
        bank.update(Tensor([[1.0, 1.0]]), [0, 1], "source")


def test_unready_centroid_not_readable():
    bank = CentroidBank(2, 2)
    with pytest.raises(ContractError):
        bank.centroid("source", 0)


def test_live_rows_carry_gradient_history_does_not():
    from ccpda import autodiff as ad
    bank = CentroidBank(1, 2, ema_coeff=0.7)
    bank.update(Tensor([[1.0, 1.0]]), [0], "source")
    bank.release()
    x = Tensor([[3.0, 5.0], [1.0, 1.0]], requires_grad=True)
    bank.update(x, [0, 0], "source")
    ad.backward(ad.sum(bank.centroid("source", 0)))
    np.testing.assert_allclose(x.grad, np.full((2, 2), 0.3 / 2))
    bank.release()
    assert not bank.centroid("source", 0).requires_grad
