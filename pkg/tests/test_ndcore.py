import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ftcencoder import ndcore as nd
from ftcencoder.ndcore import ContractError, ConvLayer

import gradchecks
from oracles import naive_conv, naive_tconv

finite = st.floats(-1e3, 1e3, allow_nan=False)


def layer(w, b=None, stride=1):
    w = np.asarray(w, dtype=float)
    return ConvLayer(w, np.zeros(w.shape[0]) if b is None else b, stride)


class TestConvForward:
    def test_identity_kernel_same_padding(self):
        out = nd.conv1d_forward(layer([[[0, 1, 0]]]), np.array([[3.0, 5.0, 7.0]]), same=True)
        np.testing.assert_array_equal(out, [[3, 5, 7]])

    def test_valid_sum_kernel(self):
        out = nd.conv1d_forward(layer([[[1, 1]]]), np.array([[1.0, 2.0, 3.0]]))
        np.testing.assert_array_equal(out, [[3, 5]])

    def test_zero_input_gives_bias(self):
        rng = np.random.default_rng(0)
        l = ConvLayer(rng.normal(size=(4, 2, 3)), np.arange(4.0), 2)
        out = nd.conv1d_forward(l, np.zeros((2, 11)))
        assert np.all(out == np.arange(4.0)[:, None])

    @pytest.mark.parametrize("n,k,s", [(10, 3, 1), (11, 7, 2), (8, 1, 3), (7, 7, 1)])
    def test_valid_length_formula(self, n, k, s):
        out = nd.conv1d_forward(layer(np.ones((1, 1, k)), stride=s), np.ones((1, n)))
        assert out.shape[1] == (n - k) // s + 1

    @pytest.mark.parametrize("n,s", [(8, 2), (9, 2), (16, 2), (5, 3)])
    def test_same_length_is_ceil(self, n, s):
        out = nd.conv1d_forward(layer(np.ones((1, 1, 7)), stride=s), np.ones((1, n)), same=True)
        assert out.shape[1] == -(-n // s)

    def test_matches_naive_loops(self):
        rng = np.random.default_rng(3)
        for s in (1, 2, 3):
            w, b, x = rng.normal(size=(3, 2, 4)), rng.normal(size=3), rng.normal(size=(2, 13))
            np.testing.assert_allclose(nd.conv1d_forward(ConvLayer(w, b, s), x), naive_conv(w, b, x, s),
                                       rtol=1e-12, atol=1e-12)

    def test_batched_equals_per_item(self):
        rng = np.random.default_rng(4)
        l = ConvLayer(rng.normal(size=(3, 2, 5)), rng.normal(size=3), 2)
        xb = rng.normal(size=(4, 2, 12))
        out = nd.conv1d_forward(l, xb, same=True)
        for i in range(4):
            np.testing.assert_allclose(out[i], nd.conv1d_forward(l, xb[i], same=True), rtol=1e-13)

    def test_channel_mismatch_named(self):
        with pytest.raises(ContractError, match="channels"):
            nd.conv1d_forward(layer(np.ones((1, 2, 3))), np.ones((3, 10)))

    def test_too_short_named(self):
        with pytest.raises(ContractError, match="length"):
            nd.conv1d_forward(layer(np.ones((1, 1, 7))), np.ones((1, 5)))

    @pytest.mark.parametrize("w,b,s", [(np.ones((1, 1, 0)), np.zeros(1), 1), (np.ones((1, 1, 3)), np.zeros(1), 0),
                                       (np.full((1, 1, 3), np.nan), np.zeros(1), 1)])
    def test_invalid_layer(self, w, b, s):
        with pytest.raises(ContractError):
            ConvLayer(w, b, s)


class TestConvBackward:
    def test_zero_upstream_zero_grads(self):
        rng = np.random.default_rng(1)
        l = ConvLayer(rng.normal(size=(2, 3, 4)), rng.normal(size=2), 2)
        x = rng.normal(size=(3, 10))
        g = nd.conv1d_backward(l, x, np.zeros((2, 4)))
        assert not g.dweights.any() and not g.dbias.any() and not g.dx.any()

    def test_scalar_chain_rule(self):
        g = nd.conv1d_backward(layer([[[2.0]]]), np.array([[3.0]]), np.array([[5.0]]))
        assert g.dweights[0, 0, 0] == 15.0 and g.dbias[0] == 5.0 and g.dx[0, 0] == 10.0

    def test_upstream_shape_checked(self):
        with pytest.raises(ContractError, match="upstream"):
            nd.conv1d_backward(layer(np.ones((1, 1, 3))), np.ones((1, 10)), np.ones((1, 7)))

    def test_two_channel_length_ten_fd(self):
        rng = np.random.default_rng(10)
        l = ConvLayer(rng.normal(size=(2, 2, 3)), rng.normal(size=2), 1)
        x = rng.normal(size=(2, 10))
        up = rng.normal(size=(2, 8))
        g = nd.conv1d_backward(l, x, up)
        h = 1e-5
        for arr, grad in ((l.weights, g.dweights), (x, g.dx)):
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]
                arr[idx] = orig + h
                f1 = np.sum(nd.conv1d_forward(l, x) * up)
                arr[idx] = orig - h
                f2 = np.sum(nd.conv1d_forward(l, x) * up)
                arr[idx] = orig
                num = (f1 - f2) / (2 * h)
                assert abs(num - grad[idx]) <= 1e-6 * max(abs(num), 1e-3)


class TestTransposedConv:
    def test_unit_kernel_identity(self):
        x = np.array([[1.0, -2.0, 3.5]])
        np.testing.assert_array_equal(nd.tconv1d_forward(layer([[[1.0]]]), x), x)

    def test_stride_two_expansion(self):
        out = nd.tconv1d_forward(layer([[[1, 1]]], stride=2), np.array([[1.0, 2.0]]))
        np.testing.assert_array_equal(out, [[1, 1, 2, 2]])

    def test_matches_naive_scatter(self):
        rng = np.random.default_rng(5)
        for s in (1, 2, 3):
            w, b, x = rng.normal(size=(2, 3, 5)), rng.normal(size=2), rng.normal(size=(3, 6))
            np.testing.assert_allclose(nd.tconv1d_forward(ConvLayer(w, b, s), x), naive_tconv(w, b, x, s),
                                       rtol=1e-12, atol=1e-12)

    def test_incompatible_target(self):
        with pytest.raises(ContractError, match="target length"):
            nd.tconv1d_forward(layer(np.ones((1, 1, 7)), stride=2), np.ones((1, 4)), target_length=5)

    @given(st.integers(0, 10_000))
    def test_adjoint_identity(self, seed):
        rng = np.random.default_rng(seed)
        cin, cout = rng.integers(1, 5, size=2)
        k, s, n = int(rng.integers(1, 8)), int(rng.integers(1, 4)), int(rng.integers(1, 12))
        w = rng.normal(size=(cout, cin, k))
        x = rng.normal(size=(cin, n))
        y = rng.normal(size=(cout, nd.tconv_full_length(n, k, s)))
        t = ConvLayer(w, np.zeros(cout), s)
        c = ConvLayer(w.transpose(1, 0, 2), np.zeros(cin), s)
        lhs = np.sum(nd.tconv1d_forward(t, x) * y)
        rhs = np.sum(x * nd.conv1d_forward(c, y))
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs), 1.0)

    @given(st.integers(0, 10_000))
    def test_cropped_tconv_is_adjoint_of_same_conv(self, seed):
        rng = np.random.default_rng(seed)
        k, s, n = 7, 2, int(rng.integers(7, 40))
        w = rng.normal(size=(3, 2, k))
        conv = ConvLayer(w, np.zeros(3), s)
        tconv = ConvLayer(w.transpose(1, 0, 2), np.zeros(2), s)
        x = rng.normal(size=(2, n))
        y = rng.normal(size=(3, -(-n // s)))
        lhs = np.sum(nd.conv1d_forward(conv, x, same=True) * y)
        rhs = np.sum(x * nd.tconv1d_forward(tconv, y, target_length=n))
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs), 1.0)


class TestActivations:
    def test_relu(self):
        np.testing.assert_array_equal(nd.relu(np.array([-1.0, 0.0, 2.0])), [0, 0, 2])

    @given(arrays(np.float64, st.integers(1, 50), elements=finite))
    def test_relu_idempotent(self, x):
        np.testing.assert_array_equal(nd.relu(nd.relu(x)), nd.relu(x))

    def test_dropout_rate_zero_identity(self):
        x = np.arange(6.0).reshape(2, 3)
        out, kept = nd.dropout(x, 0.0, np.random.default_rng(0))
        np.testing.assert_array_equal(out, x)
        assert kept.all()

    def test_dropout_inference_identity(self):
        x = np.arange(6.0)
        np.testing.assert_array_equal(nd.dropout(x, 0.5, train=False)[0], x)

    def test_dropout_kept_fraction(self):
        out, kept = nd.dropout(np.ones(10**6), 0.1, np.random.default_rng(2024))
        assert abs(kept.mean() - 0.9) <= 0.002
        # survivors are rescaled so the expectation is unchanged
        assert np.allclose(out[kept], 1 / 0.9)
        again = nd.dropout(np.ones(10**6), 0.1, np.random.default_rng(2024))[1]
        np.testing.assert_array_equal(kept, again)

    @pytest.mark.parametrize("rate", [-0.1, 1.0, 1.5])
    def test_dropout_rate_bounds(self, rate):
        with pytest.raises(ContractError):
            nd.dropout(np.ones(3), rate, np.random.default_rng(0))


class TestMaskedMse:
    def test_equal_is_zero(self):
        x = np.arange(8.0).reshape(2, 4)
        assert nd.masked_mse(x, x, np.ones(4)) == 0.0

    def test_single_channel(self):
        assert nd.masked_mse(np.array([[1.0, 0.0]]), np.zeros((1, 2)), np.ones(2)) == 0.5

    def test_masked_position_excluded(self):
        assert nd.masked_mse(np.array([[1.0, 5.0]]), np.array([[0.0, 5.0]]), np.array([1, 0])) == 1.0

    def test_padding_contributes_nothing(self):
        x = np.array([[1.0, 5.0]])
        assert nd.masked_mse(x, np.array([[0.0, -100.0]]), np.array([1, 0])) == 1.0

    def test_empty_mask(self):
        with pytest.raises(ContractError, match="valid"):
            nd.masked_mse(np.ones((1, 3)), np.ones((1, 3)), np.zeros(3))

    # integer-valued so squared differences cannot underflow to zero
    @given(arrays(np.float64, (2, 9), elements=st.integers(-1000, 1000).map(float)),
           arrays(np.float64, (2, 9), elements=st.integers(-1000, 1000).map(float)), arrays(bool, 9))
    def test_nonnegative_and_zero_iff_equal(self, x, xhat, mask):
        mask[0] = True
        loss = nd.masked_mse(x, xhat, mask)
        assert loss >= 0
        assert (loss == 0) == bool(np.all(x[:, mask] == xhat[:, mask]))


@pytest.mark.parametrize("name", sorted(gradchecks.LAYER_CASES))
def test_layer_gradients_many_seeds(name):
    worst = max(gradchecks.LAYER_CASES[name](seed) for seed in range(100))
    assert worst < 1e-4
