import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from lungline import tensor as T
from lungline.errors import ShapeError
from oracles import (
    ce_loss_oracle,
    central_diff,
    correlate2d_single,
    direct_conv2d,
    matmul_oracle,
    max_rel_err,
    random_conv_case,
)

finite_f32 = st.floats(-50, 50, allow_nan=False, width=32)


class TestConv2d:
    def test_scalar_kernel_doubles(self):
        x = np.arange(1, 10, dtype=np.float32).reshape(1, 1, 3, 3)
        w = np.full((1, 1, 1, 1), 2.0, dtype=np.float32)
        y = T.conv2d(x, w)
        assert y.ravel().tolist() == [2, 4, 6, 8, 10, 12, 14, 16, 18]

    def test_overlap_counting(self):
        y = T.conv2d(np.ones((1, 1, 3, 3)), np.ones((1, 1, 3, 3)), padding=1)
        assert y[0, 0].tolist() == [[4, 6, 4], [6, 9, 6], [4, 6, 4]]

    def test_depthwise_stride2_matches_oracle(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((2, 4, 8, 8)).astype(np.float32)
        w = rng.standard_normal((4, 1, 3, 3)).astype(np.float32)
        y = T.conv2d(x, w, stride=2, padding=1, groups=4)
        assert y.shape == (2, 4, 4, 4)
        assert max_rel_err(y, direct_conv2d(x, w, None, 2, 1, 4)) <= 1e-6

    @pytest.mark.parametrize("mode", ["dense", "depthwise"])
    def test_random_instances(self, mode):
        rng = np.random.default_rng(11 if mode == "dense" else 12)
        for _ in range(40):
            x, w, b, s, p, g = random_conv_case(rng, mode)
            y = T.conv2d(x, w, b, s, p, g)
            assert max_rel_err(y, direct_conv2d(x, w, b, s, p, g)) <= 1e-6

    def test_grouped_not_depthwise(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((1, 6, 5, 5)).astype(np.float32)
        w = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
        y = T.conv2d(x, w, padding=1, groups=2)
        assert max_rel_err(y, direct_conv2d(x, w, None, 1, 1, 2)) <= 1e-6

    def test_depthwise_is_per_channel_correlation(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((1, 3, 7, 6)).astype(np.float32)
        w = rng.standard_normal((3, 1, 3, 3)).astype(np.float32)
        y = T.conv2d(x, w, stride=2, padding=1, groups=3)
        for c in range(3):
            ref = correlate2d_single(x[0, c], w[c, 0], 2, 1)
            assert max_rel_err(y[0, c], ref) <= 1e-6

    def test_output_extent_formula(self):
        y = T.conv2d(np.zeros((1, 2, 7, 5)), np.zeros((3, 2, 3, 2)), stride=2, padding=1)
        assert y.shape == (1, 3, (7 + 2 - 3) // 2 + 1, (5 + 2 - 2) // 2 + 1)

    @pytest.mark.parametrize(
        "xshape, wshape, groups, axis",
        [
            ((1, 3, 4, 4), (2, 1, 3, 3), 2, "channel"),
            ((1, 4, 4, 4), (3, 2, 3, 3), 2, "output-channel"),
            ((1, 4, 4, 4), (4, 3, 3, 3), 1, "input-channel"),
            ((1, 1, 2, 8), (1, 1, 3, 3), 1, "height"),
            ((1, 1, 8, 2), (1, 1, 3, 3), 1, "width"),
        ],
    )
    def test_shape_errors_name_axis(self, xshape, wshape, groups, axis):
        with pytest.raises(ShapeError, match=axis):
            T.conv2d(np.zeros(xshape), np.zeros(wshape), groups=groups)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2, 8, 9, 9)).astype(np.float32)
        w = rng.standard_normal((16, 8, 3, 3)).astype(np.float32)
        a = T.conv2d(x, w, stride=2, padding=1)
        b = T.conv2d(x.copy(), w.copy(), stride=2, padding=1)
        assert a.tobytes() == b.tobytes()


class TestBatchNorm:
    def test_identity(self):
        x = np.random.default_rng(0).standard_normal((2, 3, 4, 4)).astype(np.float32)
        y = T.batchnorm_infer(x, np.ones(3), np.zeros(3), np.zeros(3), np.ones(3), eps=0.0)
        assert np.array_equal(x, y)

    def test_hand_value(self):
        y = T.batchnorm_infer(np.full((1, 1, 1, 1), 3.0), [2.0], [1.0], [1.0], [4.0], eps=0.0)
        assert y.item() == 3.0

    def test_random_vs_scalar_loop(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((2, 5, 3, 4)).astype(np.float32)
        gamma, beta, mean = (rng.standard_normal(5).astype(np.float32) for _ in range(3))
        var = rng.uniform(0.1, 3, 5).astype(np.float32)
        y = T.batchnorm_infer(x, gamma, beta, mean, var)
        ref = np.empty(x.shape)
        for idx in np.ndindex(x.shape):
            c = idx[1]
            ref[idx] = float(gamma[c]) * (float(x[idx]) - float(mean[c])) / math.sqrt(float(var[c]) + 1e-5) + float(beta[c])
        assert max_rel_err(y, ref) <= 1e-6

    def test_length_mismatch(self):
        with pytest.raises(ShapeError, match="gamma"):
            T.batchnorm_infer(np.zeros((1, 3, 2, 2)), np.ones(2), np.zeros(3), np.zeros(3), np.ones(3))


class TestElementwise:
    @pytest.mark.parametrize("v, expected", [(-1.0, 0.0), (3.0, 3.0), (7.0, 6.0)])
    def test_relu6_values(self, v, expected):
        assert T.relu6(np.array([v])).item() == expected

    @given(arrays(np.float32, st.integers(1, 50), elements=finite_f32))
    def test_relu6_range_and_idempotent(self, x):
        y = T.relu6(x)
        assert y.min() >= 0 and y.max() <= 6
        assert np.array_equal(T.relu6(y), y)

    def test_global_avg_pool(self):
        assert T.global_avg_pool(np.full((1, 2, 3, 3), 4.5)).tolist() == [[4.5, 4.5]]
        assert T.global_avg_pool(np.array([[[[1, 2], [3, 4]]]])).item() == 2.5
        x = np.random.default_rng(3).standard_normal((2, 3, 5, 7)).astype(np.float32)
        ref = [[sum(float(v) for v in x[n, c].ravel()) / 35 for c in range(3)] for n in range(2)]
        assert max_rel_err(T.global_avg_pool(x), ref) <= 1e-6


class TestLinear:
    def test_identity_and_bias(self):
        x = np.random.default_rng(0).standard_normal((3, 4)).astype(np.float32)
        assert np.array_equal(T.linear(x, np.eye(4), np.zeros(4)), x)
        b0 = np.array([1.0, -2.0, 0.5], dtype=np.float32)
        assert np.array_equal(T.linear(x, np.zeros((3, 4)), b0), np.tile(b0, (3, 1)))

    def test_random_vs_triple_loop(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((5, 17)).astype(np.float32)
        w = rng.standard_normal((3, 17)).astype(np.float32)
        b = rng.standard_normal(3).astype(np.float32)
        assert max_rel_err(T.linear(x, w, b), matmul_oracle(x, w, b)) <= 1e-6

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            T.linear(np.zeros((2, 3)), np.zeros((4, 5)), np.zeros(4))


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(T.softmax(np.zeros((1, 3))), [[1 / 3] * 3], atol=1e-7)

    def test_log_inputs(self):
        z = np.log(np.array([[1.0, 2.0, 3.0]]))
        np.testing.assert_allclose(T.softmax(z), [[1 / 6, 2 / 6, 3 / 6]], atol=1e-7)

    # logits and shifts on a 1/64 grid, so z + c is exact in float32
    @given(
        arrays(np.int32, (4, 5), elements=st.integers(-3200, 3200)),
        st.integers(-6400, 6400),
    )
    def test_shift_invariance(self, zi, ci):
        z = zi.astype(np.float32) / 64
        shifted = (zi + ci).astype(np.float32) / 64
        assert np.max(np.abs(T.softmax(shifted) - T.softmax(z))) <= 1e-6

    @given(arrays(np.float32, (3, 6), elements=finite_f32))
    def test_rows_sum_to_one(self, z):
        p = T.softmax(z)
        assert np.all(np.abs(p.sum(axis=1) - 1) <= 1e-6)
        assert np.all(p > 0) and np.all(p <= 1)


class TestCrossEntropy:
    def test_peaked_logits_zero_loss(self):
        loss, _ = T.cross_entropy(np.array([[60.0, 0.0, 0.0]]), [0])
        assert loss < 1e-12

    def test_uniform_is_log3(self):
        loss, _ = T.cross_entropy(np.zeros((2, 3)), [0, 2])
        assert loss == pytest.approx(math.log(3), abs=1e-6)
        assert loss == pytest.approx(1.098612, abs=1e-6)

    def test_gradient_vs_finite_differences(self):
        rng = np.random.default_rng(9)
        z = rng.standard_normal((2, 3)).astype(np.float32)
        labels = [2, 0]
        _, grad = T.cross_entropy(z, labels)
        fd = central_diff(lambda v: ce_loss_oracle(v, labels), z, h=1e-3)
        assert max_rel_err(grad, fd) <= 1e-4

    def test_label_out_of_range(self):
        with pytest.raises(IndexError):
            T.cross_entropy(np.zeros((1, 3)), [3])

    @given(arrays(np.float32, (4, 3), elements=finite_f32), st.lists(st.integers(0, 2), min_size=4, max_size=4))
    def test_nonnegative_loss_and_zero_row_sums(self, z, labels):
        loss, grad = T.cross_entropy(z, labels)
        assert loss >= 0
        assert np.all(np.abs(grad.sum(axis=1)) <= 1e-6)


def test_as_tensor_validates():
    assert T.as_tensor([1, 2, 3, 4], (2, 2)).dtype == np.float32
    with pytest.raises(ShapeError):
        T.as_tensor(np.zeros((1, 1, 1, 1, 1)))
    with pytest.raises(ShapeError):
        T.as_tensor([1, 2, 3], (2, 2))
