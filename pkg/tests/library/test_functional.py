import numpy as np

from nona_jdd._exceptions import BatchNormStateError, ShapeMismatchError
from nona_jdd._functional import (
    BatchNormStats,
    batch_norm,
    channel_avg,
    channel_max,
    conv2d,
    global_avg,
    leaky_relu,
    linear,
    pixel_shuffle,
    sigmoid,
    swish,
)
from nona_jdd._gradcheck import gradcheck
from nona_jdd._tensor import Tensor
from tests import NonaJddTest


def conv_oracle(x, w, b, stride=1):
    """Straight loops over a zero-padded input ("same" padding, odd kernels)."""
    c_out, _, kh, kw = w.shape
    _, height, width = x.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    out_h, out_w = -(-height // stride), -(-width // stride)
    out = np.zeros((c_out, out_h, out_w))
    for o in range(c_out):
        for y in range(out_h):
            for x_ in range(out_w):
                window = padded[
                    :, y * stride : y * stride + kh, x_ * stride : x_ * stride + kw
                ]
                out[o, y, x_] = np.sum(window * w[o]) + b[o]
    return out


class TestConv2d(NonaJddTest):
    def setUp(self):
        super().setUp()
        rng = self.rng(10)
        self.x = rng.normal(size=(3, 7, 7))
        self.w = rng.normal(size=(4, 3, 3, 3))
        self.b = rng.normal(size=4)

    def test_matches_loop_oracle(self):
        out = conv2d(Tensor(self.x), Tensor(self.w), Tensor(self.b))
        np.testing.assert_allclose(
            out.data, conv_oracle(self.x, self.w, self.b), atol=1e-10
        )

    def test_asymmetric_kernel_matches_loop_oracle(self):
        w = self.rng(11).normal(size=(2, 3, 5, 1))
        b = np.zeros(2)
        out = conv2d(Tensor(self.x), Tensor(w))
        np.testing.assert_allclose(out.data, conv_oracle(self.x, w, b), atol=1e-10)

    def test_strided_output_shape(self):
        out = conv2d(
            Tensor(self.x[:, :6, :6]), Tensor(self.w), Tensor(self.b), stride=2
        )
        self.assertEqual(out.shape, (4, 3, 3))

    def test_identity_kernel_is_identity(self):
        w = np.zeros((3, 3, 3, 3))
        for c in range(3):
            w[c, c, 1, 1] = 1.0
        out = conv2d(Tensor(self.x), Tensor(w))
        np.testing.assert_array_equal(out.data, self.x)

    def test_linear_in_input(self):
        y = self.rng(12).normal(size=self.x.shape)
        w = Tensor(self.w)
        combined = conv2d(Tensor(2.0 * self.x - 3.0 * y), w).data
        first, second = conv2d(Tensor(self.x), w).data, conv2d(Tensor(y), w).data
        separate = 2.0 * first - 3.0 * second
        np.testing.assert_allclose(combined, separate, atol=1e-5)

    def test_batched_and_unbatched_agree(self):
        single = conv2d(Tensor(self.x), Tensor(self.w), Tensor(self.b)).data
        batched = conv2d(Tensor(self.x[None]), Tensor(self.w), Tensor(self.b)).data
        np.testing.assert_array_equal(batched[0], single)

    def test_channel_mismatch(self):
        with self.assertRaises(ShapeMismatchError):
            conv2d(Tensor(self.x[:2]), Tensor(self.w))

    def test_gradients(self):
        leaf = lambda a: Tensor(a, requires_grad=True)  # noqa: E731
        result = gradcheck(
            lambda x, w, b: conv2d(x, w, b, stride=2),
            [leaf(self.x), leaf(self.w), leaf(self.b)],
            samples=20,
        )
        self.assertTrue(result.passed, str(result))


class TestPooling(NonaJddTest):
    def test_channel_pools(self):
        x = np.array([[[1.0, -2.0]], [[3.0, 0.0]], [[-1.0, 4.0]]])
        np.testing.assert_allclose(channel_avg(Tensor(x)).data, [[[1.0, 2.0 / 3.0]]])
        np.testing.assert_array_equal(channel_max(Tensor(x)).data, [[[3.0, 4.0]]])

    def test_global_average(self):
        x = np.arange(2 * 2 * 3, dtype=np.float64).reshape(2, 2, 3)
        np.testing.assert_allclose(global_avg(Tensor(x)).data, [2.5, 8.5])

    def test_rejects_wrong_rank(self):
        with self.assertRaises(ShapeMismatchError):
            channel_avg(Tensor(np.ones((2, 2))))


class TestPixelShuffle(NonaJddTest):
    def test_index_formula(self):
        r, c, height, width = 2, 2, 3, 4
        x = self.rng(20).normal(size=(c * r * r, height, width))
        out = pixel_shuffle(Tensor(x), r).data
        self.assertEqual(out.shape, (c, height * r, width * r))
        for ch in range(c):
            for dy in range(r):
                for dx in range(r):
                    np.testing.assert_array_equal(
                        out[ch, dy::r, dx::r], x[ch * r * r + dy * r + dx]
                    )

    def test_preserves_values(self):
        x = self.rng(21).normal(size=(1, 9, 2, 2))
        out = pixel_shuffle(Tensor(x), 3).data
        np.testing.assert_array_equal(np.sort(out.ravel()), np.sort(x.ravel()))

    def test_channels_must_divide(self):
        with self.assertRaises(ShapeMismatchError):
            pixel_shuffle(Tensor(np.ones((6, 2, 2))), 2)

    def test_gradients(self):
        x = Tensor(self.rng(22).normal(size=(8, 2, 3)), requires_grad=True)
        result = gradcheck(lambda x: pixel_shuffle(x, 2), [x], samples=None)
        self.assertTrue(result.passed, str(result))


class TestActivations(NonaJddTest):
    def test_sigmoid_is_stable_for_large_inputs(self):
        out = sigmoid(Tensor(np.array([-1000.0, 0.0, 1000.0]))).data
        np.testing.assert_allclose(out, [0.0, 0.5, 1.0])

    def test_leaky_relu_slope(self):
        out = leaky_relu(Tensor(np.array([-2.0, 0.0, 3.0]))).data
        np.testing.assert_allclose(out, [-0.4, 0.0, 3.0])

    def test_swish_values(self):
        x = np.array([-2.0, 0.0, 1.5])
        np.testing.assert_allclose(swish(Tensor(x)).data, x / (1 + np.exp(-x)))

    def test_swish_gradient_matches_finite_differences(self):
        x = Tensor(np.array([-3.0, -0.5, 0.0, 0.7, 2.5]), requires_grad=True)
        result = gradcheck(swish, [x], samples=None)
        self.assertLess(result.max_rel_error, 1e-5)

    def test_leaky_relu_gradient_away_from_kink(self):
        x = Tensor(np.array([-1.0, -0.25, 0.5, 2.0]), requires_grad=True)
        result = gradcheck(leaky_relu, [x], samples=None)
        self.assertTrue(result.passed, str(result))
        self.assertEqual(result.skipped, 0)


class TestLinear(NonaJddTest):
    def test_affine_map(self):
        w = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]])
        b = np.array([0.5, 0.0, -1.0])
        out = linear(Tensor(np.array([1.0, 1.0])), Tensor(w), Tensor(b))
        np.testing.assert_allclose(out.data, [3.5, -1.0, 2.5])

    def test_weight_gradient(self):
        rng = self.rng(30)
        x = Tensor(rng.normal(size=(2, 4)))
        w = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=3), requires_grad=True)
        result = gradcheck(linear, [x, w, b], samples=None)
        self.assertTrue(result.passed, str(result))

    def test_dimension_mismatch(self):
        with self.assertRaises(ShapeMismatchError):
            linear(Tensor(np.ones(3)), Tensor(np.ones((2, 4))), Tensor(np.ones(2)))


class TestBatchNorm(NonaJddTest):
    def params(self, channels):
        return Tensor(np.ones(channels)), Tensor(np.zeros(channels))

    def test_symmetric_batch_normalises_to_unit_values(self):
        x = np.stack([-np.ones((2, 1, 1)), np.ones((2, 1, 1))])
        gamma, beta = self.params(2)
        out = batch_norm(Tensor(x), gamma, beta, BatchNormStats("bn"), eps=1e-5).data
        expected = 1.0 / np.sqrt(1.0 + 1e-5)
        np.testing.assert_allclose(out[:, :, 0, 0], [[-expected] * 2, [expected] * 2])

    def test_matches_loop_oracle(self):
        x = self.rng(40).normal(2.0, 3.0, size=(4, 3, 5, 5))
        gamma = Tensor(np.array([1.0, 0.5, 2.0]))
        beta = Tensor(np.array([0.0, 1.0, -1.0]))
        out = batch_norm(Tensor(x), gamma, beta, BatchNormStats("bn"), eps=1e-5).data
        for c in range(3):
            values = x[:, c]
            mean = values.sum() / values.size
            var = ((values - mean) ** 2).sum() / values.size
            normalised = (values - mean) / np.sqrt(var + 1e-5)
            expected = gamma.data[c] * normalised + beta.data[c]
            np.testing.assert_allclose(out[:, c], expected, atol=1e-5)

    def test_running_stats_follow_moving_average(self):
        rng = self.rng(41)
        stats = BatchNormStats("bn")
        gamma, beta = self.params(2)
        first = rng.normal(size=(3, 2, 4, 4))
        second = rng.normal(size=(3, 2, 4, 4))
        batch_norm(Tensor(first), gamma, beta, stats, momentum=0.1)
        np.testing.assert_allclose(stats.mean, first.mean(axis=(0, 2, 3)))
        np.testing.assert_allclose(stats.var, first.var(axis=(0, 2, 3), ddof=1))
        batch_norm(Tensor(second), gamma, beta, stats, momentum=0.1)
        np.testing.assert_allclose(
            stats.mean,
            0.9 * first.mean(axis=(0, 2, 3)) + 0.1 * second.mean(axis=(0, 2, 3)),
        )

    def test_eval_uses_running_stats(self):
        stats = BatchNormStats("bn", mean=np.array([1.0]), var=np.array([4.0]))
        gamma, beta = self.params(1)
        out = batch_norm(
            Tensor(np.full((1, 1, 2, 2), 5.0)),
            gamma,
            beta,
            stats,
            training=False,
            eps=0.0,
        )
        np.testing.assert_allclose(out.data, 2.0)

    def test_eval_without_stats_fails(self):
        gamma, beta = self.params(1)
        with self.assertRaises(BatchNormStateError):
            batch_norm(
                Tensor(np.ones((1, 1, 2, 2))),
                gamma,
                beta,
                BatchNormStats("bn"),
                training=False,
            )

    def test_gradients(self):
        rng = self.rng(42)
        x = Tensor(rng.normal(size=(3, 2, 3, 3)), requires_grad=True)
        gamma = Tensor(rng.uniform(0.5, 1.5, size=2), requires_grad=True)
        beta = Tensor(rng.normal(size=2), requires_grad=True)
        stats = BatchNormStats("bn")
        result = gradcheck(
            lambda x, g, b: batch_norm(x, g, b, stats), [x, gamma, beta], samples=None
        )
        self.assertTrue(result.passed, str(result))
