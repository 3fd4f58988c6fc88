import numpy as np
import pytest

from mcdn.errors import ContractError
from mcdn.nn import layers
from mcdn.nn.gradcheck import ConvUnitFragment, LinearFragment, finite_diff_check

from test_kernels import conv2d_oracle, rel_err


def bypass_unit(in_ch=1, out_ch=1, k=1, stride=1, padding=0, eps=1e-12, dtype=np.float32):
    """Conv unit whose BN is an identity map (gamma 1, beta 0, rm 0, rv 1)."""
    w = np.zeros((out_ch, in_ch, k, k), dtype=dtype)
    return layers.ConvUnitParams(
        weights=w,
        bias=np.zeros(out_ch, dtype=dtype),
        bn_gamma=np.ones(out_ch, dtype=dtype),
        bn_beta=np.zeros(out_ch, dtype=dtype),
        bn_running_mean=np.zeros(out_ch, dtype=dtype),
        bn_running_var=np.ones(out_ch, dtype=dtype),
        bn_epsilon=eps,
        stride=stride,
        padding=padding,
    )


def random_unit(rng, in_ch, out_ch, k, stride=1, padding=0, dtype=np.float32):
    p = bypass_unit(in_ch, out_ch, k, stride, padding, eps=1e-5, dtype=dtype)
    p.weights[...] = rng.normal(0, 0.5, p.weights.shape)
    p.bias[...] = rng.normal(0, 0.5, p.bias.shape)
    p.bn_gamma[...] = rng.uniform(0.5, 1.5, p.bn_gamma.shape)
    p.bn_beta[...] = rng.normal(0, 0.5, p.bn_beta.shape)
    return p


class TestConvUnitForward:
    def test_identity_kernel_reduces_to_relu(self):
        params = bypass_unit()
        params.weights[...] = 1.0
        rng = np.random.default_rng(0)
        x = rng.normal(0, 1, (2, 1, 5, 5)).astype(np.float32)
        out, _ = layers.conv_unit_forward(x, params, mode="infer")
        np.testing.assert_array_equal(out, np.maximum(x, 0.0))

    def test_zero_input_gives_zero_output(self):
        params = bypass_unit(in_ch=2, out_ch=3, k=3, padding=1)
        params.weights[...] = np.random.default_rng(1).normal(0, 1, params.weights.shape)
        x = np.zeros((1, 2, 4, 4), dtype=np.float32)
        out, _ = layers.conv_unit_forward(x, params, mode="infer")
        assert not np.any(out)

    def test_matches_direct_conv_oracle(self):
        rng = np.random.default_rng(2)
        params = bypass_unit(in_ch=2, out_ch=2, k=3, padding=1)
        params.weights[...] = rng.normal(0, 1, params.weights.shape)
        x = rng.normal(0, 1, (1, 2, 4, 4)).astype(np.float32)
        out, _ = layers.conv_unit_forward(x, params, mode="infer")
        ref = np.maximum(conv2d_oracle(x, params.weights, params.bias, 1, 1), 0.0)
        assert rel_err(out, ref) <= 1e-6

    def test_train_mode_normalizes_to_beta_gamma(self):
        rng = np.random.default_rng(3)
        params = random_unit(rng, 2, 4, 3, padding=1)
        params.bn_gamma[...] = 0.5
        params.bn_beta[...] = 5.0   # keeps every activation positive, so ReLU is the identity
        x = rng.normal(0, 2, (4, 2, 8, 8)).astype(np.float32)
        out, _ = layers.conv_unit_forward(x, params, mode="train")
        mean = out.mean(axis=(0, 2, 3), dtype=np.float64)
        var = out.var(axis=(0, 2, 3), dtype=np.float64)
        assert np.all(np.abs(mean - 5.0) < 1e-6)
        assert np.all(np.abs(var - 0.25) < 1e-5)

    def test_running_stats_update_with_momentum(self):
        rng = np.random.default_rng(4)
        params = random_unit(rng, 1, 2, 3)
        x = rng.normal(3, 2, (4, 1, 6, 6)).astype(np.float32)
        conv = layers.kernels.conv2d_forward(x, params.weights, params.bias, 1, 0)
        bmean = conv.mean(axis=(0, 2, 3), dtype=np.float64)
        bvar = conv.var(axis=(0, 2, 3), dtype=np.float64)
        layers.conv_unit_forward(x, params, mode="train")
        np.testing.assert_allclose(params.bn_running_mean, 0.1 * bmean, rtol=1e-5)
        np.testing.assert_allclose(params.bn_running_var, 0.9 * 1.0 + 0.1 * bvar, rtol=1e-5)

    def test_infer_mode_is_pure(self):
        rng = np.random.default_rng(5)
        params = random_unit(rng, 2, 3, 3, stride=2, padding=1)
        x = rng.normal(0, 1, (2, 2, 8, 8)).astype(np.float32)
        a, _ = layers.conv_unit_forward(x, params, mode="infer")
        b, _ = layers.conv_unit_forward(x, params, mode="infer")
        assert a.tobytes() == b.tobytes()

    def test_channel_mismatch_names_axis(self):
        params = bypass_unit(in_ch=2)
        with pytest.raises(ContractError, match="channel axis"):
            layers.conv_unit_forward(np.zeros((1, 3, 4, 4), np.float32), params)

    def test_empty_batch_rejected(self):
        params = bypass_unit()
        with pytest.raises(ContractError, match="batch axis"):
            layers.conv_unit_forward(np.zeros((0, 1, 4, 4), np.float32), params)


class TestConvUnitBackward:
    def _run(self, rng, shape=(2, 2, 5, 5), out_ch=3, k=3, stride=1, padding=1):
        params = random_unit(rng, shape[1], out_ch, k, stride, padding)
        x = rng.normal(0, 1, shape).astype(np.float32)
        out, cache = layers.conv_unit_forward(x, params, mode="train")
        return x, out, cache

    def test_zero_upstream_gives_zero_grads(self):
        rng = np.random.default_rng(6)
        x, out, cache = self._run(rng)
        gx, grads = layers.conv_unit_backward(np.zeros_like(out), cache)
        assert not np.any(gx)
        assert all(not np.any(g) for g in grads.values())

    def test_upstream_linearity(self):
        rng = np.random.default_rng(7)
        x, out, cache = self._run(rng)
        gy = rng.normal(0, 1, out.shape).astype(np.float32)
        gx1, g1 = layers.conv_unit_backward(gy, cache)
        gx2, g2 = layers.conv_unit_backward(2 * gy, cache)
        np.testing.assert_allclose(gx2, 2 * gx1, rtol=1e-4, atol=1e-6)
        for k in g1:
            np.testing.assert_allclose(g2[k], 2 * g1[k], rtol=1e-4, atol=1e-6)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(8)
        params = random_unit(rng, 2, 3, 3, stride=1, padding=1, dtype=np.float64)
        x = rng.normal(0, 1, (2, 2, 5, 5))
        report = finite_diff_check(ConvUnitFragment(params), x, step=1e-3, tolerance=1e-4)
        assert report.passed, list(report.lines())

    def test_grad_dim_mismatch_rejected(self):
        rng = np.random.default_rng(9)
        _, out, cache = self._run(rng)
        with pytest.raises(ContractError, match="upstream gradient"):
            layers.conv_unit_backward(np.zeros((1, 1, 1, 1), np.float32), cache)


class TestLinear:
    def test_identity(self):
        params = layers.LinearParams(weights=np.eye(3, dtype=np.float32),
                                     bias=np.zeros(3, np.float32))
        x = np.arange(6, dtype=np.float32).reshape(2, 3)
        out, _ = layers.linear_forward(x, params)
        np.testing.assert_array_equal(out, x)

    def test_worked_example(self):
        params = layers.LinearParams(weights=np.array([[3.0, 4.0]], np.float32),
                                     bias=np.array([5.0], np.float32))
        out, _ = layers.linear_forward(np.array([[1.0, 2.0]], np.float32), params)
        assert out[0, 0] == 16.0

    def test_matches_naive_matmul(self):
        rng = np.random.default_rng(10)
        w = rng.normal(0, 1, (4, 7)).astype(np.float32)
        b = rng.normal(0, 1, 4).astype(np.float32)
        x = rng.normal(0, 1, (3, 7)).astype(np.float32)
        out, _ = layers.linear_forward(x, layers.LinearParams(weights=w, bias=b))
        ref = np.zeros((3, 4))
        for i in range(3):
            for j in range(4):
                ref[i, j] = sum(float(x[i, k]) * float(w[j, k]) for k in range(7)) + float(b[j])
        assert rel_err(out, ref) <= 1e-6

    def test_feature_mismatch(self):
        params = layers.LinearParams(weights=np.ones((1, 2), np.float32),
                                     bias=np.zeros(1, np.float32))
        with pytest.raises(ContractError, match="feature axis"):
            layers.linear_forward(np.zeros((1, 3), np.float32), params)

    def test_backward_zero_and_fd(self):
        rng = np.random.default_rng(11)
        params = layers.LinearParams(weights=rng.normal(0, 1, (3, 5)),
                                     bias=rng.normal(0, 1, 3))
        x = rng.normal(0, 1, (2, 5))
        out, cache = layers.linear_forward(x, params)
        gx, grads = layers.linear_backward(np.zeros_like(out), cache)
        assert not np.any(gx) and not np.any(grads["weights"]) and not np.any(grads["bias"])
        report = finite_diff_check(LinearFragment(params), x, step=1e-3, tolerance=1e-4)
        assert report.passed, list(report.lines())

    def test_batch_gradient_is_sum_of_per_sample(self):
        rng = np.random.default_rng(12)
        params = layers.LinearParams(weights=rng.normal(0, 1, (2, 4)).astype(np.float32),
                                     bias=rng.normal(0, 1, 2).astype(np.float32))
        x = rng.normal(0, 1, (2, 4)).astype(np.float32)
        gy = rng.normal(0, 1, (2, 2)).astype(np.float32)
        _, cache = layers.linear_forward(x, params)
        _, g_batch = layers.linear_backward(gy, cache)
        singles = []
        for i in range(2):
            _, ci = layers.linear_forward(x[i:i + 1], params)
            _, gi = layers.linear_backward(gy[i:i + 1], ci)
            singles.append(gi)
        np.testing.assert_allclose(g_batch["weights"],
                                   singles[0]["weights"] + singles[1]["weights"], rtol=1e-5)
        np.testing.assert_allclose(g_batch["bias"],
                                   singles[0]["bias"] + singles[1]["bias"], rtol=1e-5)
