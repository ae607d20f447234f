import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from posetrack import tensorcore as tc
from posetrack.tensorcore import ops
from posetrack.tensorcore.checkpoint import dumps, loads
from posetrack.tensorcore.optim import adam_step
from posetrack.tensorcore.tensor import GraphError, check_finite

from support import naive_conv2d


def P(a):
    return tc.Parameter(np.asarray(a, dtype=np.float64))


class TestConv2d:
    def test_identity_kernel(self):
        x = np.random.default_rng(0).normal(size=(2, 3, 5, 4))
        k = np.eye(3).reshape(3, 3, 1, 1)
        assert np.array_equal(tc.conv2d(tc.Tensor(x), tc.Tensor(k)).data, x)

    def test_window_sum(self):
        out = tc.conv2d(tc.Tensor(np.ones((1, 1, 5, 5))), tc.Tensor(np.ones((1, 1, 3, 3)))).data
        assert out[0, 0, 2, 2] == 9
        assert out[0, 0, 0, 0] == 4

    @pytest.mark.parametrize("stride", [1, 2])
    @pytest.mark.parametrize("hw,k", [((6, 6), 3), ((5, 7), 3), ((4, 4), 1), ((7, 5), 2)])
    def test_matches_naive_loops(self, stride, hw, k):
        rng = np.random.default_rng(stride * 10 + k)
        x = rng.normal(size=(2, 3, *hw))
        w = rng.normal(size=(4, 3, k, k))
        out = tc.conv2d(tc.Tensor(x), tc.Tensor(w), stride=stride).data
        assert np.abs(out - naive_conv2d(x, w, stride)).max() < 1e-6

    def test_bias(self):
        rng = np.random.default_rng(0)
        x, w, b = rng.normal(size=(1, 2, 4, 4)), rng.normal(size=(3, 2, 3, 3)), rng.normal(size=3)
        out = tc.conv2d(tc.Tensor(x), tc.Tensor(w), tc.Tensor(b)).data
        assert np.allclose(out, naive_conv2d(x, w) + b[None, :, None, None])

    def test_channel_mismatch(self):
        with pytest.raises(ValueError):
            tc.conv2d(tc.Tensor(np.zeros((1, 2, 4, 4))), tc.Tensor(np.zeros((1, 3, 3, 3))))


class TestUpsample:
    def test_single_pixel(self):
        out = tc.upsample2x_nearest(tc.Tensor(np.full((1, 1, 1, 1), 7.0))).data
        assert out.shape == (1, 1, 2, 2) and np.all(out == 7)

    def test_shape_law(self):
        assert tc.upsample2x_nearest(tc.Tensor(np.zeros((1, 5, 3, 4)))).shape == (1, 5, 6, 8)

    def test_adjoint_sums_blocks(self):
        x = P(np.zeros((1, 1, 2, 2)))
        g = np.arange(16.0).reshape(1, 1, 4, 4)
        loss = tc.mse_loss(tc.upsample2x_nearest(x), -g / 2)  # d/dy = (y + g/2) * 2/16
        (grad,) = tc.backward(loss, [x])
        expect = g.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(2, 2, 4).sum(-1) / 16
        assert np.allclose(grad[0, 0], expect)


class TestElementwise:
    def test_relu(self):
        assert list(tc.relu(tc.Tensor(np.array([-1.0, 2.0]))).data) == [0, 2]

    def test_sigmoid(self):
        assert tc.sigmoid(tc.Tensor(np.array(0.0))).data == 0.5
        big = tc.sigmoid(tc.Tensor(np.array([-800.0, 800.0]))).data
        assert np.all(np.isfinite(big)) and big[0] == 0 and big[1] == 1

    def test_linear_identity(self):
        x = np.random.default_rng(0).normal(size=(3, 4))
        out = tc.linear(tc.Tensor(x), tc.Tensor(np.eye(4)), tc.Tensor(np.zeros(4))).data
        assert np.array_equal(out, x)

    def test_concat_and_add_shapes(self):
        a, b = tc.Tensor(np.ones((1, 2, 3, 3))), tc.Tensor(np.ones((1, 5, 3, 3)))
        assert tc.concat_channels([a, b]).shape == (1, 7, 3, 3)
        assert (a + tc.Tensor(np.ones((1, 2, 3, 3)))).shape == (1, 2, 3, 3)
        with pytest.raises(ValueError):
            tc.concat_channels([a, tc.Tensor(np.ones((1, 1, 2, 3)))])


class TestStopGradient:
    def test_forward_bit_exact(self):
        x = np.random.default_rng(0).normal(size=(4, 5)).astype(np.float32)
        assert np.array_equal(tc.stop_gradient(tc.Tensor(x)).data, x)

    def test_sum_of_stopped_has_zero_gradient(self):
        x = P(np.random.default_rng(0).normal(size=6))
        (g,) = tc.backward(tc.sum_all(tc.stop_gradient(x)), [x])
        assert np.array_equal(g, np.zeros(6))

    def test_only_unstopped_path_carries_gradient(self):
        x = P(np.random.default_rng(0).normal(size=(2, 3)))
        fn = lambda: tc.sum_all(x + tc.stop_gradient(x))  # noqa: E731
        (g,) = tc.backward(fn(), [x])
        assert np.array_equal(g, np.ones((2, 3)))
        assert tc.grad_check(fn, [x]).max_rel_error < 1e-8


class TestLosses:
    def test_mse_self_is_zero(self):
        x = np.random.default_rng(0).normal(size=(3, 4))
        assert tc.mse_loss(tc.Tensor(x), x).item() == 0

    def test_bce_half_label(self):
        assert tc.bce_with_logits(tc.Tensor(np.zeros(1)), np.array([0.5])).item() == pytest.approx(math.log(2))

    def test_masked_mse_averages_selected_half(self):
        rng = np.random.default_rng(0)
        p, t = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
        m = np.zeros((4, 6))
        m[:, :3] = 1
        expect = ((p[:, :3] - t[:, :3]) ** 2).sum() / 12
        assert tc.mse_loss(tc.Tensor(p), t, m).item() == pytest.approx(expect, rel=1e-12)

    def test_empty_mask_gives_zero(self):
        x = P(np.ones((2, 2)))
        loss = tc.mse_loss(x, np.zeros((2, 2)), np.zeros((2, 2)))
        assert loss.item() == 0
        assert np.array_equal(tc.backward(loss, [x])[0], np.zeros((2, 2)))
        assert tc.bce_with_logits(x, np.zeros((2, 2)), np.zeros((2, 2))).item() == 0

    def test_bce_stable_at_extremes(self):
        z = tc.Tensor(np.array([-1000.0, 1000.0]))
        assert np.isfinite(tc.bce_with_logits(z, np.array([1.0, 0.0])).item())

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            tc.mse_loss(tc.Tensor(np.zeros(3)), np.zeros(4))


class TestBackward:
    def test_sum_gives_ones(self):
        p = P(np.random.default_rng(0).normal(size=(3, 2)))
        assert np.array_equal(tc.backward(tc.sum_all(p), [p])[0], np.ones((3, 2)))

    def test_mean_square(self):
        v = np.random.default_rng(0).normal(size=8)
        p = P(v)
        (g,) = tc.backward(tc.mse_loss(p, np.zeros(8)), [p])
        assert np.allclose(g, 2 * v / 8)

    def test_non_scalar_rejected(self):
        with pytest.raises(GraphError):
            tc.backward(P(np.ones(3)))

    def test_deterministic_and_reset(self):
        rng = np.random.default_rng(0)
        x = P(rng.normal(size=(1, 2, 5, 5)))
        w = P(rng.normal(size=(3, 2, 3, 3)))
        fn = lambda: tc.sum_all(tc.relu(tc.conv2d(x, w)))  # noqa: E731
        g1 = [g.copy() for g in tc.backward(fn(), [x, w])]
        g2 = tc.backward(fn(), [x, w])
        assert all(np.array_equal(a, b) for a, b in zip(g1, g2))

    def test_unreached_parameter_gets_zeros(self):
        a, b = P(np.ones(3)), P(np.ones(2))
        assert np.array_equal(tc.backward(tc.sum_all(a), [a, b])[1], np.zeros(2))

    def test_no_grad_builds_no_graph(self):
        a = P(np.ones(3))
        with tc.no_grad():
            out = tc.sum_all(a)
        assert not out.requires_grad and out.parents == ()

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_check_finite_flags_nan(self):
        with check_finite():
            with pytest.raises(FloatingPointError):
                tc.add(tc.Tensor(np.array([np.inf])), tc.Tensor(np.array([-np.inf])))


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        p = P(np.arange(4.0))
        opt = tc.Adam([p], lr=0.1)
        for _ in range(3):
            opt.step([np.zeros(4)])
        assert np.array_equal(p.data, np.arange(4.0))

    def test_first_step_magnitude_is_lr(self):
        p = P(np.zeros(5))
        g = np.array([0.3, -2.0, 5.0, 1e-3, -7.0])
        tc.Adam([p], lr=0.01).step([g])
        # closed form: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps)
        assert np.allclose(p.data, -0.01 * g / (np.abs(g) + 1e-8), rtol=1e-12)

    def test_matches_reference_over_steps(self):
        rng = np.random.default_rng(0)
        grads = rng.normal(size=(6, 3))
        p = P(np.zeros(3))
        state = {"t": 0, "m": [np.zeros(3)], "v": [np.zeros(3)]}
        m = v = np.zeros(3)
        ref = np.zeros(3)
        for t, g in enumerate(grads, start=1):
            adam_step([p], [g], 1e-3, 0.9, 0.999, 1e-8, state)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            ref = ref - 1e-3 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        assert np.allclose(p.data, ref, rtol=1e-12, atol=1e-15)

    def test_deterministic(self):
        outs = []
        for _ in range(2):
            p = P(np.ones(3))
            opt = tc.Adam([p])
            for g in np.random.default_rng(1).normal(size=(4, 3)):
                opt.step([g])
            outs.append(p.data.copy())
        assert np.array_equal(*outs)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        params = {
            "conv.w": rng.normal(size=(4, 3, 3, 3)).astype(np.float32),
            "bias": rng.normal(size=4).astype(np.float32),
            "scalar": np.array(3.5, dtype=np.float32),
            "ünïcode": np.array([np.float32(1e-30), -0.0], dtype=np.float32),
        }
        path = tmp_path / "m.pkt"
        tc.save_checkpoint(path, params)
        back = tc.load_checkpoint(path)
        assert list(back) == list(params)
        for k in params:
            assert back[k].shape == params[k].shape
            assert back[k].tobytes() == params[k].tobytes()
        assert dumps(back) == path.read_bytes()

    def test_layout(self):
        blob = dumps({"ab": np.array([[1.0, 2.0]], dtype=np.float32)})
        assert blob[:4] == b"PKT1"
        assert blob[4:8] == (1).to_bytes(4, "little")
        assert blob[8:12] == (2).to_bytes(4, "little") and blob[12:14] == b"ab"
        assert blob[14:18] == (2).to_bytes(4, "little")
        assert np.frombuffer(blob[26:], "<f4").tolist() == [1.0, 2.0]

    @pytest.mark.parametrize("cut", [2, 6, 10, 13, 20, 27])
    def test_truncation_detected(self, cut):
        blob = dumps({"ab": np.array([[1.0, 2.0]], dtype=np.float32)})
        with pytest.raises(tc.CheckpointError):
            loads(blob[:cut])

    def test_bad_magic_and_trailing(self):
        blob = dumps({"a": np.zeros(2, np.float32)})
        with pytest.raises(tc.CheckpointError):
            loads(b"XXXX" + blob[4:])
        with pytest.raises(tc.CheckpointError):
            loads(blob + b"\0")


@settings(max_examples=50, deadline=None)
@given(arrs=st.lists(hnp.arrays(np.float32, hnp.array_shapes(min_dims=0, max_dims=3, max_side=4)), max_size=4))
def test_checkpoint_round_trip_property(arrs):
    params = {f"p{i}": a for i, a in enumerate(arrs)}
    back = loads(dumps(params))
    assert all(back[k].tobytes() == params[k].tobytes() and back[k].shape == params[k].shape for k in params)


class TestGradCheck:
    def test_linear_graph_is_near_exact(self):
        rng = np.random.default_rng(0)
        x, w = P(rng.normal(size=(3, 4))), P(rng.normal(size=(2, 4)))
        res = tc.grad_check(lambda: tc.sum_all(tc.linear(x, w)), [x, w])
        assert res.checked == 20 and res.max_rel_error < 1e-8

    def test_conv_relu_mse(self):
        rng = np.random.default_rng(1)
        x = P(rng.normal(size=(1, 2, 5, 5)))
        w = P(rng.normal(size=(3, 2, 3, 3)))
        t = rng.normal(size=(1, 3, 5, 5))
        res = tc.grad_check(lambda: tc.mse_loss(tc.relu(tc.conv2d(x, w)), t), [x, w])
        assert res.passed(1e-3)

    def test_stopped_parameter_reports_zero(self):
        rng = np.random.default_rng(2)
        a, b = P(rng.normal(size=4)), P(rng.normal(size=4))
        fn = lambda: tc.sum_all(tc.sigmoid(a + tc.stop_gradient(b)))  # noqa: E731
        ga, gb = tc.backward(fn(), [a, b])
        assert np.array_equal(gb, np.zeros(4)) and np.any(ga != 0)
        assert tc.grad_check(fn, [a, b]).max_rel_error < 1e-6

    def test_detects_a_wrong_gradient(self, monkeypatch):
        rng = np.random.default_rng(3)
        x = P(rng.normal(size=5))
        orig = ops.sigmoid

        def bad_sigmoid(t):
            out = orig(t)
            fn = out.backward_fn
            out.backward_fn = lambda g: fn(2 * g)
            return out

        res = tc.grad_check(lambda: tc.sum_all(bad_sigmoid(x)), [x])
        assert res.max_rel_error > 0.1
