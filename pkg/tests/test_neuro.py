import math
import struct

import numpy as np
import pytest

from alloc_bench.errors import ParseError, ValidationError
from alloc_bench.neuro.autodiff import Tensor, backward, concat, softmax_t
from alloc_bench.neuro.buffer import ReplayBuffer, buffer_sample
from alloc_bench.neuro.nets import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    Adam,
    GaussianPolicy,
    Mlp,
    gaussian_sample,
    load_checkpoint,
    load_vector,
    polyak_update,
    save_checkpoint,
    save_vector,
)


def numeric_grad(f, x, h=1e-6):
    """Central finite differences of a scalar function of one array."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_g = g.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        step = h * max(1.0, abs(orig))
        flat_x[i] = orig + step
        up = f(x)
        flat_x[i] = orig - step
        down = f(x)
        flat_x[i] = orig
        flat_g[i] = (up - down) / (2.0 * step)
    return g


def autodiff_grad(build, x):
    """Gradient of build(leaf) at x via one reverse pass."""
    leaf = Tensor(x.copy(), requires_grad=True)
    backward(build(leaf))
    assert leaf.grad is not None
    return leaf.grad.reshape(np.shape(x))


def check_op(build_t, build_np, x, rtol=1e-6, atol=1e-9):
    got = autodiff_grad(build_t, x)
    want = numeric_grad(build_np, x)
    np.testing.assert_allclose(got, want, rtol=rtol, atol=atol)


class TestAutodiffOps:
    def test_add_broadcast(self, rng):
        a = rng.normal(0, 1, (4, 3))
        b = rng.normal(0, 1, 3)
        w = rng.normal(0, 1, (4, 3))
        check_op(
            lambda t: ((t + Tensor(b)) * Tensor(w)).sum(),
            lambda x: float(((x + b) * w).sum()),
            a,
        )
        # gradient into the broadcast side collapses over rows
        leaf = Tensor(b.copy(), requires_grad=True)
        backward(((Tensor(a) + leaf) * Tensor(w)).sum())
        np.testing.assert_allclose(leaf.grad, w.sum(axis=0), rtol=1e-12)

    def test_mul_div_neg(self, rng):
        a = rng.uniform(0.5, 2.0, (3, 3))
        b = rng.uniform(0.5, 2.0, (3, 3))
        check_op(
            lambda t: (t * Tensor(b)).sum(), lambda x: float((x * b).sum()), a
        )
        check_op(
            lambda t: (t / Tensor(b)).sum(), lambda x: float((x / b).sum()), a
        )
        check_op(
            lambda t: (Tensor(b) / t).sum(), lambda x: float((b / x).sum()), a
        )
        check_op(lambda t: (-t).sum(), lambda x: float((-x).sum()), a)

    def test_scalar_reflected_ops(self, rng):
        a = rng.uniform(0.5, 1.5, 5)
        check_op(lambda t: (2.0 * t + 1.0).sum(), lambda x: float((2 * x + 1).sum()), a)
        check_op(lambda t: (1.0 - t).sum(), lambda x: float((1 - x).sum()), a)
        check_op(lambda t: (3.0 / t).sum(), lambda x: float((3 / x).sum()), a)

    def test_pow(self, rng):
        a = rng.uniform(0.5, 2.0, 6)
        check_op(lambda t: (t**3).sum(), lambda x: float((x**3).sum()), a)
        with pytest.raises(ValidationError):
            Tensor(a) ** Tensor(a)

    def test_matmul(self, rng):
        a = rng.normal(0, 1, (4, 3))
        b = rng.normal(0, 1, (3, 2))
        check_op(
            lambda t: (t @ Tensor(b)).sum(), lambda x: float((x @ b).sum()), a
        )
        leaf = Tensor(b.copy(), requires_grad=True)
        backward((Tensor(a) @ leaf).sum())
        np.testing.assert_allclose(
            leaf.grad, numeric_grad(lambda y: float((a @ y).sum()), b.copy()), rtol=1e-6
        )

    def test_elementwise_functions(self, rng):
        a = rng.uniform(0.2, 1.5, (2, 4))
        for op_t, op_np in [
            (lambda t: t.tanh(), np.tanh),
            (lambda t: t.exp(), np.exp),
            (lambda t: t.log(), np.log),
        ]:
            check_op(
                lambda t, o=op_t: o(t).sum(),
                lambda x, o=op_np: float(o(x).sum()),
                a,
            )

    def test_relu_away_from_kink(self):
        a = np.array([-2.0, -0.5, 0.5, 2.0])
        check_op(lambda t: t.relu().sum(), lambda x: float(np.maximum(x, 0).sum()), a)

    def test_clip_gradient_mask(self):
        a = np.array([-3.0, -0.5, 0.5, 3.0])
        leaf = Tensor(a.copy(), requires_grad=True)
        backward(leaf.clip(-1.0, 1.0).sum())
        np.testing.assert_array_equal(leaf.grad, [0.0, 1.0, 1.0, 0.0])

    def test_minimum_routes_by_argmin(self):
        a = np.array([1.0, 5.0, 2.0])
        b = np.array([2.0, 3.0, 2.0])
        ta = Tensor(a, requires_grad=True)
        tb = Tensor(b, requires_grad=True)
        backward(ta.minimum(tb).sum())
        # ties go to the first argument
        np.testing.assert_array_equal(ta.grad, [1.0, 0.0, 1.0])
        np.testing.assert_array_equal(tb.grad, [0.0, 1.0, 0.0])

    def test_reductions(self, rng):
        a = rng.normal(0, 1, (3, 4))
        w = rng.normal(0, 1, 3)
        check_op(
            lambda t: (t.sum(axis=1) * Tensor(w)).sum(),
            lambda x: float((x.sum(axis=1) * w).sum()),
            a,
        )
        check_op(
            lambda t: (t.mean(axis=0) ** 2).sum(),
            lambda x: float((x.mean(axis=0) ** 2).sum()),
            a,
        )
        check_op(lambda t: t.mean(), lambda x: float(x.mean()), a)
        check_op(
            lambda t: t.sum(axis=1, keepdims=True).sum(),
            lambda x: float(x.sum()),
            a,
        )

    def test_reshape_and_concat(self, rng):
        a = rng.normal(0, 1, (2, 6))
        w = rng.normal(0, 1, (3, 4))
        check_op(
            lambda t: (t.reshape(3, 4) * Tensor(w)).sum(),
            lambda x: float((x.reshape(3, 4) * w).sum()),
            a,
        )
        b = rng.normal(0, 1, (2, 2))
        wc = rng.normal(0, 1, (2, 8))
        check_op(
            lambda t: (concat([t, Tensor(b)], axis=1) * Tensor(wc)).sum(),
            lambda x: float((np.concatenate([x, b], axis=1) * wc).sum()),
            a,
        )

    def test_softmax(self, rng):
        a = rng.normal(0, 2, (3, 4))
        w = rng.normal(0, 1, (3, 4))

        def np_softmax(x):
            e = np.exp(x - x.max(axis=-1, keepdims=True))
            return e / e.sum(axis=-1, keepdims=True)

        check_op(
            lambda t: (softmax_t(t) * Tensor(w)).sum(),
            lambda x: float((np_softmax(x) * w).sum()),
            a,
            rtol=1e-5,
            atol=1e-8,
        )
        row = softmax_t(Tensor(np.array([[800.0, 0.0, -800.0]]))).data
        assert np.isfinite(row).all()
        assert row.sum() == pytest.approx(1.0, abs=1e-12)

    def test_gradients_accumulate_until_zeroed(self, rng):
        a = rng.normal(0, 1, 4)
        leaf = Tensor(a.copy(), requires_grad=True)
        backward((leaf * leaf).sum())
        first = leaf.grad.copy()
        backward((leaf * leaf).sum())
        np.testing.assert_allclose(leaf.grad, 2.0 * first, rtol=1e-14)

    def test_detach_blocks_flow(self, rng):
        leaf = Tensor(rng.normal(0, 1, 3), requires_grad=True)
        backward((leaf.detach() * 2.0).sum() + leaf.sum() * 0.0)
        assert leaf.grad is None or np.allclose(leaf.grad, 0.0)

    def test_backward_requires_scalar(self):
        t = Tensor(np.zeros(3), requires_grad=True)
        with pytest.raises(ValidationError):
            backward(t * 2.0)

    def test_requires_grad_propagates(self):
        a = Tensor(np.ones(2), requires_grad=True)
        b = Tensor(np.ones(2))
        assert (a + b).requires_grad
        assert not (b * 3.0).requires_grad


class TestMlp:
    def unpack(self, net):
        """Rebuild per-layer arrays from the documented flat layout."""
        layers = []
        offset = 0
        for fan_in, fan_out in zip(net.sizes, net.sizes[1:]):
            w = net.params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
            offset += fan_in * fan_out
            b = net.params[offset : offset + fan_out]
            offset += fan_out
            layers.append((w, b))
        return layers

    def test_forward_matches_manual_composition(self, rng):
        net = Mlp((4, 5, 3), rng=np.random.default_rng(1))
        net.params[:] = rng.normal(0, 0.5, net.n_params)
        x = rng.normal(0, 1, (7, 4))
        (w0, b0), (w1, b1) = self.unpack(net)
        expected = np.tanh(x @ w0 + b0) @ w1 + b1
        assert np.array_equal(net.forward(x), expected)
        assert np.array_equal(net.forward_t(x).data, expected)

    def test_relu_and_identity_paths(self, rng):
        x = rng.normal(0, 1, (5, 3))
        for activation, fn in [("relu", lambda h: np.maximum(h, 0.0)), ("identity", lambda h: h)]:
            net = Mlp((3, 4, 2), activation=activation)
            net.params[:] = rng.normal(0, 0.7, net.n_params)
            (w0, b0), (w1, b1) = self.unpack(net)
            assert np.array_equal(net.forward(x), fn(x @ w0 + b0) @ w1 + b1)

    def test_param_count(self):
        assert Mlp((4, 5, 3)).n_params == (4 + 1) * 5 + (5 + 1) * 3
        assert Mlp((2, 2)).n_params == 6

    def test_zero_init_without_rng(self):
        net = Mlp((6, 8, 3))
        assert np.all(net.params == 0.0)
        out = net.forward(np.ones((2, 6)))
        assert np.all(out == 0.0)
        e = np.exp(out[0])
        assert np.allclose(e / e.sum(), 1.0 / 3.0, atol=1e-15)

    def test_initializer_bounds_and_zero_biases(self):
        net = Mlp((10, 7, 2), rng=np.random.default_rng(0))
        (w0, b0), (w1, b1) = self.unpack(net)
        assert np.all(np.abs(w0) <= math.sqrt(6.0 / 17.0))
        assert np.all(np.abs(w1) <= math.sqrt(6.0 / 9.0))
        assert np.all(b0 == 0.0) and np.all(b1 == 0.0)

    def test_params_alias_forward(self):
        net = Mlp((2, 2), rng=np.random.default_rng(3))
        x = np.array([[1.0, 2.0]])
        before = net.forward(x).copy()
        net.params += 0.1
        after = net.forward(x)
        assert not np.allclose(before, after)

    def test_full_network_gradient_check(self, rng):
        net = Mlp((3, 4, 2), rng=np.random.default_rng(8))
        x = rng.normal(0, 1, (5, 3))

        def loss_value(params):
            net.params[:] = params
            out = net.forward(x)
            return float((out * out).sum())

        base = net.params.copy()
        net.zero_grad()
        out = net.forward_t(x)
        backward((out * out).sum())
        got = net.flat_grad()
        want = numeric_grad(loss_value, base.copy())
        net.params[:] = base
        np.testing.assert_allclose(got, want, rtol=1e-4, atol=1e-7)

    def test_flat_grad_zero_before_backward(self):
        net = Mlp((2, 3, 1))
        assert np.all(net.flat_grad() == 0.0)

    def test_copy_is_deep(self):
        net = Mlp((2, 2), rng=np.random.default_rng(1))
        clone = net.copy()
        assert np.array_equal(clone.params, net.params)
        clone.params += 1.0
        assert not np.allclose(clone.params, net.params)

    def test_validation(self):
        with pytest.raises(ValidationError):
            Mlp((3,))
        with pytest.raises(ValidationError):
            Mlp((3, 0))
        with pytest.raises(ValidationError):
            Mlp((3, 2), activation="gelu")


class TestGaussianPolicy:
    def make(self, n_obs=3, n_act=2, log_std=0.0):
        pol = GaussianPolicy(Mlp((n_obs, n_act)), log_std_init=log_std)
        return pol

    def test_log_density_at_mean_unit_std(self):
        # peak of the standard normal in n dimensions
        for n in (1, 2, 5):
            pol = self.make(n_obs=3, n_act=n)
            logp = pol.log_prob(np.zeros(3), np.zeros(n))
            assert logp[0] == pytest.approx(-0.5 * n * math.log(2 * math.pi), abs=1e-12)

    def test_log_prob_matches_formula(self, rng):
        pol = self.make(log_std=-0.4)
        pol.mean_net.params[:] = rng.normal(0, 0.4, pol.mean_net.n_params)
        obs = rng.normal(0, 1, (6, 3))
        acts = rng.normal(0, 1, (6, 2))
        mu = pol.mean(obs)
        var = np.exp(-0.4) ** 2
        want = (
            -0.5 * ((acts - mu) ** 2 / var).sum(axis=1)
            - 2 * (-0.4)
            - math.log(2 * math.pi)
        )
        np.testing.assert_allclose(pol.log_prob(obs, acts), want, rtol=1e-12)
        np.testing.assert_allclose(pol.log_prob_t(obs, acts).data, want, rtol=1e-12)

    def test_entropy_analytic_vs_monte_carlo(self):
        pol = self.make(log_std=0.3)
        rng = np.random.default_rng(77)
        eps = rng.standard_normal((1_000_000, 2))
        actions = pol.mean(np.zeros(3)) + pol.std() * eps
        mc = -pol.log_prob(np.zeros((1, 3)), actions).mean()
        assert abs(mc - pol.entropy()) < 1e-2

    def test_entropy_formula(self):
        pol = self.make(n_act=3, log_std=-1.2)
        want = 3 * (-1.2) + 1.5 * (1.0 + math.log(2 * math.pi))
        assert pol.entropy() == pytest.approx(want, abs=1e-12)

    def test_rsample_is_mean_plus_scaled_noise(self, rng):
        pol = self.make(log_std=0.5)
        pol.mean_net.params[:] = rng.normal(0, 0.3, pol.mean_net.n_params)
        obs = rng.normal(0, 1, (4, 3))
        eps = rng.standard_normal((4, 2))
        action, logp = pol.rsample_t(obs, eps)
        want = pol.mean(obs) + pol.std() * eps
        np.testing.assert_allclose(action.data, want, rtol=1e-14)
        np.testing.assert_allclose(logp.data, pol.log_prob(obs, want), rtol=1e-11)

    def test_squashed_sample_bounded_with_correction(self, rng):
        pol = self.make(log_std=0.2)
        obs = rng.normal(0, 1, (5, 3))
        eps = rng.standard_normal((5, 2))
        squashed, logp = pol.rsample_squashed_t(obs, eps)
        assert np.all(np.abs(squashed.data) < 1.0)
        pre, pre_logp = pol.rsample_t(obs, eps)
        corr = np.log(1.0 - np.tanh(pre.data) ** 2 + 1e-6).sum(axis=1)
        np.testing.assert_allclose(logp.data, pre_logp.data - corr, rtol=1e-12)

    def test_log_prob_gradient_wrt_log_std(self):
        # d logp / d log_std_i = z_i^2 - 1 at fixed action
        pol = self.make(log_std=0.0)
        obs = np.zeros((1, 3))
        act = np.array([[0.7, -1.3]])
        pol.zero_grad()
        backward(pol.log_prob_t(obs, act).sum())
        np.testing.assert_allclose(
            pol.log_std_leaf.grad, act[0] ** 2 - 1.0, rtol=1e-12
        )

    def test_clamp(self):
        pol = self.make()
        pol.log_std[:] = [-50.0, 50.0]
        pol.clamp()
        assert pol.log_std.tolist() == [LOG_STD_MIN, LOG_STD_MAX]

    def test_gaussian_sample_reproducible(self):
        pol = self.make(log_std=0.1)
        obs = np.array([0.5, -0.2, 1.0])
        a1, lp1 = gaussian_sample(pol, obs, np.random.default_rng(4))
        a2, lp2 = gaussian_sample(pol, obs, np.random.default_rng(4))
        assert np.array_equal(a1, a2) and lp1 == lp2
        assert lp1 == pytest.approx(float(pol.log_prob(obs, a1)[0]), abs=1e-12)


class TestAdam:
    def test_first_step_magnitude(self):
        for g0 in (1.0, 1e-3, -2.5):
            opt = Adam(3, lr=0.01)
            params = np.zeros(3)
            opt.step(params, np.full(3, g0))
            expected = -0.01 * np.sign(g0)
            np.testing.assert_allclose(params, expected, rtol=1e-4)

    def test_zero_gradient_zero_step(self):
        opt = Adam(4, lr=0.1)
        params = np.ones(4)
        opt.step(params, np.zeros(4))
        np.testing.assert_array_equal(params, np.ones(4))

    def test_matches_reference_trajectory(self, rng):
        lr, b1, b2, eps = 2e-3, 0.9, 0.999, 1e-8
        opt = Adam(5, lr=lr, beta1=b1, beta2=b2, eps=eps)
        params = rng.normal(0, 1, 5)
        shadow = params.copy()
        m = np.zeros(5)
        v = np.zeros(5)
        for t in range(1, 51):
            g = rng.normal(0, 1, 5)
            opt.step(params, g)
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            shadow -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
        np.testing.assert_allclose(params, shadow, rtol=1e-12)

    def test_validation(self):
        with pytest.raises(ValidationError):
            Adam(0)
        opt = Adam(3)
        with pytest.raises(ValidationError):
            opt.step(np.zeros(2), np.zeros(2))


class TestPolyak:
    def test_tau_one_copies(self):
        online = Mlp((2, 3), rng=np.random.default_rng(0))
        target = Mlp((2, 3), rng=np.random.default_rng(1))
        polyak_update(target, online, 1.0)
        assert np.array_equal(target.params, online.params)

    def test_tau_zero_is_noop(self):
        online = Mlp((2, 3), rng=np.random.default_rng(0))
        target = Mlp((2, 3), rng=np.random.default_rng(1))
        before = target.params.copy()
        polyak_update(target, online, 0.0)
        assert np.array_equal(target.params, before)

    def test_geometric_gap_decay(self):
        online = Mlp((2, 2), rng=np.random.default_rng(0))
        target = Mlp((2, 2), rng=np.random.default_rng(5))
        tau = 0.25
        gap0 = target.params - online.params
        for k in range(1, 6):
            polyak_update(target, online, tau)
            np.testing.assert_allclose(
                target.params - online.params, (1 - tau) ** k * gap0, rtol=1e-12
            )

    def test_fixed_point(self):
        online = Mlp((2, 2), rng=np.random.default_rng(0))
        target = online.copy()
        polyak_update(target, online, 0.37)
        np.testing.assert_allclose(target.params, online.params, rtol=1e-15)

    def test_validation(self):
        with pytest.raises(ValidationError):
            polyak_update(Mlp((2, 2)), Mlp((2, 3)), 0.5)
        with pytest.raises(ValidationError):
            polyak_update(Mlp((2, 2)), Mlp((2, 2)), 1.5)


class TestCheckpoints:
    def test_byte_layout(self, tmp_path):
        net = Mlp((3, 2), rng=np.random.default_rng(2))
        path = tmp_path / "net.ckpt"
        save_checkpoint(path, net)
        raw = path.read_bytes()
        count = struct.unpack("<I", raw[:4])[0]
        assert count == 2
        sizes = struct.unpack("<2I", raw[4:12])
        assert sizes == (3, 2)
        payload = struct.unpack(f"<{net.n_params}d", raw[12:])
        assert np.array_equal(np.asarray(payload), net.params)
        assert len(raw) == 12 + 8 * net.n_params

    def test_round_trip_bit_identical(self, tmp_path):
        net = Mlp((4, 6, 2), activation="relu", rng=np.random.default_rng(9))
        path = tmp_path / "net.ckpt"
        save_checkpoint(path, net)
        loaded = load_checkpoint(path, activation="relu")
        assert loaded.sizes == net.sizes
        assert np.array_equal(loaded.params, net.params)
        save_checkpoint(tmp_path / "again.ckpt", loaded)
        assert (tmp_path / "again.ckpt").read_bytes() == path.read_bytes()

    def test_vector_round_trip(self, tmp_path):
        vec = np.random.default_rng(3).normal(0, 1, 7)
        path = tmp_path / "v.ckpt"
        save_vector(path, vec)
        assert np.array_equal(load_vector(path), vec)

    def test_kind_confusion_rejected(self, tmp_path):
        net = Mlp((3, 2))
        save_checkpoint(tmp_path / "net.ckpt", net)
        with pytest.raises(ParseError):
            load_vector(tmp_path / "net.ckpt")
        save_vector(tmp_path / "v.ckpt", np.zeros(4))
        with pytest.raises(ParseError):
            load_checkpoint(tmp_path / "v.ckpt")

    def test_truncation_rejected(self, tmp_path):
        net = Mlp((3, 2), rng=np.random.default_rng(0))
        path = tmp_path / "net.ckpt"
        save_checkpoint(path, net)
        raw = path.read_bytes()
        for cut in (0, 2, 8, len(raw) - 8):
            bad = tmp_path / f"cut{cut}.ckpt"
            bad.write_bytes(raw[:cut])
            with pytest.raises(ParseError):
                load_checkpoint(bad)

    def test_payload_size_mismatch(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        header = np.array([2, 3, 2], dtype="<u4").tobytes()
        payload = np.zeros(5, dtype="<f8").tobytes()  # sizes imply 8 params
        path.write_bytes(header + payload)
        with pytest.raises(ParseError):
            load_checkpoint(path)


class TestReplayBuffer:
    def test_fifo_overwrite_keeps_newest(self):
        buf = ReplayBuffer(3)
        for item in (1, 2, 3, 4, 5):
            buf.add(item)
        assert len(buf) == 3
        seen = set(buf.sample(200, np.random.default_rng(0)))
        assert seen == {3, 4, 5}

    def test_singleton_batch_repeats(self):
        buf = ReplayBuffer(10)
        buf.add("only")
        batch = buf.sample(4, np.random.default_rng(1))
        assert batch == ["only"] * 4

    def test_uniform_sampling_chi_square(self):
        buf = ReplayBuffer(10)
        for i in range(10):
            buf.add(i)
        counts = np.zeros(10)
        for item in buf.sample(10_000, np.random.default_rng(123)):
            counts[item] += 1
        chi2 = float(((counts - 1000.0) ** 2 / 1000.0).sum())
        assert chi2 < 27.877  # df=9 critical value at p=0.001

    def test_module_level_helper(self):
        buf = ReplayBuffer(2)
        buf.add(7)
        assert buffer_sample(buf, 1, np.random.default_rng(0)) == [7]

    def test_validation(self):
        with pytest.raises(ValidationError):
            ReplayBuffer(0)
        buf = ReplayBuffer(3)
        with pytest.raises(ValidationError):
            buf.sample(1, np.random.default_rng(0))
        buf.add(1)
        with pytest.raises(ValidationError):
            buf.sample(0, np.random.default_rng(0))
