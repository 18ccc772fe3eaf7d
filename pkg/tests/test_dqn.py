import math

import numpy as np
import pytest

from beamrl.dqn import (
    AdamState,
    Mlp,
    QNetworkPair,
    ReplayBuffer,
    Schedules,
    act,
    adam_step,
    forward,
    load_checkpoint,
    loss_and_grads,
    save_checkpoint,
    schedule_values,
    td_targets,
)
from beamrl.env import Experience
from beamrl.errors import DomainError, NotReadyError, ShapeError
from beamrl.numerics import RngStream


def make_net(dims, seed=1):
    return Mlp(dims, RngStream(seed, "net"))


def naive_forward(net, x):
    """Scalar-loop forward pass, independent of the vectorized one."""
    h = list(x)
    last = len(net.weights) - 1
    for layer, (w, b) in enumerate(zip(net.weights, net.biases)):
        out = []
        for j in range(w.shape[1]):
            acc = b[j]
            for i in range(w.shape[0]):
                acc += h[i] * w[i, j]
            if layer != last:
                acc = max(acc, 0.0)
            out.append(acc)
        h = out
    return np.array(h)


def random_batch(net, rng, size):
    d_in, n_actions = net.dims[0], net.dims[-1]
    return [
        Experience(
            s=rng.standard_normal(d_in),
            a=int(rng.integers(n_actions)),
            r=float(rng.standard_normal()),
            s_next=rng.standard_normal(d_in),
        )
        for _ in range(size)
    ]


class TestForward:
    def test_zero_net(self):
        net = Mlp([4, 3, 2])
        assert np.all(forward(net, np.ones(4)) == 0.0)

    def test_relu_passthrough(self):
        net = Mlp([2, 2, 2])
        net.weights[0] = np.eye(2)
        net.weights[1] = np.eye(2)
        x = np.array([1.5, -2.0])
        assert np.allclose(forward(net, x), [1.5, 0.0])

    def test_vs_naive(self):
        rng = RngStream(2, "fwd")
        net = make_net([5, 7, 6, 3])
        for _ in range(10):
            x = rng.standard_normal(5)
            assert np.max(np.abs(forward(net, x) - naive_forward(net, x))) <= 1e-10

    def test_batch_shape(self):
        net = make_net([5, 7, 6, 3])
        out = forward(net, np.zeros((4, 5)))
        assert out.shape == (4, 3)

    def test_shape_error(self):
        net = make_net([5, 7, 6, 3])
        with pytest.raises(ShapeError):
            forward(net, np.zeros(4))


class TestAct:
    def test_greedy(self):
        net = Mlp([3, 4])
        net.weights[0][1, 2] = 1.0
        s = np.array([0.0, 2.0, 0.0])
        assert act(net, s, eps=0.0, rng=RngStream(1, "act")) == 2

    def test_tie_breaks_low(self):
        net = Mlp([3, 4])  # all-zero Q-values
        assert act(net, np.ones(3), eps=0.0, rng=RngStream(1, "act")) == 0

    def test_uniform_when_exploring(self):
        net = make_net([3, 8, 8, 5])
        rng = RngStream(3, "act")
        s = np.zeros(3)
        counts = np.zeros(5)
        n = 50_000
        for _ in range(n):
            counts[act(net, s, eps=1.0, rng=rng)] += 1
        expected = n / 5
        sigma = math.sqrt(n * 0.2 * 0.8)
        assert np.max(np.abs(counts - expected)) <= 3 * sigma

    def test_constant_shift_invariance(self):
        rng = RngStream(4, "act")
        net = make_net([6, 8, 8, 4], seed=5)
        shifted = net.copy()
        shifted.biases[-1] = shifted.biases[-1] + 123.0
        for _ in range(20):
            s = rng.standard_normal(6)
            assert act(net, s, 0.0, RngStream(0, "t")) == act(
                shifted, s, 0.0, RngStream(0, "t")
            )

    def test_eps_domain(self):
        net = Mlp([2, 2])
        with pytest.raises(DomainError):
            act(net, np.zeros(2), eps=1.5, rng=RngStream(0, "a"))


class TestTdTargets:
    def test_gamma_zero(self):
        net = make_net([4, 6, 6, 3])
        batch = random_batch(net, RngStream(5, "b"), 16)
        targets = td_targets(batch, net, gamma=0.0)
        assert np.allclose(targets, [e.r for e in batch])

    def test_zero_target_net(self):
        zero = Mlp([4, 6, 6, 3])
        batch = random_batch(zero, RngStream(6, "b"), 16)
        targets = td_targets(batch, zero, gamma=0.9)
        assert np.allclose(targets, [e.r for e in batch])

    def test_vs_loop(self):
        net = make_net([4, 6, 6, 3], seed=7)
        batch = random_batch(net, RngStream(7, "b"), 16)
        gamma = 0.37
        targets = td_targets(batch, net, gamma)
        for e, got in zip(batch, targets):
            want = e.r + gamma * np.max(forward(net, e.s_next))
            assert got == pytest.approx(want, rel=1e-12)


class TestLossAndGrads:
    def test_perfect_prediction(self):
        net = make_net([4, 6, 6, 3], seed=8)
        batch = random_batch(net, RngStream(8, "b"), 8)
        targets = np.array([forward(net, e.s)[e.a] for e in batch])
        loss, (gw, gb) = loss_and_grads(net, batch, targets)
        assert loss == pytest.approx(0.0, abs=1e-24)
        for g in gw + gb:
            assert np.allclose(g, 0.0)

    def test_single_linear_param_closed_form(self):
        # one weight w: q = w*s, loss = (t - w*s)^2 / 2, dL/dw = (w*s - t)*s
        net = Mlp([1, 1])
        net.weights[0][0, 0] = 2.0
        batch = [Experience(s=np.array([3.0]), a=0, r=0.0, s_next=np.array([0.0]))]
        target = np.array([1.0])
        loss, (gw, gb) = loss_and_grads(net, batch, target)
        assert loss == pytest.approx((1.0 - 6.0) ** 2 / 2.0)
        assert gw[0][0, 0] == pytest.approx((6.0 - 1.0) * 3.0)
        assert gb[0][0] == pytest.approx(5.0)

    @pytest.mark.parametrize("dims", [[13, 32, 32, 16], [5, 8, 4]])
    def test_finite_differences(self, dims):
        rng = RngStream(9, "fd")
        net = make_net(dims, seed=9)
        batch = random_batch(net, rng, 8)
        targets = rng.standard_normal(8)
        _, (gw, gb) = loss_and_grads(net, batch, targets)
        h = 1e-5
        for params, grads in ((net.weights, gw), (net.biases, gb)):
            for arr, grad in zip(params, grads):
                flat = arr.reshape(-1)
                gflat = grad.reshape(-1)
                idx = RngStream(10, "pick").choice(flat.size, min(20, flat.size), replace=False)
                for i in idx:
                    orig = flat[i]
                    flat[i] = orig + h
                    lp, _ = loss_and_grads(net, batch, targets)
                    flat[i] = orig - h
                    lm, _ = loss_and_grads(net, batch, targets)
                    flat[i] = orig
                    fd = (lp - lm) / (2 * h)
                    denom = max(abs(fd), abs(gflat[i]), 1e-8)
                    assert abs(fd - gflat[i]) / denom <= 1e-4

    def test_one_small_step_decreases_loss(self):
        net = make_net([6, 12, 12, 4], seed=11)
        batch = random_batch(net, RngStream(11, "b"), 16)
        targets = RngStream(12, "t").standard_normal(16)
        loss0, (gw, gb) = loss_and_grads(net, batch, targets)
        for w, g in zip(net.weights, gw):
            w -= 1e-6 * g
        for b, g in zip(net.biases, gb):
            b -= 1e-6 * g
        loss1, _ = loss_and_grads(net, batch, targets)
        assert loss1 < loss0


class TestAdam:
    def test_zero_grads_no_change(self):
        net = make_net([3, 4], seed=13)
        before = [p.copy() for p in net.params]
        state = AdamState(net.params)
        adam_step(net.params, [np.zeros_like(p) for p in net.params], state, lr=0.1)
        for b, p in zip(before, net.params):
            assert np.array_equal(b, p)

    def test_first_step_closed_form(self):
        # bias correction makes m_hat = g, v_hat = g^2 on step one:
        # delta = lr * g / (|g| + eps)
        p = np.array([1.0, -2.0, 3.0])
        g = np.array([0.5, -0.25, 0.0])
        state = AdamState([p])
        lr = 0.01
        expected = p - lr * g / (np.abs(g) + state.eps)
        adam_step([p], [g], state, lr)
        assert np.allclose(p, expected, rtol=1e-6)

    def test_determinism(self):
        def run():
            net = make_net([4, 8, 8, 3], seed=14)
            state = AdamState(net.params)
            rng = RngStream(15, "adam")
            for _ in range(10):
                batch = random_batch(net, rng, 8)
                targets = rng.standard_normal(8)
                _, (gw, gb) = loss_and_grads(net, batch, targets)
                adam_step(net.params, gw + gb, state, lr=1e-3)
            return [p.copy() for p in net.params]

        a, b = run(), run()
        for x, y in zip(a, b):
            assert np.array_equal(x, y)


class TestTargetSync:
    def test_sync_copies(self):
        rng = RngStream(16, "pair")
        pair = QNetworkPair([4, 8, 8, 3], RngStream(16, "init"), 100, 8, 0.5, 10)
        for e in random_batch(pair.trained, rng, 20):
            pair.replay.push(e)
        for _ in range(3):
            pair.train_step(rng, lr=1e-3)
        s = rng.standard_normal(4)
        assert not np.allclose(
            forward(pair.trained, s), forward(pair.target, s)
        )
        pair.sync_target()
        for _ in range(5):
            s = rng.standard_normal(4)
            assert np.array_equal(
                forward(pair.trained, s), forward(pair.target, s)
            )

    def test_cadence_120(self):
        rng = RngStream(17, "pair")
        pair = QNetworkPair([3, 4, 4, 2], RngStream(17, "init"), 500, 4, 0.1, 120)
        for e in random_batch(pair.trained, rng, 30):
            pair.replay.push(e)
        synced_at = []
        for step in range(1, 245):
            pair.train_step(rng, lr=1e-4)
            if all(
                np.array_equal(a, b)
                for a, b in zip(pair.trained.params, pair.target.params)
            ):
                synced_at.append(step)
        assert synced_at == [120, 240]


class TestSchedules:
    def test_t_zero(self):
        assert schedule_values(0) == (0.7, 5e-3)

    def test_eps_floor(self):
        eps, _ = schedule_values(10_000_000)
        assert eps == 0.001

    def test_lr_first_step(self):
        _, lr = schedule_values(1)
        assert lr == pytest.approx(5e-3 / (1 + 1e-4))

    def test_monotone(self):
        s = Schedules()
        values = [schedule_values(t, s) for t in range(0, 5000, 100)]
        eps_seq = [v[0] for v in values]
        lr_seq = [v[1] for v in values]
        assert all(a >= b for a, b in zip(eps_seq, eps_seq[1:]))
        assert all(a > b for a, b in zip(lr_seq, lr_seq[1:]))

    def test_domain(self):
        with pytest.raises(DomainError):
            schedule_values(-1)


class TestReplayBuffer:
    def test_fifo_eviction(self):
        buf = ReplayBuffer(5)
        for i in range(6):
            buf.push(i)
        assert list(buf._items) == [1, 2, 3, 4, 5]

    def test_sample_full_is_permutation(self):
        buf = ReplayBuffer(8)
        for i in range(8):
            buf.push(i)
        got = buf.sample(8, RngStream(18, "s"))
        assert sorted(got) == list(range(8))

    def test_underfull(self):
        buf = ReplayBuffer(8)
        buf.push(1)
        with pytest.raises(NotReadyError):
            buf.sample(2, RngStream(19, "s"))

    def test_uniform_sampling(self):
        buf = ReplayBuffer(20)
        for i in range(20):
            buf.push(i)
        rng = RngStream(20, "s")
        counts = np.zeros(20)
        trials = 20_000
        for _ in range(trials):
            for v in buf.sample(2, rng):
                counts[v] += 1
        # chi-squared against uniform: 19 dof, generous threshold
        expected = trials * 2 / 20
        chi2 = np.sum((counts - expected) ** 2 / expected)
        assert chi2 < 43.8  # p ~ 0.001 for 19 dof

    def test_never_exceeds_capacity(self):
        buf = ReplayBuffer(3)
        for i in range(100):
            buf.push(i)
            assert len(buf) <= 3


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        net = make_net([13, 32, 32, 16], seed=21)
        path = tmp_path / "weights.npz"
        save_checkpoint(net, path)
        loaded = load_checkpoint(path)
        assert loaded.dims == net.dims
        for a, b in zip(net.params, loaded.params):
            assert np.array_equal(a, b)

    def test_forward_identical(self, tmp_path):
        net = make_net([5, 8, 8, 4], seed=22)
        path = tmp_path / "weights.npz"
        save_checkpoint(net, path)
        loaded = load_checkpoint(path)
        s = RngStream(23, "x").standard_normal(5)
        assert np.array_equal(forward(net, s), forward(loaded, s))
