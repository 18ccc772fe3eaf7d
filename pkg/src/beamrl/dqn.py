"""Deep Q-network machinery written directly on numpy arrays.

A small fully connected net (two rectifier hidden layers, linear output)
maps the delayed-feedback state to one Q-value per action.  Gradients are
hand-derived and verified against finite differences in the test suite;
squared TD error is kept verbatim (no Huber) and double precision is used
throughout so runs are bit-reproducible from a seed.
"""

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotReadyError, ShapeError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class Mlp:
    """Fully connected net; weights[i] has shape (fan_in, fan_out)."""

    def __init__(self, dims, rng=None):
        if len(dims) < 2:
            raise ShapeError("need at least input and output dims")
        self.dims = list(int(d) for d in dims)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                bound = math.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-bound, bound, (fan_in, fan_out))
            self.weights.append(np.asarray(w, dtype=float))
            self.biases.append(np.zeros(fan_out))

    @property
    def params(self):
        return self.weights + self.biases

    def copy(self):
        dup = Mlp(self.dims)
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    def load_from(self, other):
        if self.dims != other.dims:
            raise ShapeError(f"dims differ: {self.dims} vs {other.dims}")
        for dst, src in zip(self.params, other.params):
            dst[...] = src

    def forward(self, x):
        return self._forward_cached(x)[0]

    def _forward_cached(self, x):
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.dims[0]:
            raise ShapeError(
                f"input length {x.shape[1]} != net input dim {self.dims[0]}"
            )
        pre = []
        post = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            h = z if i == last else np.maximum(z, 0.0)
            post.append(h)
        return (h[0] if squeeze else h), (pre, post)


def forward(net, s):
    """Q-values for one state (or a batch of states)."""
    return net.forward(s)


def act(net, s, eps, rng):
    """Epsilon-greedy action; greedy ties break to the lowest index."""
    if not 0.0 <= eps <= 1.0:
        raise DomainError(f"eps must be in [0, 1], got {eps}")
    n_actions = net.dims[-1]
    if rng.uniform() < eps:
        return int(rng.integers(n_actions))
    return int(np.argmax(net.forward(s)))


def _stack_batch(batch):
    s = np.stack([e.s for e in batch])
    a = np.asarray([e.a for e in batch], dtype=int)
    r = np.asarray([e.r for e in batch], dtype=float)
    s_next = np.stack([e.s_next for e in batch])
    return s, a, r, s_next


def td_targets(batch, target_net, gamma):
    """Bootstrapped targets r + gamma * max_a' q(s', a'; target)."""
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma must be in [0, 1], got {gamma}")
    _, _, r, s_next = _stack_batch(batch)
    q_next = target_net.forward(s_next)
    return r + gamma * q_next.max(axis=1)


def loss_and_grads(net, batch, targets):
    """Squared TD error (1/(2 E_b)) sum (r' - q(s,a))^2 and its gradients.

    Gradient flows only through each sample's taken action.  Returns
    (loss, (weight_grads, bias_grads)).
    """
    s, a, _, _ = _stack_batch(batch)
    return _loss_grads_arrays(net, s, a, targets)


def _loss_grads_arrays(net, s, a, targets):
    targets = np.asarray(targets, dtype=float)
    n = s.shape[0]
    q, (pre, post) = net._forward_cached(s)
    err = q[np.arange(n), a] - targets
    loss = float(err @ err) / (2.0 * n)

    delta = np.zeros_like(q)
    delta[np.arange(n), a] = err / n
    weight_grads = [None] * len(net.weights)
    bias_grads = [None] * len(net.biases)
    for i in range(len(net.weights) - 1, -1, -1):
        weight_grads[i] = post[i].T @ delta
        bias_grads[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i].T) * (pre[i - 1] > 0.0)
    return loss, (weight_grads, bias_grads)


class AdamState:
    """First/second moment accumulators shaped like the parameter list."""

    def __init__(self, params, beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


def adam_step(params, grads, state, lr):
    """One bias-corrected Adam update, applied in place; returns params."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    scale = lr / c1  # combined with sqrt(c2) below: lr * m_hat / (sqrt(v_hat)+eps)
    root_c2 = math.sqrt(1.0 - b2**state.t)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        denom = np.sqrt(v)
        denom /= root_c2
        denom += state.eps
        p -= scale * (m / denom)
    return params


class ReplayBuffer:
    """FIFO experience pool; sampling is uniform without replacement."""

    def __init__(self, capacity):
        if capacity < 1:
            raise DomainError("capacity must be >= 1")
        self.capacity = capacity
        self._items = deque(maxlen=capacity)

    def __len__(self):
        return len(self._items)

    def push(self, experience):
        self._items.append(experience)

    def sample(self, n, rng):
        if n > len(self._items):
            raise NotReadyError(
                f"cannot sample {n} from buffer of {len(self._items)}"
            )
        idx = rng.choice(len(self._items), size=n, replace=False)
        items = list(self._items)
        return [items[i] for i in idx]


@dataclass
class Schedules:
    """Exploration and learning-rate decay.

    Epsilon decays exponentially to a floor; the learning rate follows
    inverse-time decay lr(t) = lr(0) / (1 + d_c * t).
    """

    eps_start: float = 0.7
    eps_min: float = 0.001
    eps_decay: float = 1e-4
    lr_start: float = 5e-3
    lr_decay: float = 1e-4

    def epsilon(self, t):
        return max(self.eps_min, self.eps_start * math.exp(-self.eps_decay * t))

    def lr(self, t):
        return self.lr_start / (1.0 + self.lr_decay * t)


def schedule_values(t, schedules=None):
    """(epsilon, learning rate) at slot t."""
    if t < 0:
        raise DomainError("t must be >= 0")
    schedules = schedules or Schedules()
    return schedules.epsilon(t), schedules.lr(t)


class QNetworkPair:
    """Trained + target nets with their optimizer state and replay pool."""

    def __init__(self, dims, rng, replay_capacity, batch_size, gamma, sync_every):
        self.trained = Mlp(dims, rng)
        self.target = self.trained.copy()
        self.adam = AdamState(self.trained.params)
        self.replay = ReplayBuffer(replay_capacity)
        self.batch_size = batch_size
        self.gamma = gamma
        self.sync_every = sync_every
        self.train_steps = 0

    def sync_target(self):
        self.target.load_from(self.trained)

    def can_train(self):
        return len(self.replay) >= self.batch_size

    def train_step(self, rng, lr):
        """Sample a minibatch, descend, and sync the target on cadence."""
        batch = self.replay.sample(self.batch_size, rng)
        s, a, r, s_next = _stack_batch(batch)
        q_next = self.target.forward(s_next)
        targets = r + self.gamma * q_next.max(axis=1)
        loss, (gw, gb) = _loss_grads_arrays(self.trained, s, a, targets)
        adam_step(
            self.trained.weights + self.trained.biases, gw + gb, self.adam, lr
        )
        self.train_steps += 1
        if self.train_steps % self.sync_every == 0:
            self.sync_target()
        return loss


def save_checkpoint(net, path):
    """Write a self-describing weight container (.npz, exact float64)."""
    arrays = {"format_version": np.array([1]), "dims": np.asarray(net.dims)}
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    np.savez(path, **arrays)


def load_checkpoint(path):
    """Load a checkpoint written by save_checkpoint; bit-exact round trip."""
    with np.load(path) as data:
        version = int(data["format_version"][0])
        if version != 1:
            raise ShapeError(f"unsupported checkpoint version {version}")
        net = Mlp(list(data["dims"]))
        for i in range(len(net.weights)):
            net.weights[i] = np.asarray(data[f"w{i}"], dtype=float)
            net.biases[i] = np.asarray(data[f"b{i}"], dtype=float)
    return net
