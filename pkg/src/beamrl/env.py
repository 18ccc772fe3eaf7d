"""Slot-synchronous downlink environment with one-slot feedback delay.

The aging mechanism: agents pick beams using statistics fed back from
slots t-1 and t-2, the channel then advances one Gauss-Markov step, and
the chosen beams meet the fresh channel.  Rewards combine each stream's
own rate with a penalty equal to the rate all other streams would gain if
this stream's interference vanished.
"""

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import channel as ch
from .codebook import ActionSpace, build_codebook, split_action
from .errors import CompletenessError, DomainError, NotReadyError
from .metrics import BeamAssignment, LinkBudget, RateReport, cross_powers, slot_metrics

HISTORY_DEPTH = 3


@dataclass
class RewardBreakdown:
    own_rate: float
    penalty: float
    reward: float


@dataclass
class Experience:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray


@dataclass
class SlotRecord:
    """Everything one slot contributes to later state construction.

    ``x`` holds the same-slot cross gains |w^H H p|^2; ``x_lag`` holds the
    previous slot's beams applied to this slot's channel (zeros on the
    first slot after a (re)schedule, when no previous beams exist).
    """

    slot: int
    channels: np.ndarray  # (K, N, M)
    assignment: BeamAssignment
    report: RateReport
    x: np.ndarray  # (K, Ns, K, Ns)
    x_lag: np.ndarray  # (K, Ns, K, Ns)
    int_noise: np.ndarray  # (K, Ns) interference + noise, watts
    penalties: np.ndarray  # (K, Ns)
    rewards: np.ndarray  # (K, Ns)


def penalty(k, n, assignment, channels, budget):
    """Rate other streams would gain were stream (k,n)'s interference removed.

    For every victim stream (j,i) != (k,n) the hatted rate removes the
    (k,n) precoder's contribution from the victim's interference; the
    penalty is the summed rate improvement, hence always >= 0.
    """
    x, signal, interference, _, rates = slot_metrics(assignment, channels, budget)
    ps = budget.stream_power
    total = 0.0
    for j in range(assignment.k):
        for i in range(assignment.n_s):
            if (j, i) == (k, n):
                continue
            hat_int = interference[j, i] - ps * x[j, i, k, n]
            hat_rate = math.log2(1.0 + signal[j, i] / (hat_int + budget.noise_w))
            total += hat_rate - rates[j, i]
    return total


def reward(k, n, assignment, channels, budget, lam):
    """Per-stream reward: own rate minus lam times the interference penalty."""
    if lam < 0:
        raise DomainError(f"penalty weight must be >= 0, got {lam}")
    _, _, _, _, rates = slot_metrics(assignment, channels, budget)
    pen = penalty(k, n, assignment, channels, budget)
    return RewardBreakdown(
        own_rate=float(rates[k, n]),
        penalty=pen,
        reward=float(rates[k, n]) - lam * pen,
    )


def _penalties_from_tables(x, signal, interference, rates, budget):
    """Vectorized penalty for all acting streams at once, shape (K, Ns)."""
    k, n_s = signal.shape
    s = k * n_s
    ps = budget.stream_power
    xf = x.reshape(s, s)
    sig = signal.reshape(s)
    inter = interference.reshape(s)
    actual = rates.reshape(s)
    # hat[v, a]: victim v's rate with acting stream a's contribution removed
    hat_int = inter[:, None] - ps * xf
    np.fill_diagonal(hat_int, 0.0)  # own gain is not interference; masked below
    hat_int = np.maximum(hat_int, 0.0)  # guard float cancellation
    hat = np.log2(1.0 + sig[:, None] / (hat_int + budget.noise_w))
    delta = hat - actual[:, None]
    np.fill_diagonal(delta, 0.0)
    return delta.sum(axis=0).reshape(k, n_s)


@dataclass
class StateSpec:
    """Layout constants for the delayed-feedback state vector."""

    k: int
    n_s: int
    s_t: int
    s_r: int
    stream_power: float
    noise_w: float
    normalize: bool

    @property
    def length(self):
        return 10 * self.k * self.n_s + 3


def _squash(value, spec):
    # Power-like entries are measured in units of noise power and log
    # squashed; raw watts span ~10 orders of magnitude and would stall
    # training.
    if spec.normalize:
        return math.log10(1.0 + value / spec.noise_w)
    return value


def _index_feature(idx, size, spec):
    if not spec.normalize:
        return float(idx)
    return float(idx) / max(size - 1, 1)


def build_state(k, n, history, spec):
    """Assemble agent (k,n)'s state from the two most recent slot records.

    Layout (length 10*K*Ns + 3):
      [0:5]   own-stream feedback at t-1: received power, precoder index,
              combiner index, rate, interference-plus-noise
      [5:13]  eight interference sums: for u in {1,2} then v in {0,1},
              inter-stream and multi-user sums of |w(t-v-u)^H H(t-u) p(t-v-u)|^2
              (v=1 uses the lagged-beam table of slot t-u)
      [13:]   per other stream (j,i), k-major: indices, rate, own power and
              cross power toward (k,n), at t-1 then t-2 (5 scalars each)
    """
    if len(history) < 2:
        raise NotReadyError(
            f"state needs 2 completed slots, have {len(history)}"
        )
    rec1 = history[-1]  # slot t-1
    rec2 = history[-2]  # slot t-2
    ps = spec.stream_power
    out = np.empty(spec.length, dtype=float)

    a1 = rec1.assignment
    u_idx1 = a1.tx_idx if a1.tx_idx is not None else np.zeros((spec.k, spec.n_s), int)
    v_idx1 = a1.rx_idx if a1.rx_idx is not None else np.zeros((spec.k, spec.n_s), int)

    out[0] = _squash(ps * rec1.x[k, n, k, n], spec)
    out[1] = _index_feature(u_idx1[k, n], spec.s_t, spec)
    out[2] = _index_feature(v_idx1[k, n], spec.s_r, spec)
    out[3] = rec1.report.per_stream[k, n]
    out[4] = _squash(rec1.int_noise[k, n], spec)

    pos = 5
    for rec in (rec1, rec2):
        for table, off in ((rec.x, 0), (rec.x_lag, 1)):
            inter = ps * (table[k, n, k, :].sum() - table[k, n, k, n])
            multi = ps * (table[k, n].sum() - table[k, n, k, :].sum())
            out[pos + off] = _squash(inter, spec)
            out[pos + 2 + off] = _squash(multi, spec)
        pos += 4

    for j in range(spec.k):
        for i in range(spec.n_s):
            if (j, i) == (k, n):
                continue
            for rec in (rec1, rec2):
                a = rec.assignment
                uj = a.tx_idx[j, i] if a.tx_idx is not None else 0
                vj = a.rx_idx[j, i] if a.rx_idx is not None else 0
                out[pos + 0] = _index_feature(uj, spec.s_t, spec)
                out[pos + 1] = _index_feature(vj, spec.s_r, spec)
                out[pos + 2] = rec.report.per_stream[j, i]
                out[pos + 3] = _squash(ps * rec.x[j, i, j, i], spec)
                out[pos + 4] = _squash(ps * rec.x[j, i, k, n], spec)
                pos += 5
    assert pos == spec.length
    return out


class MimoEnv:
    """Sequentially advanced multi-user downlink simulation."""

    def __init__(self, cfg, rng):
        self.cfg = cfg
        self.rng = rng
        self.budget = LinkBudget(
            power_w=cfg.power_w, noise_w=cfg.noise_w, k=cfg.k, n_s=cfg.n_s
        )
        self.rho = ch.jakes_rho(cfg.doppler_hz, cfg.slot_s)
        self.cb_t = build_codebook(cfg.m, cfg.s_t, cfg.num_phases)
        self.cb_r = build_codebook(cfg.n, cfg.s_r, cfg.num_phases)
        self.space = ActionSpace(s_t=cfg.s_t, s_r=cfg.s_r)
        self.state_spec = StateSpec(
            k=cfg.k,
            n_s=cfg.n_s,
            s_t=cfg.s_t,
            s_r=cfg.s_r,
            stream_power=self.budget.stream_power,
            noise_w=cfg.noise_w,
            normalize=cfg.normalize_state,
        )
        self.streams = [(k, n) for k in range(cfg.k) for n in range(cfg.n_s)]
        self.slot = -1
        self.epoch = -1
        self.history = deque(maxlen=HISTORY_DEPTH)
        self._schedule_users()

    # Scheduling --------------------------------------------------------
    def _schedule_users(self):
        self.epoch += 1
        cfg = self.cfg
        self._user_streams = []
        self._geometries = []
        self._large = []
        self._paths = []
        self._steering = []
        for k in range(cfg.k):
            sub = self.rng.substream(f"sched{self.epoch}/user{k}")
            geom = ch.sample_geometry(
                sub, cfg.l_paths, cfg.distance_m,
                cfg.spread_aoa_rad, cfg.spread_aod_rad,
            )
            large = ch.sample_large_scale(
                sub, cfg.distance_m, cfg.ref_distance_m,
                cfg.ref_loss_db, cfg.pathloss_exp, cfg.shadow_std_db,
            )
            paths = ch.init_user(sub, geom, cfg.l_paths)
            self._user_streams.append(sub)
            self._geometries.append(geom)
            self._large.append(large)
            self._paths.append(paths)
            self._steering.append(ch.steering_matrices(paths, cfg.m, cfg.n))

    def reschedule(self):
        """Drop all users for a fresh draw; learned weights are untouched.

        History becomes stale: two warm-up slots are needed before states
        can be built again.
        """
        self._schedule_users()
        self.history.clear()

    @property
    def warmed_up(self):
        return len(self.history) >= 2

    # Slot advancement ---------------------------------------------------
    def _next_channels(self):
        cfg = self.cfg
        mats = np.empty((cfg.k, cfg.n, cfg.m), dtype=complex)
        for k in range(cfg.k):
            self._paths[k] = ch.evolve(self._paths[k], self.rho, self._user_streams[k])
            u_mat, v_mat = self._steering[k]
            mats[k] = ch.assemble_cached(
                self._paths[k].alphas, u_mat, v_mat, self._large[k], cfg.l_paths
            )
        return mats

    def resolve_actions(self, actions):
        """Map per-stream flat action indices to codebook beam vectors."""
        cfg = self.cfg
        tx_idx = np.zeros((cfg.k, cfg.n_s), dtype=int)
        rx_idx = np.zeros((cfg.k, cfg.n_s), dtype=int)
        precoders = np.zeros((cfg.k, cfg.n_s, cfg.m), dtype=complex)
        combiners = np.zeros((cfg.k, cfg.n_s, cfg.n), dtype=complex)
        for (k, n) in self.streams:
            try:
                a = actions[(k, n)] if isinstance(actions, dict) else actions[k][n]
            except (KeyError, IndexError) as exc:
                raise CompletenessError(f"missing action for stream ({k},{n})") from exc
            u, v = split_action(int(a), self.space)
            tx_idx[k, n] = u
            rx_idx[k, n] = v
            precoders[k, n] = self.cb_t.codeword(u)
            combiners[k, n] = self.cb_r.codeword(v)
        return BeamAssignment(
            precoders=precoders, combiners=combiners, tx_idx=tx_idx, rx_idx=rx_idx
        )

    def _advance(self, select):
        """Draw the next channel, resolve the assignment, record the slot."""
        channels = self._next_channels()
        assignment = select(channels, self.history)
        x, signal, interference, _, rates = slot_metrics(
            assignment, channels, self.budget
        )
        per_user = rates.sum(axis=1)
        report = RateReport(
            per_stream=rates, per_user=per_user, average=float(per_user.mean())
        )
        if self.history:
            x_lag = cross_powers(self.history[-1].assignment, channels)
        else:
            x_lag = np.zeros_like(x)
        pens = _penalties_from_tables(x, signal, interference, rates, self.budget)
        rewards = rates - self.cfg.penalty_weight * pens
        self.slot += 1
        record = SlotRecord(
            slot=self.slot,
            channels=channels,
            assignment=assignment,
            report=report,
            x=x,
            x_lag=x_lag,
            int_noise=interference + self.budget.noise_w,
            penalties=pens,
            rewards=rewards,
        )
        self.history.append(record)
        return record

    def step(self, actions):
        """Advance one slot under codebook actions chosen from stale state.

        Returns (rewards, next_states, report): per-stream reward
        breakdowns, the freshly available delayed-feedback states (None
        until two slots of history exist), and the slot's rate report.
        """
        record = self._advance(lambda channels, hist: self.resolve_actions(actions))
        rewards = {
            (k, n): RewardBreakdown(
                own_rate=float(record.report.per_stream[k, n]),
                penalty=float(record.penalties[k, n]),
                reward=float(record.rewards[k, n]),
            )
            for (k, n) in self.streams
        }
        states = self.agent_states() if self.warmed_up else None
        return rewards, states, record.report

    def step_policy(self, select):
        """Advance one slot under an arbitrary assignment policy.

        ``select(channels_t, history)`` sees the new slot's true channels
        (genie policies) and the slot history (delayed policies).
        """
        record = self._advance(select)
        return record

    def agent_states(self):
        """Delayed-feedback state vectors for every stream."""
        return {
            (k, n): build_state(k, n, self.history, self.state_spec)
            for (k, n) in self.streams
        }
