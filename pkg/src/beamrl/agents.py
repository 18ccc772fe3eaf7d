"""Multi-agent DQN training loops: per-stream, per-user, and central.

The three topologies differ only in who owns a trained/target pair and a
replay pool:

* per-stream ("ddrl"): every stream (k, n) trains privately;
* per-user ("pdrl"): the Ns streams of user k share one pair and pool;
* central ("cdrl"): all streams share a single pair and pool.

Owner substream labels are keyed by the owner's first stream so that the
reduction laws hold bit-for-bit: per-user with Ns=1 replays per-stream,
per-user with K=1 replays central, and per-stream equals central when
K = Ns = 1.  Acting is always per stream with the owner's current
trained weights (weight broadcast by sharing).
"""

from dataclasses import dataclass

import numpy as np

from .dqn import QNetworkPair, Schedules, act
from .env import Experience, MimoEnv
from .errors import ConfigError

TOPOLOGIES = ("ddrl", "cdrl", "pdrl")


@dataclass
class SlotLog:
    slot: int
    average_rate: float
    per_user: np.ndarray  # (K,)
    rewards: np.ndarray  # (K, Ns)
    penalties: np.ndarray  # (K, Ns)
    eps: float
    lr: float
    singular: bool = False


@dataclass
class OwnerGroup:
    label: str
    streams: list
    pair: QNetworkPair
    sample_rng: object


def _owner_partition(topology, k, n_s):
    if topology == "ddrl":
        return [[(kk, nn)] for kk in range(k) for nn in range(n_s)]
    if topology == "pdrl":
        return [[(kk, nn) for nn in range(n_s)] for kk in range(k)]
    if topology == "cdrl":
        return [[(kk, nn) for kk in range(k) for nn in range(n_s)]]
    raise ConfigError(f"unknown topology {topology!r}")


class DrlTrainer:
    """Runs one DQN topology against a seeded environment."""

    def __init__(self, cfg, topology, rng, env=None):
        if topology not in TOPOLOGIES:
            raise ConfigError(f"unknown topology {topology!r}")
        self.cfg = cfg
        self.topology = topology
        self.env = env if env is not None else MimoEnv(cfg, rng.substream("env"))
        self.schedules = Schedules(
            eps_start=cfg.eps_start,
            eps_min=cfg.eps_min,
            eps_decay=cfg.eps_decay,
            lr_start=cfg.lr_start,
            lr_decay=cfg.lr_decay,
        )
        dims = [cfg.state_length, cfg.hidden1, cfg.hidden2, cfg.num_actions]
        self.owners = []
        self.owner_of = {}
        for streams in _owner_partition(topology, cfg.k, cfg.n_s):
            label = f"{streams[0][0]}.{streams[0][1]}"
            pair = QNetworkPair(
                dims,
                rng.substream(f"drl/init/{label}"),
                replay_capacity=cfg.replay_capacity,
                batch_size=cfg.batch_size,
                gamma=cfg.discount,
                sync_every=cfg.target_sync,
            )
            group = OwnerGroup(
                label=label,
                streams=streams,
                pair=pair,
                sample_rng=rng.substream(f"drl/replay/{label}"),
            )
            self.owners.append(group)
            for s in streams:
                self.owner_of[s] = group
        self.explore_rng = {
            (kk, nn): rng.substream(f"drl/explore/{kk}.{nn}")
            for (kk, nn) in self.env.streams
        }
        self.slots_run = 0
        self.update_count = 0

    def inference_net(self, stream):
        """The net a stream acts with: its owner's current trained weights."""
        return self.owner_of[stream].pair.trained

    def run(self, slots, reschedule_at=(), progress=None):
        """Advance the environment for `slots` slots, training throughout."""
        cfg = self.cfg
        resched = set(reschedule_at)
        log = []
        states = None
        for _ in range(slots):
            t = self.slots_run
            if t in resched and t > 0:
                self.env.reschedule()
                states = None
            warm = t < cfg.warmup_slots
            eps = 1.0 if warm else self.schedules.epsilon(t)
            lr = self.schedules.lr(t)

            actions = {}
            for stream in self.env.streams:
                rng = self.explore_rng[stream]
                if states is None:
                    actions[stream] = int(rng.integers(self.env.space.size))
                else:
                    actions[stream] = act(
                        self.inference_net(stream), states[stream], eps, rng
                    )
            rewards, next_states, report = self.env.step(actions)

            if states is not None and next_states is not None:
                for stream in self.env.streams:
                    self.owner_of[stream].pair.replay.push(
                        Experience(
                            s=states[stream],
                            a=actions[stream],
                            r=rewards[stream].reward,
                            s_next=next_states[stream],
                        )
                    )
            if not warm:
                for group in self.owners:
                    if group.pair.can_train():
                        for _ in range(cfg.updates_per_slot):
                            group.pair.train_step(group.sample_rng, lr)
                            self.update_count += 1

            record = self.env.history[-1]
            log.append(
                SlotLog(
                    slot=t,
                    average_rate=report.average,
                    per_user=report.per_user.copy(),
                    rewards=record.rewards.copy(),
                    penalties=record.penalties.copy(),
                    eps=eps,
                    lr=lr,
                )
            )
            states = next_states
            self.slots_run += 1
        return log


def _run_topology(topology, config, rng, slots=None, reschedule_at=(), progress=None):
    trainer = DrlTrainer(config, topology, rng)
    n = config.total_slots if slots is None else slots
    if progress is None:
        return trainer.run(n, reschedule_at=reschedule_at)
    # chunked so callers can observe progress on long runs
    log = []
    chunk = max(1, min(500, n))
    done = 0
    while done < n:
        take = min(chunk, n - done)
        log.extend(trainer.run(take, reschedule_at=reschedule_at))
        done += take
        progress(done, n)
    return log


def run_ddrl(config, rng, slots=None, reschedule_at=(), progress=None):
    """Per-stream training: K*Ns private pairs and pools."""
    return _run_topology("ddrl", config, rng, slots, reschedule_at, progress)


def run_cdrl(config, rng, slots=None, reschedule_at=(), progress=None):
    """Central training: one shared pair and pool, weights broadcast."""
    return _run_topology("cdrl", config, rng, slots, reschedule_at, progress)


def run_pdrl(config, rng, slots=None, reschedule_at=(), progress=None):
    """Per-user training: K pairs, each fed by that user's streams."""
    return _run_topology("pdrl", config, rng, slots, reschedule_at, progress)
