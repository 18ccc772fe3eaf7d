"""Experiment orchestration: paired policy runs, CSV records, summaries.

Every policy listed in a config is run on the same seeded channel
trajectory (channel randomness is drawn from substreams that do not
depend on the policy), so cross-policy comparisons are paired.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .agents import DrlTrainer, SlotLog, TOPOLOGIES
from .baselines import SampleAndHold, greedy_assignment, random_policy, zf_pcsi
from .config import ExperimentConfig  # noqa: F401  (re-export for callers)
from .env import MimoEnv
from .errors import ConfigError, SingularMatrixError
from .numerics import RngStream
from .stats import moving_average


@dataclass
class RunRecord:
    """One (policy, seed) trajectory of per-slot rows."""

    policy: str
    seed: int
    slots: list

    @property
    def average_rates(self):
        return np.array([row.average_rate for row in self.slots])

    @property
    def singular_count(self):
        return sum(1 for row in self.slots if row.singular)


def _baseline_select(policy, env, rng, holder):
    if policy == "zf_pcsi":
        return lambda channels, hist: zf_pcsi(channels, env.budget)
    if policy == "sah":
        return lambda channels, hist: holder(channels, env.budget)
    if policy == "random":
        sub = rng.substream("policy/random")
        return lambda channels, hist: random_policy(
            sub, env.space, env.cb_t, env.cb_r, env.cfg.k, env.cfg.n_s
        )
    if policy == "greedy":
        return lambda channels, hist: greedy_assignment(
            channels, env.cb_t, env.cb_r, env.space, env.budget
        )[0]
    raise ConfigError(f"unknown policy {policy!r}")


def run_baseline(cfg, policy, rng, slots=None, reschedule_at=(), progress=None):
    """Run a non-learning policy over the seeded trajectory."""
    env = MimoEnv(cfg, rng.substream("env"))
    holder = SampleAndHold()
    select = _baseline_select(policy, env, rng, holder)
    n = cfg.total_slots if slots is None else slots
    resched = set(reschedule_at)
    fallback = env.resolve_actions(np.zeros((cfg.k, cfg.n_s), dtype=int))
    previous = None
    log = []
    for t in range(n):
        if t in resched and t > 0:
            env.reschedule()
            holder.reset()
        singular = False

        def wrapped(channels, hist):
            # catch inside the select so a degenerate slot cannot advance
            # the channel twice; hold the previous beams (or the trivial
            # action-0 beams) and the run continues deterministically
            nonlocal singular
            try:
                return select(channels, hist)
            except SingularMatrixError:
                singular = True
                return previous if previous is not None else fallback

        record = env.step_policy(wrapped)
        if not singular:
            previous = record.assignment
        log.append(
            SlotLog(
                slot=t,
                average_rate=record.report.average,
                per_user=record.report.per_user.copy(),
                rewards=record.rewards.copy(),
                penalties=record.penalties.copy(),
                eps=float("nan"),
                lr=float("nan"),
                singular=singular,
            )
        )
        if progress is not None and (t + 1) % 1000 == 0:
            progress(t + 1, n)
    return log


def run_policy(cfg, policy, seed, slots=None, progress=None):
    """Run one policy for one seed; DRL and baselines share channel draws."""
    rng = RngStream(seed)
    reschedule_at = cfg.reschedule_slots
    if policy in TOPOLOGIES:
        trainer = DrlTrainer(cfg, policy, rng)
        n = cfg.total_slots if slots is None else slots
        if progress is None:
            log = trainer.run(n, reschedule_at=reschedule_at)
        else:
            log = []
            done = 0
            while done < n:
                take = min(1000, n - done)
                log.extend(trainer.run(take, reschedule_at=reschedule_at))
                done += take
                progress(done, n)
        return log
    return run_baseline(
        cfg, policy, rng, slots=slots, reschedule_at=reschedule_at, progress=progress
    )


def run_experiment(cfg, slots=None, progress=None):
    """Run every configured (seed, policy) pair; returns RunRecords."""
    records = []
    for seed in cfg.seeds:
        for policy in cfg.policies:
            cb = None
            if progress is not None:
                cb = lambda done, total, p=policy, s=seed: progress(p, s, done, total)
            log = run_policy(cfg, policy, seed, slots=slots, progress=cb)
            records.append(RunRecord(policy=policy, seed=seed, slots=log))
    return records


# CSV ------------------------------------------------------------------


def _fmt(x):
    # repr round-trips float64 exactly and never uses locale separators
    return repr(float(x))


def csv_header(k, n_s):
    cols = ["policy", "seed", "slot", "avg_rate"]
    cols += [f"rate_user_{i}" for i in range(k)]
    cols += [f"reward_{kk}_{nn}" for kk in range(k) for nn in range(n_s)]
    cols += [f"penalty_{kk}_{nn}" for kk in range(k) for nn in range(n_s)]
    cols += ["eps", "lr", "singular"]
    return cols


def records_to_csv(records, k, n_s):
    """Render records as CSV text (deterministic order and formatting)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header(k, n_s))
    for rec in records:
        for row in rec.slots:
            out = [rec.policy, str(rec.seed), str(row.slot), _fmt(row.average_rate)]
            out += [_fmt(v) for v in row.per_user]
            out += [_fmt(v) for v in row.rewards.reshape(-1)]
            out += [_fmt(v) for v in row.penalties.reshape(-1)]
            out += [_fmt(row.eps), _fmt(row.lr), "1" if row.singular else "0"]
            writer.writerow(out)
    return buf.getvalue()


def emit_csv(records, path, k, n_s):
    text = records_to_csv(records, k, n_s)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def load_csv(path):
    """Read an emitted CSV back into dict rows (floats where numeric)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return parse_csv(fh.read())


def parse_csv(text):
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for raw in reader:
        row = {}
        for key, value in raw.items():
            if key == "policy":
                row[key] = value
            elif key in ("seed", "slot", "singular"):
                row[key] = int(value)
            else:
                row[key] = float(value)
        rows.append(row)
    return rows


def summarize(records, ma_window=500):
    """Per-(policy, seed) summary: mean rate, final moving average, tail mean."""
    out = []
    for rec in records:
        rates = rec.average_rates
        ma = moving_average(rates, ma_window) if rates.size else rates
        out.append(
            {
                "policy": rec.policy,
                "seed": rec.seed,
                "slots": int(rates.size),
                "mean_rate": float(rates.mean()) if rates.size else 0.0,
                "final_ma_rate": float(ma[-1]) if rates.size else 0.0,
                "singular_slots": rec.singular_count,
            }
        )
    return out
