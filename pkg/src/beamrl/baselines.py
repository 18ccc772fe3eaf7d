"""Benchmark beam policies: zero-forcing, sample-and-hold, random, greedy.

Zero-forcing here means: per-user combiners from the dominant left
singular directions of each H_k, then transmit precoders from the right
pseudo-inverse of the stacked effective rows, column-normalized.  This is
the pinned reading of "zero-forcing channel inversion" for this repo;
with true current channels it nulls all cross-stream interference to
numerical precision.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .codebook import join_action, split_action
from .errors import ConfigError, SingularMatrixError
from .metrics import BeamAssignment, slot_metrics
from .numerics import pseudo_inverse

GREEDY_ACTION_LIMIT = 4096
GREEDY_MAX_SWEEPS = 10


def _canonical_phase(v):
    # Rotate so the largest-magnitude entry is real positive; removes the
    # SVD's arbitrary per-vector phase without changing any |.|^2 metric.
    pivot = v[np.argmax(np.abs(v))]
    if pivot == 0:
        return v
    return v * (pivot.conj() / abs(pivot))


def zf_pcsi(channels, budget):
    """Zero-forcing assignment from the given (current) channels."""
    channels = np.asarray(channels, dtype=complex)
    k, n, m = channels.shape
    n_s = budget.n_s
    combiners = np.zeros((k, n_s, n), dtype=complex)
    rows = np.zeros((k * n_s, m), dtype=complex)
    for kk in range(k):
        u, _, _ = np.linalg.svd(channels[kk])
        for nn in range(n_s):
            w = _canonical_phase(u[:, nn])
            combiners[kk, nn] = w
            rows[kk * n_s + nn] = w.conj() @ channels[kk]
    pinv = pseudo_inverse(rows)  # (M, K*Ns)
    norms = np.linalg.norm(pinv, axis=0)
    if np.any(norms == 0):
        raise SingularMatrixError("zero-forcing produced a null precoder")
    precoders = (pinv / norms).T.reshape(k, n_s, m)
    return BeamAssignment(precoders=precoders, combiners=combiners)


@dataclass
class SampleAndHold:
    """Zero-forcing on the previous slot's channels, applied to the current."""

    last_channels: np.ndarray | None = None

    def __call__(self, channels, budget):
        basis = self.last_channels if self.last_channels is not None else channels
        assignment = zf_pcsi(basis, budget)
        self.last_channels = np.asarray(channels, dtype=complex).copy()
        return assignment

    def reset(self):
        self.last_channels = None


def random_policy(rng, space, cb_t, cb_r, k, n_s):
    """Independent uniform action per stream, mapped through the codebooks."""
    actions = rng.integers(space.size, size=(k, n_s))
    precoders = cb_t.mat[:, actions // space.s_r].transpose(1, 2, 0)
    combiners = cb_r.mat[:, actions % space.s_r].transpose(1, 2, 0)
    return BeamAssignment(
        precoders=precoders,
        combiners=combiners,
        tx_idx=actions // space.s_r,
        rx_idx=actions % space.s_r,
    )


def codeword_gain_tables(channels, cb_t, cb_r):
    """Per-user tables g[k][v, u] = |c_r(v)^H H_k c_t(u)|^2.

    Every cross power between codebook beams is a lookup in these tables,
    which is what makes exhaustive/greedy sweeps affordable.
    """
    channels = np.asarray(channels, dtype=complex)
    tables = []
    for h in channels:
        amps = cb_r.mat.conj().T @ h @ cb_t.mat  # (S_r, S_t)
        tables.append(np.abs(amps) ** 2)
    return tables


@dataclass
class GreedyResult:
    actions: np.ndarray  # (K, Ns) flat action indices
    sum_rate: float
    first_sweep_sum_rate: float
    sweeps: int
    trace: list = field(default_factory=list)  # sum rate after each move


def _sum_rate_from_actions(actions, tables, space, budget):
    k, n_s = actions.shape
    ps = budget.stream_power
    flat = actions.reshape(-1)
    tx = flat // space.s_r
    rx = flat % space.s_r
    total = 0.0
    for kk in range(k):
        for nn in range(n_s):
            v = rx[kk * n_s + nn]
            row = tables[kk][v]  # gains of user kk's combiner v vs any tx beam
            own = ps * row[tx[kk * n_s + nn]]
            interference = ps * row[tx].sum() - own
            total += math.log2(1.0 + own / (interference + budget.noise_w))
    return total


def greedy_beam_selection(channels, cb_t, cb_r, space, budget):
    """Coordinate-ascent beam search maximizing the current sum rate.

    Streams start at action 0 and are swept in fixed (k-major) order,
    each exhaustively picking its best action with the others frozen,
    until a full sweep changes nothing (at most GREEDY_MAX_SWEEPS).  Sum
    rate is non-decreasing across every single move.
    """
    if space.size > GREEDY_ACTION_LIMIT:
        raise ConfigError(
            f"greedy sweep limit exceeded: {space.size} > {GREEDY_ACTION_LIMIT}"
        )
    k, n_s = budget.k, budget.n_s
    tables = codeword_gain_tables(channels, cb_t, cb_r)
    actions = np.zeros((k, n_s), dtype=int)
    current = _sum_rate_from_actions(actions, tables, space, budget)
    trace = []
    first_sweep = None
    sweeps = 0
    for sweep in range(GREEDY_MAX_SWEEPS):
        changed = False
        for kk in range(k):
            for nn in range(n_s):
                best_a, best_rate = int(actions[kk, nn]), current
                for a in range(space.size):
                    if a == actions[kk, nn]:
                        continue
                    trial = actions.copy()
                    trial[kk, nn] = a
                    rate = _sum_rate_from_actions(trial, tables, space, budget)
                    if rate > best_rate:
                        best_a, best_rate = a, rate
                if best_a != actions[kk, nn]:
                    actions[kk, nn] = best_a
                    current = best_rate
                    changed = True
                trace.append(current)
        sweeps = sweep + 1
        if first_sweep is None:
            first_sweep = current
        if not changed:
            break
    result = GreedyResult(
        actions=actions,
        sum_rate=current,
        first_sweep_sum_rate=first_sweep,
        sweeps=sweeps,
        trace=trace,
    )
    return result


def greedy_assignment(channels, cb_t, cb_r, space, budget):
    """Greedy search returning a BeamAssignment (plus the search result)."""
    result = greedy_beam_selection(channels, cb_t, cb_r, space, budget)
    tx = result.actions // space.s_r
    rx = result.actions % space.s_r
    precoders = cb_t.mat[:, tx].transpose(1, 2, 0)
    combiners = cb_r.mat[:, rx].transpose(1, 2, 0)
    assignment = BeamAssignment(
        precoders=precoders, combiners=combiners, tx_idx=tx, rx_idx=rx
    )
    return assignment, result


def exhaustive_best_actions(channels, cb_t, cb_r, space, budget):
    """Joint exhaustive search over all streams' actions (tiny cases only)."""
    k, n_s = budget.k, budget.n_s
    n_streams = k * n_s
    total = space.size**n_streams
    if total > 10**7:
        raise ConfigError(f"joint exhaustive search too large: {total} combos")
    tables = codeword_gain_tables(channels, cb_t, cb_r)
    best_rate = -1.0
    best = None
    actions = np.zeros((k, n_s), dtype=int)
    for combo in range(total):
        rem = combo
        for s in range(n_streams):
            actions[s // n_s, s % n_s] = rem % space.size
            rem //= space.size
        rate = _sum_rate_from_actions(actions, tables, space, budget)
        if rate > best_rate:
            best_rate = rate
            best = actions.copy()
    return best, best_rate
