"""Per-stream rate arithmetic: received power, interference, SINR, rates.

All quantities are linear (watts); dBm conversion happens once at config
load.  Transmit power is split uniformly over the K*Ns streams.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CompletenessError, DomainError, ShapeError


@dataclass
class LinkBudget:
    power_w: float
    noise_w: float
    k: int
    n_s: int

    def __post_init__(self):
        if self.power_w <= 0 or self.noise_w <= 0:
            raise DomainError("power and noise must be positive (watts)")
        if self.k < 1 or self.n_s < 1:
            raise DomainError("k and n_s must be >= 1")

    @property
    def stream_power(self):
        """Uniform per-stream transmit power P / (K*Ns)."""
        return self.power_w / (self.k * self.n_s)


@dataclass
class BeamAssignment:
    """Unit-norm precoders (K,Ns,M) and combiners (K,Ns,N) for every stream.

    tx_idx / rx_idx carry the codebook indices when the assignment came
    from a codebook policy; continuous policies (zero-forcing) leave them
    as None.
    """

    precoders: np.ndarray
    combiners: np.ndarray
    tx_idx: np.ndarray | None = None
    rx_idx: np.ndarray | None = None

    def __post_init__(self):
        self.precoders = np.asarray(self.precoders, dtype=complex)
        self.combiners = np.asarray(self.combiners, dtype=complex)
        if self.precoders.ndim != 3 or self.combiners.ndim != 3:
            raise ShapeError("precoders/combiners must be (K, Ns, antennas)")
        if self.precoders.shape[:2] != self.combiners.shape[:2]:
            raise CompletenessError(
                "precoders and combiners must cover the same (K, Ns) streams"
            )

    @property
    def k(self):
        return self.precoders.shape[0]

    @property
    def n_s(self):
        return self.precoders.shape[1]

    def precoder(self, k, n):
        return self.precoders[k, n]

    def combiner(self, k, n):
        return self.combiners[k, n]

    def norms_ok(self, tol=1e-9):
        pn = np.linalg.norm(self.precoders, axis=2)
        wn = np.linalg.norm(self.combiners, axis=2)
        return np.all(np.abs(pn - 1.0) <= tol) and np.all(np.abs(wn - 1.0) <= tol)


@dataclass
class RateReport:
    per_stream: np.ndarray  # (K, Ns) bits/s/Hz
    per_user: np.ndarray  # (K,)
    average: float
    sum: float = field(default=0.0)

    def __post_init__(self):
        self.per_stream = np.asarray(self.per_stream, dtype=float)
        self.per_user = np.asarray(self.per_user, dtype=float)
        if self.sum == 0.0:
            self.sum = float(self.per_user.sum())


def _vec(x, name, length=None):
    x = np.asarray(x).reshape(-1)
    if length is not None and x.shape[0] != length:
        raise ShapeError(f"{name} has length {x.shape[0]}, expected {length}")
    return x


def received_power(w, h, p, budget):
    """Per-stream received signal power (P/KNs) * |w^H H p|^2."""
    h = np.asarray(h)
    if h.ndim != 2:
        raise ShapeError("h must be an N x M matrix")
    w = _vec(w, "w", h.shape[0])
    p = _vec(p, "p", h.shape[1])
    amp = np.vdot(w, h @ p)  # w^H (H p)
    return budget.stream_power * float(np.abs(amp) ** 2)


def cross_powers(assignment, channels):
    """Raw cross gains X[k,n,j,i] = |w_{k,n}^H H_k p_{j,i}|^2 (no power factor).

    Every interference/SINR/penalty quantity in this module is a linear
    combination of entries of X scaled by the per-stream power.
    """
    k, n_s = assignment.k, assignment.n_s
    flat_p = assignment.precoders.reshape(k * n_s, -1)
    x = np.empty((k, n_s, k, n_s), dtype=float)
    for kk in range(k):
        eff = assignment.combiners[kk].conj() @ channels[kk]  # (Ns, M)
        amps = eff @ flat_p.T  # (Ns, K*Ns)
        x[kk] = np.abs(amps).reshape(n_s, k, n_s) ** 2
    return x


def inter_stream_interference(k, n, assignment, h_k, budget):
    """Interference on stream (k,n) from the same user's other streams."""
    total = 0.0
    for i in range(assignment.n_s):
        if i == n:
            continue
        total += received_power(
            assignment.combiner(k, n), h_k, assignment.precoder(k, i), budget
        )
    return total


def multi_user_interference(k, n, assignment, h_k, budget):
    """Interference on stream (k,n) from every other user's streams."""
    total = 0.0
    for j in range(assignment.k):
        if j == k:
            continue
        for i in range(assignment.n_s):
            total += received_power(
                assignment.combiner(k, n), h_k, assignment.precoder(j, i), budget
            )
    return total


def sinr(k, n, assignment, h_k, budget):
    """SINR of stream (k,n): signal over interference plus ||w||^2 sigma^2."""
    w = assignment.combiner(k, n)
    signal = received_power(w, h_k, assignment.precoder(k, n), budget)
    interference = inter_stream_interference(
        k, n, assignment, h_k, budget
    ) + multi_user_interference(k, n, assignment, h_k, budget)
    noise = float(np.vdot(w, w).real) * budget.noise_w
    return signal / (interference + noise)


def stream_rate(sinr_value):
    """Shannon stream rate log2(1 + SINR) in bits/s/Hz."""
    if sinr_value < 0:
        raise DomainError(f"SINR must be nonnegative, got {sinr_value}")
    return math.log2(1.0 + sinr_value)


def slot_metrics(assignment, channels, budget):
    """Vectorized per-slot metrics from the cross-gain table.

    Returns (x, signal_w, interference_w, sinr_table, rates) where all
    tables are (K, Ns); interference excludes noise.
    """
    x = cross_powers(assignment, channels)
    k, n_s = assignment.k, assignment.n_s
    ps = budget.stream_power
    idx = np.arange(k * n_s)
    xf = x.reshape(k * n_s, k * n_s)
    signal = ps * xf[idx, idx].reshape(k, n_s)
    interference = ps * (xf.sum(axis=1) - xf[idx, idx]).reshape(k, n_s)
    sinr_table = signal / (interference + budget.noise_w)
    rates = np.log2(1.0 + sinr_table)
    return x, signal, interference, sinr_table, rates


def rate_report(assignment, channels, budget):
    """Aggregate per-stream rates into user rates and the user average."""
    channels = np.asarray(channels, dtype=complex)
    if channels.shape[0] != assignment.k:
        raise CompletenessError(
            f"{channels.shape[0]} channels for {assignment.k} users"
        )
    if assignment.k != budget.k or assignment.n_s != budget.n_s:
        raise CompletenessError("assignment does not cover budget's K x Ns streams")
    _, _, _, _, rates = slot_metrics(assignment, channels, budget)
    per_user = rates.sum(axis=1)
    return RateReport(
        per_stream=rates,
        per_user=per_user,
        average=float(per_user.mean()),
    )
