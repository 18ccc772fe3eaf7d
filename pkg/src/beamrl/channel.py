"""Geometric multipath channel with first-order Gauss-Markov aging.

Each user's channel is a sum of L planar paths over uniform linear arrays
at both ends.  Path angles are drawn once per scheduling epoch; only the
complex path gains evolve from slot to slot, with correlation coefficient
rho given by the zeroth-order Bessel function of the Doppler-slot product
(Jakes' model).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .numerics import bessel_j0, cgauss


@dataclass
class UserGeometry:
    """Static geometry of one user: range plus per-path mean angles/spreads."""

    distance_m: float
    mean_aoa: np.ndarray  # (L,) radians
    mean_aod: np.ndarray  # (L,) radians
    spread_aoa: float  # radians
    spread_aod: float  # radians

    def __post_init__(self):
        self.mean_aoa = np.asarray(self.mean_aoa, dtype=float)
        self.mean_aod = np.asarray(self.mean_aod, dtype=float)
        if self.distance_m <= 0:
            raise DomainError("distance must be positive")
        if self.spread_aoa < 0 or self.spread_aod < 0:
            raise DomainError("angular spreads must be nonnegative")
        if self.mean_aoa.shape != self.mean_aod.shape or self.mean_aoa.ndim != 1:
            raise ShapeError("mean angle lists must be equal-length 1-D")


@dataclass
class PathState:
    """Per-path complex gains and the (frozen) realized angles."""

    alphas: np.ndarray  # (L,) complex
    aoas: np.ndarray  # (L,) radians
    aods: np.ndarray  # (L,) radians

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=complex)
        self.aoas = np.asarray(self.aoas, dtype=float)
        self.aods = np.asarray(self.aods, dtype=float)
        if not (len(self.alphas) == len(self.aoas) == len(self.aods)):
            raise ShapeError("alphas/aoas/aods must have equal length")


@dataclass
class LargeScale:
    """Large-scale fading: path loss plus realized shadowing, in dB."""

    eta_db: float  # total large-scale attenuation (path loss + shadowing)
    shadow_db: float  # the log-normal term alone, for bookkeeping

    @property
    def gain_linear(self):
        return 10.0 ** (-self.eta_db / 10.0)


@dataclass
class ChannelRealization:
    """All users' channel matrices for one slot, shape (K, N, M)."""

    slot: int
    per_user: np.ndarray

    def __post_init__(self):
        self.per_user = np.asarray(self.per_user, dtype=complex)
        if self.per_user.ndim != 3:
            raise ShapeError("per_user must be (K, N, M)")


def jakes_rho(f_d_max, delta_t):
    """Slot-to-slot correlation coefficient J0(2 pi f_d delta_t)."""
    if f_d_max < 0 or delta_t <= 0:
        raise DomainError("need f_d_max >= 0 and delta_t > 0")
    return bessel_j0(2.0 * math.pi * f_d_max * delta_t)


def _steering(count, phi):
    if count < 1:
        raise DomainError("antenna count must be >= 1")
    # half-wavelength ULA: entry p = exp(j*pi*p*cos(phi)) / sqrt(count)
    p = np.arange(count)
    return np.exp(1j * math.pi * p * math.cos(phi)) / math.sqrt(count)


def steering_tx(m, phi_d):
    """Unit-norm transmit steering vector of length m for departure angle."""
    return _steering(m, phi_d)


def steering_rx(n, phi_a):
    """Unit-norm receive steering vector of length n for arrival angle."""
    return _steering(n, phi_a)


def path_loss_db(d, d0, l0_db, omega):
    """Log-distance path loss L(d0) + 10*omega*log10(d/d0)."""
    if d0 <= 0 or d < d0:
        raise DomainError(f"need d >= d0 > 0, got d={d}, d0={d0}")
    return l0_db + 10.0 * omega * math.log10(d / d0)


def init_user(rng, geometry, l):
    """Draw a fresh PathState: CN(0,1) gains, angles uniform in the spread."""
    if l < 1:
        raise DomainError("path count must be >= 1")
    if len(geometry.mean_aoa) != l:
        raise ShapeError(
            f"geometry holds {len(geometry.mean_aoa)} angles, expected {l}"
        )
    alphas = cgauss(rng, l)
    aoas = geometry.mean_aoa + rng.uniform(
        -geometry.spread_aoa / 2.0, geometry.spread_aoa / 2.0, l
    )
    aods = geometry.mean_aod + rng.uniform(
        -geometry.spread_aod / 2.0, geometry.spread_aod / 2.0, l
    )
    return PathState(alphas=alphas, aoas=aoas, aods=aods)


def evolve(state, rho, rng):
    """One Gauss-Markov step: alpha' = rho*alpha + sqrt(1-rho^2)*CN(0,1)."""
    if abs(rho) > 1.0:
        raise DomainError(f"|rho| must be <= 1, got {rho}")
    innovation = cgauss(rng, len(state.alphas))
    alphas = rho * state.alphas + math.sqrt(1.0 - rho * rho) * innovation
    return PathState(alphas=alphas, aoas=state.aoas, aods=state.aods)


def assemble(state, large, m, n, l):
    """Build the N x M channel sqrt(eta*M*N/L) * sum_l alpha_l u_l v_l^H."""
    if len(state.alphas) != l:
        raise ShapeError(f"state holds {len(state.alphas)} paths, expected {l}")
    scale = math.sqrt(large.gain_linear * m * n / l)
    h = np.zeros((n, m), dtype=complex)
    for alpha, aoa, aod in zip(state.alphas, state.aoas, state.aods):
        u = steering_rx(n, aoa)
        v = steering_tx(m, aod)
        h += alpha * np.outer(u, v.conj())
    return scale * h


def steering_matrices(state, m, n):
    """Stacked steering vectors (N, L) and (M, L) for a frozen angle set.

    Angles never change between scheduling epochs, so the per-slot channel
    is just a gain-weighted product of these cached matrices.
    """
    u_mat = np.stack([steering_rx(n, a) for a in state.aoas], axis=1)
    v_mat = np.stack([steering_tx(m, a) for a in state.aods], axis=1)
    return u_mat, v_mat


def assemble_cached(alphas, u_mat, v_mat, large, l):
    """assemble() with precomputed steering matrices; one matmul per slot."""
    n, m = u_mat.shape[0], v_mat.shape[0]
    scale = math.sqrt(large.gain_linear * m * n / l)
    return scale * ((u_mat * alphas) @ v_mat.conj().T)


def sample_geometry(rng, l, distance_m, spread_aoa, spread_aod):
    """Draw one user's geometry: per-path mean angles uniform over [0, 2pi)."""
    return UserGeometry(
        distance_m=distance_m,
        mean_aoa=rng.uniform(0.0, 2.0 * math.pi, l),
        mean_aod=rng.uniform(0.0, 2.0 * math.pi, l),
        spread_aoa=spread_aoa,
        spread_aod=spread_aod,
    )


def sample_large_scale(rng, distance_m, d0_m, l0_db, omega, beta_db):
    """Path loss at the user's range plus one log-normal shadowing draw.

    Shadowing is redrawn only at scheduling epochs, never per slot.
    """
    shadow = float(rng.normal(0.0, beta_db)) if beta_db > 0 else 0.0
    pl = path_loss_db(distance_m, d0_m, l0_db, omega)
    return LargeScale(eta_db=pl + shadow, shadow_db=shadow)
