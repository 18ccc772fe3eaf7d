"""Beamsteering codebooks and the joint precoder/combiner action space.

A codebook is a matrix whose columns are constant-modulus beamforming
codewords quantizing beam directions with T available phase values.  An
action picks one transmit codeword and one receive codeword; the flat
action index enumerates the Cartesian product transmit-major.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError


@dataclass
class Codebook:
    """Columns are unit-norm codewords; mat has shape (antennas, size)."""

    mat: np.ndarray
    num_phases: int

    @property
    def antennas(self):
        return self.mat.shape[0]

    @property
    def size(self):
        return self.mat.shape[1]

    def codeword(self, q):
        return self.mat[:, q]


@dataclass(frozen=True)
class ActionSpace:
    """Flat index set over (transmit codeword, receive codeword) pairs."""

    s_t: int
    s_r: int

    @property
    def size(self):
        return self.s_t * self.s_r


def build_codebook(antennas, num_codewords, num_phases):
    """Quantized-direction beamsteering codebook.

    Entry (p, q) = exp(j*(2*pi/T) * floor(p * mod(q + S/2, S) / (S/T))) / sqrt(antennas)
    with S = num_codewords and T = num_phases.  The row index p makes the
    columns steer toward S distinct quantized directions.
    """
    if antennas < 1 or num_codewords < 1:
        raise ConfigError("antennas and num_codewords must be >= 1")
    if num_phases < 2:
        raise ConfigError("num_phases must be >= 2")
    s = float(num_codewords)
    t = float(num_phases)
    if s / t <= 0:
        raise ConfigError("num_codewords / num_phases must be positive")
    p = np.arange(antennas)[:, None]
    q = np.arange(num_codewords)[None, :]
    shifted = np.mod(q + s / 2.0, s)
    phase_step = np.floor(p * shifted / (s / t))
    mat = np.exp(1j * (2.0 * math.pi / t) * phase_step) / math.sqrt(antennas)
    return Codebook(mat=mat, num_phases=num_phases)


def split_action(a, space):
    """Flat action index -> (transmit index, receive index)."""
    if not 0 <= a < space.size:
        raise IndexError(f"action {a} outside [0, {space.size})")
    return a // space.s_r, a % space.s_r


def join_action(tx_index, rx_index, space):
    """(transmit index, receive index) -> flat action index."""
    if not 0 <= tx_index < space.s_t or not 0 <= rx_index < space.s_r:
        raise IndexError(
            f"indices ({tx_index}, {rx_index}) outside "
            f"[0,{space.s_t}) x [0,{space.s_r})"
        )
    return tx_index * space.s_r + rx_index


def beams_for_action(a, space, cb_t, cb_r):
    """Resolve a flat action to (precoder, combiner) codeword vectors."""
    u, v = split_action(a, space)
    return cb_t.codeword(u), cb_r.codeword(v)
