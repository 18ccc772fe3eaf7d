"""Seeded random substreams and the small complex linear-algebra kernel.

Everything downstream (channel generation, beam metrics, DQN training)
draws randomness through :class:`RngStream` so that a run is fully
determined by one 64-bit seed and a tree of substream labels.
"""

import hashlib
import math
import struct

import numpy as np

from .errors import DomainError, ShapeError, SingularMatrixError

COND_LIMIT = 1e12

# Power series is used up to this |x|; the Hankel expansion beyond it is
# only accurate enough (<= ~1e-10 absolute) once |x| > ~9.
_J0_SERIES_CUTOFF = 10.0


class RngStream:
    """A labeled, reproducible random substream.

    The underlying generator is keyed by SHA-256 of ``(seed, label)``, so
    identical (seed, label) pairs replay bit-identical sequences and
    distinct labels are statistically independent by construction.
    A stream is single-owner: never share one between concurrent tasks,
    spawn substreams instead.
    """

    def __init__(self, seed, label="root"):
        self.seed = int(seed)
        self.label = str(label)
        digest = hashlib.sha256(
            f"{self.seed}:{self.label}".encode("utf-8")
        ).digest()
        words = struct.unpack("<4Q", digest[:32])
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(words))
        )

    def substream(self, label):
        """Create an independent child stream labeled ``parent/label``."""
        return RngStream(self.seed, f"{self.label}/{label}")

    # Thin delegations; all consume from this stream's private generator.
    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def choice(self, n, size, replace=True):
        return self._gen.choice(n, size=size, replace=replace)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, label={self.label!r})"


def cgauss(rng, size=None):
    """Circularly-symmetric complex Gaussian CN(0, 1) samples.

    Each component has variance 1/2 so E|z|^2 = 1.
    """
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return (re + 1j * im) / math.sqrt(2.0)


def bessel_j0(x):
    """Bessel function of the first kind, order zero.

    Power series for |x| <= 10, Hankel asymptotic expansion beyond.
    Absolute error <= 1e-9 over |x| <= 50.
    """
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"bessel_j0 requires finite input, got {x}")
    ax = abs(x)
    if ax <= _J0_SERIES_CUTOFF:
        return _j0_series(ax)
    return _j0_asymptotic(ax)


def _j0_series(ax):
    # J0(x) = sum_m (-q)^m / (m!)^2 with q = x^2/4
    q = 0.25 * ax * ax
    term = 1.0
    acc = 1.0
    for m in range(1, 80):
        term *= -q / (m * m)
        acc += term
        if abs(term) < 1e-18 * max(abs(acc), 1e-30):
            break
    return acc


def _j0_asymptotic(ax):
    # J0(x) ~ sqrt(2/(pi x)) [P cos(x - pi/4) - Q sin(x - pi/4)] with
    # P = sum_k (-1)^k c_{2k} x^{-2k}, Q = sum_k (-1)^k c_{2k+1} x^{-2k-1},
    # c_m = c_{m-1} * (-(2m-1)^2) / (8m).  Truncated at the smallest term.
    p_acc = 1.0
    q_acc = 0.0
    c = 1.0
    prev = math.inf
    for m in range(1, 25):
        c *= -((2 * m - 1) ** 2) / (8.0 * m)
        t = c / ax**m
        if abs(t) >= prev:
            break
        prev = abs(t)
        signed = t if (m // 2) % 2 == 0 else -t
        if m % 2:
            q_acc += signed
        else:
            p_acc += signed
    chi = ax - 0.25 * math.pi
    return math.sqrt(2.0 / (math.pi * ax)) * (
        p_acc * math.cos(chi) - q_acc * math.sin(chi)
    )


def _as_2d(a, name):
    a = np.asarray(a)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def matmul(a, b):
    """Matrix product with an explicit inner-dimension check."""
    a = _as_2d(a, "a")
    b = _as_2d(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"inner dimensions disagree: {a.shape} x {b.shape}"
        )
    return a @ b


def hermitian(a):
    """Conjugate transpose."""
    return _as_2d(a, "a").conj().T.copy()


def pseudo_inverse(a):
    """Right pseudo-inverse A^H (A A^H)^-1 of a full-row-rank matrix.

    Raises SingularMatrixError when the matrix is rank deficient or its
    condition number exceeds 1e12; a near-singular stacked channel means a
    degenerate scenario, not something to regularize silently.
    """
    a = _as_2d(a, "a")
    if a.shape[0] > a.shape[1]:
        raise ShapeError(
            f"right inverse needs rows <= cols, got shape {a.shape}"
        )
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise DomainError("pseudo_inverse requires finite entries")
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] == 0.0 or s[0] / s[-1] > COND_LIMIT:
        raise SingularMatrixError(
            f"matrix is singular or ill-conditioned (cond ~ "
            f"{np.inf if s[-1] == 0 else s[0] / s[-1]:.3e})"
        )
    gram = a @ a.conj().T
    rhs = np.eye(a.shape[0], dtype=complex)
    return a.conj().T @ np.linalg.solve(gram, rhs)
