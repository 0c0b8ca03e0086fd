"""System parameters and i.i.d. Rayleigh block-fading realizations.

Every random stream is keyed by a ``numpy.random.SeedSequence`` whose spawn
key names the purpose (channel or codebook) and the counters involved, so a
trial's channels depend only on ``(seed, point, trial)`` and never on how
trials are distributed over workers.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TauMode",
    "SystemParams",
    "NetworkRealization",
    "sample_realization",
    "sample_batch",
    "stream",
    "CHANNEL_DOMAIN",
    "CODEBOOK_DOMAIN",
    "ASYMPTOTE_DOMAIN",
]

CHANNEL_DOMAIN = 0
CODEBOOK_DOMAIN = 1
ASYMPTOTE_DOMAIN = 2
ORACLE_DOMAIN = 3


def stream(seed, *key):
    """Generator for the counter tuple ``key`` under the master ``seed``."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def complex_gaussian(rng, shape):
    """i.i.d. CN(0, 1) samples: real and imaginary parts each of variance 1/2."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


@dataclass(frozen=True)
class TauMode:
    """Interference margin rule: a fixed ``tau`` or ``tau = coeff * p_max``."""

    kind: str = "fixed"
    value: float = 2.0

    def __post_init__(self):
        if self.kind not in ("fixed", "proportional"):
            raise ValueError(f"unknown tau mode {self.kind!r}")
        if not self.value > 0:
            raise ValueError("tau must be positive")

    def resolve(self, p_max):
        return self.value if self.kind == "fixed" else self.value * p_max

    def __str__(self):
        return f"{self.value:g}" if self.kind == "fixed" else f"{self.value:g}*p_max"


@dataclass(frozen=True)
class SystemParams:
    """Antenna/stream geometry plus the link-budget scalars (linear scale)."""

    l_antennas: int = 6
    m_streams: int = 2
    n_inner: int = 3
    b_bits: int = 6
    nu: float = 0.2
    p_max: float = 1000.0
    theta: float = 1.0
    tau_mode: TauMode = field(default_factory=TauMode)

    def __post_init__(self):
        L, M, N = self.l_antennas, self.m_streams, self.n_inner
        if min(L, M, N) < 1:
            raise ValueError("l_antennas, m_streams and n_inner must be positive")
        if L < 2 * M:
            raise ValueError(f"need l_antennas >= 2*m_streams, got L={L}, M={M}")
        if not M <= N <= L - M:
            raise ValueError(f"need m_streams <= n_inner <= l_antennas - m_streams, got N={N} (M={M}, L={L})")
        if self.b_bits < 1:
            raise ValueError("b_bits must be >= 1")
        if not 0 < self.nu <= 1:
            raise ValueError(f"nu must lie in (0, 1], got {self.nu}")
        if not self.p_max > 0:
            raise ValueError("p_max must be positive")
        if not self.theta > 0:
            raise ValueError("theta must be positive")

    @property
    def tau(self):
        return self.tau_mode.resolve(self.p_max)


@dataclass(frozen=True)
class NetworkRealization:
    """One fading block (or a stack of them).

    ``h[..., m, n, :, :]`` is the unscaled fading from transmitter ``n`` to
    receiver ``m`` (0-based).  The coupling factor ``nu`` is applied as a
    power factor by the metric formulas, not stored in ``h``.
    """

    h: np.ndarray
    nu: float

    def __post_init__(self):
        if self.h.shape[-4:-2] != (2, 2) or self.h.shape[-1] != self.h.shape[-2]:
            raise ValueError(f"expected (..., 2, 2, L, L) channels, got {self.h.shape}")
        if not 0 < self.nu <= 1:
            raise ValueError("nu must lie in (0, 1]")

    h11 = property(lambda self: self.h[..., 0, 0, :, :])
    h12 = property(lambda self: self.h[..., 0, 1, :, :])
    h21 = property(lambda self: self.h[..., 1, 0, :, :])
    h22 = property(lambda self: self.h[..., 1, 1, :, :])

    def __getitem__(self, idx):
        return NetworkRealization(self.h[idx], self.nu)

    def __len__(self):
        return self.h.shape[0]


def sample_realization(params, seed, trial_index, point=0):
    """Draw the four ``L x L`` CN(0,1) channel matrices for one trial."""
    L = params.l_antennas
    rng = stream(seed, CHANNEL_DOMAIN, point, trial_index)
    return NetworkRealization(complex_gaussian(rng, (2, 2, L, L)), params.nu)


def sample_batch(params, seed, trials, point=0):
    """Stack of realizations for the given trial indices (same draws as one by one)."""
    L = params.l_antennas
    trials = list(trials)
    h = np.empty((len(trials), 2, 2, L, L), dtype=complex)
    for k, t in enumerate(trials):
        h[k] = complex_gaussian(stream(seed, CHANNEL_DOMAIN, point, t), (2, 2, L, L))
    return NetworkRealization(h, params.nu)
