"""Inner/outer transceiver design for the two-link interference channel.

Link indices are 0-based.  For receiver ``m`` the interferer is ``n = 1 - m``;
``H[m, n]`` is the channel from transmitter ``n`` to receiver ``m``.  The
inner pair designed from ``H[m, n]`` gives receiver ``m``'s inner equalizer
and transmitter ``n``'s inner precoder, and the latter is what receiver ``m``
quantizes and feeds back to transmitter ``n``.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import hermitian, svd
from .quantization import quantize

__all__ = [
    "EPSILON_FLOOR",
    "InnerPair",
    "OuterPair",
    "PrecoderSet",
    "design_inner",
    "design_outer",
    "assemble",
    "residual_interference",
    "lemma1_bound",
]

# quantization errors below this are treated as exact zeros downstream
EPSILON_FLOOR = 1e-12


@dataclass(frozen=True)
class InnerPair:
    g_inner: np.ndarray  # (..., L, N)
    f_inner: np.ndarray  # (..., L, M)
    lambda_cross: np.ndarray  # (..., L), descending


@dataclass(frozen=True)
class OuterPair:
    g_outer: np.ndarray  # (..., N, M)
    f_outer: np.ndarray  # (..., M, M)
    lambda_direct: np.ndarray  # (..., M), descending


@dataclass(frozen=True)
class PrecoderSet:
    """All transceiver matrices of one trial (or a stack of trials).

    Every array carries a link axis of length 2 just before its matrix axes,
    indexed by the link the matrix belongs to: ``g_inner[..., m]`` is
    receiver ``m``'s inner equalizer, ``f_inner[..., m]`` and
    ``f_applied[..., m]`` are transmitter ``m``'s true and fed-back inner
    precoders, ``epsilon[..., m]`` is the quantization error of the latter,
    and ``lambda_cross[..., m]`` holds the eigenvalues of ``H[m, 1-m]``.
    """

    g_inner: np.ndarray
    f_inner: np.ndarray
    f_applied: np.ndarray
    codeword_index: np.ndarray
    epsilon: np.ndarray
    lambda_cross: np.ndarray
    g_outer: np.ndarray
    f_outer: np.ndarray
    lambda_direct: np.ndarray
    precoder: np.ndarray
    equalizer: np.ndarray
    n_inner: int

    @property
    def lambda_cross_tail(self):
        """``lambda^[L-N+1]`` of each cross channel, the largest singular
        value (squared) seen by the inner equalizer."""
        L = self.lambda_cross.shape[-1]
        return self.lambda_cross[..., L - self.n_inner]

    def inner(self, m):
        """Inner pair designed from ``H[m, 1-m]``."""
        n = 1 - m
        return InnerPair(self.g_inner[..., m, :, :], self.f_inner[..., n, :, :], self.lambda_cross[..., m, :])

    def outer(self, m):
        return OuterPair(self.g_outer[..., m, :, :], self.f_outer[..., m, :, :], self.lambda_direct[..., m, :])


def design_inner(h_cross, params):
    """Null the cross link through its weakest ``N`` left / strongest ``M``
    right singular directions."""
    L, M, N = params.l_antennas, params.m_streams, params.n_inner
    res = svd(h_cross)
    return InnerPair(
        g_inner=res.left[..., :, L - N:],
        f_inner=res.right[..., :, :M],
        lambda_cross=res.singular_values**2,
    )


def design_outer(h_direct, g_inner, f_inner_applied):
    """Eigenmode transceiver for the ``N x M`` effective data channel."""
    m = f_inner_applied.shape[-1]
    h_eff = hermitian(g_inner) @ h_direct @ f_inner_applied
    res = svd(h_eff)
    return OuterPair(
        g_outer=res.left[..., :, :m],
        f_outer=res.right,
        lambda_direct=res.singular_values**2,
    )


def assemble(realization, codebooks, params, *, perfect_feedback=False, outer_from_true_inner=False, fault=None):
    """Full precoder/equalizer construction for one trial or a stack.

    Parameters
    ----------
    realization : NetworkRealization
    codebooks : sequence of two Codebook
        ``codebooks[n]`` quantizes transmitter ``n``'s inner precoder.
    perfect_feedback : bool
        Bypass quantization (``F_hat = F``, ``epsilon = 0``).
    outer_from_true_inner : bool
        Build the effective channel with the true inner precoder instead of
        the fed-back one.  The transmitter still applies the fed-back one.
    fault : {None, "skip_search"}
        Validation self-test: transmitters apply codeword 0 while the
        reported quantization error is the one from the real search.
    """
    h = realization.h
    cross = np.stack([h[..., 0, 1, :, :], h[..., 1, 0, :, :]], axis=-3)
    inner = design_inner(cross, params)
    g_inner = inner.g_inner
    # the pair from H[m, n] yields transmitter n's precoder; flip onto transmitter order
    f_inner = inner.f_inner[..., ::-1, :, :]
    lambda_cross = inner.lambda_cross

    if perfect_feedback:
        f_applied = f_inner.copy()
        epsilon = np.zeros(f_inner.shape[:-2])
        index = np.full(f_inner.shape[:-2], -1)
    else:
        outcomes = [quantize(f_inner[..., n, :, :], codebooks[n]) for n in range(2)]
        f_applied = np.stack([o.quantized for o in outcomes], axis=-3)
        epsilon = np.stack([o.epsilon for o in outcomes], axis=-1)
        index = np.stack([o.index for o in outcomes], axis=-1)
        if fault == "skip_search":
            f_applied = np.stack([np.broadcast_to(cb.entries[..., 0, :, :], f_inner[..., n, :, :].shape)
                                  for n, cb in enumerate(codebooks)], axis=-3)
        elif fault is not None:
            raise ValueError(f"unknown fault mode {fault!r}")

    direct = np.stack([h[..., 0, 0, :, :], h[..., 1, 1, :, :]], axis=-3)
    f_eff = f_inner if outer_from_true_inner else f_applied
    outer = design_outer(direct, g_inner, f_eff)
    return PrecoderSet(
        g_inner=g_inner,
        f_inner=f_inner,
        f_applied=f_applied,
        codeword_index=index,
        epsilon=epsilon,
        lambda_cross=lambda_cross,
        g_outer=outer.g_outer,
        f_outer=outer.f_outer,
        lambda_direct=outer.lambda_direct,
        precoder=f_applied @ outer.f_outer,
        equalizer=g_inner @ outer.g_outer,
        n_inner=params.n_inner,
    )


def _cross_gains(pset, realization):
    """Per-stream cross-link leakage ``||[G_m]_l^H H[m,n] F_n||^2`` (no power)."""
    h = realization.h
    cross = np.stack([h[..., 0, 1, :, :], h[..., 1, 0, :, :]], axis=-3)
    leak = hermitian(pset.equalizer) @ cross @ pset.precoder[..., ::-1, :, :]
    return np.sum(leak.real**2 + leak.imag**2, axis=-1)


def residual_interference(pset, realization, powers):
    """Interference power on every stream, shape ``(..., 2, M)``.

    ``powers[..., n]`` is transmitter ``n``'s power; stream ``l`` of receiver
    ``m`` sees ``P_n * nu * ||[G_m]_l^H H[m,n] F_n||^2``.
    """
    powers = np.asarray(powers, dtype=float)
    return powers[..., ::-1, None] * realization.nu * _cross_gains(pset, realization)


def lemma1_bound(pset, powers, params):
    """Stream-independent interference cap ``M nu P_n lambda_mn^[L-N+1] eps_n``, shape ``(..., 2)``."""
    powers = np.asarray(powers, dtype=float)
    return params.m_streams * params.nu * powers[..., ::-1] * pset.lambda_cross_tail * pset.epsilon[..., ::-1]
