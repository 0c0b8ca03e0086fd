"""Random semi-unitary codebooks and subspace quantization of inner precoders."""

from dataclasses import dataclass

import numpy as np

from .channel import CODEBOOK_DOMAIN, complex_gaussian, stream
from .numerics import frobenius_norm_sq, hermitian, orthonormal_columns

__all__ = [
    "Codebook",
    "QuantizationOutcome",
    "generate_codebook",
    "quantize",
    "quantization_error",
    "save_codebook",
    "load_codebook",
]

FORMAT_TAG = "coopfb-codebook v1"


@dataclass(frozen=True)
class Codebook:
    """``entries`` has shape ``(2**b_bits, L, M)`` (or a leading batch axis
    when codebooks are regenerated per trial)."""

    entries: np.ndarray
    b_bits: int
    seed: int

    def __post_init__(self):
        if self.entries.shape[-3] != 2**self.b_bits:
            raise ValueError(f"codebook must hold 2**{self.b_bits} entries, got {self.entries.shape[-3]}")

    def __len__(self):
        return self.entries.shape[-3]

    @property
    def shape(self):
        return self.entries.shape[-2:]


@dataclass(frozen=True)
class QuantizationOutcome:
    index: np.ndarray
    quantized: np.ndarray
    epsilon: np.ndarray


def quantization_error(f_inner, f_quantized):
    """``1 - ||F^H F_hat||_F^2 / M`` for semi-unitary ``L x M`` factors."""
    m = f_inner.shape[-1]
    return 1.0 - frobenius_norm_sq(hermitian(f_inner) @ f_quantized) / m


def _draw_codewords(rng, size, L, M):
    while True:
        try:
            return orthonormal_columns(complex_gaussian(rng, (size, L, M)))
        except np.linalg.LinAlgError:  # pragma: no cover - probability zero
            continue


def generate_codebook(params, seed, *key):
    """``2**B`` independent orthonormalized Gaussian ``L x M`` codewords.

    Extra ``key`` integers select an independent stream under the same seed
    (the simulator passes the link index, and the trial counters when
    codebooks are regenerated per trial).
    """
    L, M, B = params.l_antennas, params.m_streams, params.b_bits
    if L < M:
        raise ValueError("codewords need l_antennas >= m_streams")
    rng = stream(seed, CODEBOOK_DOMAIN, *key)
    return Codebook(_draw_codewords(rng, 2**B, L, M), B, int(seed))


def quantize(f_inner, codebook):
    """Pick the codeword with the largest subspace correlation to ``f_inner``.

    Works on stacks: ``f_inner`` is ``(..., L, M)``; the codebook entries are
    ``(K, L, M)`` or ``(..., K, L, M)``.  Ties go to the lowest index.
    """
    entries = codebook.entries if isinstance(codebook, Codebook) else np.asarray(codebook)
    m = f_inner.shape[-1]
    corr = frobenius_norm_sq(hermitian(f_inner)[..., None, :, :] @ entries)
    index = np.argmax(corr, axis=-1)
    best = np.take_along_axis(corr, index[..., None], axis=-1)[..., 0]
    epsilon = np.clip(1.0 - best / m, 0.0, 1.0)
    if entries.ndim == 3:
        quantized = entries[index]
    else:
        quantized = np.take_along_axis(entries, index[..., None, None, None], axis=-3)[..., 0, :, :]
    return QuantizationOutcome(index=index, quantized=quantized, epsilon=epsilon)


def save_codebook(codebook, path):
    """Write a codebook as plain text.

    Layout: a ``# coopfb-codebook v1`` line, then ``key value`` header lines
    (``b_bits``, ``seed``, ``entries``, ``rows``, ``cols``), then one line per
    codeword row holding ``cols`` pairs of ``real imag`` in ``%.17g``.
    Codewords follow each other in index order.
    """
    entries = np.asarray(codebook.entries)
    if entries.ndim != 3:
        raise ValueError("only a single (unbatched) codebook can be exported")
    k, rows, cols = entries.shape
    with open(path, "w") as fh:
        fh.write(f"# {FORMAT_TAG}\n")
        fh.write(f"b_bits {codebook.b_bits}\nseed {codebook.seed}\nentries {k}\nrows {rows}\ncols {cols}\n")
        for w in entries:
            for row in w:
                fh.write(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row) + "\n")


def load_codebook(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != f"# {FORMAT_TAG}":
        raise ValueError(f"{path}: not a {FORMAT_TAG} file")
    header = {}
    pos = 1
    while pos < len(lines) and lines[pos].split()[0] in ("b_bits", "seed", "entries", "rows", "cols"):
        key, value = lines[pos].split()
        header[key] = int(value)
        pos += 1
    k, rows, cols = header["entries"], header["rows"], header["cols"]
    data = np.array([float(x) for ln in lines[pos:] for x in ln.split()])
    if data.size != 2 * k * rows * cols:
        raise ValueError(f"{path}: expected {2 * k * rows * cols} numbers, found {data.size}")
    z = data[0::2] + 1j * data[1::2]
    return Codebook(z.reshape(k, rows, cols), header["b_bits"], header["seed"])
