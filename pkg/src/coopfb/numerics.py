"""Small dense complex linear algebra used by the precoder design.

All routines accept stacks of matrices: any leading dimensions are treated
as a batch and every matrix in the stack is processed independently.  The
SVD is a one-sided (Hestenes) Jacobi iteration whose rotations are masked
per matrix, so the result for one matrix never depends on the other members
of its batch.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SvdConvergenceError",
    "SvdResult",
    "svd",
    "orthonormal_columns",
    "frobenius_norm_sq",
    "hermitian",
    "MAX_SWEEPS",
    "OFFDIAG_TOL",
]

MAX_SWEEPS = 60
OFFDIAG_TOL = 1e-12
# magnitude below which a unit-vector entry is skipped by the phase convention
PHASE_TOL = 1e-12


class SvdConvergenceError(RuntimeError):
    """Raised when the Jacobi sweeps hit the iteration cap.

    Attributes
    ----------
    residual : float
        Largest relative off-diagonal correlation left after the last sweep.
    indices : ndarray
        Flat batch indices of the matrices that failed to converge.
    """

    def __init__(self, residual, indices):
        self.residual = float(residual)
        self.indices = np.asarray(indices)
        super().__init__(
            f"Jacobi SVD did not converge in {MAX_SWEEPS} sweeps "
            f"(residual {self.residual:.3e}, batch indices {self.indices.tolist()})"
        )


@dataclass(frozen=True)
class SvdResult:
    """Full SVD ``a = left @ diag(singular_values) @ hermitian(right)``.

    ``left`` is ``(..., rows, rows)``, ``right`` is ``(..., cols, cols)`` and
    ``singular_values`` is ``(..., min(rows, cols))`` sorted descending.
    """

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    def reconstruct(self):
        k = self.singular_values.shape[-1]
        u = self.left[..., :, :k] * self.singular_values[..., None, :]
        return u @ hermitian(self.right[..., :, :k])


def hermitian(a):
    return np.conj(np.swapaxes(a, -1, -2))


def frobenius_norm_sq(a):
    """Sum of squared magnitudes over the last two axes."""
    a = np.asarray(a)
    return np.sum(a.real**2 + a.imag**2, axis=(-2, -1))


def _complete_basis(q, valid):
    """Fill the columns of ``q`` flagged invalid with an orthonormal complement.

    ``q`` is a single ``(n, n)`` matrix whose valid columns are orthonormal.
    Candidates are the canonical basis vectors, taken in order, which keeps
    the completion deterministic.
    """
    n = q.shape[0]
    basis = [q[:, k] for k in range(n) if valid[k]]
    fill = []
    for e in np.eye(n, dtype=complex):
        v = e.copy()
        for _ in range(2):
            for b in basis + fill:
                v = v - b * np.vdot(b, v)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            fill.append(v / nv)
        if len(basis) + len(fill) == n:
            break
    out = q.copy()
    for k, v in zip(np.flatnonzero(~valid), fill):
        out[:, k] = v
    return out


def _jacobi_tall(a):
    """One-sided Jacobi on a stack ``(batch, m, n)`` with ``m >= n``."""
    batch, m, n = a.shape
    w = a.astype(complex, copy=True)
    v = np.broadcast_to(np.eye(n, dtype=complex), (batch, n, n)).copy()
    active = np.ones(batch, dtype=bool)
    residual = np.zeros(batch)
    for _ in range(MAX_SWEEPS):
        rotated = np.zeros(batch, dtype=bool)
        residual[:] = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                wi = w[:, :, i]
                wj = w[:, :, j]
                alpha = np.sum(wi.real**2 + wi.imag**2, axis=-1)
                beta = np.sum(wj.real**2 + wj.imag**2, axis=-1)
                gamma = np.sum(np.conj(wi) * wj, axis=-1)
                g = np.abs(gamma)
                scale = np.sqrt(alpha * beta)
                rel = np.divide(g, scale, out=np.zeros_like(g), where=scale > 0)
                residual = np.maximum(residual, rel)
                need = active & (rel > OFFDIAG_TOL)
                if not need.any():
                    continue
                rotated |= need
                gs = np.where(need, g, 1.0)
                phase = np.where(need, gamma / gs, 1.0)
                zeta = (beta - alpha) / (2.0 * gs)
                t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta**2))
                c = 1.0 / np.sqrt(1.0 + t**2)
                s = c * t
                # rotate column j onto a real correlation with column i, then a real Givens step
                pj = np.conj(phase)[:, None]
                wj_r = wj * pj
                new_wi = c[:, None] * wi - s[:, None] * wj_r
                new_wj = s[:, None] * wi + c[:, None] * wj_r
                vi = v[:, :, i]
                vj_r = v[:, :, j] * pj
                new_vi = c[:, None] * vi - s[:, None] * vj_r
                new_vj = s[:, None] * vi + c[:, None] * vj_r
                sel = need[:, None]
                w[:, :, i] = np.where(sel, new_wi, wi)
                w[:, :, j] = np.where(sel, new_wj, wj)
                v[:, :, i] = np.where(sel, new_vi, v[:, :, i])
                v[:, :, j] = np.where(sel, new_vj, v[:, :, j])
        active &= rotated
        if not active.any():
            break
    else:
        bad = np.flatnonzero(active)
        raise SvdConvergenceError(residual[bad].max(), bad)

    sigma = np.sqrt(np.sum(w.real**2 + w.imag**2, axis=1))
    order = np.argsort(-sigma, axis=-1, kind="stable")
    sigma = np.take_along_axis(sigma, order, axis=-1)
    w = np.take_along_axis(w, order[:, None, :], axis=-1)
    v = np.take_along_axis(v, order[:, None, :], axis=-1)

    left = np.zeros((batch, m, m), dtype=complex)
    smax = sigma[:, :1]
    nonzero = sigma > np.maximum(smax * n * np.finfo(float).eps, np.finfo(float).tiny)
    left[:, :, :n] = np.where(nonzero[:, None, :], w / np.where(nonzero, sigma, 1.0)[:, None, :], 0.0)
    valid = np.zeros((batch, m), dtype=bool)
    valid[:, :n] = nonzero
    for b in np.flatnonzero(~valid.all(axis=1)):
        left[b] = _complete_basis(left[b], valid[b])
    return left, sigma, v


def _fix_phase(left, right, k):
    """Rotate each left singular vector so its first nonzero entry is real >= 0.

    The first ``k`` right vectors receive the same rotation so the
    factorisation is unchanged.
    """
    mag = np.abs(left)
    first = np.argmax(mag > PHASE_TOL, axis=-2)
    lead = np.take_along_axis(left, first[..., None, :], axis=-2)[..., 0, :]
    lm = np.abs(lead)
    rot = np.where(lm > 0, np.conj(lead) / np.where(lm > 0, lm, 1.0), 1.0)
    left = left * rot[..., None, :]
    right = right.copy()
    right[..., :, :k] = right[..., :, :k] * rot[..., None, :k]
    return left, right


def svd(a):
    """Complex SVD with descending singular values and a fixed phase convention.

    Parameters
    ----------
    a : array_like, shape (..., rows, cols)
        Finite complex (or real) matrices.

    Returns
    -------
    SvdResult
        ``left`` and ``right`` are square unitary matrices.  The first
        nonzero entry of every left singular vector is real and nonnegative.

    Raises
    ------
    SvdConvergenceError
        If any matrix in the stack is still rotating after ``MAX_SWEEPS``.
    """
    a = np.asarray(a)
    if a.ndim < 2 or min(a.shape[-2:]) < 1:
        raise ValueError(f"expected a stack of nonempty matrices, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    rows, cols = a.shape[-2:]
    lead = a.shape[:-2]
    flat = a.reshape((-1, rows, cols))
    if rows >= cols:
        left, sigma, right = _jacobi_tall(flat)
    else:
        right, sigma, left = _jacobi_tall(hermitian(flat))
    k = min(rows, cols)
    left, right = _fix_phase(left, right, k)
    return SvdResult(
        left=left.reshape(lead + (rows, rows)),
        singular_values=sigma.reshape(lead + (k,)),
        right=right.reshape(lead + (cols, cols)),
    )


def orthonormal_columns(g, rank_tol=1e-10):
    """Orthonormal basis (same column span) for each matrix in a stack.

    Raises ``np.linalg.LinAlgError`` when the columns are numerically
    dependent, so callers can resample.
    """
    g = np.asarray(g)
    rows, cols = g.shape[-2:]
    if rows < cols:
        raise ValueError(f"need rows >= cols, got {rows}x{cols}")
    q, r = np.linalg.qr(g)
    diag = np.abs(np.diagonal(r, axis1=-2, axis2=-1))
    scale = np.max(np.abs(r), axis=(-2, -1))
    if np.any(diag <= rank_tol * np.maximum(scale, np.finfo(float).tiny)[..., None]):
        raise np.linalg.LinAlgError("input columns are rank deficient")
    return q
