"""Interference power control (IPC) feedback schemes.

Three ways for a receiver to steer its interferer's power with a scalar:

* ``margin_power``: cap residual interference at a margin ``tau``.
* ``algorithm1``: projected gradient ascent on a throughput lower bound.
* ``algorithm2``: smallest power pair meeting an SINR target ``theta`` on a
  lower bound of every stream's SINR.

Everything operates on stacks: arrays keep the link axis last (``(..., 2)``)
and per-stream eigenvalues as ``(..., 2, M)``.
"""

from dataclasses import dataclass, replace

import numpy as np

from .precoding import EPSILON_FLOOR

__all__ = [
    "IpcInputs",
    "PowerDecision",
    "margin_power",
    "full_power",
    "achievable_throughput_margin",
    "throughput_lower_bound",
    "slope",
    "algorithm1",
    "algorithm2",
    "ALG1_STARTS",
    "FALLBACKS",
]

LOG2E = np.log2(np.e)
FALLBACKS = ("p_max", "zero", "margin")


@dataclass(frozen=True)
class IpcInputs:
    """Scalars a pair of receivers feeds back within one fading block.

    lambda_cross_tail : (..., 2)
        ``[m]`` is ``lambda^[L-N+1]`` of ``H[m, 1-m]``.
    epsilon : (..., 2)
        ``[n]`` is the quantization error of transmitter ``n``'s inner precoder.
    lambda_direct : (..., 2, M)
        Effective data-channel eigenvalues, descending per link.
    """

    lambda_cross_tail: np.ndarray
    epsilon: np.ndarray
    lambda_direct: np.ndarray
    m_streams: int
    nu: float
    p_max: float
    theta: float = 1.0
    tau: float = 2.0

    @classmethod
    def from_precoders(cls, pset, params, **overrides):
        kw = dict(
            lambda_cross_tail=pset.lambda_cross_tail,
            epsilon=pset.epsilon,
            lambda_direct=pset.lambda_direct,
            m_streams=params.m_streams,
            nu=params.nu,
            p_max=params.p_max,
            theta=params.theta,
            tau=params.tau,
        )
        kw.update(overrides)
        return cls(**kw)

    def with_(self, **changes):
        return replace(self, **changes)

    @property
    def batch_shape(self):
        return np.shape(self.epsilon)[:-1]

    @property
    def interference_coeff(self):
        """``c[m] = M nu lambda_mn^[L-N+1] eps_n``: bound on the per-stream
        interference at receiver ``m`` per unit of the interferer's power."""
        eps = np.where(self.epsilon < EPSILON_FLOOR, 0.0, self.epsilon)
        return self.m_streams * self.nu * np.asarray(self.lambda_cross_tail) * eps[..., ::-1]


@dataclass(frozen=True)
class PowerDecision:
    """Transmit powers ``p[..., n]`` with the scheme that chose them."""

    p: np.ndarray
    scheme: str
    feasible: np.ndarray = None
    iterations_used: np.ndarray = None

    p1 = property(lambda self: self.p[..., 0])
    p2 = property(lambda self: self.p[..., 1])


def full_power(inputs):
    shape = inputs.batch_shape + (2,)
    return PowerDecision(np.full(shape, float(inputs.p_max)), "full_power")


def _margin_powers(inputs, tau):
    c = inputs.interference_coeff
    # receiver m limits transmitter n = 1 - m
    c_tx = c[..., ::-1]
    with np.errstate(divide="ignore"):
        eta = np.where(c_tx < 1e-15, np.inf, tau / np.where(c_tx < 1e-15, 1.0, c_tx))
    return np.minimum(eta, inputs.p_max)


def margin_power(inputs):
    """``P_n = min(tau / c_m, P_max)``; a zero error lifts the cap entirely."""
    if not inputs.tau > 0:
        raise ValueError("tau must be positive")
    return PowerDecision(_margin_powers(inputs, inputs.tau), "margin")


def achievable_throughput_margin(inputs, decision):
    """Throughput guaranteed when every stream's interference is at most ``tau``."""
    gain = decision.p[..., :, None] * inputs.lambda_direct / (1.0 + inputs.tau)
    return np.sum(np.log2(1.0 + gain), axis=(-2, -1))


def _sinr_bound(inputs, p):
    c = inputs.interference_coeff
    p = np.asarray(p, dtype=float)
    return p[..., :, None] * inputs.lambda_direct / (1.0 + p[..., ::-1, None] * c[..., :, None])


def throughput_lower_bound(inputs, p):
    """Sum over links and streams of ``log2(1 + P_m lam_mm / (1 + P_n c_m))``."""
    return np.sum(np.log2(1.0 + _sinr_bound(inputs, p)), axis=(-2, -1))


def slope(inputs, p, m):
    """Terms of ``dA/dP_m = mu + psi - rho``.

    ``mu`` is the gain on link ``m``'s own streams, ``psi - rho`` the change
    of link ``n``'s bound through the interference link ``m`` inflicts.
    """
    n = 1 - m
    p = np.asarray(p, dtype=float)
    lam = inputs.lambda_direct
    c = inputs.interference_coeff
    pm, pn = p[..., m], p[..., n]
    cm, cn = c[..., m], c[..., n]
    M = inputs.m_streams
    mu = LOG2E * np.sum(lam[..., m, :] / (1.0 + (cm * pn)[..., None] + lam[..., m, :] * pm[..., None]), axis=-1)
    psi = LOG2E * np.sum(cn[..., None] / (1.0 + (cn * pm)[..., None] + lam[..., n, :] * pn[..., None]), axis=-1)
    rho = LOG2E * M * cn / (1.0 + cn * pm)
    return mu, psi, rho


def _gradient(inputs, p):
    parts = [slope(inputs, p, m) for m in (0, 1)]
    return np.stack([mu + psi - rho for mu, psi, rho in parts], axis=-1)


# starting points as fractions of P_max; the center plus the three nonzero corners
ALG1_STARTS = ((0.5, 0.5), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0))


def algorithm1(inputs, step=None, max_iters=200, tol=None, step_fraction=0.05, init=None, max_halvings=40,
               multistart=True):
    """Iterative IPC by projected gradient ascent on ``throughput_lower_bound``.

    Parameters
    ----------
    step : float, optional
        Fixed step size (power per unit slope).  By default the step is
        ``step_fraction * P_max`` divided by the larger initial slope
        magnitude, per trial.
    max_iters : int
        Iteration cap per ascent.
    tol : float, optional
        Stop once ``|dP_1| + |dP_2|`` falls below it; default ``1e-4 P_max``.
    init : array_like, optional
        Starting powers.  When given, a single ascent is run from there.
    max_halvings : int
        A step that would lower the bound is retried with half the step up
        to this many times; if none helps, the trial stops where it is.
    multistart : bool
        Without ``init``, run one ascent from each point of ``ALG1_STARTS``
        and keep the best per trial.  The bound is not concave and often has
        a local maximum at a corner of the power box that an ascent from the
        center cannot reach.  ``False`` starts only from ``P_max / 2``.

    Notes
    -----
    ``iterations_used`` is summed over all ascents.
    """
    kw = dict(step=step, max_iters=max_iters, tol=tol, step_fraction=step_fraction, max_halvings=max_halvings)
    if init is not None or not multistart:
        start = (0.5 * inputs.p_max, 0.5 * inputs.p_max) if init is None else init
        return _ascend(inputs, start, **kw)
    best, best_value, iters = None, None, 0
    for frac in ALG1_STARTS:
        dec = _ascend(inputs, np.asarray(frac) * inputs.p_max, **kw)
        value = throughput_lower_bound(inputs, dec.p)
        iters = iters + dec.iterations_used
        if best is None:
            best, best_value = dec.p, value
        else:
            # ties keep the earlier start
            better = value > best_value
            best = np.where(better[..., None], dec.p, best)
            best_value = np.where(better, value, best_value)
    return PowerDecision(best, "algorithm1", iterations_used=iters)


def _ascend(inputs, init, step, max_iters, tol, step_fraction, max_halvings):
    p_max = float(inputs.p_max)
    shape = inputs.batch_shape + (2,)
    p = np.broadcast_to(np.asarray(init, float), shape).copy()
    p = np.clip(p, 0.0, p_max)
    tol = 1e-4 * p_max if tol is None else tol
    grad = _gradient(inputs, p)
    if step is None:
        gmax = np.max(np.abs(grad), axis=-1)
        gamma = np.where(gmax > 0, step_fraction * p_max / np.where(gmax > 0, gmax, 1.0), 0.0)
    else:
        if not step > 0:
            raise ValueError("step must be positive")
        gamma = np.full(inputs.batch_shape, float(step))
    value = throughput_lower_bound(inputs, p)
    active = np.ones(inputs.batch_shape, dtype=bool)
    iters = np.zeros(inputs.batch_shape, dtype=int)
    for _ in range(max_iters):
        if not active.any():
            break
        grad = _gradient(inputs, p)
        trial_gamma = gamma.copy()
        pending = active.copy()
        new_p = p.copy()
        new_value = value.copy()
        for _ in range(max_halvings + 1):
            cand = np.clip(p + grad * trial_gamma[..., None], 0.0, p_max)
            cand_value = throughput_lower_bound(inputs, cand)
            ok = pending & (cand_value >= value)
            new_p = np.where(ok[..., None], cand, new_p)
            new_value = np.where(ok, cand_value, new_value)
            pending &= ~ok
            if not pending.any():
                break
            trial_gamma = np.where(pending, trial_gamma / 2.0, trial_gamma)
        iters += active
        change = np.sum(np.abs(new_p - p), axis=-1)
        p = np.where(active[..., None], new_p, p)
        value = np.where(active, new_value, value)
        # a trial where no halved step helped is stuck at its local optimum
        active &= (change >= tol) & ~pending
    return PowerDecision(p, "algorithm1", iterations_used=iters)


def algorithm2(inputs, fallback="p_max", fallback_tau=None):
    """Minimum power pair keeping the weakest stream's SINR bound at ``theta``.

    Infeasible trials (target unreachable inside the power box, or the
    coupled constraints have no positive solution) use ``fallback``:
    ``"p_max"``, ``"zero"`` or ``"margin"`` (margin powers with
    ``fallback_tau``, default ``inputs.tau``).
    """
    if fallback not in FALLBACKS:
        raise ValueError(f"fallback must be one of {FALLBACKS}, got {fallback!r}")
    theta = inputs.theta
    if not theta > 0:
        raise ValueError("theta must be positive")
    lam_weak = np.asarray(inputs.lambda_direct)[..., -1]
    c = inputs.interference_coeff
    usable = lam_weak > 0
    safe = np.where(usable, lam_weak, 1.0)
    a = np.where(usable, theta / safe, np.inf)
    b = np.where(usable, c * theta / safe, np.inf)
    den = 1.0 - b[..., 0] * b[..., 1]
    solvable = usable.all(axis=-1) & (den > 0)
    den_safe = np.where(solvable, den, 1.0)
    with np.errstate(invalid="ignore"):
        p_min = (a + b * a[..., ::-1]) / den_safe[..., None]
    feasible = solvable & np.all(p_min <= inputs.p_max, axis=-1)
    if fallback == "p_max":
        alt = np.full(p_min.shape, float(inputs.p_max))
    elif fallback == "zero":
        alt = np.zeros(p_min.shape)
    else:
        alt = _margin_powers(inputs, inputs.tau if fallback_tau is None else fallback_tau)
    p = np.where(feasible[..., None], p_min, alt)
    return PowerDecision(p, "algorithm2", feasible=feasible)
