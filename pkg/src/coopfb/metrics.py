"""Per-trial SINR/throughput/outage and their Monte Carlo aggregates."""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .channel import ASYMPTOTE_DOMAIN, complex_gaussian, stream
from .numerics import hermitian, svd
from .precoding import EPSILON_FLOOR, _cross_gains, design_inner
from .quantization import quantize

__all__ = [
    "TrialMetrics",
    "SweepPoint",
    "sinr",
    "sinr_tilde",
    "evaluate",
    "aggregate",
    "wilson_interval",
    "asymptote_samples",
    "lemma2_terms",
    "lemma2_asymptote",
    "lemma3_asymptote",
]


def sinr(pset, realization, powers):
    """Receive SINR of every stream, shape ``(..., 2, M)``, unit noise power."""
    powers = np.asarray(powers, dtype=float)
    h = realization.h
    direct = np.stack([h[..., 0, 0, :, :], h[..., 1, 1, :, :]], axis=-3)
    eff = hermitian(pset.equalizer) @ direct @ pset.precoder
    signal = np.abs(np.diagonal(eff, axis1=-2, axis2=-1)) ** 2
    interference = powers[..., ::-1, None] * realization.nu * _cross_gains(pset, realization)
    return powers[..., :, None] * signal / (1.0 + interference)


def sinr_tilde(inputs, powers):
    """SINR lower bound with interference replaced by its worst case, ``(..., 2, M)``.

    The last stream of each link is the one the outage-oriented scheme targets.
    """
    powers = np.asarray(powers, dtype=float)
    c = inputs.interference_coeff
    return powers[..., :, None] * inputs.lambda_direct / (1.0 + powers[..., ::-1, None] * c[..., :, None])


@dataclass(frozen=True)
class TrialMetrics:
    """Outcome of one trial or a stack of trials (leading axis = trial)."""

    sinr: np.ndarray
    throughput: np.ndarray
    outage: np.ndarray
    interference: np.ndarray
    powers: np.ndarray
    epsilon: np.ndarray
    achievable: np.ndarray
    feasible: np.ndarray = None
    iterations: np.ndarray = None

    def __len__(self):
        return np.shape(self.throughput)[0] if np.ndim(self.throughput) else 1


def evaluate(pset, realization, decision, theta, achievable=None):
    """Score a power decision on the actual channels.

    ``achievable`` is the scheme's analytical throughput bound per trial; when
    omitted it is the generic lower bound evaluated at the chosen powers.
    """
    powers = decision.p
    s = sinr(pset, realization, powers)
    interference = powers[..., ::-1, None] * realization.nu * _cross_gains(pset, realization)
    throughput = np.sum(np.log2(1.0 + s), axis=(-2, -1))
    outage = np.min(s, axis=(-2, -1)) < theta
    return TrialMetrics(
        sinr=s,
        throughput=throughput,
        outage=outage,
        interference=interference,
        powers=powers,
        epsilon=pset.epsilon,
        achievable=throughput if achievable is None else achievable,
        feasible=decision.feasible,
        iterations=decision.iterations_used,
    )


@dataclass(frozen=True)
class SweepPoint:
    trials: int
    throughput: float
    throughput_stderr: float
    achievable: float
    achievable_stderr: float
    outage: float
    outage_lo: float
    outage_hi: float
    avg_tx_snr_db: float
    mean_epsilon: float
    feasibility_rate: float = float("nan")
    mean_iterations: float = float("nan")


def wilson_interval(successes, trials, confidence=0.95):
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def _stderr(x):
    return float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0


def _concat(trials):
    if isinstance(trials, TrialMetrics):
        trials = [trials]
    trials = list(trials)
    if not trials:
        raise ValueError("aggregate needs at least one trial")

    def cat(name):
        parts = [getattr(t, name) for t in trials]
        if any(p is None for p in parts):
            return None
        return np.concatenate([np.atleast_1d(p) if np.ndim(p) <= 1 else p for p in parts], axis=0)

    def cat_mat(name):
        return np.concatenate([np.reshape(getattr(t, name), (-1,) + np.shape(getattr(t, name))[-2:]) for t in trials])

    def cat_vec(name):
        return np.concatenate([np.reshape(getattr(t, name), (-1, 2)) for t in trials])

    return dict(
        throughput=cat("throughput"),
        achievable=cat("achievable"),
        outage=cat("outage"),
        powers=cat_vec("powers"),
        epsilon=cat_vec("epsilon"),
        feasible=cat("feasible"),
        iterations=cat("iterations"),
        sinr=cat_mat("sinr"),
    )


def aggregate(trials):
    """Fold a list (or stack) of trial metrics into one sweep point.

    Throughputs come with standard errors, outage with a Wilson 95% interval,
    and the average transmit SNR is ``mean((P1 + P2) / 2)`` in dB.
    """
    d = _concat(trials)
    n = d["throughput"].size
    if n == 0:
        raise ValueError("aggregate needs at least one trial")
    outages = int(np.count_nonzero(d["outage"]))
    lo, hi = wilson_interval(outages, n)
    mean_power = float(np.mean(np.mean(d["powers"], axis=-1)))
    with np.errstate(divide="ignore"):
        snr_db = float(10.0 * np.log10(mean_power))
    return SweepPoint(
        trials=n,
        throughput=float(np.mean(d["throughput"])),
        throughput_stderr=_stderr(d["throughput"]),
        achievable=float(np.mean(d["achievable"])),
        achievable_stderr=_stderr(d["achievable"]),
        outage=outages / n,
        outage_lo=lo,
        outage_hi=hi,
        avg_tx_snr_db=snr_db,
        mean_epsilon=float(np.mean(d["epsilon"])),
        feasibility_rate=float(np.mean(d["feasible"])) if d["feasible"] is not None else float("nan"),
        mean_iterations=float(np.mean(d["iterations"])) if d["iterations"] is not None else float("nan"),
    )


def asymptote_samples(params, codebook, trials, seed=0):
    """Joint draws for the large-``P_max`` margin-scheme asymptotes.

    Per trial: an ``L x L`` cross channel gives ``lambda^[L-N+1]`` and, through
    the inner design and ``codebook``, the quantization error (both come from
    the same matrix, so they are sampled jointly); an independent ``N x M``
    Gaussian matrix gives the effective data-channel eigenvalues.

    Returns ``(lambda_direct (T, M), lambda_tail (T,), epsilon (T,))``.
    """
    L, M, N = params.l_antennas, params.m_streams, params.n_inner
    cross = np.empty((trials, L, L), dtype=complex)
    direct = np.empty((trials, N, M), dtype=complex)
    for t in range(trials):
        rng = stream(seed, ASYMPTOTE_DOMAIN, t)
        cross[t] = complex_gaussian(rng, (L, L))
        direct[t] = complex_gaussian(rng, (N, M))
    inner = design_inner(cross, params)
    eps = quantize(inner.f_inner, codebook).epsilon
    eps = np.where(eps < EPSILON_FLOOR, 0.0, eps)
    lam_direct = svd(direct).singular_values ** 2
    return lam_direct, inner.lambda_cross[:, L - N], eps


def _ratio(params, tau, samples):
    lam_direct, lam_tail, eps = samples
    denom = params.m_streams * params.nu * lam_tail * eps
    with np.errstate(divide="ignore"):
        return (tau / (1.0 + tau)) * lam_direct / denom[:, None]


def lemma2_terms(params, codebook, trials, tau=None, seed=0, samples=None):
    """Per-trial values whose mean is the throughput asymptote."""
    tau = params.tau if tau is None else tau
    samples = asymptote_samples(params, codebook, trials, seed) if samples is None else samples
    return 2.0 * np.sum(np.log2(1.0 + _ratio(params, tau, samples)), axis=-1)


def lemma2_asymptote(params, codebook, trials, tau=None, seed=0, samples=None):
    """Monte Carlo first-order term of the margin scheme's achievable throughput
    for large ``P_max``."""
    return float(np.mean(lemma2_terms(params, codebook, trials, tau, seed, samples)))


def lemma3_asymptote(params, codebook, theta, trials, tau=None, seed=0, samples=None):
    """Monte Carlo large-``P_max`` outage bound (not capped; at most 2).

    The weakest stream (index ``M``) is the one inside the probability.
    """
    tau = params.tau if tau is None else tau
    samples = asymptote_samples(params, codebook, trials, seed) if samples is None else samples
    weak = _ratio(params, tau, samples)[:, -1]
    return 2.0 * float(np.mean(weak < theta))
