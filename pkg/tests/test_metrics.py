import numpy as np
import pytest

from coopfb.channel import sample_batch
from coopfb.ipc import IpcInputs, PowerDecision, achievable_throughput_margin, margin_power
from coopfb.metrics import (
    TrialMetrics,
    aggregate,
    asymptote_samples,
    evaluate,
    lemma2_asymptote,
    lemma3_asymptote,
    sinr,
    sinr_tilde,
    wilson_interval,
)
from coopfb.precoding import assemble
from coopfb.simulator import make_codebooks

from conftest import cgauss


@pytest.fixture
def pipeline(params):
    real = sample_batch(params, 0, range(400), point=6)
    books = make_codebooks(params, 0)
    return real, books, assemble(real, books, params)


def test_zero_power_zero_sinr(pipeline):
    real, _, pset = pipeline
    assert np.all(sinr(pset, real, np.zeros(2)) == 0)


def test_sinr_tilde_lower_bounds_sinr(params, pipeline):
    real, _, pset = pipeline
    inputs = IpcInputs.from_precoders(pset, params)
    p = np.random.default_rng(0).uniform(0, params.p_max, size=(400, 2))
    assert np.all(sinr_tilde(inputs, p) <= sinr(pset, real, p) * (1 + 1e-9) + 1e-9)
    clean = inputs.with_(epsilon=np.zeros_like(inputs.epsilon))
    assert np.allclose(sinr_tilde(clean, p), p[..., None] * inputs.lambda_direct)


def test_outage_flag_is_min_sinr_below_theta(params, pipeline):
    real, _, pset = pipeline
    d = PowerDecision(np.full((400, 2), 20.0), "full_power")
    m = evaluate(pset, real, d, theta=1.0)
    assert np.array_equal(m.outage, np.min(m.sinr, axis=(-2, -1)) < 1.0)
    assert np.all(m.throughput >= 0)
    assert np.allclose(m.throughput, np.log2(1 + m.sinr).sum(axis=(-2, -1)))


def test_margin_achievable_is_lower_bound(params, pipeline):
    real, _, pset = pipeline
    inputs = IpcInputs.from_precoders(pset, params)
    d = margin_power(inputs)
    a = achievable_throughput_margin(inputs, d)
    m = evaluate(pset, real, d, 1.0)
    assert np.all(a <= m.throughput + 1e-9)


def _tm(throughput, outage, powers):
    n = len(throughput)
    return TrialMetrics(
        sinr=np.ones((n, 2, 2)), throughput=np.asarray(throughput, float), outage=np.asarray(outage),
        interference=None, powers=np.asarray(powers, float), epsilon=np.zeros((n, 2)),
        achievable=np.asarray(throughput, float),
    )


def test_aggregate_basics():
    single = aggregate(_tm([3.5], [True], [[10.0, 10.0]]))
    assert single.throughput == 3.5 and single.outage == 1.0 and single.avg_tx_snr_db == pytest.approx(10.0)
    assert np.isnan(single.feasibility_rate)
    many = _tm([1.0, 2.0, 3.0, 6.0], [True, False, True, False], [[1, 3], [2, 2], [4, 0], [1, 1]])
    a = aggregate(many)
    assert a.throughput == 3.0
    assert a.throughput_stderr == pytest.approx(np.std([1, 2, 3, 6], ddof=1) / 2)
    assert a.avg_tx_snr_db == pytest.approx(10 * np.log10(1.75))
    lo, hi = wilson_interval(2, 4)
    assert (a.outage_lo, a.outage_hi) == (lo, hi)
    perm = [3, 0, 2, 1]
    b = aggregate(_tm(np.array([1.0, 2, 3, 6])[perm], np.array([1, 0, 1, 0], bool)[perm],
                      np.array([[1, 3], [2, 2], [4, 0], [1, 1]])[perm]))
    assert (b.throughput, b.outage, b.avg_tx_snr_db) == (a.throughput, a.outage, pytest.approx(a.avg_tx_snr_db))
    split = aggregate([_tm([1.0, 2.0], [True, False], [[1, 3], [2, 2]]), _tm([3.0, 6.0], [True, False], [[4, 0], [1, 1]])])
    assert split.throughput == a.throughput and split.trials == 4
    with pytest.raises(ValueError):
        aggregate([])


def test_wilson_matches_formula():
    k, n, z = 7, 50, 1.959963984540054
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    lo, hi = wilson_interval(k, n)
    assert lo == pytest.approx(centre - half, rel=1e-9) and hi == pytest.approx(centre + half, rel=1e-9)


def test_perfect_feedback_matches_wishart_oracle(params):
    T, P = 10_000, 100.0
    real = sample_batch(params, 2, range(T), point=0)
    pset = assemble(real, make_codebooks(params, 2), params, perfect_feedback=True)
    rates = np.log2(1 + P * pset.lambda_direct).sum(axis=(-2, -1))
    rng = np.random.default_rng(99)
    lam = np.linalg.svd(cgauss(rng, (T, 2, 3, 2)), compute_uv=False) ** 2
    oracle = np.log2(1 + P * lam).sum(axis=(-2, -1))
    se = np.sqrt(rates.var(ddof=1) / T + oracle.var(ddof=1) / T)
    assert abs(rates.mean() - oracle.mean()) < 3 * se


def test_asymptote_limits_and_monotonicity(params):
    book = make_codebooks(params, 0)[0]
    samples = asymptote_samples(params, book, 2000, seed=0)
    assert lemma2_asymptote(params, book, 2000, tau=1e-9, samples=samples) < 1e-6
    vals = [lemma2_asymptote(params, book, 2000, tau=t, samples=samples) for t in (1, 2, 5, 10, 1e6)]
    assert all(x <= y for x, y in zip(vals, vals[1:]))
    assert lemma3_asymptote(params, book, 1e-12, 2000, samples=samples) == 0
    assert lemma3_asymptote(params, book, 1e12, 2000, samples=samples) == 2
    again = asymptote_samples(params, book, 2000, seed=0)
    assert all(np.array_equal(a, b) for a, b in zip(samples, again))


def test_asymptote_samples_shapes(params):
    lam, tail, eps = asymptote_samples(params, make_codebooks(params, 0)[0], 50)
    assert lam.shape == (50, 2) and tail.shape == (50,) and eps.shape == (50,)
    assert np.all((eps >= 0) & (eps <= 1))


def _margin_at_30db(params, tau, trials, seed=0):
    from coopfb.simulator import SweepSpec, run_sweep, SchemeConfig
    from coopfb.channel import TauMode

    scheme = SchemeConfig("m", "margin", TauMode("fixed", tau))
    spec = SweepSpec(params=params, p_max_db=(30.0,), schemes=(scheme,), trials_per_point=trials, master_seed=seed)
    return run_sweep(spec).row("m", 30)


def test_lemma3_bounds_simulated_outage(params):
    point = _margin_at_30db(params, 2.0, 3000)
    book = make_codebooks(params, 0)[0]
    bound = lemma3_asymptote(params, book, params.theta, 3000, tau=2.0)
    se = np.sqrt(point.outage * (1 - point.outage) / 3000)
    assert point.outage <= bound + 3 * se


@pytest.mark.xfail(strict=True, reason="the asymptote describes the achievable bound, not the ergodic "
                                       "throughput, which sits far above it")
def test_asymptote_vs_ergodic_throughput(params):
    point = _margin_at_30db(params, 2.0, 3000)
    asym = lemma2_asymptote(params, make_codebooks(params, 0)[0], 3000, tau=2.0)
    assert abs(point.throughput - asym) / asym <= 0.05


@pytest.mark.xfail(strict=True, reason="with tau = 0.4 P_max about half the trials clamp at P_max, which the "
                                       "large-P_max expansion ignores; the gap is about 7%")
def test_asymptote_proportional_margin(params):
    tau = 0.4 * params.p_max
    point = _margin_at_30db(params, tau, 3000)
    asym = lemma2_asymptote(params, make_codebooks(params, 0)[0], 3000, tau=tau)
    assert abs(point.achievable - asym) / asym <= 0.05
