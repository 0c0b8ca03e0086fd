import numpy as np
import pytest

from coopfb.channel import SystemParams, TauMode, sample_batch, sample_realization


def test_realization_is_reproducible(params):
    a = sample_realization(params, 3, 17, point=2)
    b = sample_realization(params, 3, 17, point=2)
    assert np.array_equal(a.h, b.h)
    assert a.h.shape == (2, 2, 6, 6)
    c = sample_realization(params, 3, 18, point=2)
    d = sample_realization(params, 3, 17, point=1)
    assert not np.array_equal(a.h, c.h)
    assert not np.array_equal(a.h, d.h)


def test_batch_matches_single_draws(params):
    batch = sample_batch(params, 5, range(10, 14), point=1)
    for k, t in enumerate(range(10, 14)):
        assert np.array_equal(batch.h[k], sample_realization(params, 5, t, point=1).h)
    assert len(batch) == 4
    assert np.array_equal(batch[2].h, batch.h[2])
    assert batch.h12.shape == (4, 6, 6)


def test_entries_are_unit_variance_circular(params):
    h = sample_batch(params, 0, range(2000)).h.ravel()
    n = h.size
    assert abs(np.mean(np.abs(h) ** 2) - 1) < 4 / np.sqrt(n)
    assert abs(np.var(h.real) - 0.5) < 4 * 0.5 * np.sqrt(2 / n)
    assert abs(np.mean(h.real * h.imag)) < 4 * 0.5 / np.sqrt(n)


@pytest.mark.parametrize(
    "kw",
    [dict(l_antennas=3, m_streams=2), dict(n_inner=1), dict(n_inner=5), dict(b_bits=0),
     dict(nu=0.0), dict(nu=1.5), dict(p_max=0.0), dict(theta=-1.0)],
)
def test_invalid_params_rejected(kw):
    with pytest.raises(ValueError):
        SystemParams(**kw)


def test_tau_modes():
    assert TauMode().resolve(1000) == 2.0
    assert TauMode("proportional", 0.4).resolve(1000) == pytest.approx(400)
    assert str(TauMode("proportional", 0.4)) == "0.4*p_max"
    with pytest.raises(ValueError):
        TauMode("bogus", 1.0)
    with pytest.raises(ValueError):
        TauMode("fixed", 0.0)
    assert SystemParams(tau_mode=TauMode("proportional", 0.5), p_max=10).tau == 5


def test_magnitude_is_exponential_and_links_independent(params):
    from scipy import stats

    h = sample_batch(params, 4, range(10_000)).h
    sample = np.abs(h[:, 0, 0, 0, 0]) ** 2
    assert stats.kstest(sample, "expon").pvalue > 0.01
    assert abs(np.mean(np.abs(h[:2800].ravel()) ** 2) - 1) < 0.02
    # pooled over all entry positions
    a, b = h[:, 0, 0].ravel(), h[:, 0, 1].ravel()
    corr = np.mean(a * np.conj(b)) / np.sqrt(np.mean(np.abs(a) ** 2) * np.mean(np.abs(b) ** 2))
    assert abs(corr) < 0.02
