import numpy as np
import pytest
from dataclasses import replace

from coopfb.channel import sample_batch
from coopfb.numerics import hermitian
from coopfb.precoding import _cross_gains, assemble, design_inner, design_outer, lemma1_bound, residual_interference
from coopfb.metrics import sinr
from coopfb.simulator import make_codebooks

from conftest import cgauss


@pytest.fixture
def trial(params):
    real = sample_batch(params, 0, range(300), point=9)
    return real, make_codebooks(params, 0)


def test_inner_on_identity(params):
    inner = design_inner(np.eye(6), params)
    assert np.max(np.abs(hermitian(inner.g_inner) @ inner.f_inner)) == 0
    assert np.allclose(np.abs(inner.g_inner), np.eye(6)[:, 3:])


def test_inner_nulls_cross_channel(params, rng):
    h = cgauss(rng, (200, 6, 6))
    inner = design_inner(h, params)
    leak = np.linalg.norm(hermitian(inner.g_inner) @ h @ inner.f_inner, axis=(-2, -1))
    assert np.max(leak) < 1e-9
    for q in (inner.g_inner, inner.f_inner):
        assert np.max(np.abs(hermitian(q) @ q - np.eye(q.shape[-1]))) < 1e-10
    eig = np.linalg.eigvalsh(h @ hermitian(h))[..., ::-1]
    assert np.max(np.abs(inner.lambda_cross - eig)) < 1e-8


def test_outer_diagonal_case():
    g = np.eye(6)[:, 3:]
    f = np.eye(6)[:, :2]
    h = np.zeros((6, 6), complex)
    h[3, 0], h[4, 1] = 2.0, 1.0
    outer = design_outer(h, g, f)
    assert np.allclose(outer.lambda_direct, [4, 1])
    assert np.allclose(np.abs(outer.g_outer), np.eye(3)[:, :2])
    assert np.allclose(np.abs(outer.f_outer), np.eye(2))


def test_outer_diagonalizes_effective_channel(rng):
    h = cgauss(rng, (100, 6, 6))
    g = np.linalg.qr(cgauss(rng, (100, 6, 3)))[0]
    f = np.linalg.qr(cgauss(rng, (100, 6, 2)))[0]
    outer = design_outer(h, g, f)
    h_eff = hermitian(g) @ h @ f
    d = hermitian(outer.g_outer) @ h_eff @ outer.f_outer
    target = np.sqrt(outer.lambda_direct)[..., None] * np.eye(2)
    assert np.max(np.abs(d - target)) < 1e-9
    eig = np.linalg.eigvalsh(h_eff @ hermitian(h_eff))[..., ::-1][..., :2]
    assert np.max(np.abs(outer.lambda_direct - eig)) < 1e-8
    assert np.max(np.abs(hermitian(outer.f_outer) @ outer.f_outer - np.eye(2))) < 1e-10


def test_assembled_shapes_and_unit_columns(params, trial):
    real, books = trial
    pset = assemble(real, books, params)
    assert pset.precoder.shape == (300, 2, 6, 2)
    assert pset.equalizer.shape == (300, 2, 6, 2)
    norms = np.linalg.norm(pset.precoder, axis=-2)
    assert np.max(np.abs(norms - 1)) < 1e-10


def test_perfect_feedback_decouples(params, trial):
    real, books = trial
    pset = assemble(real, books, params, perfect_feedback=True)
    h = real.h
    for m in (0, 1):
        n = 1 - m
        leak = hermitian(pset.equalizer[:, m]) @ h[:, m, n] @ pset.precoder[:, n]
        assert np.max(np.linalg.norm(leak, axis=(-2, -1))) < 1e-8
    p = np.array([[100.0, 30.0]])
    s = sinr(pset, real, p)
    assert np.max(np.abs(s / (p[..., None] * pset.lambda_direct) - 1)) < 1e-8
    assert np.max(residual_interference(pset, real, p)) < 1e-9


def test_lemma1_bound_holds(params, trial):
    real, books = trial
    pset = assemble(real, books, params)
    p = np.stack([np.full(300, 1000.0), np.full(300, 250.0)], axis=-1)
    interf = residual_interference(pset, real, p)
    assert np.all(interf <= lemma1_bound(pset, p, params)[..., None] + 1e-9)
    assert np.all(residual_interference(pset, real, np.zeros((300, 2))) == 0)


def test_interference_oracle_by_expansion(params, trial):
    real, books = trial
    pset = assemble(real, books, params)
    p = np.array([300.0, 700.0])
    interf = residual_interference(pset, real, p)
    for k in range(5):
        for m in (0, 1):
            n = 1 - m
            f_n = pset.f_applied[k, n] @ pset.f_outer[k, n]
            g_m = pset.g_inner[k, m] @ pset.g_outer[k, m]
            for ell in range(2):
                total = sum(abs(np.vdot(g_m[:, ell], real.h[k, m, n] @ f_n[:, j])) ** 2 for j in range(2))
                assert abs(interf[k, m, ell] - p[n] * params.nu * total) < 1e-10 * max(1, total)


def test_interference_invariant_to_column_phases(params, trial, rng):
    real, books = trial
    pset = assemble(real, books, params)
    ph_g = np.exp(2j * np.pi * rng.random(pset.equalizer.shape[:-2] + (1, 2)))
    ph_f = np.exp(2j * np.pi * rng.random(pset.precoder.shape[:-2] + (1, 2)))
    rotated = replace(pset, equalizer=pset.equalizer * ph_g, precoder=pset.precoder * ph_f)
    assert np.max(np.abs(_cross_gains(rotated, real) - _cross_gains(pset, real))) < 1e-10


def test_direct_eigenvalues_are_wishart(params):
    # top eigenvalue of the effective channel vs direct 3x2 Gaussian sampling
    T = 10_000
    real = sample_batch(params, 1, range(T), point=3)
    lam = assemble(real, make_codebooks(params, 1), params).lambda_direct[:, 0, 0]
    rng = np.random.default_rng(77)
    oracle = np.linalg.svd(cgauss(rng, (T, 3, 2)), compute_uv=False)[:, 0] ** 2
    se = np.sqrt(lam.var(ddof=1) / T + oracle.var(ddof=1) / T)
    assert abs(lam.mean() - oracle.mean()) < 3 * se


def test_fault_mode_applies_first_codeword(params, trial):
    real, books = trial
    good = assemble(real, books, params)
    bad = assemble(real, books, params, fault="skip_search")
    assert np.array_equal(good.epsilon, bad.epsilon)
    assert np.array_equal(bad.f_applied[:, 0], np.broadcast_to(books[0].entries[0], (300, 6, 2)))
    with pytest.raises(ValueError):
        assemble(real, books, params, fault="nope")


def test_outer_from_true_inner_flag(params, trial):
    real, books = trial
    a = assemble(real, books, params)
    b = assemble(real, books, params, outer_from_true_inner=True)
    assert np.array_equal(a.f_applied, b.f_applied)
    h_eff = hermitian(b.g_inner) @ np.stack([real.h11, real.h22], 1) @ b.f_inner
    eig = np.linalg.eigvalsh(h_eff @ hermitian(h_eff))[..., ::-1][..., :2]
    assert np.max(np.abs(b.lambda_direct - eig)) < 1e-8
