import numpy as np
import pytest
from dataclasses import replace

from coopfb.channel import SystemParams
from coopfb.numerics import hermitian, orthonormal_columns
from coopfb.quantization import (
    Codebook,
    generate_codebook,
    load_codebook,
    quantization_error,
    quantize,
    save_codebook,
)

from conftest import cgauss


def _semi_unitary(rng, shape):
    return orthonormal_columns(cgauss(rng, shape))


def test_codebook_shape_and_orthonormal(params):
    cb = generate_codebook(params, 0, 0)
    assert cb.entries.shape == (64, 6, 2)
    assert len(cb) == 64 and cb.shape == (6, 2)
    gram = hermitian(cb.entries) @ cb.entries
    assert np.max(np.abs(gram - np.eye(2))) < 1e-12
    again = generate_codebook(params, 0, 0)
    assert np.array_equal(cb.entries, again.entries)
    assert not np.array_equal(cb.entries, generate_codebook(params, 0, 1).entries)


def test_codebook_size_checked(rng):
    with pytest.raises(ValueError):
        Codebook(np.zeros((3, 6, 2), complex), 2, 0)


def test_quantize_matches_brute_force(params, rng):
    cb = generate_codebook(params, 4, 0)
    f = _semi_unitary(rng, (100, 6, 2))
    out = quantize(f, cb)
    for k in range(100):
        errs = [1 - np.linalg.norm(f[k].conj().T @ w) ** 2 / 2 for w in cb.entries]
        assert out.index[k] == int(np.argmin(errs))
        assert abs(out.epsilon[k] - min(errs)) < 1e-12
        assert np.array_equal(out.quantized[k], cb.entries[out.index[k]])
    assert np.all((out.epsilon >= 0) & (out.epsilon <= 1))


def test_exact_codeword_gives_zero_error(params):
    cb = generate_codebook(params, 1, 0)
    out = quantize(cb.entries[37], cb)
    assert out.index == 37
    assert out.epsilon < 1e-12


def test_ties_go_to_lowest_index(params):
    cb = generate_codebook(params, 1, 0)
    entries = cb.entries.copy()
    entries[50] = entries[7]
    out = quantize(entries[7], replace(cb, entries=entries))
    assert out.index == 7


def test_error_invariant_to_rotation(params, rng):
    cb = generate_codebook(params, 2, 0)
    f = _semi_unitary(rng, (50, 6, 2))
    u = _semi_unitary(rng, (50, 2, 2))
    a = quantize(f, cb).epsilon
    b = quantize(f @ u, cb).epsilon
    assert np.max(np.abs(a - b)) < 1e-10


def test_zero_error_iff_same_subspace(rng):
    f = _semi_unitary(rng, (200, 6, 2))
    g = np.where(rng.random(200)[:, None, None] < 0.5, f @ _semi_unitary(rng, (200, 2, 2)),
                 _semi_unitary(rng, (200, 6, 2)))
    eps = quantization_error(f, g)
    dist = np.linalg.norm(f @ hermitian(f) - g @ hermitian(g), axis=(-2, -1))
    assert np.array_equal(eps < 1e-8, dist < 1e-8)
    assert 50 < np.count_nonzero(eps < 1e-8) < 150


def test_mean_error_decreases_with_bits(rng):
    f = _semi_unitary(rng, (10_000, 6, 2))
    means = []
    for b in (2, 4, 6, 8):
        cb = generate_codebook(SystemParams(b_bits=b), 9, 0)
        means.append(np.mean(quantize(f, cb).epsilon))
    assert all(x > y for x, y in zip(means, means[1:]))


def test_per_trial_codebooks_broadcast(params, rng):
    books = np.stack([generate_codebook(params, 0, 0, 0, t).entries for t in range(5)])
    f = _semi_unitary(rng, (5, 6, 2))
    out = quantize(f, replace(generate_codebook(params, 0, 0), entries=books))
    for t in range(5):
        single = quantize(f[t], books[t])
        assert out.index[t] == single.index
        assert np.array_equal(out.quantized[t], single.quantized)


def test_codebook_round_trip(params, tmp_path):
    cb = generate_codebook(params, 11, 1)
    path = tmp_path / "cb.txt"
    save_codebook(cb, path)
    back = load_codebook(path)
    assert np.array_equal(back.entries, cb.entries)
    assert (back.b_bits, back.seed) == (cb.b_bits, cb.seed)


def test_codebook_load_rejects_bad_files(params, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("hello\n")
    with pytest.raises(ValueError):
        load_codebook(bad)
    cb = generate_codebook(params, 0, 0)
    path = tmp_path / "cb.txt"
    save_codebook(cb, path)
    path.write_text("\n".join(path.read_text().splitlines()[:-1]) + "\n")
    with pytest.raises(ValueError):
        load_codebook(path)
