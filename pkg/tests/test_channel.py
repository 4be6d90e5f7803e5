"""Tests for constellations, channel statistics, and SNR bookkeeping."""

import json

import numpy as np
import pytest

from mimodet.channel import (
    Constellation,
    complex_from_real,
    constellation_from_json,
    constellation_to_json,
    make_rng,
    modulate,
    nearest_labels,
    qam_constellation,
    real_equivalent,
    sample_channel,
    snr_to_sigma2,
    split_complex,
    transmit,
    with_sigma2,
)
from mimodet.errors import InvalidOrderError, LabelError, NormalizationError, ShapeError


def test_qam4_points_and_power():
    c = qam_constellation(4)
    want = {(1 + 1j), (1 - 1j), (-1 + 1j), (-1 - 1j)}
    got = {complex(round(p.real * np.sqrt(2)), round(p.imag * np.sqrt(2))) for p in c.points}
    assert got == want
    assert abs(np.mean(np.abs(c.points) ** 2) - 1.0) < 1e-12
    # label 1 maps to the all-zero bit pattern -> top-right corner
    assert np.isclose(c.points[0], (1 + 1j) / np.sqrt(2))


def test_qam16_grid():
    c = qam_constellation(16)
    scaled = c.points * np.sqrt(10)
    levels = sorted({round(v, 9) for v in scaled.real})
    assert levels == [-3.0, -1.0, 1.0, 3.0]
    assert sorted({round(v, 9) for v in scaled.imag}) == [-3.0, -1.0, 1.0, 3.0]
    # full grid, each point exactly once
    assert len({(round(p.real, 9), round(p.imag, 9)) for p in scaled}) == 16
    assert abs(np.mean(np.abs(c.points) ** 2) - 1.0) < 1e-12


def test_qam_gray_neighbours_differ_in_one_bit():
    c = qam_constellation(16)
    pts = c.points * np.sqrt(10)
    for i in range(16):
        for j in range(i + 1, 16):
            d = pts[i] - pts[j]
            if abs(d) < 2.1:  # grid neighbours are exactly 2 apart
                assert bin(i ^ j).count("1") == 1


@pytest.mark.parametrize("m", [9, 3, 2, 1, -4, 25])
def test_qam_invalid_orders(m):
    with pytest.raises(InvalidOrderError):
        qam_constellation(m)


def test_unit_power_invariant_for_generators():
    for m in (4, 16, 64, 256):
        c = qam_constellation(m)
        assert abs(np.mean(np.abs(c.points) ** 2) - 1.0) < 1e-6


def test_constellation_rejects_bad_power():
    with pytest.raises(NormalizationError):
        Constellation(points=np.array([2.0 + 0j, -2.0 + 0j]), source="learned")


def test_modulate_single_user():
    c = qam_constellation(4)
    x = modulate(np.array([1]), c)
    np.testing.assert_allclose(x, [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-12)


def test_modulate_layout_and_identical_users():
    c = qam_constellation(16)
    s = np.array([7, 7, 7])
    x = modulate(s, c)
    assert x.shape == (6,)
    assert np.all(x[:3] == x[0]) and np.all(x[3:] == x[3])


def test_modulate_roundtrip_noiseless():
    c = qam_constellation(16)
    rng = make_rng(0)
    for _ in range(50):
        s = rng.integers(1, 17, size=4)
        x = modulate(s, c)
        np.testing.assert_array_equal(nearest_labels(split_complex(x), c), s)


def test_modulate_label_errors():
    c = qam_constellation(4)
    with pytest.raises(LabelError):
        modulate(np.array([0]), c)
    with pytest.raises(LabelError):
        modulate(np.array([5]), c)


@pytest.mark.parametrize(
    "snr_db,n_t,n_r,want",
    [(0.0, 4, 4, 1.0), (10.0, 2, 8, 0.025), (20.0, 4, 4, 0.01)],
)
def test_snr_to_sigma2(snr_db, n_t, n_r, want):
    assert snr_to_sigma2(snr_db, n_t, n_r) == pytest.approx(want, rel=1e-12)


def test_sample_channel_block_structure():
    rng = make_rng(1)
    inst = sample_channel(rng, 3, 5)
    h = inst.h_real
    n_r, n_t = 5, 3
    np.testing.assert_array_equal(h[:n_r, n_t:], -h[n_r:, :n_t])
    np.testing.assert_array_equal(h[:n_r, :n_t], h[n_r:, n_t:])
    np.testing.assert_array_equal(complex_from_real(h), inst.h_cplx)


def test_real_equivalent_roundtrip_exact():
    rng = np.random.default_rng(2)
    hc = rng.normal(size=(4, 3)) + 1j * rng.normal(size=(4, 3))
    np.testing.assert_array_equal(complex_from_real(real_equivalent(hc)), hc)


def test_channel_statistics():
    # per-entry complex variance 1/N_R and unit expected column norm
    rng = make_rng(123)
    n_r, n_t = 8, 2
    draws = 6500  # > 1e5 matrix entries
    entries = np.empty((draws, n_r, n_t), dtype=np.complex128)
    for i in range(draws):
        entries[i] = sample_channel(rng, n_t, n_r).h_cplx
    var = np.mean(np.abs(entries) ** 2)
    # estimator std ~ sqrt(2/n)/N_R with n = draws*16 samples
    n = draws * n_r * n_t
    assert abs(var - 1.0 / n_r) < 3.0 * np.sqrt(2.0 / n) / n_r
    col_norms = np.sum(np.abs(entries) ** 2, axis=1)
    assert abs(np.mean(col_norms) - 1.0) < 0.01


def test_transmit_noiseless_and_identity():
    rng = make_rng(5)
    inst = sample_channel(rng, 2, 4, sigma2=0.0)
    x = modulate(np.array([1, 3]), qam_constellation(4))
    np.testing.assert_array_equal(transmit(x, inst, rng), inst.h_real @ x)

    eye = np.eye(2) + 0j
    ident = with_sigma2(sample_channel(rng, 2, 2), 0.0)
    object.__setattr__(ident, "h_cplx", eye)
    object.__setattr__(ident, "h_real", real_equivalent(eye))
    np.testing.assert_array_equal(transmit(np.arange(4.0), ident, rng), np.arange(4.0))


def test_transmit_shape_error():
    rng = make_rng(6)
    inst = sample_channel(rng, 2, 4, sigma2=0.1)
    with pytest.raises(ShapeError):
        transmit(np.zeros(3), inst, rng)


def test_noise_variance_convergence():
    # ||y - Hx||^2 / N averaged over many draws converges to sigma2 within 1%
    rng = make_rng(7)
    sigma2 = 0.2
    inst = sample_channel(rng, 2, 8, sigma2=sigma2)
    x = modulate(np.array([2, 11]), qam_constellation(16))
    n = inst.h_real.shape[0]
    draws = 20000
    acc = 0.0
    hx = inst.h_real @ x
    for _ in range(draws):
        y = transmit(x, inst, rng)
        acc += float(np.sum((y - hx) ** 2))
    est = acc / (draws * n)
    assert abs(est - sigma2) / sigma2 < 0.01


def test_empirical_snr_consistency():
    # The noise-variance formula is definitional. Its empirical counterpart,
    # 10*log10(E||Hx||^2 / E||n||^2), equals 10*log10(N_T / (N * sigma2));
    # checked here against that closed form rather than the configured value.
    rng = make_rng(8)
    n_t, n_r, snr_db = 4, 4, 10.0
    sigma2 = snr_to_sigma2(snr_db, n_t, n_r)
    c = qam_constellation(16)
    sig = noise = 0.0
    draws = 20000
    for _ in range(draws):
        inst = sample_channel(rng, n_t, n_r, sigma2)
        s = rng.integers(1, 17, size=n_t)
        x = modulate(s, c)
        hx = inst.h_real @ x
        y = transmit(x, inst, rng)
        sig += float(np.sum(hx**2))
        noise += float(np.sum((y - hx) ** 2))
    got_db = 10.0 * np.log10(sig / noise)
    want_db = 10.0 * np.log10(n_t / (2 * n_r * sigma2))
    assert abs(got_db - want_db) < 0.1


def test_rng_streams_reproducible_and_independent():
    a1 = make_rng(9, 0).normal(size=16)
    a2 = make_rng(9, 0).normal(size=16)
    b = make_rng(9, 1).normal(size=16)
    np.testing.assert_array_equal(a1, a2)
    assert not np.array_equal(a1, b)


def test_random_transmission_invariants():
    from mimodet.channel import random_transmission

    c = qam_constellation(16)
    rng = make_rng(21)
    inst = sample_channel(rng, 3, 6, sigma2=0.0)
    sample = random_transmission(rng, c, inst)
    pts = c.points[sample.messages - 1]
    np.testing.assert_array_equal(sample.x[:3], pts.real)
    np.testing.assert_array_equal(sample.x[3:], pts.imag)
    np.testing.assert_array_equal(sample.y, inst.h_real @ sample.x)


def test_constellation_json_roundtrip():
    c = qam_constellation(16)
    text = constellation_to_json(c)
    body = json.loads(text)
    assert body["M"] == 16 and body["source"] == "qam"
    back = constellation_from_json(text)
    np.testing.assert_array_equal(back.points, c.points)
    assert back.source == c.source
