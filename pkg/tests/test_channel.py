import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pscm.channel import (NoiseSpec, awgn, demap_llr, ebno_to_sigma2, modulate, modulate_indices,
                          sigma2_to_ebno, transmit_power)
from pscm.constellation import build_qam, point_probs_from_amplitude, shape_constellation
from pscm.ess import amplitude_probabilities, build_codebook


def brute_llr(y, c, sigma2):
    """Oracle: direct posterior-mass ratio over all points in 50-digit arithmetic."""
    with mpmath.workdps(50):
        y = mpmath.mpc(y.real, y.imag)
        mu = mpmath.mpf(float(c.scale))
        s2 = mpmath.mpf(sigma2)
        w = [mpmath.mpf(float(p)) * mpmath.exp(-abs(y - mu * mpmath.mpc(x.real, x.imag)) ** 2 / s2)
             for p, x in zip(c.probabilities, c.points)]
        out = []
        for j in range(c.bits_per_symbol):
            num = mpmath.fsum(wi for wi, b in zip(w, c.labels[:, j]) if b == 0)
            den = mpmath.fsum(wi for wi, b in zip(w, c.labels[:, j]) if b == 1)
            out.append(float(mpmath.log(num / den)))
    return np.array(out)


@pytest.fixture(scope="module")
def shaped160():
    base = build_qam(16)
    amp = amplitude_probabilities(build_codebook(256, 160))
    return shape_constellation(base, point_probs_from_amplitude(base, amp))


def test_ebno_examples():
    assert ebno_to_sigma2(0.0, 0.5, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert ebno_to_sigma2(10 * math.log10(2), 0.75, 1.0) == pytest.approx(1 / 3, abs=1e-15)
    for x in (-3.0, 0.0, 7.25, 20.0):
        s2 = ebno_to_sigma2(x, 0.5625, 10.0)
        assert sigma2_to_ebno(s2, 0.5625, 10.0) == pytest.approx(x, abs=1e-12)
    with pytest.raises(ValueError):
        ebno_to_sigma2(0.0, 0.0)
    with pytest.raises(ValueError):
        NoiseSpec(0.0, -1.0)
    assert NoiseSpec(0.0, 0.5).sigma2 == pytest.approx(1.0)


def test_modulate_uniform_is_identity():
    c = build_qam(16)
    idx = np.arange(16)
    assert np.array_equal(modulate_indices(idx, c), c.points)
    assert np.array_equal(modulate(c.labels, c), c.points)
    with pytest.raises(ValueError):
        modulate_indices([16], c)
    with pytest.raises(ValueError):
        modulate(np.zeros((2, 3)), c)


def test_modulate_scaled_example():
    c = build_qam(16)
    e = np.round(np.abs(c.points) ** 2)
    p = np.select([e == 2, e == 10, e == 18], [0.125, 0.0375, 0.05])
    s = shape_constellation(c, p)
    assert np.allclose(modulate_indices(np.arange(16), s), math.sqrt(10 / 7.6) * c.points)
    assert transmit_power(s) == pytest.approx(10.0, abs=1e-12)


def test_empirical_power(shaped160):
    rng = np.random.default_rng(0)
    idx = rng.choice(16, size=10 ** 6, p=shaped160.probabilities)
    x = modulate_indices(idx, shaped160)
    assert np.mean(np.abs(x) ** 2) == pytest.approx(10.0, rel=0.01)


def test_awgn_statistics():
    rng = np.random.default_rng(1)
    x = np.zeros(10 ** 6, complex)
    y = awgn(x, 0.3, rng)
    assert np.var(y) == pytest.approx(0.3, rel=0.01)
    assert np.var(y.real) == pytest.approx(0.15, rel=0.01)
    assert np.allclose(awgn(np.ones(10), 1e-12, rng), 1, atol=1e-5)
    a = awgn(np.ones(5), 1.0, np.random.default_rng(3))
    b = awgn(np.ones(5), 1.0, np.random.default_rng(3))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        awgn(x, 0.0, rng)


def test_sign_llr_zero_at_origin():
    c = build_qam(16)
    llr = demap_llr(0.0, c, 1.0)
    assert llr[0] == pytest.approx(0, abs=1e-12) and llr[1] == pytest.approx(0, abs=1e-12)


def test_large_noise_gives_prior(shaped160):
    llr = demap_llr(0.3 - 0.2j, shaped160, 1e9, clip=None)
    lab = shaped160.labels
    p = shaped160.probabilities
    prior = [math.log(p[lab[:, j] == 0].sum() / p[lab[:, j] == 1].sum()) for j in range(4)]
    assert np.allclose(llr, prior, atol=1e-6)


def test_fixed_case_matches_oracle(shaped160):
    y, s2 = 1.2 + 0.9j, 0.5
    assert np.allclose(demap_llr(y, shaped160, s2, clip=None), brute_llr(y, shaped160, s2),
                       atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(-6, 6), st.floats(-6, 6), st.floats(0.05, 20.0), st.floats(0.0, 0.5),
       st.sampled_from([16, 64]))
def test_random_cases_match_oracle(re, im, s2, lam, order):
    base = build_qam(order)
    w = np.exp(-lam * base.amplitude_levels.astype(float) ** 2)
    c = shape_constellation(base, point_probs_from_amplitude(base, w / w.sum()))
    y = complex(re, im)
    got = demap_llr(y, c, s2, clip=None)
    exact = brute_llr(y, c, s2)
    assert np.allclose(got, exact, atol=1e-9, rtol=0)
    ml = demap_llr(y, c, s2, method="maxlog", clip=None)
    assert np.all(np.abs(ml - got) <= math.log(order / 2) + 1e-12)


def test_zero_prior_side_saturates():
    c = build_qam(16)
    p = point_probs_from_amplitude(c, [1.0, 0.0])
    s = shape_constellation(c, p)
    llr = demap_llr(1 + 1j, s, 1.0)
    assert np.all(llr[2:] == 40.0)
    with pytest.raises(ValueError):
        demap_llr(0j, s, 1.0, method="bogus")


def test_batch_shape(shaped160):
    y = np.zeros((3, 5), complex)
    assert demap_llr(y, shaped160, 1.0).shape == (3, 5, 4)
