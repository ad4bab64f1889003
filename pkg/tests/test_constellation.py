import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pscm.constellation import (build_qam, dump_table, energy, entropy, gray, gray_inverse,
                                load_table, maxwell_boltzmann, point_probs_from_amplitude,
                                scaling_factor, shape_constellation, solve_mb_for_entropy)

ORDERS = (4, 16, 64, 256)


def example_76(c):
    e = np.round(np.abs(c.points) ** 2)
    return np.select([e == 2, e == 10, e == 18], [0.125, 0.0375, 0.05])


@pytest.mark.parametrize("order", ORDERS)
def test_build_basic(order):
    c = build_qam(order)
    assert c.order == order == len(c.points)
    assert len({tuple(r) for r in c.labels}) == order
    assert abs(c.probabilities.sum() - 1) < 1e-12
    assert len(c.sign_bit_positions) == 2
    parts = sorted(list(c.sign_bit_positions) + list(c.amplitude_bit_positions))
    assert parts == list(range(c.bits_per_symbol))
    side = int(math.isqrt(order))
    assert set(c.points.real.astype(int)) == set(range(-side + 1, side, 2))


def test_uniform_energies():
    assert energy(build_qam(4)) == pytest.approx(2, abs=1e-12)
    assert energy(build_qam(16)) == pytest.approx(10, abs=1e-12)
    assert energy(build_qam(64)) == pytest.approx(42, abs=1e-12)


def test_unsupported_order():
    with pytest.raises(ValueError, match="order"):
        build_qam(32)


@pytest.mark.parametrize("order", ORDERS)
def test_sign_flip_reflects(order):
    c = build_qam(order)
    lookup = {tuple(r): i for i, r in enumerate(c.labels)}
    for i, lab in enumerate(c.labels):
        amp = list(c.amplitude_bit_positions)
        for pos, conj in zip(c.sign_bit_positions, (lambda z: -z.conjugate(), lambda z: z.conjugate())):
            flipped = lab.copy()
            flipped[pos] ^= 1
            j = lookup[tuple(flipped)]
            assert c.points[j] == conj(c.points[i])
            assert np.array_equal(c.labels[j][amp], lab[amp])


@pytest.mark.parametrize("order", ORDERS)
def test_gray_neighbours(order):
    c = build_qam(order)
    d = np.abs(c.points[:, None] - c.points[None, :])
    ham = (c.labels[:, None, :] != c.labels[None, :, :]).sum(-1)
    assert np.all(ham[np.isclose(d, 2)] == 1)


def test_gray_helpers():
    for j in range(64):
        assert gray_inverse(gray(j)) == j
        assert bin(gray(j) ^ gray(j + 1)).count("1") == 1


def test_paper_energy_example():
    c = build_qam(16)
    p = example_76(c)
    assert p.sum() == pytest.approx(1, abs=1e-12)
    assert energy(c, p) == pytest.approx(7.6, abs=1e-12)
    mu = scaling_factor(c, p)
    assert mu ** 2 == pytest.approx(10 / 7.6, rel=1e-12)
    assert mu == pytest.approx(1.14708, abs=1e-5)


def test_entropy_values():
    c = build_qam(16)
    assert entropy(c) == pytest.approx(4.0, abs=1e-12)
    one = np.zeros(16)
    one[np.argmin(np.abs(c.points))] = 1
    assert entropy(c, one) == 0.0
    assert energy(c, one) == pytest.approx(2, abs=1e-12)
    # oracle: direct summation for the 7.6-energy example
    direct = -(4 * 0.125 * math.log2(0.125) + 8 * 0.0375 * math.log2(0.0375)
               + 4 * 0.05 * math.log2(0.05))
    assert entropy(c, example_76(c)) == pytest.approx(direct, abs=1e-12)
    assert direct == pytest.approx(3.785475297, abs=1e-9)


def test_mb_limits():
    c = build_qam(16)
    assert np.allclose(maxwell_boltzmann(c, 0.0), 1 / 16)
    p = maxwell_boltzmann(c, 1e3)
    inner = np.isclose(np.abs(c.points) ** 2, 2)
    assert np.allclose(p[inner], 0.25)
    e = np.abs(c.points) ** 2
    direct = np.exp(-0.1 * e) / np.exp(-0.1 * e).sum()
    assert np.allclose(maxwell_boltzmann(c, 0.1), direct, atol=1e-15)


def test_mb_monotone():
    c = build_qam(64)
    lams = np.linspace(0, 0.5, 60)
    h = [entropy(c, maxwell_boltzmann(c, l)) for l in lams]
    en = [energy(c, maxwell_boltzmann(c, l)) for l in lams]
    assert np.all(np.diff(h) < 0)
    assert np.all(np.diff(en) < 0)


@pytest.mark.parametrize("target", [4.0, 3.0, 2.5, 2.01])
def test_solve_mb(target):
    c = build_qam(16)
    lam = solve_mb_for_entropy(c, target)
    if target == 4.0:
        assert lam == 0
    assert entropy(c, maxwell_boltzmann(c, lam)) == pytest.approx(target, abs=1e-9)


@pytest.mark.parametrize("bad", [0.0, -1.0, 4.01, 0.1, 2.0])
def test_solve_mb_rejects(bad):
    with pytest.raises(ValueError):
        solve_mb_for_entropy(build_qam(16), bad)


def test_point_probs_qam16():
    c = build_qam(16)
    assert np.allclose(point_probs_from_amplitude(c, [0.5, 0.5]), 1 / 16)
    p = point_probs_from_amplitude(c, [0.84, 0.16])
    inner = np.isclose(np.abs(c.points) ** 2, 2)
    assert np.allclose(p[inner], 0.25 * 0.84 ** 2)
    assert p.sum() == pytest.approx(1, abs=1e-12)


def test_point_probs_qam64_table():
    c = build_qam(64)
    p = point_probs_from_amplitude(c, [0.87, 0.13, 0.0, 0.0])
    assert p.sum() == pytest.approx(1, abs=1e-12)
    by_key = point_probs_from_amplitude(c, {format(gray(j), "02b"): v
                                            for j, v in enumerate([0.87, 0.13, 0.0, 0.0])})
    assert np.allclose(p, by_key)


def test_point_probs_rejects():
    c = build_qam(16)
    with pytest.raises(ValueError):
        point_probs_from_amplitude(c, [0.7, 0.7])
    with pytest.raises(ValueError):
        point_probs_from_amplitude(build_qam(4), [1.0])


def test_scaling_rejects_zero_energy():
    c = build_qam(16)
    with pytest.raises(ValueError):
        scaling_factor(c, np.zeros(16))


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([16, 64, 256]), st.floats(0.0, 2.0))
def test_scaling_identity_and_symmetry(order, lam):
    c = build_qam(order)
    levels = c.amplitude_levels
    w = np.exp(-lam * levels.astype(float) ** 2)
    amp = w / w.sum()
    p = point_probs_from_amplitude(c, amp)
    assert abs(p.sum() - 1) < 1e-12
    s = shape_constellation(c, p)
    assert np.sum(p * np.abs(s.scaled_points) ** 2) == pytest.approx(energy(c), abs=1e-12 * energy(c))
    # four reflections share a probability
    key = {complex(z): q for z, q in zip(c.points, p)}
    for z, q in key.items():
        for r in (z.conjugate(), -z, -z.conjugate()):
            assert key[r] == pytest.approx(q, abs=1e-15)


def test_table_round_trip():
    c = build_qam(16)
    s = shape_constellation(c, example_76(c))
    text = dump_table(s)
    assert text.startswith("# order=16")
    back = load_table(text)
    assert np.array_equal(back.labels, s.labels)
    assert np.allclose(back.points, s.points)
    assert np.allclose(back.probabilities, s.probabilities, atol=1e-15)
    assert back.scale == pytest.approx(s.scale, rel=1e-15)
