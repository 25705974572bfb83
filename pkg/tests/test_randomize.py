import numpy as np
import pytest

from wickfield.lattice import build_lattice
from wickfield.randomize import (randomize_pair, sample_multipliers, sample_multipliers_batch,
                                 shell_positions)
from wickfield.spectral_data import DataPair


def test_bit_reproducible():
    lat = build_lattice(2, 4)
    a = sample_multipliers(lat, 7, 3)
    b = sample_multipliers(lat, 7, 3)
    assert np.array_equal(a.g, b.g) and np.array_equal(a.h, b.h)
    c = sample_multipliers(lat, 7, 4)
    assert not np.array_equal(a.g, c.g)


def test_conjugate_symmetry_and_real_zero_mode():
    lat = build_lattice(2, 3)
    m = sample_multipliers(lat, 1, 0)
    assert np.array_equal(m.g[lat.conj], np.conj(m.g))
    assert m.g[lat.zero_index].imag == 0.0


def test_cutoff_independence():
    small, big = build_lattice(2, 3), build_lattice(2, 6)
    ms, mb = sample_multipliers(small, 11, 2), sample_multipliers(big, 11, 2)
    idx = big.lookup(small.freqs)
    assert np.array_equal(mb.g[idx], ms.g)
    assert np.array_equal(mb.h[idx], ms.h)


def test_batch_matches_single_streams():
    lat = build_lattice(1, 5)
    g, h = sample_multipliers_batch(lat, 5, [2, 9])
    assert np.array_equal(g[1], sample_multipliers(lat, 5, 9).g)
    assert np.array_equal(h[0], sample_multipliers(lat, 5, 2).h)


def test_shell_positions_are_a_bijection():
    lat = build_lattice(2, 4, "cube")
    pos = shell_positions(lat.freqs)
    assert sorted(pos.tolist()) == list(range(81))


def test_moments_of_multipliers():
    lat = build_lattice(1, 3)
    g, _ = sample_multipliers_batch(lat, 0, range(20000))
    m2 = np.mean(np.abs(g) ** 2, axis=0)
    assert np.all(np.abs(m2 - 1.0) < 5 * np.sqrt(2.0 / 20000))
    nz = lat.freqs[:, 0] > 0
    # E g^2 = 0 for n != 0 (circular), E g_0^2 = 1
    assert np.all(np.abs(np.mean(g[:, nz] ** 2, axis=0)) < 5 / np.sqrt(20000))


def test_randomize_pair_multiplies():
    lat = build_lattice(1, 3)
    pair = DataPair.power_law(lat, 0.2)
    m = sample_multipliers(lat, 2, 0)
    r = randomize_pair(pair, m)
    assert np.allclose(r.u0.values, m.g * pair.u0.values)
    other = build_lattice(1, 3)
    with pytest.raises(ValueError):
        randomize_pair(DataPair.power_law(other, 0.2), m)
