import numpy as np
import pytest

from wickfield.lattice import build_lattice
from wickfield.linear_waves import (gamma_from_pair, gamma_from_table, gamma_power_law,
                                    random_linear_solution, truncated_variance)
from wickfield.randomize import sample_multipliers, sample_multipliers_batch
from wickfield.spectral_data import DataPair, HermitianCoeffs


def generic_pair(lat):
    jb = lat.jb
    phase = np.exp(0.7j * lat.freqs.sum(axis=1))
    return DataPair(HermitianCoeffs(lat, jb ** -0.7 * phase),
                    HermitianCoeffs(lat, jb ** -0.1 * np.conj(phase)))


def test_gamma_from_pair_formula():
    lat = build_lattice(1, 4)
    pair = generic_pair(lat)
    t = 0.37
    g = gamma_from_pair(pair)(lat.freqs, t)
    jb = lat.jb
    expect = (np.cos(t * jb) ** 2 * np.abs(pair.u0.values) ** 2
              + np.sin(t * jb) ** 2 * np.abs(pair.u1.values) ** 2 / jb ** 2)
    assert np.allclose(g, expect, rtol=1e-14)
    assert not gamma_from_pair(pair).time_independent


def test_static_profile_when_velocity_is_jb():
    lat = build_lattice(1, 4)
    pair = DataPair.with_velocity_jb(HermitianCoeffs(lat, lat.jb ** -1.0))
    prof = gamma_from_pair(pair)
    assert prof.time_independent
    assert np.allclose(prof(lat.freqs, 0.0), prof(lat.freqs, 1.3))


def test_power_law_and_table():
    p = gamma_power_law(2, 0.3)
    assert p([[0, 0]])[0] == 1.0
    assert p([[1, 2]])[0] == pytest.approx(6 ** -1.3)
    t = gamma_from_table([[-1], [0], [1]], [2.0, 1.0, 2.0])
    assert truncated_variance(t, 5) == 5.0


def test_truncated_variance_matches_sum():
    lat = build_lattice(2, 5)
    prof = gamma_from_pair(generic_pair(lat))
    sup = lat.freqs[np.sum(lat.freqs ** 2, axis=1) <= 9]
    assert truncated_variance(prof, 3, 0.2) == pytest.approx(np.sum(prof(sup, 0.2)), rel=1e-14)


def test_free_evolution_is_real_and_solves_wave_equation():
    lat = build_lattice(1, 6)
    pair = generic_pair(lat)
    m = sample_multipliers(lat, 4, 0)
    z = [random_linear_solution(pair, m, t).coeffs.values for t in (0.5 - 1e-3, 0.5, 0.5 + 1e-3)]
    dtt = (z[0] - 2 * z[1] + z[2]) / 1e-6
    assert np.max(np.abs(dtt + lat.jb ** 2 * z[1])) < 1e-4
    snap = random_linear_solution(pair, m, 0.5)
    assert snap.grid.shape == (lat.grid_size,)


def test_ensemble_variance_matches_gamma():
    lat = build_lattice(1, 4)
    pair = generic_pair(lat)
    g, h = sample_multipliers_batch(lat, 9, range(20000))
    t = 0.37
    jb = lat.jb
    z = np.cos(t * jb) * g * pair.u0.values + np.sin(t * jb) / jb * h * pair.u1.values
    m2 = np.abs(z) ** 2
    se = m2.std(axis=0) / np.sqrt(len(m2))
    assert np.all(np.abs(m2.mean(axis=0) - gamma_from_pair(pair)(lat.freqs, t)) < 5 * se)
