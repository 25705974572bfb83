import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_wick_power, hermite_coefficients
from wickfield.errors import AliasingError
from wickfield.lattice import build_lattice
from wickfield.linear_waves import FieldSnapshot, gamma_from_pair, truncated_variance
from wickfield.randomize import sample_multipliers
from wickfield.spectral_data import DataPair, HermitianCoeffs
from wickfield.linear_waves import random_linear_solution
from wickfield.wick import MAX_DEGREE, hermite, wick_nonlinearity, wick_power


@settings(max_examples=40, deadline=None)
@given(st.integers(0, MAX_DEGREE), st.floats(-3, 3), st.floats(0, 4))
def test_recurrence_matches_explicit_polynomial(j, x, s):
    explicit = sum(c * s ** k * x ** (j - 2 * k) for k, c in hermite_coefficients(j))
    assert hermite(j, x, s) == pytest.approx(explicit, rel=1e-10, abs=1e-10)


def test_generating_function():
    # sum_j H_j(x; s) t^j / j! = exp(t x - s t^2 / 2)
    x, s, t = 0.7, 1.3, 0.05
    series = sum(hermite(j, x, s) * t ** j / math.factorial(j) for j in range(MAX_DEGREE + 1))
    assert series == pytest.approx(math.exp(t * x - s * t * t / 2), rel=1e-9)


def test_degree_cap_and_negative_variance():
    with pytest.raises(ValueError):
        hermite(MAX_DEGREE + 1, 0.0, 1.0)
    with pytest.raises(ValueError):
        hermite(2, 0.0, -1.0)


@pytest.mark.parametrize("N", [1, 2, 3, 4])
@pytest.mark.parametrize("j", [2, 3])
def test_wick_power_equals_direct_convolution(N, j):
    lat = build_lattice(1, j * N, oversample=j + 1)
    phase = np.exp(0.4j * lat.freqs[:, 0])
    pair = DataPair(HermitianCoeffs(lat, lat.jb ** -0.6 * phase),
                    HermitianCoeffs(lat, lat.jb ** 0.2 * np.conj(phase)))
    prof = gamma_from_pair(pair)
    z = random_linear_solution(pair, sample_multipliers(lat, 3, 1), 0.37)
    res = wick_power(z, prof, N, j)
    sigma = truncated_variance(prof, N, 0.37)
    assert res.variance_used == sigma
    coeffs = {int(n[0]): v for n, v in zip(lat.freqs, z.coeffs.values) if abs(n[0]) <= N}
    ref = brute_wick_power(coeffs, j, sigma)
    got = {int(n[0]): v for n, v in zip(lat.freqs, res.coeffs.values)}
    for n in got:
        assert abs(got[n] - ref.get(n, 0.0)) < 1e-10


def test_aliasing_guard():
    lat = build_lattice(1, 4, oversample=2)
    z = FieldSnapshot(0.0, HermitianCoeffs.zeros(lat))
    prof = gamma_from_pair(DataPair.power_law(lat, 0.0))
    with pytest.raises(AliasingError):
        wick_power(z, prof, 4, 3)


def test_degree_zero_and_one():
    lat = build_lattice(1, 4, oversample=2)
    pair = DataPair.power_law(lat, 0.0)
    z = random_linear_solution(pair, sample_multipliers(lat, 0, 0), 0.0)
    prof = gamma_from_pair(pair)
    w0 = wick_power(z, prof, 4, 0)
    assert np.allclose(w0.coeffs.values, np.where(lat.freqs[:, 0] == 0, 1.0, 0.0))
    w1 = wick_power(z, prof, 2, 1)
    assert np.allclose(w1.coeffs.values, np.where(np.abs(lat.freqs[:, 0]) <= 2,
                                                  z.coeffs.values, 0.0))


def test_nonlinearity_binomial_expansion():
    lat = build_lattice(1, 3, oversample=4)
    pair = DataPair.power_law(lat, 0.0)
    z = random_linear_solution(pair, sample_multipliers(lat, 1, 0), 0.0)
    prof = gamma_from_pair(pair)
    wp = [wick_power(z, prof, 1, j) for j in range(4)]
    v = FieldSnapshot(0.0, HermitianCoeffs.delta(lat, (0,), 0.5))
    out = wick_nonlinearity(v, wp).coeffs.values
    expect = sum(math.comb(3, j) * 0.5 ** (3 - j) * wp[j].coeffs.values for j in range(4))
    assert np.allclose(out, expect, atol=1e-13)
    with pytest.raises(ValueError):
        wick_nonlinearity(FieldSnapshot(1.0, v.coeffs), wp)
