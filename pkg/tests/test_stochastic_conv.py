import numpy as np
import pytest

from oracles import quad_heat, quad_sin2
from wickfield.lattice import build_lattice, to_physical
from wickfield.stochastic_conv import (MultiplierSpec, fl_gate_report, gamma_from_multiplier,
                                       heat_mode_variance, heat_paths, hilbert_schmidt_report,
                                       sample_heat_convolution, sample_wave_convolution,
                                       sin2_integral, split_invariance_error,
                                       wave_mode_variance, wave_paths, write_path_csv)
from wickfield.counterexample import zeroth_mode_moment, divergence_rate_fit, DyadicProfile
from wickfield.spectral_data import HermitianCoeffs

E = 10000


def test_wave_variance_closed_form_vs_quadrature():
    assert wave_mode_variance(0, 0.0) == 0.0
    w = np.sqrt(2.0)
    assert wave_mode_variance([1], 0.7) == pytest.approx(quad_sin2(w, 0.7), abs=1e-10)
    assert wave_mode_variance([50], 40.0) == pytest.approx(20.0, rel=1e-3)


def test_heat_variance_closed_form_vs_quadrature():
    assert heat_mode_variance([2], 0.0) == 0.0
    assert heat_mode_variance([2], 0.3) == pytest.approx(quad_heat(np.sqrt(5.0), 0.3), abs=1e-10)
    assert heat_mode_variance([2], 50.0) == pytest.approx(0.1, rel=1e-14)


def test_small_argument_series_is_accurate():
    w = np.array([1.0, 1.0])
    h = np.array([1e-3, 4e-2])
    exact = [quad_sin2(1.0, x) for x in h]
    assert np.allclose(sin2_integral(w, h), exact, rtol=1e-12, atol=0)


@pytest.mark.parametrize("h1,h2", [(0.3, 0.45), (1e-4, 3e-5), (2.0, 0.01)])
def test_split_invariance(h1, h2):
    omega = build_lattice(2, 6).jb
    assert split_invariance_error(omega, h1, h2) < 1e-12
    assert split_invariance_error(omega, h1, h2, "heat") < 1e-12


@pytest.fixture(scope="module")
def spec():
    return MultiplierSpec.power_law(build_lattice(1, 4), 0.5)


def test_wave_sample_variance(spec):
    t = 0.9
    c = wave_paths(spec, [t], 3, range(E))[0]
    m2 = np.abs(c) ** 2
    se = m2.std(axis=0) / np.sqrt(E)
    expect = np.abs(spec.phi_hat) ** 2 * wave_mode_variance(spec.lattice.freqs, t) \
        / spec.lattice.jb ** 2
    assert np.all(np.abs(m2.mean(axis=0) - expect) < 5 * se)


def test_heat_sample_variance_and_stationarity(spec):
    c = heat_paths(spec, [0.2, 5.0], 4, range(E))
    g = gamma_from_multiplier(spec, "heat")
    for k, t in enumerate((0.2, 5.0)):
        m2 = np.abs(c[k]) ** 2
        se = m2.std(axis=0) / np.sqrt(E)
        assert np.all(np.abs(m2.mean(axis=0) - g(spec.lattice.freqs, t)) < 5 * se)
    # t <n>^2 >> 1: variance sits at the limit |phi_n|^2 / (2 <n>^2)
    late = g(spec.lattice.freqs, 20.0)
    assert np.allclose(late, g(spec.lattice.freqs, 30.0), rtol=1e-14)
    assert np.allclose(late, np.abs(spec.phi_hat) ** 2 / (2 * spec.lattice.jb ** 2), rtol=1e-14)


def test_two_step_vs_one_step(spec):
    one = wave_paths(spec, [1.0], 5, range(E))[-1]
    two = wave_paths(spec, [0.35, 1.0], 6, range(E))[-1]
    v1, v2 = np.abs(one) ** 2, np.abs(two) ** 2
    se = np.sqrt(v1.var(axis=0) / E + v2.var(axis=0) / E)
    assert np.all(np.abs(v1.mean(axis=0) - v2.mean(axis=0)) < 5 * se)


def test_cross_mode_independence(spec):
    c = wave_paths(spec, [0.8], 8, range(E))[0]
    lat = spec.lattice
    i, k = lat.index_of((1,)), lat.index_of((3,))
    prod = c[:, i] * np.conj(c[:, k])
    se = np.abs(prod).std() / np.sqrt(E)
    assert abs(prod.mean()) < 5 * se * np.sqrt(2)


def test_paths_are_real_fields_and_zero_symbol(spec):
    snaps = sample_wave_convolution(spec, [0.5, 1.0], 1, 0)
    grid = to_physical(snaps[-1].coeffs, tol=1e-12)
    assert grid.shape == (spec.lattice.grid_size,)
    zero = MultiplierSpec(HermitianCoeffs.zeros(spec.lattice))
    assert all(np.all(s.coeffs.values == 0) for s in sample_heat_convolution(zero, [0.1, 1], 1))
    assert np.all(sample_heat_convolution(spec, [0.0], 1)[0].coeffs.values == 0)


def test_bad_time_grid(spec):
    with pytest.raises(ValueError):
        wave_paths(spec, [0.5, 0.5], 1, [0])
    with pytest.raises(ValueError):
        heat_paths(spec, [-0.1], 1, [0])


def test_gamma_from_multiplier_and_zero_time(spec):
    g = gamma_from_multiplier(spec, "wave")
    assert np.all(g(spec.lattice.freqs, 0.0) == 0)
    jb = spec.lattice.jb
    assert np.allclose(g(spec.lattice.freqs, 0.4),
                       jb ** -1.0 * wave_mode_variance(spec.lattice.freqs, 0.4) / jb ** 2)


def test_counterexample_symbol_reuses_divergence_diagnostics():
    # phi_hat_n / <n> = a_n, so at large t the wave gamma is |a_n|^2 (t/2 + O(1))
    lat = build_lattice(1, 2 ** 12)
    prof = DyadicProfile(1, 2)
    spec = MultiplierSpec(HermitianCoeffs(lat, prof.amp(lat.freqs) * lat.jb))
    g = gamma_from_multiplier(spec, "wave")
    series = zeroth_mode_moment(g, [2 ** (2 ** k) for k in (2, 3)] + [2 ** 12], j=2, t=10.0)
    fit = divergence_rate_fit(series, d=1, min_doublings=1)
    assert fit.diverges


def test_gates():
    lat = build_lattice(1, 64)
    rep = hilbert_schmidt_report(MultiplierSpec.power_law(lat, 0.0), -0.1, [8, 64], alpha=0.0)
    assert rep.classification == "finite"
    assert rep.partial_sums[8] < rep.partial_sums[64]
    assert hilbert_schmidt_report(MultiplierSpec.power_law(lat, -1.0), 0.0, alpha=-1.0) \
        .classification == "divergent"
    assert fl_gate_report(1, 0.0, -0.1, 20).classification == "finite"


def test_path_csv(tmp_path, spec):
    snaps = sample_heat_convolution(spec, [0.1, 0.2], 2, 7)
    write_path_csv(tmp_path / "p.csv", snaps, 2, 7, "h")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[1] == "time,n1,re,im,seed,stream"
    assert len(lines) == 2 + 2 * spec.lattice.count
