import itertools
import math

import numpy as np
import pytest

from wickfield.counterexample import (DyadicProfile, build_counterexample, divergence_rate_fit,
                                      membership_report, restricted_sum,
                                      restricted_sum_constant, restricted_sum_onset,
                                      zero_sum_weight_1d, zeroth_mode_moment)
from wickfield.errors import InsufficientSpanError
from wickfield.lattice import build_lattice
from wickfield.linear_waves import gamma_power_law
from wickfield.moment_oracle import second_moment_per_mode

DYADIC = [2 ** (2 ** k) for k in range(2, 7)]


def test_coefficients():
    p = DyadicProfile(1, 2)
    assert p.coord_amp(4) == pytest.approx(2 ** -0.25)
    assert p.coord_amp(-4) == p.coord_amp(4)
    assert p.coord_amp(3) == 0.0 and p.coord_amp(1) == 0.0 and p.coord_amp(0) == 0.0
    assert p.coord_amp(2 ** 64) == pytest.approx(64 ** -0.25)


def test_build_counterexample_support():
    pair, prof = build_counterexample(2, 3, 5)
    assert len(pair.freqs) == (2 * 5) ** 2
    assert np.allclose(pair.b, pair.a * np.sqrt(1 + np.sum(pair.freqs.astype(float) ** 2, 1)))
    assert prof.support_1d(5) == sorted([s * 2 ** m for m in range(1, 6) for s in (1, -1)])


def test_membership_examples():
    rep = membership_report(DyadicProfile(1, 2), s_values=(-0.1, -0.05, -0.2, -1.0),
                            p_values=(4.0, 6.0))
    fl4 = rep.fourier_lebesgue[4.0]
    assert fl4["classification"] == "divergent"
    assert fl4["coordinate_partial_sum"] == pytest.approx(7.509175672, rel=1e-9)
    assert rep.fourier_lebesgue[6.0]["classification"] == "finite"
    for s in (-0.1, -0.05, -0.2, -1.0):
        entry = rep.sobolev[s]
        assert entry["classification"] == "finite"
        assert entry["ratio"] < 1
        assert entry["upper_bound"] >= entry["partial_sum"] > 0


def test_sobolev_tail_certificate_is_an_upper_bound():
    prof = DyadicProfile(2, 2, 40)
    small = membership_report(prof, s_values=(-0.2,), m_sobolev=20).sobolev[-0.2]
    big = membership_report(prof, s_values=(-0.2,), m_sobolev=40).sobolev[-0.2]
    assert small["partial_sum"] <= big["partial_sum"] <= small["upper_bound"]


def test_zeroth_mode_j2_closed_form():
    prof = DyadicProfile(1, 2)
    series = zeroth_mode_moment(prof, DYADIC)
    for row in series.rows:
        M = row.N.bit_length() - 1
        assert row.value == pytest.approx(4 * sum(1 / m for m in range(1, M + 1)), rel=1e-12)


def test_zeroth_mode_small_cutoffs_and_monotone():
    prof = DyadicProfile(1, 3)
    series = zeroth_mode_moment(prof, [1, 2, 4, 8, 16, 32])
    assert series.rows[0].value == 0.0
    vals = series.values
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_zero_sum_weight_against_enumeration():
    prof = DyadicProfile(1, 3)
    sup = prof.support_1d(5)
    brute = sum(math.prod(prof.coord_amp(k) ** 2 for k in c)
                for c in itertools.product(sup, repeat=3) if sum(c) == 0)
    assert zero_sum_weight_1d(prof, 5) == pytest.approx(brute, rel=1e-13)


def test_tensor_factorization_and_ball_bracket():
    prof = DyadicProfile(2, 2)
    gp = prof.gamma_profile()
    N = 16
    cube = second_moment_per_mode(gp, N, 2, shape="cube").value_at((0, 0))
    ball = second_moment_per_mode(gp, N, 2, shape="ball", method="sparse_enumeration")
    row = zeroth_mode_moment(prof, [N]).rows[0]
    assert cube == pytest.approx(row.value, rel=1e-12)
    assert row.ball_lower <= ball.value_at((0, 0)) * (1 + 1e-12)
    assert ball.value_at((0, 0)) <= row.value * (1 + 1e-12)
    assert row.ball_exact == pytest.approx(ball.value_at((0, 0)), rel=1e-12)


def test_rate_fit_j2_diverges_with_positive_band():
    fit = divergence_rate_fit(zeroth_mode_moment(DyadicProfile(1, 2), DYADIC))
    assert fit.diverges and fit.ratio_min > 0


def test_rate_fit_rejects_constant_series():
    fit = divergence_rate_fit((DYADIC, [5.0] * len(DYADIC)), d=1)
    assert not fit.diverges


def test_rate_fit_rejects_admissible_power_law():
    prof = gamma_power_law(1, -0.55)   # s = -0.05, admissible with sigma=-1, p=3
    series = zeroth_mode_moment(prof, [2 ** 4, 2 ** 8, 2 ** 16], j=2)
    fit = divergence_rate_fit((series.cutoffs, series.values), d=1, min_doublings=2)
    assert not fit.diverges


def test_rate_fit_span_check():
    with pytest.raises(InsufficientSpanError):
        divergence_rate_fit(([16, 256], [1.0, 2.0]), d=1)


def test_j3_zeroth_mode_converges_to_closed_form():
    # 2^a + 2^b is a power of two only if a = b, so the 1-d zero-sum weight is
    # 6 * sum_{a>=1} a^{-4/3} (a+1)^{-2/3} with sign patterns (2^a, 2^a, -2^{a+1})
    prof = DyadicProfile(1, 3)
    M = 64
    closed = 6 * sum(a ** (-4 / 3) * (a + 1) ** (-2 / 3) for a in range(1, M))
    assert zero_sum_weight_1d(prof, M) == pytest.approx(closed, rel=1e-12)


def test_restricted_sum_examples():
    prof = DyadicProfile(1, 3)
    assert restricted_sum_constant(3) == 2.0 ** -8
    assert restricted_sum(prof, 4, 512).value == 0.0      # empty admissible range
    vals = [restricted_sum(prof, 4, 2 ** e).value for e in (16, 24, 32, 48)]
    assert all(b >= a for a, b in zip(vals, vals[1:])) and vals[0] > 0
    with pytest.raises(ValueError):
        restricted_sum(prof, 2 ** 20, 2 ** 16)
    with pytest.raises(ValueError):
        restricted_sum(DyadicProfile(1, 2), 4, 2 ** 20)


def test_restricted_sum_onset_reported():
    prof = DyadicProfile(1, 3)
    onset, rows = restricted_sum_onset(prof, 4, [2 ** e for e in (8, 12, 16, 24, 32)])
    assert onset is not None and rows[-1].ratio > 0


def test_generic_j2_divergence():
    lat = build_lattice(1, 2 ** 12)
    from wickfield.spectral_data import DataPair, HermitianCoeffs
    from wickfield.linear_waves import gamma_from_pair
    pair = DataPair.with_velocity_jb(HermitianCoeffs(lat, lat.jb ** -0.25))
    series = zeroth_mode_moment(gamma_from_pair(pair), [2 ** k for k in range(4, 13, 2)], j=2)
    fit = divergence_rate_fit(series, rate=math.log)
    assert fit.diverges


def test_csv_columns(tmp_path):
    s = zeroth_mode_moment(DyadicProfile(1, 2), DYADIC)
    s.to_csv(tmp_path / "z.csv", "abc")
    lines = (tmp_path / "z.csv").read_text().splitlines()
    assert lines[0] == "# manifest_sha256=abc"
    assert lines[1].startswith("N,log2_N,exact_value")
    assert lines[-1].startswith(str(2 ** 64))
