import math

import numpy as np
import pytest

from wickfield.errors import SymmetryError
from wickfield.lattice import build_lattice
from wickfield.spectral_data import (DataPair, HermitianCoeffs, admissible, fl_norm,
                                     p_critical, pair_fl_norm, power_law_membership,
                                     read_coeffs_binary, read_coeffs_text, regularity_report,
                                     regularity_threshold, sobolev_norm, write_coeffs_binary,
                                     write_coeffs_text)


@pytest.fixture
def lat():
    return build_lattice(1, 4)


def test_symmetry_validation(lat):
    vals = np.zeros(lat.count, dtype=complex)
    vals[lat.index_of((2,))] = 1.0 + 1.0j
    with pytest.raises(SymmetryError):
        HermitianCoeffs(lat, vals)
    vals[lat.index_of((-2,))] = 1.0 - 1.0j
    HermitianCoeffs(lat, vals)


def test_sobolev_norm_single_mode(lat):
    c = HermitianCoeffs.delta(lat, (2,), 3.0)
    assert sobolev_norm(c, 0.5) == pytest.approx(math.sqrt(2 * 9 * 5 ** 0.5))


def test_fl_norms(lat):
    c = HermitianCoeffs.delta(lat, (1,), 2.0)
    assert fl_norm(c, 0.0, 4) == pytest.approx((2 * 16) ** 0.25)
    assert fl_norm(c, 0.0, math.inf) == pytest.approx(2.0)
    pair = DataPair.with_velocity_jb(c)
    assert pair_fl_norm(pair, 0.0, 4) == pytest.approx((2 * (2 * 16)) ** 0.25)


def test_thresholds():
    assert regularity_threshold(3, 0.45) == pytest.approx(-0.05)
    assert p_critical(3, 3, 3 * -0.1) == pytest.approx(18 / 8.4)
    with pytest.raises(ValueError):
        p_critical(1, 2, -1.0)


def test_admissibility_branches():
    a = admissible(1, 2, -0.05, -1.0, 3.0)
    assert a and a.branch == "i.b"
    b = admissible(3, 3, -0.1, -0.3, 2.1)
    assert b and b.branch == "i.a"
    assert not admissible(1, 2, -0.05, 0.0, 3.0)
    assert not admissible(1, 2, -0.05, -1.0, 5.0)
    with pytest.raises(ValueError):
        admissible(1, 2, 0.1, -1.0, 3.0)


def test_power_law_membership():
    assert power_law_membership(1, 1.0, 0.0, 2) == "finite"
    assert power_law_membership(1, 0.5, 0.0, 2) == "divergent"
    assert power_law_membership(2, 0.0, 0.0, math.inf) == "finite"


def test_regularity_report_tails(lat):
    c = HermitianCoeffs(lat, lat.jb ** -1.0)
    rep = regularity_report(c, s_values=(0.0,), tail_cutoffs=(0, 2), power_law_decay=1.0)
    assert rep.sobolev_tail[0.0][2] == pytest.approx(2 * (1 / 10 + 1 / 17))
    assert rep.classification[(0.0, 2.0)] == "finite"


def test_text_and_binary_round_trip(tmp_path):
    lat = build_lattice(2, 3)
    rng = np.random.default_rng(3)
    v = rng.normal(size=lat.count) + 1j * rng.normal(size=lat.count)
    c = HermitianCoeffs(lat, 0.5 * (v + np.conj(v[lat.conj])))
    write_coeffs_text(tmp_path / "c.txt", c, {"seed": 3})
    back, meta = read_coeffs_text(tmp_path / "c.txt")
    assert np.array_equal(back.values, c.values)
    assert back.lattice.freqs.tolist() == lat.freqs.tolist()
    write_coeffs_binary(tmp_path / "c.bin", c)
    write_coeffs_binary(tmp_path / "d.bin", c)
    assert (tmp_path / "c.bin").read_bytes() == (tmp_path / "d.bin").read_bytes()
    back2, _ = read_coeffs_binary(tmp_path / "c.bin")
    assert np.array_equal(back2.values, c.values)
