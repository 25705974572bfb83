import csv
import json

import numpy as np
import pytest
import yaml

from wickfield.cli import config_hash, read_sample_binary, run, validate_config


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    if name.endswith(".yaml"):
        path.write_text(yaml.safe_dump(cfg))
    else:
        path.write_text(json.dumps(cfg))
    return path


def read_rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


SAMPLE = {"lattice": {"dim": 1, "cutoff": 6, "oversample": 2},
          "data": {"family": "generic"}, "times": [0.0, 0.5], "ensemble": 7, "seed": 11}


def test_sample_rerun_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, SAMPLE)
    for out in ("a", "b"):
        assert run(["sample", "--config", str(cfg), "--out", str(tmp_path / out)]) == 0
    for name in ("samples.bin", "sample_stats.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sample_worker_count_invariance(tmp_path):
    cfg = write_cfg(tmp_path, SAMPLE)
    run(["sample", "--config", str(cfg), "--out", str(tmp_path / "w1")])
    run(["sample", "--config", str(cfg), "--workers", "3", "--out", str(tmp_path / "w3")])
    for name in ("samples.bin", "sample_stats.csv"):
        assert (tmp_path / "w1" / name).read_bytes() == (tmp_path / "w3" / name).read_bytes()
    m1 = json.loads((tmp_path / "w1" / "manifest.json").read_text())
    m3 = json.loads((tmp_path / "w3" / "manifest.json").read_text())
    assert m1["config_sha256"] == m3["config_sha256"]


def test_sample_binary_roundtrip(tmp_path):
    cfg = write_cfg(tmp_path, SAMPLE, "cfg.yaml")
    run(["sample", "--config", str(cfg), "--out", str(tmp_path / "o")])
    header, data = read_sample_binary(tmp_path / "o" / "samples.bin")
    assert data.shape == (7, 2, 13) == tuple(header["shape"])
    assert np.all(data[:, 0].imag[:, 6] == 0)      # zero mode is real


def test_seed_changes_output(tmp_path):
    cfg = write_cfg(tmp_path, SAMPLE)
    run(["sample", "--config", str(cfg), "--out", str(tmp_path / "a")])
    run(["sample", "--config", str(cfg), "--seed", "12", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "samples.bin").read_bytes() != (tmp_path / "b" / "samples.bin").read_bytes()


def test_missing_field_names_field(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"lattice": {"dim": 1, "cutoff": 4}})
    assert run(["sample", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["field"] == "data" and err["exit_code"] == 2


def test_unknown_field_rejected():
    with pytest.raises(Exception) as exc:
        validate_config("converge", {"profile": {"dim": 1, "alpha": 0.0}, "j": 2, "sigma": 0,
                                     "cutoffs": [4], "bogus": 1})
    assert exc.value.field == "bogus"


def test_hash_ignores_workers():
    base = validate_config("counterexample", {"dim": 1, "j": 2})
    more = validate_config("counterexample", {"dim": 1, "j": 2, "workers": 4})
    other = validate_config("counterexample", {"dim": 1, "j": 2, "seed": 3})
    assert config_hash(base) == config_hash(more) != config_hash(other)


def test_budget_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"profile": {"family": "power_law", "dim": 3, "alpha": 0.0},
                               "j": 4, "cutoffs": [64], "method": "dense_fft",
                               "budget_mb": 1})
    assert run(["moments", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert json.loads(capsys.readouterr().err)["error"] == "budget"


def test_numeric_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"lattice": {"dim": 1, "cutoff": 4, "oversample": 4}, "k": 3,
                               "dt": 1.5, "T": 3.0, "max_iter": 20,
                               "init": {"family": "single_mode", "mode": [1], "amplitude": 3.0}})
    assert run(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4
    err = json.loads(capsys.readouterr().err)
    assert err["step"] == 0


def test_moments_toy_profile_row(tmp_path):
    cfg = write_cfg(tmp_path, {"profile": {"family": "toy", "dim": 1, "value": 1.0, "support": 1},
                               "j": 3, "cutoffs": [1]})
    assert run(["moments", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = read_rows(tmp_path / "o" / "moments_N1.csv")
    zero = [r for r in rows if r["n1"] == "0"][0]
    # 3! * #{(a,b,c) in {-1,0,1}^3 : a+b+c = 0} = 6 * 7
    assert float(zero["second_moment"]) == pytest.approx(42.0)


def test_counterexample_outputs(tmp_path):
    cfg = write_cfg(tmp_path, {"dim": 1, "j": 3, "log2_cutoffs": [4, 6, 8, 10],
                               "p_values": [6.0, 2.0], "n1_values": [4, 16]})
    assert run(["counterexample", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    mem = json.loads((tmp_path / "o" / "membership.json").read_text())
    fl = mem["fourier_lebesgue"]
    assert fl["6.0"]["classification"] == "finite"
    assert fl["2.0"]["classification"] == "divergent"
    rows = read_rows(tmp_path / "o" / "restricted_sums.csv")
    assert rows and all(float(r["value"]) >= 0 for r in rows)
    assert (tmp_path / "o" / "zeroth_mode.csv").exists()


def test_converge_monotone(tmp_path):
    cfg = write_cfg(tmp_path, {"profile": {"dim": 2, "alpha": -0.05}, "j": 2, "sigma": -2.0,
                               "p": 3.0, "cutoffs": [4, 8, 16, 32]})
    assert run(["converge", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["monotone_decreasing"] and s["admissibility"]["ok"]


def test_solve_zero_run(tmp_path):
    cfg = write_cfg(tmp_path, {"lattice": {"dim": 2, "cutoff": 3, "oversample": 4},
                               "k": 3, "dt": 0.1, "T": 0.5})
    assert run(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = read_rows(tmp_path / "o" / "trajectory.csv")
    assert len(rows) == 6
    assert all(float(r["energy"]) == 0 for r in rows)
