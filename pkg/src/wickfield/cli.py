"""Command-line entry point: ``wickfield {sample,moments,counterexample,converge,solve}``.

Every run validates its configuration (JSON or YAML) against a schema,
resolves defaults, applies flag overrides, and writes a ``manifest.json``
holding the resolved config and its SHA-256.  Each output file carries that
hash (first CSV comment line or a JSON key).  Failures print a JSON error
object on stderr and exit with 2 (config), 3 (budget) or 4 (numerics).
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import __version__
from ._backend import BACKEND
from .counterexample import (DyadicProfile, divergence_rate_fit, membership_report,
                             restricted_sum, restricted_sum_constant, zeroth_mode_moment)
from .errors import BudgetExceededError, ConfigError, InsufficientSpanError, NumericalFailure
from .evolution import (LinearWickSource, SolverConfig, WaveState, ZeroWickSource,
                        solve_wick_nlw)
from .lattice import build_lattice
from .linear_waves import gamma_from_pair, gamma_from_table, gamma_power_law, linear_coefficients
from .moment_oracle import second_moment_per_mode, tail_scan
from .randomize import sample_multipliers, sample_multipliers_batch
from .spectral_data import DataPair, HermitianCoeffs, admissible, regularity_threshold
from .stochastic_conv import MultiplierSpec, gamma_from_multiplier, heat_paths, wave_paths
from .tables import write_csv, write_json

EXIT_CONFIG, EXIT_BUDGET, EXIT_NUMERIC = 2, 3, 4

# ------------------------------------------------------------------- schemas

_LATTICE = {
    "type": "object",
    "required": ["dim", "cutoff"],
    "additionalProperties": False,
    "properties": {
        "dim": {"type": "integer", "minimum": 1, "maximum": 3},
        "cutoff": {"type": "integer", "minimum": 0},
        "shape": {"enum": ["ball", "cube"], "default": "ball"},
        "oversample": {"type": "integer", "minimum": 1, "default": 1},
    },
}

_DATA = {
    "type": "object",
    "required": ["family"],
    "properties": {
        "family": {"enum": ["power_law", "generic", "counterexample", "single_mode"]},
        "alpha": {"type": "number"},
        "decay": {"type": "number"},
        "velocity_decay": {"type": "number"},
        "phase": {"type": "number"},
        "j": {"type": "integer", "minimum": 2},
        "mode": {"type": "array", "items": {"type": "integer"}},
        "amplitude": {"type": "number"},
    },
}

_COMMON = {
    "seed": {"type": "integer", "minimum": 0, "default": 0},
    "stream": {"type": "integer", "minimum": 0, "default": 0},
    "workers": {"type": "integer", "minimum": 1, "default": 1},
    "budget_mb": {"type": "number", "exclusiveMinimum": 0, "default": 1024},
}


def _schema(required, props):
    return {"type": "object", "required": required, "additionalProperties": False,
            "properties": {**copy.deepcopy(_COMMON), **props}}


SCHEMAS = {
    "sample": _schema(["lattice", "data"], {
        "lattice": _LATTICE,
        "data": _DATA,
        "kind": {"enum": ["linear", "wave_noise", "heat_noise"], "default": "linear"},
        "noise_alpha": {"type": "number", "default": 0.0},
        "times": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1,
                  "default": [0.0]},
        "ensemble": {"type": "integer", "minimum": 1, "default": 1},
    }),
    "moments": _schema(["profile", "j", "cutoffs"], {
        "profile": {
            "type": "object", "required": ["family", "dim"],
            "properties": {
                "family": {"enum": ["power_law", "toy", "counterexample", "wave_noise",
                                    "heat_noise"]},
                "dim": {"type": "integer", "minimum": 1, "maximum": 3},
                "alpha": {"type": "number"},
                "value": {"type": "number", "minimum": 0},
                "support": {"type": "integer", "minimum": 0},
                "j": {"type": "integer", "minimum": 2},
                "cutoff": {"type": "integer", "minimum": 1},
            },
        },
        "j": {"type": "integer", "minimum": 1, "maximum": 8},
        "t": {"type": "number", "minimum": 0, "default": 0.0},
        "cutoffs": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "sigmas": {"type": "array", "items": {"type": "number"}, "default": [0.0]},
        "shape": {"enum": ["ball", "cube"], "default": "ball"},
        "method": {"enum": ["dense_fft", "sparse_enumeration", "product_structure", None],
                   "default": None},
        "admissibility": {"type": "object", "required": ["s", "p"],
                          "properties": {"s": {"type": "number"}, "p": {"type": "number"},
                                         "sigma": {"type": "number"}}},
    }),
    "counterexample": _schema(["dim", "j"], {
        "dim": {"type": "integer", "minimum": 1, "maximum": 3},
        "j": {"type": "integer", "minimum": 2, "maximum": 8},
        "m_max": {"type": "integer", "minimum": 2, "default": 64},
        "log2_cutoffs": {"type": "array", "items": {"type": "integer", "minimum": 1},
                         "default": [4, 8, 16, 32, 64]},
        "s_values": {"type": "array", "items": {"type": "number"},
                     "default": [-0.05, -0.2, -1.0]},
        "p_values": {"type": "array", "items": {"type": "number", "minimum": 1}},
        "n1_values": {"type": "array", "items": {"type": "integer", "minimum": 4},
                      "default": [4, 16, 64]},
    }),
    "converge": _schema(["profile", "j", "sigma", "cutoffs"], {
        "profile": {"type": "object", "required": ["dim", "alpha"],
                    "properties": {"dim": {"type": "integer", "minimum": 1, "maximum": 3},
                                   "alpha": {"type": "number"}}},
        "j": {"type": "integer", "minimum": 1, "maximum": 8},
        "sigma": {"type": "number"},
        "t": {"type": "number", "minimum": 0, "default": 0.0},
        "p": {"type": "number"},
        "cutoffs": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
    }),
    "solve": _schema(["lattice", "k", "dt", "T"], {
        "lattice": _LATTICE,
        "k": {"type": "integer", "minimum": 1, "maximum": 7},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "picard_tol": {"type": "number", "exclusiveMinimum": 0, "default": 1e-12},
        "max_iter": {"type": "integer", "minimum": 1, "default": 50},
        "scheme": {"enum": ["lobatto3", "trapezoid"], "default": "lobatto3"},
        "blowup_ceiling": {"type": "number", "exclusiveMinimum": 0, "default": 1e8},
        "init": {"default": {"family": "zero"}, "type": "object", "required": ["family"],
                 "properties": {"family": {"enum": ["zero", "single_mode"]},
                                "mode": {"type": "array", "items": {"type": "integer"}},
                                "amplitude": {"type": "number"}}},
        "noise": {"default": {"family": "none"}, "type": "object", "required": ["family"],
                  "properties": {"family": {"enum": ["none", "random_linear"]},
                                 "data": _DATA, "N": {"type": "integer", "minimum": 0}}},
    }),
}


def _fill_defaults(schema, data):
    """Insert schema defaults for missing keys (recursively for nested objects)."""
    for key, sub in schema.get("properties", {}).items():
        if key not in data and "default" in sub:
            data[key] = copy.deepcopy(sub["default"])
        if isinstance(data.get(key), dict) and sub.get("type") == "object":
            _fill_defaults(sub, data[key])
    return data


def validate_config(command, raw):
    """Validate and resolve a raw config dict; raises :class:`ConfigError` naming the field."""
    schema = SCHEMAS[command]
    data = copy.deepcopy(raw) if raw else {}
    validator = jsonschema.Draft7Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path)
        if err.validator == "required":
            missing = [r for r in err.validator_value if r not in err.instance]
            path = ".".join(filter(None, [path, missing[0] if missing else ""]))
        elif err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            path = ".".join(filter(None, [path, extra[0] if extra else ""]))
        exc = ConfigError(f"{path or '<root>'}: {err.message}")
        exc.field = path
        raise exc
    return _fill_defaults(schema, data)


def load_config(path):
    if path is None:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def canonical_json(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"), allow_nan=False)


EXECUTION_KEYS = ("workers",)


def config_hash(cfg):
    """SHA-256 of the canonical config; execution-only keys do not change results and are excluded."""
    hashed = {k: v for k, v in cfg.items() if k not in EXECUTION_KEYS}
    return hashlib.sha256(canonical_json(hashed).encode("utf-8")).hexdigest()


# ------------------------------------------------------------------ builders

def build_data(lattice, spec):
    """Data pair for a ``data`` config block."""
    jb = lattice.jb
    fam = spec["family"]
    if fam == "power_law":
        return DataPair.power_law(lattice, spec.get("alpha", 0.0))
    if fam == "generic":
        # conjugate-symmetric phases exp(i phase * (n_1 + ... + n_d))
        phase = np.exp(1j * spec.get("phase", 0.7) * lattice.freqs.sum(axis=1))
        a = jb ** -spec.get("decay", 0.7) * phase
        b = jb ** (1.0 - spec.get("velocity_decay", 1.1)) * np.conj(phase)
        return DataPair(HermitianCoeffs(lattice, a), HermitianCoeffs(lattice, b))
    if fam == "counterexample":
        prof = DyadicProfile(lattice.dim, spec.get("j", 2))
        a = prof.amp(lattice.freqs)
        return DataPair(HermitianCoeffs(lattice, a), HermitianCoeffs(lattice, a * jb))
    if fam == "single_mode":
        mode = tuple(spec.get("mode", [1] * lattice.dim))
        amp = spec.get("amplitude", 1.0)
        a = np.zeros(lattice.count, dtype=complex)
        for n in {mode, tuple(-x for x in mode)}:
            idx = lattice.index_of(n)
            if idx < 0:
                raise ConfigError(f"data.mode: {list(mode)} outside the lattice")
            a[idx] = amp
        return DataPair.with_velocity_jb(HermitianCoeffs(lattice, a))
    raise ConfigError(f"data.family: unknown family {fam!r}")


def _lattice(cfg):
    lat = cfg["lattice"]
    return build_lattice(lat["dim"], lat["cutoff"], lat.get("shape", "ball"),
                         lat.get("oversample", 1), budget_mb=cfg["budget_mb"])


def build_profile(spec, budget_mb):
    fam, d = spec["family"], spec["dim"]
    if fam == "power_law":
        return gamma_power_law(d, spec.get("alpha", 0.0))
    if fam == "toy":
        r = spec.get("support", 1)
        lat = build_lattice(d, r, "cube", budget_mb=budget_mb)
        freqs = lat.freqs[np.max(np.abs(lat.freqs), axis=1) <= r] if len(lat.freqs) else lat.freqs
        return gamma_from_table(freqs, np.full(len(freqs), spec.get("value", 1.0)))
    if fam == "counterexample":
        return DyadicProfile(d, spec.get("j", 2)).gamma_profile()
    if fam in ("wave_noise", "heat_noise"):
        lat = build_lattice(d, spec.get("cutoff", 16), budget_mb=budget_mb)
        return gamma_from_multiplier(MultiplierSpec.power_law(lat, spec.get("alpha", 0.0)),
                                     fam.split("_")[0])
    raise ConfigError(f"profile.family: unknown family {fam!r}")


# ------------------------------------------------------------------ commands

class Outputs:
    """Collects written files so the manifest can list them."""

    def __init__(self, out_dir, digest):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.digest = digest
        self.files = []

    def csv(self, name, columns, rows):
        write_csv(self.dir / name, columns, rows, self.digest)
        self.files.append(name)

    def json(self, name, payload):
        write_json(self.dir / name, payload, self.digest)
        self.files.append(name)

    def binary(self, name, header, array):
        head = json.dumps({"manifest_sha256": self.digest, **header}, sort_keys=True).encode()
        arr = np.ascontiguousarray(array, dtype="<c16")
        with open(self.dir / name, "wb") as fh:
            fh.write(b"WFS1")
            fh.write(np.uint32(len(head)).tobytes())
            fh.write(head)
            fh.write(arr.tobytes())
        self.files.append(name)


def read_sample_binary(path):
    """Inverse of the ``samples.bin`` writer -> ``(header, array)``."""
    raw = Path(path).read_bytes()
    if raw[:4] != b"WFS1":
        raise ValueError("not a wickfield sample file")
    n = int(np.frombuffer(raw[4:8], dtype=np.uint32)[0])
    header = json.loads(raw[8:8 + n])
    arr = np.frombuffer(raw[8 + n:], dtype="<c16").reshape(header["shape"])
    return header, arr


def _sample_chunk(args):
    cfg, streams = args
    lat = _lattice(cfg)
    times = cfg["times"]
    if cfg["kind"] == "linear":
        pair = build_data(lat, cfg["data"])
        g, h = sample_multipliers_batch(lat, cfg["seed"], streams)
        out = np.stack([linear_coefficients(pair.u0.values, pair.u1.values, g, h, lat.jb, t)
                        for t in times], axis=1)
    else:
        spec = MultiplierSpec.power_law(lat, cfg["noise_alpha"])
        paths = wave_paths if cfg["kind"] == "wave_noise" else heat_paths
        out = np.swapaxes(paths(spec, times, cfg["seed"], streams), 0, 1)
    return out


def _chunks(streams, workers):
    size = max(1, math.ceil(len(streams) / workers))
    return [streams[i:i + size] for i in range(0, len(streams), size)]


def _ordered_mean(rows):
    # sequential row sums: independent of memory alignment, so bit-stable across runs
    acc = np.zeros(rows.shape[1:])
    for r in rows:
        acc += r
    return acc / len(rows)


def cmd_sample(cfg, out):
    lat = _lattice(cfg)
    streams = list(range(cfg["stream"], cfg["stream"] + cfg["ensemble"]))
    jobs = [(cfg, c) for c in _chunks(streams, cfg["workers"])]
    if cfg["workers"] > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            parts = list(pool.map(_sample_chunk, jobs))
    else:
        parts = [_sample_chunk(j) for j in jobs]
    samples = np.concatenate(parts, axis=0)          # (E, T, K)
    out.binary("samples.bin", {"shape": list(samples.shape), "times": cfg["times"],
                               "streams": [streams[0], streams[-1]], "seed": cfg["seed"],
                               "freqs": lat.freqs.tolist()}, samples)
    if cfg["kind"] == "linear":
        profile = gamma_from_pair(build_data(lat, cfg["data"]))
    else:
        kind = cfg["kind"].split("_")[0]
        profile = gamma_from_multiplier(MultiplierSpec.power_law(lat, cfg["noise_alpha"]), kind)
    rows = []
    for ti, t in enumerate(cfg["times"]):
        gamma = profile(lat.freqs, t)
        second = _ordered_mean(np.abs(samples[:, ti]) ** 2)
        for n, m2, g in zip(lat.freqs, second, gamma):
            rows.append([t, *map(int, n), m2, g])
    cols = ["time"] + [f"n{i + 1}" for i in range(lat.dim)] + ["sample_second_moment", "gamma"]
    out.csv("sample_stats.csv", cols, rows)
    return {"ensemble": len(streams), "modes": lat.count}


def cmd_moments(cfg, out):
    profile = build_profile(cfg["profile"], cfg["budget_mb"])
    d = cfg["profile"]["dim"]
    summary = {"hsigma": {}}
    if "admissibility" in cfg:
        a = cfg["admissibility"]
        verdict = admissible(d, cfg["j"], a["s"], a.get("sigma", cfg["sigmas"][0]), a["p"])
        summary["admissibility"] = {"ok": verdict.ok, "branch": verdict.branch,
                                    "reason": verdict.reason}
    for N in cfg["cutoffs"]:
        rep = second_moment_per_mode(profile, N, cfg["j"], cfg["t"], sigmas=cfg["sigmas"],
                                     method=cfg["method"], shape=cfg["shape"],
                                     budget_mb=cfg["budget_mb"])
        rep.to_csv(out.dir / f"moments_N{N}.csv", out.digest)
        out.files.append(f"moments_N{N}.csv")
        out.json(f"moments_N{N}.json", rep.summary())
        summary["hsigma"][str(N)] = {f"{s:g}": rep.hsigma_at(s) for s in cfg["sigmas"]}
    rows = [[N, *[summary["hsigma"][str(N)][f"{s:g}"] for s in cfg["sigmas"]]]
            for N in cfg["cutoffs"]]
    out.csv("hsigma.csv", ["N", *[f"hsigma_{s:g}" for s in cfg["sigmas"]]], rows)
    out.json("summary.json", summary)
    return summary


def cmd_counterexample(cfg, out):
    d, j = cfg["dim"], cfg["j"]
    prof = DyadicProfile(d, j, cfg["m_max"])
    p_values = cfg.get("p_values")
    rep = membership_report(prof, cfg["s_values"], p_values)
    out.json("membership.json", {"sobolev": rep.sobolev, "fourier_lebesgue": rep.fourier_lebesgue})
    cutoffs = [2 ** e for e in cfg["log2_cutoffs"]]
    series = zeroth_mode_moment(prof, cutoffs)
    series.to_csv(out.dir / "zeroth_mode.csv", out.digest)
    out.files.append("zeroth_mode.csv")
    try:
        fit = divergence_rate_fit(series)
        fit_payload = {k: v for k, v in vars(fit).items() if k != "cutoffs"}
        fit_payload["log2_cutoffs"] = cfg["log2_cutoffs"]
    except InsufficientSpanError as exc:
        fit_payload = {"error": str(exc)}
    out.json("rate_fit.json", fit_payload)
    if j >= 3:
        rows = []
        for N in cutoffs:
            upper = restricted_sum_constant(j) * N / math.sqrt(d)
            for n1 in cfg["n1_values"]:
                if n1 > upper and upper >= 4:
                    continue
                r = restricted_sum(prof, n1, N)
                rows.append([str(N), int(N).bit_length() - 1, n1, r.value, r.comparison, r.ratio])
        out.csv("restricted_sums.csv", ["N", "log2_N", "n1", "value", "comparison", "ratio"], rows)
    return {"diverges": fit_payload.get("diverges")}


def cmd_converge(cfg, out):
    d, alpha, j, sigma = cfg["profile"]["dim"], cfg["profile"]["alpha"], cfg["j"], cfg["sigma"]
    profile = gamma_power_law(d, alpha)
    scan = tail_scan(profile, cfg["cutoffs"], j, cfg["t"], sigma, budget_mb=cfg["budget_mb"])
    first = scan[0][2]
    rows = [[N, M, v, v / first if first else math.nan] for N, M, v in scan]
    out.csv("tail_scan.csv", ["N", "M", "tail_distance", "ratio_to_first"], rows)
    vals = [v for _, _, v in scan]
    s = regularity_threshold(d, alpha)
    summary = {"s": s, "monotone_decreasing": all(b < a for a, b in zip(vals, vals[1:])),
               "final_ratio": rows[-1][3]}
    if "p" in cfg:
        v = admissible(d, j, s, sigma, cfg["p"])
        summary["admissibility"] = {"ok": v.ok, "branch": v.branch, "reason": v.reason}
    out.json("summary.json", summary)
    return summary


def cmd_solve(cfg, out):
    lat = _lattice(cfg)
    k = cfg["k"]
    init = cfg["init"]
    if init["family"] == "zero":
        state = WaveState.zeros(lat)
    else:
        pair = build_data(lat, {"family": "single_mode", **init})
        state = WaveState(0.0, pair.u0, HermitianCoeffs.zeros(lat))
    noise = cfg["noise"]
    if noise["family"] == "none":
        source = ZeroWickSource(lat, k)
    else:
        pair = build_data(lat, noise.get("data", {"family": "power_law", "alpha": 0.5}))
        m = sample_multipliers(lat, cfg["seed"], cfg["stream"])
        source = LinearWickSource(pair, m, gamma_from_pair(pair), noise.get("N", lat.cutoff), k)
    sc = SolverConfig(k, cfg["dt"], cfg["T"], cfg["picard_tol"], cfg["max_iter"], source,
                      cfg["scheme"], cfg["blowup_ceiling"])
    traj = solve_wick_nlw(state, sc, store_states=False)
    traj.to_csv(out.dir / "trajectory.csv", out.digest)
    out.files.append("trajectory.csv")
    out.json("summary.json", traj.summary())
    return traj.summary()


COMMANDS = {"sample": cmd_sample, "moments": cmd_moments, "counterexample": cmd_counterexample,
            "converge": cmd_converge, "solve": cmd_solve}


# ---------------------------------------------------------------------- main

def build_parser():
    parser = argparse.ArgumentParser(prog="wickfield", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wickfield {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON or YAML config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--stream", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--budget-mb", type=float, dest="budget_mb")
        p.add_argument("--out", type=Path, default=Path("wickfield_out"))
    return parser


def _fail(code, kind, message, **extra):
    print(json.dumps({"error": kind, "message": message, "exit_code": code, **extra},
                     sort_keys=True), file=sys.stderr)
    return code


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        raw = load_config(args.config)
        for key in ("seed", "stream", "workers", "budget_mb"):
            if getattr(args, key) is not None:
                raw[key] = getattr(args, key)
        cfg = validate_config(args.command, raw)
        digest = config_hash(cfg)
        out = Outputs(args.out, digest)
        result = COMMANDS[args.command](cfg, out)
        manifest = {"command": args.command, "config": cfg, "config_sha256": digest,
                    "version": __version__, "backend": BACKEND, "outputs": sorted(out.files)}
        (out.dir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(json.dumps({"status": "ok", "out": str(out.dir), "config_sha256": digest},
                         sort_keys=True))
        return 0
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), field=getattr(exc, "field", None))
    except BudgetExceededError as exc:
        return _fail(EXIT_BUDGET, "budget", str(exc), method=exc.method)
    except NumericalFailure as exc:
        extra = {k: getattr(exc, k) for k in ("step", "time", "residual") if hasattr(exc, k)}
        return _fail(EXIT_NUMERIC, "numeric", str(exc), **extra)


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
