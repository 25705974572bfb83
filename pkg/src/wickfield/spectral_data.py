"""Coefficient containers, Sobolev / Fourier-Lebesgue norms and thresholds.

Norms are evaluated over the stored (truncated) lattice.  Analytic families
(power laws) additionally get a closed-form membership verdict via
:func:`power_law_membership`, so statements about infinite lattices stay
decidable.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SymmetryError
from .lattice import FrequencyLattice, build_lattice, japanese, to_physical, to_spectral

SYMMETRY_TOL = 1e-12


@dataclass(eq=False)
class HermitianCoeffs:
    """Complex Fourier coefficients with ``c[-n] = conj(c[n])``.

    Parameters
    ----------
    lattice : FrequencyLattice
    values : array_like
        One complex value per stored frequency (lattice order).
    validate : bool
        Check conjugate symmetry on construction.
    """

    lattice: FrequencyLattice
    values: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.lattice.count,):
            raise ValueError(f"expected {self.lattice.count} values, got {self.values.shape}")
        if self.validate:
            self.check_symmetry()

    def check_symmetry(self, tol=SYMMETRY_TOL):
        v = self.values
        err = np.max(np.abs(v - np.conj(v[self.lattice.conj])), initial=0.0)
        scale = max(np.max(np.abs(v), initial=0.0), np.finfo(float).tiny)
        if err > tol * scale:
            raise SymmetryError(f"conjugate symmetry violated by {err:.3e}")

    @classmethod
    def zeros(cls, lattice):
        return cls(lattice, np.zeros(lattice.count, dtype=complex))

    @classmethod
    def delta(cls, lattice, n=None, value=1.0):
        """Single (real) mode at ``n`` and its mirror ``-n``."""
        n = (0,) * lattice.dim if n is None else tuple(n)
        vals = np.zeros(lattice.count, dtype=complex)
        vals[lattice.index_of(n)] = value
        vals[lattice.index_of(tuple(-k for k in n))] = np.conj(value)
        return cls(lattice, vals)

    @classmethod
    def from_function(cls, lattice, func):
        """Coefficients ``func(freqs)`` evaluated on the ``(count, d)`` frequencies."""
        return cls(lattice, np.asarray(func(lattice.freqs), dtype=complex))

    @classmethod
    def from_grid(cls, grid, lattice):
        return cls(lattice, to_spectral(grid, lattice))

    def to_physical(self):
        return to_physical(self, self.lattice)

    def truncate(self, cutoff):
        """``P_cutoff`` applied on the same lattice (modes outside set to 0)."""
        return HermitianCoeffs(self.lattice, np.where(self.lattice.mask(cutoff), self.values, 0.0),
                               validate=False)

    def __add__(self, other):
        return HermitianCoeffs(self.lattice, self.values + other.values, validate=False)

    def __sub__(self, other):
        return HermitianCoeffs(self.lattice, self.values - other.values, validate=False)

    def __mul__(self, scalar):
        return HermitianCoeffs(self.lattice, self.values * scalar, validate=False)

    __rmul__ = __mul__


@dataclass(eq=False)
class DataPair:
    """Initial data ``(u0, u1)`` with coefficients ``a_n`` and ``b_n``."""

    u0: HermitianCoeffs
    u1: HermitianCoeffs

    def __post_init__(self):
        if self.u0.lattice is not self.u1.lattice:
            raise ValueError("u0 and u1 must live on the same lattice")

    @property
    def lattice(self):
        return self.u0.lattice

    @classmethod
    def with_velocity_jb(cls, u0):
        """The pair ``(u0, <nabla> u0)``."""
        return cls(u0, HermitianCoeffs(u0.lattice, u0.values * u0.lattice.jb))

    @classmethod
    def power_law(cls, lattice, alpha):
        """Coefficients ``<n>^(-1-alpha)`` and ``<n>^(-alpha)``."""
        jb = lattice.jb
        return cls(HermitianCoeffs(lattice, jb ** (-1.0 - alpha)),
                   HermitianCoeffs(lattice, jb ** (-alpha)))


# --------------------------------------------------------------------------- norms

def _weighted(c, s):
    return japanese(c.lattice.freqs) ** s * np.abs(c.values)


def sobolev_norm(c, s):
    """``(sum_n <n>^(2s) |c_n|^2)^(1/2)`` over the stored modes."""
    w = _weighted(c, s)
    return float(math.sqrt(np.sum(w * w)))


def _lp(values, p):
    if math.isinf(p):
        return float(np.max(values, initial=0.0))
    if p == 2:
        return float(math.sqrt(np.sum(values * values)))
    return float(np.sum(values ** p) ** (1.0 / p))


def fl_norm(c, s, p):
    """Fourier-Lebesgue norm ``|| <n>^s c_n ||_{l^p}``; ``p`` may be ``inf``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return _lp(_weighted(c, s), float(p))


def pair_fl_norm(pair, s, p):
    """Norm on ``FL^{s,p} x FL^{s-1,p}``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    n0 = fl_norm(pair.u0, s, p)
    n1 = fl_norm(pair.u1, s - 1.0, p)
    if math.isinf(p):
        return max(n0, n1)
    return float((n0 ** p + n1 ** p) ** (1.0 / p))


def pair_sobolev_norm(pair, s):
    """Norm on ``H^s x H^{s-1}``."""
    return math.hypot(sobolev_norm(pair.u0, s), sobolev_norm(pair.u1, s - 1.0))


# ---------------------------------------------------------------------- thresholds

def regularity_threshold(d, alpha):
    """``s(d, alpha) = alpha + 1 - d/2``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return alpha + 1.0 - d / 2.0


def p_critical(d, j, sigma):
    """``2dj / (dj + 2 sigma)``; only defined when ``dj + 2 sigma > 0``."""
    if d < 1 or j < 2:
        raise ValueError("need d >= 1 and j >= 2")
    denom = d * j + 2.0 * sigma
    if denom <= 0:
        raise ValueError(f"dj + 2 sigma = {denom} <= 0; use the sigma <= -d/2 branch")
    return 2.0 * d * j / denom


@dataclass(frozen=True)
class Admissibility:
    ok: bool
    branch: str | None
    reason: str

    def __bool__(self):
        return self.ok


def admissible(d, j, s, sigma, p):
    """Check the sufficient conditions for convergence of truncated Wick powers.

    Returns an :class:`Admissibility` (truthy when admissible) naming the
    branch that fired: ``"i.a"`` for ``sigma >= -d/2`` with
    ``2 < p < p_critical``, ``"i.b"`` for ``sigma <= -d/2`` with
    ``2 < p <= 2j/(j-1)``.
    """
    if j < 2:
        raise ValueError("j must be >= 2")
    if s >= 0:
        raise ValueError("s must be negative")
    # boundary sigma = j*s is admissible; allow for rounding in j*s
    if sigma > j * s + 1e-12 * max(1.0, abs(j * s)):
        return Admissibility(False, None, f"sigma={sigma} > j*s={j * s}")
    if not p > 2:
        return Admissibility(False, None, "p must be strictly greater than 2")
    half = -d / 2.0
    if sigma >= half:
        pc = p_critical(d, j, sigma)
        if p < pc:
            return Admissibility(True, "i.a", f"2 < p={p} < p_critical={pc:.6g}")
    if sigma <= half:
        top = 2.0 * j / (j - 1)
        if p <= top:
            return Admissibility(True, "i.b", f"2 < p={p} <= 2j/(j-1)={top:.6g}")
    return Admissibility(False, None, f"p={p} outside the admissible range")


def power_law_membership(d, decay, s, p):
    """Closed-form membership of ``<n>^(-decay)`` (on all of ``Z^d``) in ``FL^{s,p}``.

    Returns ``"finite"`` or ``"divergent"``.
    """
    if math.isinf(p):
        return "finite" if decay >= s else "divergent"
    return "finite" if p * (decay - s) > d else "divergent"


@dataclass
class RegularityReport:
    sobolev_tail: dict
    fl_norms: dict
    classification: dict = field(default_factory=dict)


def regularity_report(c, s_values=(0.0,), fl_params=((0.0, 2.0),), tail_cutoffs=(0,),
                      power_law_decay=None):
    """Sobolev tail sums and Fourier-Lebesgue norms of stored coefficients.

    ``sobolev_tail[s][K] = sum_{|n| > K} <n>^(2s) |c_n|^2``.  When
    ``power_law_decay`` is given, each ``(s, p)`` also receives the closed-form
    membership verdict of the infinite power-law family.
    """
    freqs = c.lattice.freqs
    r2 = np.sum(freqs.astype(np.int64) ** 2, axis=1)
    tails = {}
    for s in s_values:
        w = _weighted(c, s) ** 2
        tails[s] = {int(K): float(np.sum(w[r2 > K * K])) for K in sorted(tail_cutoffs)}
    norms = {(s, p): fl_norm(c, s, p) for s, p in fl_params}
    cls = {}
    if power_law_decay is not None:
        cls = {(s, p): power_law_membership(c.lattice.dim, power_law_decay, s, p)
               for s, p in fl_params}
    return RegularityReport(tails, norms, cls)


# ------------------------------------------------------------------------------ I/O

TEXT_MAGIC = "# wickfield coefficients v1"
BINARY_MAGIC = b"WFC1"


def _lattice_meta(lattice):
    return {"dim": lattice.dim, "cutoff": lattice.cutoff, "shape": lattice.shape.value,
            "oversample": lattice.oversample, "count": lattice.count}


def _lattice_from_meta(meta):
    return build_lattice(int(meta["dim"]), int(meta["cutoff"]), meta["shape"],
                         int(meta.get("oversample", 1)))


def write_coeffs_text(path, coeffs, metadata=None):
    """Column text format: one row ``n_1 .. n_d real imag`` per frequency.

    The header carries the lattice description (and any extra metadata such
    as seeds) as a JSON comment line.
    """
    lat = coeffs.lattice
    meta = {"lattice": _lattice_meta(lat), **(metadata or {})}
    cols = [f"n{i + 1}" for i in range(lat.dim)] + ["real", "imag"]
    lines = [TEXT_MAGIC, "# " + json.dumps(meta, sort_keys=True), " ".join(cols)]
    for n, v in zip(lat.freqs, coeffs.values):
        lines.append(" ".join(str(int(k)) for k in n) + f" {v.real:.17g} {v.imag:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_coeffs_text(path):
    """Inverse of :func:`write_coeffs_text`; returns ``(coeffs, metadata)``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != TEXT_MAGIC:
        raise ValueError(f"{path}: not a wickfield coefficient file")
    meta = json.loads(lines[1][1:])
    lat = _lattice_from_meta(meta["lattice"])
    rows = np.array([[float(x) for x in ln.split()] for ln in lines[3:] if ln.strip()])
    vals = np.zeros(lat.count, dtype=complex)
    if rows.size:
        idx = lat.lookup(rows[:, :lat.dim].astype(np.int64))
        if np.any(idx < 0):
            raise ValueError(f"{path}: frequency outside the declared lattice")
        vals[idx] = rows[:, lat.dim] + 1j * rows[:, lat.dim + 1]
    return HermitianCoeffs(lat, vals), meta


def write_coeffs_binary(path, coeffs, metadata=None):
    """Binary format: magic, JSON header length + header, int64 frequencies, complex128 values."""
    lat = coeffs.lattice
    header = json.dumps({"lattice": _lattice_meta(lat), **(metadata or {})},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(lat.freqs, dtype="<i8").tobytes())
        fh.write(np.ascontiguousarray(coeffs.values, dtype="<c16").tobytes())


def read_coeffs_binary(path):
    raw = Path(path).read_bytes()
    if raw[:4] != BINARY_MAGIC:
        raise ValueError(f"{path}: not a wickfield binary coefficient file")
    (hlen,) = struct.unpack("<I", raw[4:8])
    meta = json.loads(raw[8:8 + hlen].decode("utf-8"))
    lat = _lattice_from_meta(meta["lattice"])
    off = 8 + hlen
    nbytes = lat.count * lat.dim * 8
    freqs = np.frombuffer(raw[off:off + nbytes], dtype="<i8").reshape(lat.count, lat.dim)
    vals_in = np.frombuffer(raw[off + nbytes:off + nbytes + lat.count * 16], dtype="<c16")
    vals = np.zeros(lat.count, dtype=complex)
    vals[lat.lookup(freqs)] = vals_in
    return HermitianCoeffs(lat, vals), meta
