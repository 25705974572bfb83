"""Wave and heat stochastic convolutions driven by Fourier-multiplier noise.

Brownian convention: for ``n != 0``, ``beta_n = (W1 + i W2) / sqrt(2)`` with
independent standard real Brownian motions, so ``E|beta_n(t)|^2 = t``;
``beta_0`` is a real standard Brownian motion; ``beta_{-n} = conj(beta_n)``.

Paths are advanced by exact Gaussian increments: the law at every grid
time is exact for any step size.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import japanese
from .linear_waves import FieldSnapshot, GammaProfile, ProfileKind
from .randomize import FAMILY_HEAT, FAMILY_WAVE, addressing, generator
from .spectral_data import HermitianCoeffs, power_law_membership, sobolev_norm
from .tables import write_csv

_SERIES_CUTOFF = 0.1


def _jb(n):
    n = np.asarray(n, dtype=np.int64)
    # a scalar or 1-d input is a single frequency
    return japanese(n.reshape(1, -1) if n.ndim <= 1 else n)


def _x_minus_sin(x):
    """``x - sin(x)`` without cancellation for small ``x``."""
    x = np.asarray(x, dtype=float)
    out = x - np.sin(x)
    small = np.abs(x) < _SERIES_CUTOFF
    if np.any(small):
        xs = x[small]
        x2 = xs * xs
        term = xs * x2 / 6.0
        acc = term.copy()
        for k in range(2, 8):
            term = -term * x2 / ((2 * k) * (2 * k + 1))
            acc += term
        out[small] = acc
    return out


def sin2_integral(omega, h):
    """``int_0^h sin^2(omega v) dv = (x - sin x) / (4 omega)`` with ``x = 2 omega h``."""
    omega = np.asarray(omega, dtype=float)
    return _x_minus_sin(2.0 * omega * h) / (4.0 * omega)


def wave_mode_variance(n, t):
    """``E|I_n(t)|^2 = t/2 - sin(2 t <n>) / (4 <n>)``.

    ``n`` is one frequency (int or length-d sequence) or an ``(K, d)`` array.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    out = sin2_integral(_jb(n), float(t))
    return float(out[0]) if out.size == 1 else out


def heat_mode_variance(n, t):
    """``E|J_n(t)|^2 = (1 - exp(-2 t <n>^2)) / (2 <n>^2)``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    w2 = _jb(n) ** 2
    out = -np.expm1(-2.0 * t * w2) / (2.0 * w2)
    return float(out[0]) if out.size == 1 else out


def wave_step_covariance(omega, h):
    """Per-mode 2x2 increment covariance for ``(S, C)`` over a step ``h``.

    Returns ``(A, B, D)`` = ``(int sin^2, int sin cos, int cos^2)`` over ``[0, h]``.
    """
    omega = np.asarray(omega, dtype=float)
    A = sin2_integral(omega, h)
    B = np.sin(omega * h) ** 2 / (2.0 * omega)
    return A, B, h - A


def wave_rotation(omega, h):
    c, s = np.cos(omega * h), np.sin(omega * h)
    return c, s


def _cholesky_2x2(A, B, D):
    l11 = np.sqrt(A)
    l21 = np.divide(B, l11, out=np.zeros_like(B), where=l11 > 0)
    l22 = np.sqrt(np.maximum(D - l21 * l21, 0.0))
    return l11, l21, l22


def heat_step(omega, h):
    """``(decay, increment variance)`` of the exact heat recursion."""
    w2 = np.asarray(omega, dtype=float) ** 2
    return np.exp(-h * w2), -np.expm1(-2.0 * h * w2) / (2.0 * w2)


def split_invariance_error(omega, h1, h2, kind="wave"):
    """Max deviation between one-step and two-substep covariances.

    Wave: ``Sigma(h1+h2)`` versus ``R(h2) Sigma(h1) R(h2)^T + Sigma(h2)``.
    Heat: ``v(h1+h2)`` versus ``e^{-2 h2 w^2} v(h1) + v(h2)``.
    """
    if kind == "heat":
        e2, v2 = heat_step(omega, h2)
        _, v1 = heat_step(omega, h1)
        _, v = heat_step(omega, h1 + h2)
        return float(np.max(np.abs(e2 * e2 * v1 + v2 - v)))
    A1, B1, D1 = wave_step_covariance(omega, h1)
    A2, B2, D2 = wave_step_covariance(omega, h2)
    A, B, D = wave_step_covariance(omega, h1 + h2)
    c, s = wave_rotation(omega, h2)
    # R = [[c, s], [-s, c]] acting on (S, C)
    RA = c * c * A1 + 2 * c * s * B1 + s * s * D1
    RB = -c * s * A1 + (c * c - s * s) * B1 + c * s * D1
    RD = s * s * A1 - 2 * c * s * B1 + c * c * D1
    err = np.max(np.abs(np.stack([RA + A2 - A, RB + B2 - B, RD + D2 - D])))
    return float(err)


@dataclass(eq=False)
class MultiplierSpec:
    """Fourier multiplier ``Phi f = phi * f`` given by its symbol ``phi_hat``."""

    coeffs: HermitianCoeffs

    @property
    def lattice(self):
        return self.coeffs.lattice

    @property
    def phi_hat(self):
        return self.coeffs.values

    @classmethod
    def power_law(cls, lattice, alpha):
        """``phi_hat_n = <n>^(-alpha)``."""
        return cls(HermitianCoeffs(lattice, lattice.jb ** (-float(alpha))))

    @classmethod
    def white(cls, lattice):
        return cls.power_law(lattice, 0.0)


@dataclass(eq=False)
class WienerModeState:
    """Accumulated Wiener integrals per mode: ``(S, C)`` (wave) or ``J`` (heat)."""

    time: float
    S: np.ndarray | None = None
    C: np.ndarray | None = None
    J: np.ndarray | None = None


def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("times must be a non-empty 1-d grid")
    if times[0] < 0:
        raise ValueError("times must start at t >= 0")
    if np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return times


def _noise(lattice, seed, streams, family, block):
    adr = addressing(lattice)
    raw = np.stack([generator(seed, s, family, block).standard_normal(adr.size)
                    for s in streams])
    return adr.complex_gaussians(raw)


def _steps(times):
    prev = 0.0
    for k, t in enumerate(times):
        yield k, t, t - prev
        prev = t


def wave_paths(spec, times, seed, streams):
    """Coefficients ``phi_hat_n S_n(t) / <n>`` of shape ``(len(times), len(streams), K)``."""
    times = _check_times(times)
    lat = spec.lattice
    streams = list(streams)
    omega = lat.jb
    S = np.zeros((len(streams), lat.count), dtype=complex)
    C = np.zeros_like(S)
    out = np.empty((len(times), len(streams), lat.count), dtype=complex)
    for k, t, h in _steps(times):
        if h > 0:
            c, s = wave_rotation(omega, h)
            l11, l21, l22 = _cholesky_2x2(*wave_step_covariance(omega, h))
            xi1 = _noise(lat, seed, streams, FAMILY_WAVE, 2 * k)
            xi2 = _noise(lat, seed, streams, FAMILY_WAVE, 2 * k + 1)
            S, C = c * S + s * C + l11 * xi1, c * C - s * S + l21 * xi1 + l22 * xi2
        out[k] = spec.phi_hat * S / omega
    return out


def heat_paths(spec, times, seed, streams):
    """Coefficients ``phi_hat_n J_n(t)`` of shape ``(len(times), len(streams), K)``."""
    times = _check_times(times)
    lat = spec.lattice
    streams = list(streams)
    J = np.zeros((len(streams), lat.count), dtype=complex)
    out = np.empty((len(times), len(streams), lat.count), dtype=complex)
    for k, t, h in _steps(times):
        if h > 0:
            decay, var = heat_step(lat.jb, h)
            J = decay * J + np.sqrt(var) * _noise(lat, seed, streams, FAMILY_HEAT, k)
        out[k] = spec.phi_hat * J
    return out


def _snapshots(spec, times, values):
    return [FieldSnapshot(float(t), HermitianCoeffs(spec.lattice, v, validate=False))
            for t, v in zip(np.asarray(times, dtype=float), values)]


def sample_wave_convolution(spec, times, seed, stream=0):
    """One path of the wave stochastic convolution as snapshots on ``times``."""
    return _snapshots(spec, times, wave_paths(spec, times, seed, [stream])[:, 0])


def sample_heat_convolution(spec, times, seed, stream=0):
    """One path of the heat stochastic convolution as snapshots on ``times``."""
    return _snapshots(spec, times, heat_paths(spec, times, seed, [stream])[:, 0])


def gamma_from_multiplier(spec, kind="wave"):
    """Per-mode variance profile of the (wave or heat) stochastic convolution."""
    lat = spec.lattice
    phi2 = np.abs(spec.phi_hat) ** 2
    jb = lat.jb
    if kind == "wave":
        weight = phi2 / jb ** 2
        var, pk = (lambda w, t: sin2_integral(w, t)), ProfileKind.WAVE_CONVOLUTION
    elif kind == "heat":
        weight = phi2
        var, pk = (lambda w, t: -np.expm1(-2.0 * t * w * w) / (2.0 * w * w)), \
            ProfileKind.HEAT_CONVOLUTION
    else:
        raise ValueError(f"kind must be 'wave' or 'heat', got {kind!r}")

    def evaluate(freqs, t):
        idx = lat.lookup(freqs)
        ok = idx >= 0
        out = np.zeros(len(freqs))
        out[ok] = weight[idx[ok]] * var(jb[idx[ok]], t)
        return out

    return GammaProfile(lat.dim, evaluate, pk, {"kind": kind}, lattice=lat)


@dataclass
class GateReport:
    criterion: str
    classification: str
    partial_sums: dict


def hilbert_schmidt_report(spec, s, cutoffs=None, alpha=None):
    """``sum_n <n>^(2(s-1)) |phi_hat_n|^2`` partial sums, i.e. ``Phi`` Hilbert-Schmidt into ``H^(s-1)``.

    The classification is exact for the power-law family ``<n>^(-alpha)``
    (finite iff ``2(alpha + 1 - s) > d``); otherwise it is ``"undetermined"``.
    """
    lat = spec.lattice
    cutoffs = cutoffs or [lat.cutoff]
    sums = {int(N): sobolev_norm(spec.coeffs.truncate(N), s - 1.0) ** 2 for N in cutoffs}
    if alpha is None:
        cls = "undetermined"
    else:
        cls = power_law_membership(lat.dim, alpha, s - 1.0, 2.0)
    return GateReport(f"HS(L2, H^{s - 1:g})", cls, sums)


def fl_gate_report(d, alpha, s, p):
    """``phi in FL^{s,p}`` for ``phi_hat = <n>^(-alpha)`` (exact power-law test)."""
    return GateReport(f"FL^{{{s:g},{p:g}}}", power_law_membership(d, alpha, s, p), {})


def write_path_csv(path, snapshots, seed, stream, manifest_hash=None):
    """Per-time coefficient dump with seed and stream columns."""
    lat = snapshots[0].lattice
    cols = ["time"] + [f"n{i + 1}" for i in range(lat.dim)] + ["re", "im", "seed", "stream"]
    rows = ([snap.time, *map(int, n), v.real, v.imag, int(seed), int(stream)]
            for snap in snapshots for n, v in zip(lat.freqs, snap.coeffs.values))
    write_csv(path, cols, rows, manifest_hash)
