"""Wave Duhamel operator and a solver for the Wick-renormalized NLW remainder.

The remainder ``v`` of ``u = z + v`` solves

    v_tt + (1 - Laplacian) v + N_k(v + z) = 0,

with ``N_k(v + z) = sum_j C(k, j) v^(k-j) :z^j:``.  Each step propagates the
linear part exactly per mode and solves the Duhamel correction by an
exponential collocation method whose stage equations are iterated to a
fixed point (Picard).  The nonlinearity is interpolated through the stage
values, so the iteration is the contraction of the local theory made
discrete and its iteration counts are reported.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PicardError, QuadratureError
from .lattice import to_physical, to_spectral
from .linear_waves import FieldSnapshot, linear_coefficients, truncated_variance
from .spectral_data import HermitianCoeffs
from .tables import write_csv, write_json
from .wick import _require_oversample, nonlinearity_grid, wick_powers_batch

SCHEMES = {"lobatto3": (0.0, 0.5, 1.0), "trapezoid": (0.0, 1.0)}
_GAUSS_POINTS = 20


# ------------------------------------------------------------------- Duhamel

def _source_values(F, t):
    out = F(t)
    if isinstance(out, FieldSnapshot):
        out = out.coeffs
    return np.asarray(getattr(out, "values", out))


def _duhamel_composite(F, t, omega, steps, order):
    taus = np.linspace(0.0, t, steps + 1)
    if order == 4:
        w = np.ones(steps + 1)
        w[1:-1:2], w[2:-1:2] = 4.0, 2.0
        w *= (t / steps) / 3.0
    else:
        w = np.full(steps + 1, t / steps)
        w[[0, -1]] *= 0.5
    acc = 0.0
    for tau, wk in zip(taus, w):
        acc = acc + wk * np.sin((t - tau) * omega) / omega * _source_values(F, tau)
    return acc


def duhamel(F, t, lattice, order=4, steps=None, dt=1e-2, tol=None):
    """``I(F)(t) = int_0^t sin((t - t') <n>) / <n> F_hat(t', n) dt'`` per mode.

    Parameters
    ----------
    F : callable
        ``F(t')`` returning a FieldSnapshot, HermitianCoeffs or raw coefficient array.
    t : float
    lattice : FrequencyLattice
    order : {2, 4}
        Composite trapezoid (2) or Simpson (4).
    steps : int, optional
        Number of subintervals (default ``ceil(t / dt)``, rounded up to even for Simpson).
    tol : float, optional
        If given, the error is estimated by Richardson extrapolation against
        half as many steps and :class:`QuadratureError` is raised when the
        estimate exceeds ``tol``.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    omega = lattice.jb
    if t == 0:
        return FieldSnapshot(0.0, HermitianCoeffs.zeros(lattice))
    if steps is None:
        steps = max(1, math.ceil(t / dt - 1e-9))
    if order == 4:
        steps += steps % 2
    if tol is not None:
        steps = max(steps, 2 * (order // 2))
        steps += steps % (2 * (order // 2))
    val = _duhamel_composite(F, t, omega, steps, order)
    if tol is not None:
        coarse = _duhamel_composite(F, t, omega, steps // 2, order)
        err = float(np.max(np.abs(val - coarse))) / (2 ** order - 1)
        if err > tol:
            raise QuadratureError(
                f"estimated quadrature error {err:.3e} exceeds tol={tol:.3e} with {steps} steps")
    return FieldSnapshot(float(t), HermitianCoeffs(lattice, val * np.ones(lattice.count),
                                                   validate=False))


def wave_operator_residual(F, t, lattice, delta, order=4, steps=None, dt=1e-3):
    """``(d_t^2 + 1 - Laplacian) I(F) - F`` at ``t`` with a centered difference of width ``delta``."""
    vals = [duhamel(F, t + k * delta, lattice, order=order, steps=steps, dt=dt).coeffs.values
            for k in (-1, 0, 1)]
    dtt = (vals[0] - 2 * vals[1] + vals[2]) / delta ** 2
    return dtt + lattice.jb ** 2 * vals[1] - _source_values(F, t)


# ------------------------------------------------------------- Wick sources

class ZeroWickSource:
    """``z = 0``: ``:z^0: = 1`` and ``:z^j: = 0`` for ``j >= 1``."""

    def __init__(self, lattice, k):
        self.lattice, self.k = lattice, int(k)
        shape = (lattice.grid_size,) * lattice.dim
        self._grids = [np.ones(shape)] + [np.zeros(shape) for _ in range(self.k)]

    def __call__(self, t):
        return self._grids

    def precompute(self, times):
        return self


class LinearWickSource:
    """Wick powers ``:z_N^j:(t)``, ``j = 0..k``, of a random linear solution.

    Grids are computed once per requested time (deterministic per sample)
    with the exact variance ``alpha_N(t)`` of ``profile``.
    """

    def __init__(self, pair, multipliers, profile, N, k):
        self.pair, self.m, self.profile = pair, multipliers, profile
        self.lattice = pair.lattice
        self.N, self.k = int(N), int(k)
        _require_oversample(self.lattice, self.k)
        self._cache = {}

    def __call__(self, t):
        t = float(t)
        hit = self._cache.get(t)
        if hit is None:
            lat = self.lattice
            z = linear_coefficients(self.pair.u0.values, self.pair.u1.values, self.m.g, self.m.h,
                                    lat.jb, t)
            var = truncated_variance(self.profile, self.N, t, shape=lat.shape)
            coeffs = wick_powers_batch(z, lat, self.N, self.k, var)
            hit = list(to_physical(coeffs, lat, tol=1e-10))
            self._cache[t] = hit
        return hit

    def precompute(self, times):
        for t in times:
            self(t)
        return self


# ------------------------------------------------------------------- solver

@dataclass(eq=False)
class WaveState:
    """Position and velocity coefficients at one time."""

    time: float
    v: HermitianCoeffs
    vt: HermitianCoeffs

    @classmethod
    def zeros(cls, lattice, time=0.0):
        return cls(float(time), HermitianCoeffs.zeros(lattice), HermitianCoeffs.zeros(lattice))

    @property
    def lattice(self):
        return self.v.lattice


@dataclass
class SolverConfig:
    k: int
    dt: float
    T: float
    picard_tol: float = 1e-12
    max_iter: int = 50
    wick_source: object = None
    scheme: str = "lobatto3"
    blowup_ceiling: float = 1e8
    sigmas: tuple = (0.0, 1.0)

    def __post_init__(self):
        if self.dt <= 0 or self.T <= 0 or self.picard_tol <= 0:
            raise ValueError("dt, T and picard_tol must be > 0")
        if self.k < 1:
            raise ValueError("nonlinearity degree k must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {sorted(SCHEMES)}")


def _lagrange(nodes, x):
    """Values of the Lagrange basis on ``nodes`` at points ``x`` -> ``(len(nodes), len(x))``."""
    out = np.ones((len(nodes), len(x)))
    for i, ci in enumerate(nodes):
        for m, cm in enumerate(nodes):
            if m != i:
                out[i] *= (x - cm) / (ci - cm)
    return out


def collocation_weights(nodes, h, omega):
    """Exponential collocation weights.

    ``Ws[m, i]`` = ``int_0^{c_m h} sin((c_m h - tau) w) / w * l_i(tau / h) dtau`` and
    ``Wc[m, i]`` the same with ``cos((c_m h - tau) w)``, both ``(M, M, K)``.
    """
    x, wq = np.polynomial.legendre.leggauss(_GAUSS_POINTS)
    M = len(nodes)
    Ws = np.zeros((M, M, len(omega)))
    Wc = np.zeros_like(Ws)
    for m, c in enumerate(nodes):
        if c == 0:
            continue
        tau = 0.5 * c * h * (x + 1.0)
        basis = _lagrange(nodes, tau / h) * (0.5 * c * h * wq)
        arg = np.outer(c * h - tau, omega)
        Ws[m] = basis @ (np.sin(arg) / omega)
        Wc[m] = basis @ np.cos(arg)
    return Ws, Wc


def energy(state, k=3):
    """``1/2 ||v_t||^2 + 1/2 ||v||_{H^1}^2 + ||v||_{L^{k+1}}^{k+1} / (k+1)`` (normalized measure)."""
    v, vt = state.v.values, state.vt.values
    jb2 = state.lattice.jb ** 2
    quad = 0.5 * np.sum(np.abs(vt) ** 2) + 0.5 * np.sum(jb2 * np.abs(v) ** 2)
    grid = to_physical(state.v)
    return float(quad + np.mean(grid ** (k + 1)) / (k + 1))


def _norm_ladder(state, sigmas):
    jb = state.lattice.jb
    a2 = np.abs(state.v.values) ** 2
    out = {f"v_H{s:g}": float(math.sqrt(np.sum(jb ** (2 * s) * a2))) for s in sigmas}
    out["vt_L2"] = float(math.sqrt(np.sum(np.abs(state.vt.values) ** 2)))
    out["H1xL2"] = float(math.sqrt(np.sum(jb ** 2 * a2) + out["vt_L2"] ** 2))
    return out


@dataclass
class Trajectory:
    states: list
    times: list
    iterations: list
    residuals: list
    energies: list
    norms: list
    blowup: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.states[-1]

    @property
    def energy_drift(self):
        e0 = self.energies[0]
        return float(max(abs(e - e0) for e in self.energies))

    def to_csv(self, path, manifest_hash=None):
        keys = list(self.norms[0])
        e0 = self.energies[0]
        rows = ([t, it, r, e, e - e0, *[nm[k] for k in keys]]
                for t, it, r, e, nm in zip(self.times, self.iterations, self.residuals,
                                           self.energies, self.norms))
        write_csv(path, ["time", "picard_iterations", "residual", "energy", "energy_drift", *keys],
                  rows, manifest_hash)

    def summary(self):
        return {"steps": len(self.times) - 1, "final_time": self.times[-1],
                "blowup": self.blowup, "max_iterations": max(self.iterations),
                "max_residual": max(self.residuals), "energy_drift": self.energy_drift,
                "final_norms": self.norms[-1], **self.meta}

    def to_json(self, path, manifest_hash=None):
        write_json(path, self.summary(), manifest_hash)


def _nonlinearity(values, lattice, grids, k):
    with np.errstate(over="ignore", invalid="ignore"):
        v_grid = to_physical(values, lattice, tol=1e-10)
        return to_spectral(nonlinearity_grid(v_grid, grids, k), lattice)


def solve_wick_nlw(init, cfg, store_states=True):
    """Integrate the remainder equation from ``init`` to ``init.time + cfg.T``.

    Returns a :class:`Trajectory`; raises :class:`PicardError` when the stage
    iteration does not reach ``cfg.picard_tol`` within ``cfg.max_iter``.
    Exceeding ``cfg.blowup_ceiling`` in ``H^1 x L^2`` stops the run with
    ``blowup=True``.
    """
    lat = init.lattice
    k = cfg.k
    _require_oversample(lat, k)
    source = cfg.wick_source if cfg.wick_source is not None else ZeroWickSource(lat, k)
    nodes = SCHEMES[cfg.scheme]
    n_steps = max(1, math.ceil(cfg.T / cfg.dt - 1e-9))
    h = cfg.T / n_steps
    omega = lat.jb
    Ws, Wc = collocation_weights(nodes, h, omega)
    cosn = [np.cos(c * h * omega) for c in nodes]
    sinn = [np.sin(c * h * omega) for c in nodes]

    v, vt = init.v.values.astype(complex), init.vt.values.astype(complex)
    t0 = init.time
    state = WaveState(t0, init.v, init.vt)
    traj = Trajectory([state] if store_states else [], [t0], [0], [0.0], [energy(state, k)],
                      [_norm_ladder(state, cfg.sigmas)],
                      meta={"dt": h, "scheme": cfg.scheme, "k": k})
    M = len(nodes)
    for step in range(n_steps):
        t = t0 + step * h
        stage_t = [t + c * h for c in nodes]
        grids = [source(ts) for ts in stage_t]
        lin = [cosn[m] * v + sinn[m] / omega * vt for m in range(M)]
        V = list(lin)
        Fs = [_nonlinearity(v, lat, grids[0], k)] + [None] * (M - 1)
        for it in range(1, cfg.max_iter + 1):
            for m in range(1, M):
                Fs[m] = _nonlinearity(V[m], lat, grids[m], k)
            new = [lin[m] - sum(Ws[m, i] * Fs[i] for i in range(M)) for m in range(M)]
            scale = 1.0 + max(float(np.max(np.abs(x))) for x in new[1:])
            diff = max(float(np.max(np.abs(new[m] - V[m]))) for m in range(1, M)) / scale
            V = new
            if not np.isfinite(diff):
                break
            if diff < cfg.picard_tol:
                break
        else:
            raise PicardError(f"Picard iteration did not converge at step {step} "
                              f"(t={t:.6g}, increment {diff:.3e}); reduce dt",
                              step=step, time=t, residual=diff)
        if not np.isfinite(diff):
            raise PicardError(f"Picard iteration diverged at step {step} (t={t:.6g}); reduce dt",
                              step=step, time=t, residual=float("inf"))
        # scheme-consistency residual with the converged stages
        for m in range(1, M):
            Fs[m] = _nonlinearity(V[m], lat, grids[m], k)
        resid = max(float(np.max(np.abs(lin[m] - sum(Ws[m, i] * Fs[i] for i in range(M)) - V[m])))
                    for m in range(1, M))
        last = M - 1
        vt = -omega * sinn[last] * v + cosn[last] * vt - sum(Wc[last, i] * Fs[i] for i in range(M))
        v = V[last]
        state = WaveState(t + h, HermitianCoeffs(lat, v.copy(), validate=False),
                          HermitianCoeffs(lat, vt.copy(), validate=False))
        norms = _norm_ladder(state, cfg.sigmas)
        if store_states:
            traj.states.append(state)
        else:
            traj.states[:] = [state]
        traj.times.append(t + h)
        traj.iterations.append(it)
        traj.residuals.append(resid)
        traj.energies.append(energy(state, k))
        traj.norms.append(norms)
        if not np.isfinite(norms["H1xL2"]) or norms["H1xL2"] > cfg.blowup_ceiling:
            traj.blowup = True
            break
    return traj


def linear_propagate(state, dt, steps):
    """Exact free Klein-Gordon propagation by ``steps`` rotations of size ``dt``."""
    w = state.lattice.jb
    c, s = np.cos(dt * w), np.sin(dt * w)
    v, vt = state.v.values.astype(complex), state.vt.values.astype(complex)
    for _ in range(steps):
        v, vt = c * v + s / w * vt, -w * s * v + c * vt
    lat = state.lattice
    return WaveState(state.time + steps * dt, HermitianCoeffs(lat, v, validate=False),
                     HermitianCoeffs(lat, vt, validate=False))
