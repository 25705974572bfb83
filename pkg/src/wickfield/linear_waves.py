"""Random linear wave solutions and their per-mode variance profiles.

``gamma_n(t)`` is the variance of the ``n``-th Fourier coefficient of the
random linear solution at time ``t``; every exact moment computation in
:mod:`wickfield.moment_oracle` is driven by a :class:`GammaProfile`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .lattice import FrequencyLattice, Shape, enumerate_frequencies, japanese, to_physical
from .spectral_data import HermitianCoeffs


class ProfileKind(str, Enum):
    FROM_DATA_PAIR = "from_data_pair"
    POWER_LAW = "power_law"
    WAVE_CONVOLUTION = "wave_convolution"
    HEAT_CONVOLUTION = "heat_convolution"
    CUSTOM = "custom"


@dataclass(eq=False)
class GammaProfile:
    """Per-mode variance sequence ``(n, t) -> gamma_n(t) >= 0``.

    Attributes
    ----------
    dim : int
    evaluator : callable
        ``evaluator(freqs, t)`` with ``freqs`` an ``(K, dim)`` integer array.
    kind : ProfileKind
    params : dict
        Parameters of the closed form (e.g. ``{"alpha": 0.3}``).
    lattice : FrequencyLattice or None
        Set when the profile is backed by stored coefficients; gamma vanishes
        off the lattice.
    factors : tuple of callables or None
        For tensor-product profiles, ``gamma_n(t) = prod_i factors[i](n_i, t)``.
    time_independent : bool
    """

    dim: int
    evaluator: Callable
    kind: ProfileKind = ProfileKind.CUSTOM
    params: dict = field(default_factory=dict)
    lattice: FrequencyLattice | None = None
    factors: tuple | None = None
    time_independent: bool = False

    def __call__(self, freqs, t=0.0):
        freqs = np.asarray(freqs, dtype=np.int64).reshape(-1, self.dim)
        return np.asarray(self.evaluator(freqs, float(t)), dtype=float)

    def default_shape(self):
        return self.lattice.shape if self.lattice is not None else Shape.BALL

    def support(self, cutoff, shape=None, budget_mb=None):
        """Frequencies of ``P_cutoff`` on which gamma may be nonzero."""
        shape = Shape.coerce(shape or self.default_shape())
        if self.lattice is not None and cutoff > self.lattice.cutoff:
            raise ValueError(f"cutoff {cutoff} exceeds the lattice cutoff {self.lattice.cutoff}")
        return enumerate_frequencies(self.dim, cutoff, shape, budget_mb)


@dataclass(eq=False)
class FieldSnapshot:
    """Real field at a fixed time, stored spectrally with a lazy grid view."""

    time: float
    coeffs: HermitianCoeffs
    _grid: np.ndarray | None = field(default=None, repr=False)

    @property
    def lattice(self):
        return self.coeffs.lattice

    @property
    def grid(self):
        if self._grid is None:
            self._grid = to_physical(self.coeffs)
        return self._grid


def gamma_from_pair(pair):
    """``gamma_n(t) = cos^2(t<n>)|a_n|^2 + sin^2(t<n>) <n>^-2 |b_n|^2``."""
    lat = pair.lattice
    a2 = np.abs(pair.u0.values) ** 2
    b2 = np.abs(pair.u1.values) ** 2
    jb = lat.jb
    static = bool(np.allclose(b2, a2 * jb ** 2, rtol=1e-14, atol=0.0))

    def evaluate(freqs, t):
        idx = lat.lookup(freqs)
        ok = idx >= 0
        out = np.zeros(len(freqs))
        k = idx[ok]
        c = np.cos(t * jb[k])
        s = np.sin(t * jb[k])
        out[ok] = c * c * a2[k] + s * s * b2[k] / jb[k] ** 2
        return out

    return GammaProfile(lat.dim, evaluate, ProfileKind.FROM_DATA_PAIR, {}, lattice=lat,
                        time_independent=static)


def gamma_power_law(d, alpha):
    """Time-independent ``gamma_n = <n>^(-2(1+alpha))``."""
    if d < 1:
        raise ValueError("d must be >= 1")

    def evaluate(freqs, t):
        return japanese(freqs) ** (-2.0 * (1.0 + alpha))

    return GammaProfile(d, evaluate, ProfileKind.POWER_LAW, {"alpha": float(alpha)},
                        time_independent=True)


def gamma_from_table(freqs, values, time_independent=True):
    """Custom time-independent profile from an explicit table (zero elsewhere)."""
    freqs = np.asarray(freqs, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    d = freqs.shape[1]
    table = {tuple(n): v for n, v in zip(freqs.tolist(), values)}

    def evaluate(f, t):
        return np.array([table.get(tuple(n), 0.0) for n in f.tolist()])

    return GammaProfile(d, evaluate, ProfileKind.CUSTOM, {"table_size": len(table)},
                        time_independent=time_independent)


def linear_coefficients(a, b, g, h, jb, t):
    """Coefficients ``cos(t<n>) g a + sin(t<n>)/<n> h b`` (broadcasts over batches)."""
    return np.cos(t * jb) * g * a + np.sin(t * jb) / jb * h * b


def random_linear_solution(pair, m, t):
    """Free Klein-Gordon evolution of the randomized data at time ``t``."""
    lat = pair.lattice
    if m.lattice is not lat:
        raise ValueError("multipliers and data live on different lattices")
    vals = linear_coefficients(pair.u0.values, pair.u1.values, m.g, m.h, lat.jb, t)
    return FieldSnapshot(float(t), HermitianCoeffs(lat, vals, validate=False))


def truncated_variance(profile, N, t=0.0, shape=None):
    """``alpha_N(t) = sum_{|n| <= N} gamma_n(t)``."""
    support = profile.support(N, shape)
    return float(np.sum(profile(support, t)))
