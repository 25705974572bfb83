"""Truncated frequency lattices on the torus and spectral <-> grid transforms.

A lattice stores every frequency ``n`` in ``Z^d`` satisfying the truncation
predicate (``|n| <= N`` for the Euclidean ball, ``max_i |n_i| <= N`` for the
cube) together with a physical grid that is large enough for exact products.

The torus carries the normalized measure, so a field is ``u(x) = sum_n c_n
exp(i n.x)`` and its grid mean of ``|u|^2`` equals ``sum_n |c_n|^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import fft as sfft

from .errors import BudgetExceededError, SymmetryError

DEFAULT_BUDGET_MB = 1024.0


class Shape(str, Enum):
    BALL = "ball"
    CUBE = "cube"

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        aliases = {"euclideanball": "ball", "euclidean": "ball", "l2": "ball",
                   "max": "cube", "linf": "cube"}
        return cls(aliases.get(key, key))


def japanese(freqs):
    """``<n> = (1 + |n|^2)^(1/2)`` for an ``(..., d)`` integer array."""
    freqs = np.asarray(freqs, dtype=float)
    return np.sqrt(1.0 + np.sum(freqs * freqs, axis=-1))


def in_shape(freqs, cutoff, shape=Shape.BALL):
    """Boolean mask of frequencies satisfying the truncation predicate."""
    freqs = np.asarray(freqs)
    if Shape.coerce(shape) is Shape.BALL:
        return np.sum(freqs.astype(np.int64) ** 2, axis=-1) <= cutoff * cutoff
    return np.max(np.abs(freqs), axis=-1) <= cutoff


def check_budget(n_bytes, budget_mb, what):
    budget = DEFAULT_BUDGET_MB if budget_mb is None else float(budget_mb)
    if n_bytes > budget * 2**20:
        raise BudgetExceededError(
            f"{what} needs ~{n_bytes / 2**20:.1f} MB, budget is {budget:.1f} MB",
            method=what, requested=n_bytes, budget=budget * 2**20)


def enumerate_frequencies(dim, cutoff, shape=Shape.BALL, budget_mb=None):
    """All frequencies inside the truncation, in lexicographic order.

    Returns an ``(count, dim)`` int64 array.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    side = 2 * cutoff + 1
    check_budget(float(side) ** dim * dim * 8 * 3, budget_mb, "frequency enumeration")
    axis = np.arange(-cutoff, cutoff + 1, dtype=np.int64)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    freqs = np.stack([m.ravel() for m in mesh], axis=-1)
    return np.ascontiguousarray(freqs[in_shape(freqs, cutoff, shape)])


def fast_grid_size(minimum):
    return int(sfft.next_fast_len(max(int(minimum), 1)))


@dataclass(frozen=True, eq=False)
class FrequencyLattice:
    """Immutable truncated lattice with an attached physical grid.

    Use :func:`build_lattice` rather than calling the constructor.
    """

    dim: int
    cutoff: int
    shape: Shape
    oversample: int
    grid_size: int
    freqs: np.ndarray = field(repr=False)
    _lookup: np.ndarray = field(repr=False)
    conj: np.ndarray = field(repr=False)

    @property
    def count(self):
        return self.freqs.shape[0]

    @property
    def jb(self):
        return japanese(self.freqs)

    @property
    def zero_index(self):
        return self.index_of((0,) * self.dim)

    def index_of(self, n):
        """Index of a single frequency; raises ``KeyError`` if absent."""
        idx = self.lookup(np.asarray(n, dtype=np.int64).reshape(1, self.dim))[0]
        if idx < 0:
            raise KeyError(tuple(int(v) for v in np.ravel(n)))
        return int(idx)

    def lookup(self, freqs):
        """Vectorized index lookup, ``-1`` for frequencies not stored."""
        freqs = np.asarray(freqs, dtype=np.int64).reshape(-1, self.dim)
        out = np.full(freqs.shape[0], -1, dtype=np.int64)
        inside = np.all(np.abs(freqs) <= self.cutoff, axis=1)
        if np.any(inside):
            shifted = freqs[inside] + self.cutoff
            out[inside] = self._lookup[tuple(shifted.T)]
        return out

    def mask(self, cutoff, shape=None):
        """Mask of stored modes inside a (smaller) truncation ``P_cutoff``."""
        return in_shape(self.freqs, cutoff, self.shape if shape is None else shape)

    def grid_indices(self):
        return tuple(np.mod(self.freqs, self.grid_size).T)

    def grid_points(self):
        """Physical grid coordinates ``x_m = 2 pi m / M`` as a list of axes."""
        x = 2.0 * np.pi * np.arange(self.grid_size) / self.grid_size
        return [x] * self.dim

    def with_oversample(self, oversample):
        return build_lattice(self.dim, self.cutoff, self.shape, oversample)


def build_lattice(dim, cutoff, shape=Shape.BALL, oversample=1, budget_mb=None):
    """Enumerate the truncated lattice and choose an FFT-friendly grid.

    The grid has ``next_fast_len(oversample * (2 * cutoff + 1))`` points per
    axis.  Raises :class:`BudgetExceededError` instead of silently truncating
    when the enumeration or the physical grid would not fit the budget.
    """
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    shape = Shape.coerce(shape)
    freqs = enumerate_frequencies(dim, cutoff, shape, budget_mb)
    grid_size = fast_grid_size(oversample * (2 * cutoff + 1))
    check_budget(float(grid_size) ** dim * 16 * 2, budget_mb, "physical grid")
    side = 2 * cutoff + 1
    lookup = np.full((side,) * dim, -1, dtype=np.int64)
    lookup[tuple((freqs + cutoff).T)] = np.arange(freqs.shape[0])
    conj = lookup[tuple((cutoff - freqs).T)]
    for arr in (freqs, lookup, conj):
        arr.flags.writeable = False
    return FrequencyLattice(dim, int(cutoff), shape, int(oversample), grid_size,
                            freqs, lookup, conj)


def _values(coeffs):
    return np.asarray(getattr(coeffs, "values", coeffs))


def to_physical(coeffs, lattice=None, tol=1e-12):
    """Evaluate ``u(x_m) = sum_n c_n exp(i n.x_m)`` on the lattice grid.

    ``coeffs`` is a :class:`~wickfield.spectral_data.HermitianCoeffs` or a raw
    ``(..., count)`` array (leading axes are treated as a batch).  The
    imaginary residue is discarded; if it exceeds ``tol`` times the spectral
    l1 mass a :class:`SymmetryError` is raised.
    """
    lattice = lattice if lattice is not None else coeffs.lattice
    values = _values(coeffs)
    batch = values.shape[:-1]
    d, M = lattice.dim, lattice.grid_size
    spec = np.zeros(batch + (M,) * d, dtype=complex)
    spec[(Ellipsis,) + lattice.grid_indices()] = values
    axes = tuple(range(-d, 0))
    grid = sfft.ifftn(spec, axes=axes, norm="forward")
    mass = np.sum(np.abs(values), axis=-1)
    resid = np.max(np.abs(grid.imag).reshape(batch + (-1,)), axis=-1) if grid.size else 0.0
    if np.any(resid > tol * np.maximum(mass, np.finfo(float).tiny)):
        raise SymmetryError(f"imaginary residue {np.max(resid):.3e} exceeds tolerance")
    return np.ascontiguousarray(grid.real)


def to_spectral(grid, lattice):
    """Fourier coefficients of grid samples, restricted to the stored modes.

    Returns a raw complex ``(..., count)`` array.
    """
    grid = np.asarray(grid)
    d = lattice.dim
    axes = tuple(range(-d, 0))
    spec = sfft.fftn(grid, axes=axes, norm="forward")
    return spec[(Ellipsis,) + lattice.grid_indices()]
