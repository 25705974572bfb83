"""Gaussian randomization of Fourier data with reproducible counter-based streams.

Every draw is addressed by ``(seed, stream, family, block)``: ``seed`` and
``stream`` form the 128-bit Philox key, ``family`` and ``block`` occupy the
upper words of the 256-bit counter.  Within a block, frequencies are visited
in *shell order* (by ``max_i |n_i|``, lexicographic inside a shell), so the
multiplier attached to a frequency never depends on the lattice cutoff: the
sample seen by ``P_N`` is literally a restriction of the sample seen by
``P_M`` for ``N < M``.

Normalization: ``E|g_n|^2 = 1`` with real and imaginary parts of variance
1/2 each for ``n != 0``, and ``g_0`` a standard real normal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral_data import DataPair, HermitianCoeffs

MASK64 = (1 << 64) - 1

FAMILY_G = 0
FAMILY_H = 1
FAMILY_WAVE = 2
FAMILY_HEAT = 3


def generator(seed, stream, family=0, block=0):
    """Philox generator positioned at the start of a ``(family, block)`` sub-stream."""
    bitgen = np.random.Philox(key=[int(seed) & MASK64, int(stream) & MASK64],
                              counter=[0, 0, int(block) & MASK64, int(family) & MASK64])
    return np.random.Generator(bitgen)


def shell_positions(freqs):
    """Position of each frequency in the cutoff-independent shell order."""
    freqs = np.asarray(freqs, dtype=np.int64)
    d = freqs.shape[1]
    r = np.max(np.abs(freqs), axis=1)
    before = np.where(r > 0, (2 * r - 1) ** d, 0)
    # lexicographic rank inside the shell of radius r
    rank = np.zeros(len(freqs), dtype=np.int64)
    for rr in np.unique(r):
        if rr == 0:
            continue
        axis = np.arange(-rr, rr + 1)
        mesh = np.stack([m.ravel() for m in np.meshgrid(*([axis] * d), indexing="ij")], -1)
        shell = mesh[np.max(np.abs(mesh), axis=1) == rr]
        side = 2 * rr + 1
        code_shell = np.ravel_multi_index(tuple((shell + rr).T), (side,) * d)
        sel = r == rr
        code = np.ravel_multi_index(tuple((freqs[sel] + rr).T), (side,) * d)
        rank[sel] = np.searchsorted(code_shell, code)
    return before + rank


def _positive_representative(freqs):
    """True where the first nonzero coordinate is positive."""
    freqs = np.asarray(freqs)
    out = np.zeros(len(freqs), dtype=bool)
    decided = np.zeros(len(freqs), dtype=bool)
    for i in range(freqs.shape[1]):
        col = freqs[:, i]
        out |= ~decided & (col > 0)
        decided |= col != 0
    return out


class _Addressing:
    """Precomputed draw positions for a lattice (shared by all streams)."""

    def __init__(self, lattice):
        freqs = lattice.freqs
        self.size = 2 * (2 * lattice.cutoff + 1) ** lattice.dim
        self.pos = shell_positions(freqs)
        self.rep = _positive_representative(freqs)
        self.is_zero = ~np.any(freqs, axis=1)
        self.rep_index = np.where(self.rep | self.is_zero, np.arange(len(freqs)), lattice.conj)

    def complex_gaussians(self, normals):
        """Map raw standard normals ``(..., size)`` to conjugate-symmetric multipliers."""
        re = normals[..., 2 * self.pos]
        im = normals[..., 2 * self.pos + 1]
        g = (re + 1j * im) / np.sqrt(2.0)
        g = np.where(self.is_zero, re + 0j, g)
        g = g[..., self.rep_index]
        return np.where(self.rep | self.is_zero, g, np.conj(g))


_ADDRESSING_CACHE: dict = {}


def addressing(lattice):
    key = id(lattice)
    hit = _ADDRESSING_CACHE.get(key)
    if hit is None or hit[0] is not lattice:
        hit = (lattice, _Addressing(lattice))
        _ADDRESSING_CACHE[key] = hit
    return hit[1]


def gaussian_multipliers(lattice, seed, stream, family, block=0):
    """One conjugate-symmetric family of standard complex Gaussians on ``lattice``."""
    adr = addressing(lattice)
    normals = generator(seed, stream, family, block).standard_normal(adr.size)
    return adr.complex_gaussians(normals)


@dataclass(eq=False)
class RandomizedMultipliers:
    """The Gaussian families ``g_n`` and ``h_n`` plus their address."""

    lattice: object
    g: np.ndarray
    h: np.ndarray
    seed: int
    stream: int


def sample_multipliers(lattice, seed, stream=0):
    """Draw ``(g_n, h_n)`` for one ``(seed, stream)``; bit-reproducible."""
    g = gaussian_multipliers(lattice, seed, stream, FAMILY_G)
    h = gaussian_multipliers(lattice, seed, stream, FAMILY_H)
    return RandomizedMultipliers(lattice, g, h, int(seed), int(stream))


def sample_multipliers_batch(lattice, seed, streams):
    """Stacked ``(len(streams), count)`` arrays of ``g`` and ``h``."""
    adr = addressing(lattice)
    streams = list(streams)
    raw_g = np.empty((len(streams), adr.size))
    raw_h = np.empty((len(streams), adr.size))
    for k, s in enumerate(streams):
        raw_g[k] = generator(seed, s, FAMILY_G).standard_normal(adr.size)
        raw_h[k] = generator(seed, s, FAMILY_H).standard_normal(adr.size)
    return adr.complex_gaussians(raw_g), adr.complex_gaussians(raw_h)


def randomize_pair(pair, m):
    """``(sum g_n a_n e^{inx}, sum h_n b_n e^{inx})``."""
    if m.lattice is not pair.lattice:
        raise ValueError("multipliers and data live on different lattices")
    return DataPair(HermitianCoeffs(pair.lattice, m.g * pair.u0.values, validate=False),
                    HermitianCoeffs(pair.lattice, m.h * pair.u1.values, validate=False))
