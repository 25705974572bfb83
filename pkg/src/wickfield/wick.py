"""Hermite polynomials with a variance parameter and truncated Wick powers.

Wick powers are evaluated pointwise on the oversampled physical grid of the
lattice and transformed back.  With ``oversample >= j + 1`` the grid has more
than ``(j + 1) * cutoff`` points per axis, so the degree-``j`` product has no
aliasing onto stored modes and the returned coefficients are exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from ._backend import kernels
from .errors import AliasingError
from .linear_waves import FieldSnapshot, truncated_variance
from .lattice import to_physical, to_spectral
from .spectral_data import HermitianCoeffs

MAX_DEGREE = 8


def _check_degree(j):
    if j < 0:
        raise ValueError("Hermite degree must be >= 0")
    if j > MAX_DEGREE:
        raise ValueError(f"degree {j} exceeds the supported cap {MAX_DEGREE}")


def hermite(j, x, sigma):
    """``H_j(x; sigma)``: ``H_0 = 1``, ``H_1 = x``, ``H_{k+1} = x H_k - k sigma H_{k-1}``.

    Equivalently the coefficients of ``exp(t x - sigma t^2 / 2)``.
    """
    _check_degree(j)
    if sigma < 0:
        raise ValueError("variance parameter must be >= 0")
    out = kernels.hermite_eval(np.asarray(x, dtype=float), float(sigma), int(j))
    return float(np.ravel(out)[0]) if np.ndim(x) == 0 else out


@dataclass(eq=False)
class WickPowerResult:
    """Coefficients of ``:z_N^j:(t)`` together with the variance that was subtracted."""

    degree: int
    cutoff: int
    time: float
    variance_used: float
    coeffs: HermitianCoeffs

    def snapshot(self):
        return FieldSnapshot(self.time, self.coeffs)


def _require_oversample(lattice, degree):
    if lattice.oversample < degree + 1:
        raise AliasingError(
            f"degree-{degree} products need oversample >= {degree + 1}, lattice has "
            f"{lattice.oversample}")


def wick_powers_batch(values, lattice, N, jmax, variance):
    """``:z_N^j:`` for ``j = 0..jmax`` from raw ``(..., count)`` coefficients.

    Returns an array of shape ``(jmax + 1, ..., count)``; modes outside
    ``P_N`` are dropped from the input first.
    """
    _check_degree(jmax)
    _require_oversample(lattice, jmax)
    zN = np.where(lattice.mask(N), values, 0.0)
    grid = to_physical(zN, lattice)
    stack = kernels.hermite_stack(grid, float(variance), int(jmax))
    return to_spectral(stack, lattice)


def wick_power(z, profile, N, j, variance=None):
    """Truncated Wick power ``H_j(P_N z; alpha_N(t))`` of a snapshot.

    Parameters
    ----------
    z : FieldSnapshot
    profile : GammaProfile
        Supplies the exact variance ``alpha_N(t)``; never estimated from samples.
    N : int
        Truncation applied to ``z`` before exponentiation.
    j : int
        Degree (``j = 0`` gives the constant field 1).
    variance : float, optional
        Override for ``alpha_N(t)``.
    """
    lat = z.lattice
    if N > lat.cutoff:
        raise ValueError(f"cutoff {N} exceeds lattice cutoff {lat.cutoff}")
    _check_degree(j)
    _require_oversample(lat, j)
    if variance is None:
        variance = truncated_variance(profile, N, z.time, shape=lat.shape)
    zN = np.where(lat.mask(N), z.coeffs.values, 0.0)
    grid = to_physical(zN, lat)
    wick_grid = kernels.hermite_eval(grid, float(variance), int(j))
    coeffs = HermitianCoeffs(lat, to_spectral(wick_grid, lat), validate=False)
    return WickPowerResult(int(j), int(N), float(z.time), float(variance), coeffs)


def nonlinearity_grid(v_grid, wick_grids, k):
    """``sum_j C(k, j) v^(k-j) W_j`` on a grid, ``wick_grids[j]`` holding ``:Z^j:``."""
    out = np.zeros_like(v_grid)
    vpow = np.ones_like(v_grid)
    for j in range(k, -1, -1):
        out += comb(k, j) * vpow * wick_grids[j]
        if j:
            vpow = vpow * v_grid
    return out


def wick_nonlinearity(v, wick_powers):
    """Wick-renormalized nonlinearity ``N_k(v + Z) = sum_j C(k,j) v^(k-j) :Z^j:``.

    ``wick_powers[j]`` must be the degree-``j`` result, all at ``v.time`` and
    with a common cutoff.  The product is formed on the lattice grid (which
    must be oversampled for total degree ``k``) and truncated to the lattice.
    """
    k = len(wick_powers) - 1
    if k < 0:
        raise ValueError("need at least the degree-0 Wick power")
    for j, w in enumerate(wick_powers):
        if w.degree != j:
            raise ValueError(f"wick_powers[{j}] has degree {w.degree}")
        if w.cutoff != wick_powers[0].cutoff:
            raise ValueError("Wick powers have mismatched cutoffs")
        if not np.isclose(w.time, v.time, rtol=0, atol=1e-14):
            raise ValueError(f"Wick power at t={w.time} but v at t={v.time}")
        if w.coeffs.lattice is not v.lattice:
            raise ValueError("Wick powers and v live on different lattices")
    lat = v.lattice
    _require_oversample(lat, k)
    grids = [to_physical(w.coeffs) for w in wick_powers]
    out = nonlinearity_grid(to_physical(v.coeffs), grids, k)
    return FieldSnapshot(v.time, HermitianCoeffs(lat, to_spectral(out, lat), validate=False))
