"""Exact second moments of truncated Wick powers.

For a Gaussian field with per-mode variances ``gamma_n(t)`` truncated to
``P_N``, the Fourier coefficients of ``:z_N^j:`` satisfy

    E|F(:z_N^j:)(n)|^2 = j! * (gamma * gamma * ... * gamma)(n)     (j factors)

where ``*`` is discrete convolution of the truncated sequence.  Everything
here is deterministic; no sampling is used.  Three interchangeable backends
compute the j-fold convolution:

``dense_fft``
    zero-padded real FFT of the truncated table, raised to the j-th power;
``sparse_enumeration``
    repeated pairwise convolution over the nonzero support (compiled kernel
    when available);
``product_structure``
    for tensor-product profiles with cube truncation, 1-d convolutions per
    coordinate followed by an outer product.

Automatic choice: product structure when it applies; sparse enumeration for
small problems (mode-wise exact, while FFT error is relative to the largest
mode) or sparse supports; dense FFT otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import fft as sfft

from ._backend import kernels
from .errors import BudgetExceededError
from .lattice import DEFAULT_BUDGET_MB, Shape, check_budget, japanese
from .linear_waves import gamma_from_pair
from .spectral_data import admissible, pair_fl_norm
from .tables import write_csv, write_json

DEFAULT_WORK_BUDGET = 5e7
SMALL_WORK = 1e5


class Method(str, Enum):
    DENSE_FFT = "dense_fft"
    SPARSE_ENUMERATION = "sparse_enumeration"
    PRODUCT_STRUCTURE = "product_structure"


@dataclass(eq=False)
class MomentReport:
    """Per-mode second moments of ``:z_N^j:(t)`` and ``H^sigma`` aggregates.

    ``freqs[k]`` and ``per_mode[k]`` list every frequency in the support of
    the j-fold convolution (``|n| <= jN``), so the aggregates are exact: the
    truncated Wick power has no modes beyond this support.
    """

    j: int
    N: int
    t: float
    dim: int
    freqs: np.ndarray
    per_mode: np.ndarray
    method: Method
    hsigma: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._jb = None

    def value_at(self, n):
        n = np.asarray(n, dtype=np.int64).reshape(1, self.dim)
        hit = np.nonzero(np.all(self.freqs == n, axis=1))[0]
        return float(self.per_mode[hit[0]]) if hit.size else 0.0

    def as_dict(self):
        return {tuple(int(v) for v in n): float(x) for n, x in zip(self.freqs, self.per_mode)}

    def hsigma_at(self, sigma):
        """``sum_n <n>^(2 sigma) per_mode[n]`` (cached in ``hsigma``)."""
        sigma = float(sigma)
        if sigma not in self.hsigma:
            if sigma == 0.0:
                self.hsigma[sigma] = float(np.sum(self.per_mode))
            else:
                if self._jb is None:
                    self._jb = japanese(self.freqs)
                self.hsigma[sigma] = float(np.sum(self._jb ** (2.0 * sigma) * self.per_mode))
        return self.hsigma[sigma]

    def to_csv(self, path, manifest_hash=None):
        cols = [f"n{i + 1}" for i in range(self.dim)] + ["second_moment"]
        rows = ([*map(int, n), v] for n, v in zip(self.freqs, self.per_mode))
        write_csv(path, cols, rows, manifest_hash)

    def summary(self):
        return {"j": self.j, "N": self.N, "t": self.t, "dim": self.dim,
                "method": self.method.value, "modes": int(len(self.per_mode)),
                "hsigma": {repr(k): v for k, v in sorted(self.hsigma.items())},
                "support_exact": True, **self.meta}

    def to_json(self, path, manifest_hash=None):
        write_json(path, self.summary(), manifest_hash)


# ------------------------------------------------------------------ key encoding

def _encode(freqs, base):
    key = np.zeros(len(freqs), dtype=np.int64)
    for i in reversed(range(freqs.shape[1])):
        key = key * base + freqs[:, i]
    return key


def _decode(keys, base, dim):
    half = base // 2
    out = np.empty((len(keys), dim), dtype=np.int64)
    rest = keys.copy()
    for i in range(dim):
        digit = np.mod(rest + half, base) - half
        out[:, i] = digit
        rest = (rest - digit) // base
    return out


def _symmetrize(freqs, values, even=True):
    """Average each value with its mirror ``-n`` (lists are ordered so that
    reversal maps ``n -> -n``) when the input is even; clip rounding negatives."""
    if even:
        values = 0.5 * (values + values[::-1])
    return freqs, np.maximum(values, 0.0)


# ----------------------------------------------------------------------- backends

def _dense(support, gamma, N, j, budget_mb, even=True):
    d = support.shape[1]
    out_side = 2 * j * N + 1
    L = int(sfft.next_fast_len(out_side, real=True))
    check_budget(float(L) ** d * 8 * 4 + float(out_side) ** d * 8 * (d + 2), budget_mb,
                 Method.DENSE_FFT.value)
    table = np.zeros((L,) * d)
    table[tuple((support + N).T)] = gamma
    spec = sfft.rfftn(table)
    conv = sfft.irfftn(spec ** j, s=(L,) * d)
    conv = conv[(slice(0, out_side),) * d]
    axis = np.arange(-j * N, j * N + 1, dtype=np.int64)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    freqs = np.stack([m.ravel() for m in mesh], axis=-1)
    return _symmetrize(freqs, conv.ravel(), even)


def _sparse(support, gamma, N, j, even=True):
    d = support.shape[1]
    base = 2 * j * N + 1
    if d * math.log2(max(base, 2)) > 62:
        raise BudgetExceededError("frequency keys do not fit in 64 bits",
                                  method=Method.SPARSE_ENUMERATION.value)
    keep = gamma != 0
    keys = _encode(support[keep], base)
    w = gamma[keep]
    order = np.argsort(keys)
    keys, w = keys[order], w[order]
    cur_k, cur_w = keys, w
    for _ in range(j - 1):
        cur_k, cur_w = kernels.sparse_convolve(cur_k, cur_w, keys, w)
    if cur_k.size == 0:
        return np.zeros((1, d), dtype=np.int64), np.zeros(1)
    return _symmetrize(_decode(cur_k, base, d), cur_w, even)


def _convolve_1d(values, j):
    out = values
    for _ in range(j - 1):
        out = np.convolve(out, values)
    return out


def _product(profile, N, j, t, budget_mb):
    d = profile.dim
    out_side = 2 * j * N + 1
    check_budget(float(out_side) ** d * 8 * (d + 2), budget_mb, Method.PRODUCT_STRUCTURE.value)
    axis = np.arange(-N, N + 1, dtype=np.int64)
    convs = []
    for factor in profile.factors:
        vals = np.asarray(factor(axis, t), dtype=float)
        c = _convolve_1d(vals, j)
        convs.append(0.5 * (c + c[::-1]))
    table = convs[0]
    for c in convs[1:]:
        table = np.multiply.outer(table, c)
    oaxis = np.arange(-j * N, j * N + 1, dtype=np.int64)
    mesh = np.meshgrid(*([oaxis] * d), indexing="ij")
    freqs = np.stack([m.ravel() for m in mesh], axis=-1)
    return freqs, np.maximum(np.ravel(table), 0.0)


def _sparse_work(nnz, N, d, j):
    work = 0.0
    for k in range(1, j):
        work += min(float(nnz) ** k, float(2 * k * N + 1) ** d) * nnz
    return work


def select_method(profile, support, gamma, N, j, shape, budget_mb=None,
                  work_budget=DEFAULT_WORK_BUDGET):
    """Automatic backend choice (see module docstring)."""
    d = support.shape[1]
    if profile.factors is not None and shape is Shape.CUBE:
        return Method.PRODUCT_STRUCTURE
    nnz = int(np.count_nonzero(gamma))
    density = nnz / float(2 * N + 1) ** d
    sparse_ok = (_sparse_work(nnz, N, d, j) <= work_budget
                 and d * math.log2(2 * j * N + 1) <= 62)
    L = float(sfft.next_fast_len(2 * j * N + 1, real=True))
    budget = (DEFAULT_BUDGET_MB if budget_mb is None else budget_mb) * 2**20
    dense_ok = L ** d * 32 + float(2 * j * N + 1) ** d * 8 * (d + 2) <= budget
    small = _sparse_work(nnz, N, d, j) <= SMALL_WORK
    if sparse_ok and (small or density < 0.25 or not dense_ok):
        return Method.SPARSE_ENUMERATION
    if dense_ok:
        return Method.DENSE_FFT
    raise BudgetExceededError(
        f"neither dense ({L:.0f}^{d} grid) nor sparse enumeration fits the budget",
        method="auto")


def second_moment_per_mode(profile, N, j, t=0.0, sigmas=(0.0,), method=None, shape=None,
                           budget_mb=None, work_budget=DEFAULT_WORK_BUDGET):
    """Exact ``E|F(:z_N^j:(t))(n)|^2`` for every ``n`` in the output support.

    Parameters
    ----------
    profile : GammaProfile
    N : int
        Truncation ``P_N`` (shape from the profile's lattice, ball otherwise).
    j : int
        Wick degree, ``j >= 1``.
    t : float
    sigmas : iterable of float
        ``H^sigma`` aggregates to precompute.
    method : Method or str, optional
        Force a backend; chosen automatically when omitted.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    shape = Shape.coerce(shape or profile.default_shape())
    if method is not None:
        method = Method(method)
    if method is Method.PRODUCT_STRUCTURE or (
            method is None and profile.factors is not None and shape is Shape.CUBE):
        if profile.factors is None or shape is not Shape.CUBE:
            raise ValueError("product structure needs a tensor-product profile and cube truncation")
        freqs, vals = _product(profile, N, j, t, budget_mb)
        method = Method.PRODUCT_STRUCTURE
    else:
        support = profile.support(N, shape, budget_mb)
        gamma = profile(support, t)
        if np.any(gamma < 0):
            raise ValueError("gamma must be nonnegative")
        # variance profiles of real fields are even; tables need not be
        even = bool(np.array_equal(gamma, profile(-support, t)))
        if method is None:
            method = select_method(profile, support, gamma, N, j, shape, budget_mb, work_budget)
        if method is Method.SPARSE_ENUMERATION:
            if _sparse_work(np.count_nonzero(gamma), N, support.shape[1], j) > work_budget:
                raise BudgetExceededError("sparse enumeration exceeds the work budget",
                                          method=method.value)
            freqs, vals = _sparse(support, gamma, N, j, even)
        else:
            freqs, vals = _dense(support, gamma, N, j, budget_mb, even)
    vals = vals * math.factorial(j)
    if shape is Shape.BALL:
        keep = np.sum(freqs * freqs, axis=1) <= (j * N) ** 2
        freqs, vals = freqs[keep], vals[keep]
    report = MomentReport(int(j), int(N), float(t), profile.dim, freqs, vals, method,
                          meta={"shape": shape.value, "profile": profile.kind.value})
    for s in sigmas:
        report.hsigma_at(s)
    return report


def cross_moment(profile, N, M, j, t=0.0, sigma=0.0, **kwargs):
    """``E <:z_N^j:, :z_M^j:>_{H^sigma}``.

    The covariance of ``z_N`` and ``z_M`` is gamma restricted to
    ``|n| <= min(N, M)``, so this equals the ``H^sigma`` aggregate at the
    smaller cutoff.
    """
    rep = second_moment_per_mode(profile, min(N, M), j, t, sigmas=(sigma,), **kwargs)
    return rep.hsigma_at(sigma)


def tail_distance(profile, N, M, j, t=0.0, sigma=0.0, **kwargs):
    """``E || :z_N^j: - :z_M^j: ||^2_{H^sigma}``, clamped at zero."""
    if N == M:
        return 0.0
    hn = second_moment_per_mode(profile, N, j, t, sigmas=(sigma,), **kwargs).hsigma_at(sigma)
    hm = second_moment_per_mode(profile, M, j, t, sigmas=(sigma,), **kwargs).hsigma_at(sigma)
    cross = hn if N < M else hm
    return max(hn + hm - 2.0 * cross, 0.0)


def tail_scan(profile, cutoffs, j, t=0.0, sigma=0.0, **kwargs):
    """``[(N, 2N, tail_distance(N, 2N))]`` reusing aggregates between neighbours."""
    cache = {}

    def h(n):
        if n not in cache:
            cache[n] = second_moment_per_mode(profile, n, j, t, sigmas=(sigma,),
                                              **kwargs).hsigma_at(sigma)
        return cache[n]

    return [(N, 2 * N, max(h(2 * N) - h(N), 0.0)) for N in cutoffs]


@dataclass
class FLBoundReport:
    cutoffs: list
    sequence: list
    supremum: float
    fl_norm: float
    ratio: float
    increments: list
    plateau: bool
    admissibility: object = None


def fl_bound_check(pair, j, sigma, p, dyadic_cutoffs, t=0.0, s=None, **kwargs):
    """Track ``E||:z_N^j:(t)||^2_{H^sigma}`` over dyadic cutoffs.

    Reports the sequence, its empirical supremum and the ratio of that
    supremum to ``||(u0, u1)||^{2j}`` in ``FL^{0,p} x FL^{-1,p}``.  ``plateau``
    is true when every successive increment is at most half the previous
    one (the bound's constant is not known, so only boundedness is judged).
    If the data's Sobolev index ``s`` is supplied the admissibility of
    ``(s, sigma, p)`` is checked and a ``ValueError`` raised when it fails.
    """
    adm = None
    if s is not None:
        adm = admissible(pair.lattice.dim, j, s, sigma, p)
        if not adm:
            raise ValueError(f"parameters not admissible: {adm.reason}")
    profile = gamma_from_pair(pair)
    seq = [second_moment_per_mode(profile, N, j, t, sigmas=(sigma,), **kwargs).hsigma_at(sigma)
           for N in dyadic_cutoffs]
    inc = [b - a for a, b in zip(seq, seq[1:])]
    plateau = all(abs(b) <= 0.5 * abs(a) + 1e-13 * max(seq) for a, b in zip(inc, inc[1:]))
    norm = pair_fl_norm(pair, 0.0, p)
    sup = max(seq)
    ratio = sup / norm ** (2 * j) if norm > 0 else math.inf
    return FLBoundReport(list(dyadic_cutoffs), seq, sup, norm, ratio, inc, plateau, adm)
