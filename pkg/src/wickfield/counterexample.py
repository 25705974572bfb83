"""Dyadic data family with divergent Wick-power moments and its diagnostics.

Coordinatewise amplitudes are ``a~(k) = m^(-(j-1)/(2j))`` if ``|k| = 2^m`` for
some ``m >= 1`` and zero otherwise; the d-dimensional coefficients are the
tensor product ``a_n = prod_i a~(n_i)`` and the velocity is ``u1 = <nabla> u0``,
so ``gamma_n = |a_n|^2`` for all times.

All diagnostics work with exact integer frequencies (Python ints), so
cutoffs such as ``N = 2^64`` are handled without overflow.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta

from .errors import InsufficientSpanError
from .lattice import japanese
from .linear_waves import GammaProfile, ProfileKind
from .spectral_data import DataPair, HermitianCoeffs
from .tables import write_csv


def dyadic_exponent(k):
    """``m`` if ``|k| = 2^m`` with ``m >= 1``, else ``0``."""
    k = abs(int(k))
    if k < 2 or k & (k - 1):
        return 0
    return k.bit_length() - 1


def _max_exponent(N, d=1):
    """Largest ``m`` with ``2^m * sqrt(d) <= N`` (exact integer arithmetic), 0 if none."""
    N = int(N)
    if N < 2:
        return 0
    m = N.bit_length() - 1
    while m >= 1 and (4 ** m) * d > N * N:
        m -= 1
    return max(m, 0)


@dataclass(frozen=True)
class DyadicProfile:
    """The dyadic counterexample family in dimension ``d`` for Wick degree ``j``."""

    d: int
    j: int
    m_max: int = 60

    @property
    def exponent(self):
        return (self.j - 1) / (2.0 * self.j)

    def coord_amp(self, k):
        """``a~(k)`` for integer ``k`` (scalar, Python int safe)."""
        m = dyadic_exponent(k)
        return m ** -self.exponent if m else 0.0

    def coord_gamma_array(self, k):
        k = np.abs(np.asarray(k, dtype=np.int64))
        out = np.zeros(k.shape)
        pow2 = (k >= 2) & ((k & (k - 1)) == 0)
        m = np.zeros(k.shape)
        m[pow2] = np.log2(k[pow2].astype(float)).round()
        out[pow2] = m[pow2] ** (-2.0 * self.exponent)
        return out

    def amp(self, freqs):
        freqs = np.asarray(freqs, dtype=np.int64).reshape(-1, self.d)
        out = np.ones(len(freqs))
        for i in range(self.d):
            out *= np.sqrt(self.coord_gamma_array(freqs[:, i]))
        return out

    def gamma_profile(self):
        """Time-independent tensor-product profile ``gamma_n = |a_n|^2``."""
        factor = lambda k, t: self.coord_gamma_array(k)  # noqa: E731
        return GammaProfile(self.d, lambda f, t: self.amp(f) ** 2, ProfileKind.CUSTOM,
                            {"family": "dyadic_counterexample", "j": self.j},
                            factors=(factor,) * self.d, time_independent=True)

    def support_1d(self, M):
        """Sorted 1-d support ``{+-2^m : 1 <= m <= M}`` as Python ints."""
        pos = [2 ** m for m in range(1, M + 1)]
        return sorted([-p for p in pos] + pos)


@dataclass(eq=False)
class SparsePair:
    """Sparse ``(u0, u1)`` listed on its support (frequencies up to ``2^m_max``)."""

    freqs: np.ndarray
    a: np.ndarray
    b: np.ndarray
    profile: DyadicProfile

    def to_data_pair(self, lattice):
        """Restriction to a (small) lattice as a dense :class:`DataPair`."""
        a = self.profile.amp(lattice.freqs)
        u0 = HermitianCoeffs(lattice, a)
        return DataPair(u0, HermitianCoeffs(lattice, a * lattice.jb))


def build_counterexample(d, j, m_max):
    """Sparse pair ``(u0, <nabla> u0)`` and its :class:`DyadicProfile`."""
    if d < 1 or j < 2 or m_max < 2:
        raise ValueError("need d >= 1, j >= 2, m_max >= 2")
    if m_max > 62:
        raise ValueError("m_max > 62 does not fit int64 frequencies; use the profile directly")
    prof = DyadicProfile(d, j, m_max)
    axis = np.array(prof.support_1d(m_max), dtype=np.int64)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    freqs = np.stack([m.ravel() for m in mesh], axis=-1)
    a = prof.amp(freqs)
    return SparsePair(freqs, a, a * japanese(freqs), prof), prof


# ------------------------------------------------------------------ membership

@dataclass
class MembershipReport:
    sobolev: dict = field(default_factory=dict)
    fourier_lebesgue: dict = field(default_factory=dict)


def _hs_partial(profile, s, M):
    """Exact ``||(u0, u1)||^2`` in ``H^s x H^{s-1}`` over exponents ``<= M``."""
    d = profile.d
    ms = np.arange(1, M + 1, dtype=float)
    sq = np.concatenate([4.0 ** ms, 4.0 ** ms])          # n_i^2 for both signs
    g1 = np.concatenate([ms, ms]) ** (-2.0 * profile.exponent)
    total_sq = np.zeros(1)
    weight = np.ones(1)
    for _ in range(d):
        total_sq = np.add.outer(total_sq, sq).ravel()
        weight = np.multiply.outer(weight, g1).ravel()
    # u0 in H^s and u1 = <nabla> u0 in H^{s-1} contribute equally
    return float(2.0 * np.sum((1.0 + total_sq) ** s * weight))


def membership_report(profile, s_values=(-0.05, -0.2, -1.0), p_values=None, m_terms=1024,
                      m_sobolev=None):
    """Sobolev and Fourier-Lebesgue membership of the counterexample pair.

    Sobolev part: exact partial sums of ``||(u0,u1)||^2_{H^s}`` over
    coordinate exponents ``m <= m_sobolev`` plus a certified tail bound from
    ``<n>^(2s) <= prod_i <n_i>^(2s/d)`` and the geometric ratio
    ``r = 2^(2s/d) < 1``.

    Fourier-Lebesgue part: ``||u0||^p_{FL^{0,p}} = (2 sum_m m^(-q))^d`` with
    ``q = p (j-1) / (2j)``; finite exactly when ``q > 1`` (p-series).  The
    one-sided per-coordinate partial sum through ``m_terms`` is reported.
    """
    j, d = profile.j, profile.d
    if p_values is None:
        p_values = (2.0 * j / (j - 1), 2.0 * j / (j - 1) + 2.0)
    M = m_sobolev or min(profile.m_max, {1: 400, 2: 200, 3: 60}.get(d, 20))
    rep = MembershipReport()
    qa = 2.0 * profile.exponent
    for s in s_values:
        if s >= 0:
            rep.sobolev[s] = {"classification": "divergent", "partial_sum": math.inf,
                              "exponents": M}
            continue
        r = 2.0 ** (2.0 * s / d)
        ms = np.arange(1, M + 1, dtype=float)
        s_part = float(np.sum(r ** ms * ms ** -qa))
        tail = r ** (M + 1) * (M + 1) ** -qa / (1.0 - r)
        partial = _hs_partial(profile, s, M)
        bound = partial + 2.0 * ((2.0 * (s_part + tail)) ** d - (2.0 * s_part) ** d)
        rep.sobolev[s] = {"classification": "finite", "partial_sum": partial,
                          "upper_bound": bound, "tail_bound": bound - partial,
                          "ratio": r, "exponents": M}
    for p in p_values:
        q = p * profile.exponent
        partial = float(np.sum(np.arange(1, m_terms + 1, dtype=float) ** -q))
        finite = q > 1.0
        entry = {"classification": "finite" if finite else "divergent", "series_exponent": q,
                 "coordinate_partial_sum": partial, "terms": m_terms}
        if finite:
            limit = float(zeta(q))
            entry["coordinate_limit"] = limit
            entry["pair_norm_p"] = 2.0 * (2.0 * limit) ** d
        rep.fourier_lebesgue[float(p)] = entry
    return rep


# ---------------------------------------------------------------- zeroth mode

def zero_sum_weight_1d(profile, M):
    """``sum_{n_1 + .. + n_j = 0} prod_l a~(n_l)^2`` over the 1-d support with exponents ``<= M``.

    Exact sparse enumeration with integer keys: ``(j-1)``-fold convolution of
    the support, then pairing with ``-key``.
    """
    if M < 1:
        return 0.0
    support = profile.support_1d(M)
    g = {k: profile.coord_amp(k) ** 2 for k in support}
    conv = dict(g)
    for _ in range(profile.j - 2):
        nxt = {}
        for k, w in conv.items():
            for k2, w2 in g.items():
                nxt[k + k2] = nxt.get(k + k2, 0.0) + w * w2
        conv = nxt
    return math.fsum(w * g.get(-k, 0.0) for k, w in sorted(conv.items()))


def _ball_j2(profile, N):
    """Exact ball-truncated zeroth mode for ``j = 2``: ``2 sum_{|n|<=N} gamma_n^2``."""
    M = _max_exponent(N)
    if M < 1:
        return 0.0
    ms = np.arange(1, M + 1)
    sq = [4 ** int(m) for m in ms]
    g2 = np.concatenate([ms, ms]).astype(float) ** (-4.0 * profile.exponent)
    sqs = sq + sq
    entries = [(0, 1.0)]
    for _ in range(profile.d):
        entries = [(a + b, w * v) for a, w in entries for b, v in zip(sqs, g2) if a + b <= N * N]
    return 2.0 * math.fsum(w for _, w in entries)


@dataclass
class ZerothModeRow:
    N: int
    value: float
    ball_lower: float
    ball_exact: float | None
    rate: float
    ratio: float


@dataclass
class ZerothModeSeries:
    d: int
    j: int
    rows: list

    @property
    def cutoffs(self):
        return [r.N for r in self.rows]

    @property
    def values(self):
        return [r.value for r in self.rows]

    def to_csv(self, path, manifest_hash=None):
        write_csv(path, ["N", "log2_N", "exact_value", "ball_lower_bound", "ball_exact",
                         "comparison_rate", "ratio"],
                  ([str(r.N), int(r.N).bit_length() - 1, r.value, r.ball_lower, r.ball_exact,
                    r.rate, r.ratio] for r in self.rows), manifest_hash)


def loglog_rate(N, d):
    """``(log log N)^d`` with natural logarithms."""
    return math.log(math.log(N)) ** d


def zeroth_mode_moment(profile, cutoffs, j=None, t=0.0):
    """Exact ``E|F(:z_N^j:)(0)|^2`` along a list of cutoffs.

    ``profile`` is a :class:`DyadicProfile` (degree taken from it) or any
    :class:`~wickfield.linear_waves.GammaProfile`, in which case ``j`` is
    required and each value comes from the moment oracle with the profile's
    own truncation (``ball_lower`` and ``ball_exact`` then repeat ``value``).

    ``value`` uses cube truncation ``max_i |n_i| <= N``, for which the
    tensor structure gives ``j! * F(N)^d`` with ``F`` the 1-d zero-sum weight.
    ``ball_lower`` is the same quantity for the inscribed cube
    ``max_i |n_i| <= N / sqrt(d)``, a lower bound for the Euclidean-ball value;
    ``ball_exact`` is filled in for ``j = 2`` (or ``d = 1``, where all agree).
    """
    if isinstance(profile, GammaProfile):
        if j is None:
            raise ValueError("j is required for a generic gamma profile")
        from .moment_oracle import second_moment_per_mode
        rows = []
        for N in cutoffs:
            v = second_moment_per_mode(profile, int(N), j, t).value_at((0,) * profile.dim)
            rate = loglog_rate(N, profile.dim) if N > 2 else math.nan
            rows.append(ZerothModeRow(int(N), v, v, v, rate, v / rate if rate > 0 else math.nan))
        return ZerothModeSeries(profile.dim, j, rows)
    d, j = profile.d, profile.j
    fact = math.factorial(j)
    rows = []
    cache = {}

    def F(M):
        if M not in cache:
            cache[M] = zero_sum_weight_1d(profile, M)
        return cache[M]

    for N in cutoffs:
        N = int(N)
        value = fact * F(_max_exponent(N)) ** d
        lower = fact * F(_max_exponent(N, d)) ** d
        if d == 1:
            exact = value
        elif j == 2:
            exact = _ball_j2(profile, N)
        else:
            exact = None
        rate = loglog_rate(N, d) if N > 2 else math.nan
        rows.append(ZerothModeRow(N, value, lower, exact, rate,
                                  value / rate if rate and rate > 0 else math.nan))
    return ZerothModeSeries(d, j, rows)


@dataclass
class RateFit:
    cutoffs: list
    values: list
    rates: list
    ratios: list
    ratio_min: float
    ratio_max: float
    slopes: list
    slope_min: float
    slope_max: float
    diverges: bool
    growth_band: float


def divergence_rate_fit(series, d=None, growth_band=4.0, min_doublings=4, rate=None):
    """Compare a moment series with ``(log log N)^d`` (or a custom ``rate(N)``).

    ``ratios`` are ``value_N / (log log N)^d`` and give the band ``[c, C]``.
    Divergence at the ``(log log N)^d`` rate is asserted when every local
    slope ``d value / d (log log N)^d`` between consecutive cutoffs is
    positive and no slope is smaller than ``1/growth_band`` of the largest:
    a series that converges (or is constant) has slopes collapsing to zero
    and is rejected even though its ratios stay positive on a finite scan.

    ``series`` is a :class:`ZerothModeSeries` or a ``(cutoffs, values)`` pair.
    The span requirement (``min_doublings`` doublings of ``log2 N``) applies
    to the default rate only.
    """
    if isinstance(series, ZerothModeSeries):
        cutoffs, values, d = series.cutoffs, series.values, series.d if d is None else d
    else:
        cutoffs, values = series
    cutoffs = [int(N) for N in cutoffs]
    if len(cutoffs) < 2 or min(cutoffs) < 3:
        raise InsufficientSpanError("need at least two cutoffs N >= 3")
    if rate is None:
        if d is None:
            raise ValueError("dimension d is required")
        span = math.log2(math.log2(max(cutoffs)) / math.log2(min(cutoffs)))
        if span < min_doublings - 1e-9:
            raise InsufficientSpanError(
                f"cutoffs span {span:.2f} doublings of log2 N, need {min_doublings}")
        rate = lambda N: loglog_rate(N, d)  # noqa: E731
    rates = [float(rate(N)) for N in cutoffs]
    ratios = [v / r for v, r in zip(values, rates)]
    slopes = [(v2 - v1) / (r2 - r1)
              for v1, v2, r1, r2 in zip(values, values[1:], rates, rates[1:])]
    smin, smax = min(slopes), max(slopes)
    diverges = smin > 0 and smin * growth_band >= smax
    return RateFit(cutoffs, list(values), rates, ratios, min(ratios), max(ratios), slopes,
                   smin, smax, bool(diverges), growth_band)


# ----------------------------------------------------------- restricted sums

def restricted_sum_constant(j):
    """``c_j = prod_{k=3}^{j} 2^(-2^(j / (j - k + 1)))``."""
    return math.prod(2.0 ** -(2.0 ** (j / (j - (k - 1)))) for k in range(3, j + 1))


@dataclass
class RestrictedSum:
    n1: int
    N: int
    value: float
    comparison: float
    ratio: float


def restricted_sum(profile, n1, N):
    """Restricted dyadic sum bounding the zeroth mode from below for ``j >= 3``.

    Sums ``prod_{l=2}^{j-1} a~(n_l)^2 * a~(n_1 + ... + n_{j-1})^2`` over
    ordered tuples ``4 <= n_2 <= ... <= n_{j-1} <= N/sqrt(d)`` (only dyadic
    ``n_l`` contribute) and returns it with the comparison quantity
    ``(log2 n1)^(-1 + (j-1)/j)``.  The admissible ``n1`` range is
    ``4 <= n1 <= c_j N / sqrt(d)``; when that range is empty the sum is 0.
    """
    j, d = profile.j, profile.d
    if j < 3:
        raise ValueError("restricted sums are defined for j >= 3")
    n1, N = int(n1), int(N)
    comparison = math.log2(n1) ** (-1.0 + (j - 1) / j) if n1 >= 2 else math.nan
    upper1 = restricted_sum_constant(j) * N / math.sqrt(d)
    if upper1 < 4:
        return RestrictedSum(n1, N, 0.0, comparison, 0.0)
    if not 4 <= n1 <= upper1:
        raise ValueError(f"n1={n1} outside [4, c_j N / sqrt(d)] = [4, {upper1:.6g}]")
    top = _max_exponent(N, d)
    exps = range(2, top + 1)
    g = {m: m ** (-2.0 * profile.exponent) for m in range(1, top + 3)}
    terms = []
    for combo in itertools.combinations_with_replacement(exps, j - 2):
        total = n1 + sum(2 ** m for m in combo)
        mt = dyadic_exponent(total)
        if mt:
            w = math.prod(g[m] for m in combo)
            terms.append(w * mt ** (-2.0 * profile.exponent))
    value = math.fsum(terms)
    return RestrictedSum(n1, N, value, comparison, value / comparison)


def restricted_sum_onset(profile, n1, cutoffs, rtol=1e-12):
    """Scan cutoffs upward; return the first ``N`` after which the ratio is stable."""
    results = [restricted_sum(profile, n1, N) for N in cutoffs]
    onset = None
    for k in range(len(results)):
        tail = [r.ratio for r in results[k:]]
        if tail[0] > 0 and max(tail) - min(tail) <= rtol * max(tail):
            onset = results[k].N
            break
    return onset, results
