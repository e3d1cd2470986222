"""Urn probability sequences with a prescribed regular-variation index.

Two infinite families are provided, truncated at ``truncation_index`` and
renormalised over the kept prefix:

* ``ZipfLike(theta)``: ``p_i = i**(-1/theta) / S``, so that
  ``alpha(x) ~ (x / S)**theta`` with a constant slowly varying part;
* ``LogZipf``: ``p_i = 1 / (i * log(i + e)**2) / S``, the ``theta = 1``
  family, for which ``alpha(x) = x L(x)`` with ``L(x) ~ c / log(x)**2``.

Only the first ``HEAD_SIZE`` probabilities are held in memory.  Beyond the
head, the closed form of ``p_i`` is used directly: sums over urns are
finished with an Euler-Maclaurin tail, and sampling uses rejection from a
continuous envelope.  This lets the truncation index run up to ``2**62``
without materialising anything of that size.

``FiniteExplicit`` wraps an explicit nonincreasing probability list and has
no regular-variation index.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import ConfigurationError, DomainError
from .quadrature import integrate

HEAD_SIZE = 1 << 20
MAX_INDEX = 1 << 62


class Kind(str, enum.Enum):
    ZIPF = "zipf"
    LOGZIPF = "logzipf"
    EXPLICIT = "explicit"


def _em_sum(F: Callable[[np.ndarray], np.ndarray], a: int, b: float, rtol: float = 1e-13) -> float:
    """Euler-Maclaurin estimate of ``sum(F(k) for k in a..b)`` for smooth ``F``.

    ``F`` must vary on the scale of ``k`` itself (power-law like), which holds
    for every summand used here once ``a`` is past the head of the sequence.
    The integral is taken in ``u = log k``.
    """
    if b < a:
        return 0.0
    if b - a < 256:
        k = np.arange(a, int(b) + 1, dtype=float)
        return float(np.sum(F(k)))
    ua = math.log(a)
    ub = math.log(b)

    def in_log(u):
        x = np.exp(u)
        return F(x) * x

    integral, _ = integrate(in_log, [ua, ub], rtol=rtol)
    ha, hb = 1e-3 * a, 1e-3 * b
    fa = float(F(np.array([float(a)]))[0])
    fb = float(F(np.array([float(b)]))[0])
    da = float(np.diff(F(np.array([a - ha, a + ha])))[0]) / (2 * ha)
    db = float(np.diff(F(np.array([b - hb, b + hb])))[0]) / (2 * hb)
    return integral + 0.5 * (fa + fb) + (db - da) / 12.0


@dataclass(frozen=True)
class RegularVariationProfile:
    """Regular-variation data ``alpha(x) = x**theta * L(x)`` of a distribution."""

    theta: float
    L_at: Callable[[float], float]
    L_star_at: Callable[[float], float] | None = None


class UrnDistribution:
    """Nonincreasing urn probabilities ``p_1 >= p_2 >= ...``.

    Instances are immutable once built and safe to share between concurrent
    replications.  Construct them with :func:`make_zipf`,
    :func:`make_logzipf` or :func:`make_explicit`.
    """

    kind: Kind
    theta: float | None
    truncation_index: int
    tail_mass_tol: float
    tail_mass: float

    def __init__(self, head: np.ndarray):
        head = np.asarray(head, dtype=float)
        head.flags.writeable = False
        self.head = head
        cdf = np.cumsum(head)
        cdf.flags.writeable = False
        self._cdf = cdf
        neg = -head
        neg.flags.writeable = False
        self._neg_head = neg

    @property
    def head_size(self) -> int:
        return self.head.size

    @property
    def regularly_varying(self) -> bool:
        return self.theta is not None

    # -- probabilities -----------------------------------------------------
    def prob(self, i) -> np.ndarray:
        """Probabilities ``p_i`` for (possibly non-integer) indices ``i``."""
        raise NotImplementedError

    def continuous_index(self, x) -> np.ndarray:
        """Smooth ``z(x)`` solving ``p(z) = 1/x`` (beyond-head region only)."""
        raise NotImplementedError

    def sum_over_urns(self, g: Callable[[np.ndarray], np.ndarray]) -> float:
        """``sum_i g(p_i)`` over all urns ``1..truncation_index``.

        ``g`` maps an array of probabilities to an array of summands and
        must be smooth in ``p`` with ``g(0) = 0``.
        """
        total = float(np.sum(g(self.head)))
        if self.truncation_index > self.head_size:
            total += _em_sum(lambda k: g(self.prob(k)), self.head_size + 1, self.truncation_index)
        return total

    # -- counting function -------------------------------------------------
    def alpha(self, x):
        """``alpha(x) = max{j : p_j >= 1/x}``, zero when no urn qualifies."""
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            thr = np.where(xa > 0, 1.0 / np.where(xa > 0, xa, 1.0), np.inf)
        out = np.searchsorted(self._neg_head, -thr, side="right").astype(np.int64)
        if self.truncation_index > self.head_size:
            beyond = out == self.head_size
            if np.any(beyond):
                out[beyond] = self._alpha_beyond_head(xa[beyond])
        if np.ndim(x) == 0:
            return int(out[0])
        return out

    def _alpha_beyond_head(self, x: np.ndarray) -> np.ndarray:
        return _alpha_bisect(self, x, self.head_size, self.truncation_index)

    # -- sampling ----------------------------------------------------------
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` urn indices (1-based, int64) by inverse CDF."""
        u = rng.random(size)
        idx = np.searchsorted(self._cdf, u, side="right")
        beyond = idx >= self.head_size
        idx += 1
        if np.any(beyond):
            if self.truncation_index > self.head_size:
                # u fell past the head's mass: draw from the conditional tail law
                idx[beyond] = self._draw_beyond_head(rng, int(beyond.sum()))
            else:
                idx[beyond] = self.head_size
        return idx

    def _draw_beyond_head(self, rng, count):
        raise NotImplementedError

    def profile(self) -> RegularVariationProfile:
        if self.theta is None:
            raise DomainError("explicit distributions carry no regular-variation index")
        theta = self.theta

        def L_at(x):
            return self.alpha(x) / x ** theta

        L_star_at = None
        if theta == 1.0:
            L_star_at = lambda n: l_star(self, n)  # noqa: E731
        return RegularVariationProfile(theta, L_at, L_star_at)

    def __repr__(self):
        return (f"{type(self).__name__}(theta={self.theta}, truncation_index={self.truncation_index}, "
                f"tail_mass={self.tail_mass:.3g})")


def _alpha_bisect(d: UrnDistribution, x: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Largest ``j`` in ``[lo, hi]`` with ``p_j >= 1/x``; assumes ``p_lo >= 1/x``."""
    x = np.asarray(x, dtype=float)
    thr = 1.0 / x
    a = np.full(x.shape, lo, dtype=np.int64)
    b = np.full(x.shape, hi, dtype=np.int64)
    top = d.prob(b.astype(float)) >= thr
    a[top] = b[top]
    while True:
        live = b - a > 1
        if not np.any(live):
            break
        mid = a + (b - a) // 2
        ok = d.prob(mid.astype(float)) >= thr
        a = np.where(live & ok, mid, a)
        b = np.where(live & ~ok, mid, b)
    return a


def alpha_by_search(d: UrnDistribution, x) -> np.ndarray:
    """Reference ``alpha`` by plain binary search over ``1..truncation_index``."""
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros(x.shape, dtype=np.int64)
    pos = x > 0
    hit = pos.copy()
    hit[pos] = d.prob(np.ones(int(pos.sum()))) >= 1.0 / x[pos]
    if np.any(hit):
        out[hit] = _alpha_bisect(d, x[hit], 1, d.truncation_index)
    return int(out[0]) if scalar else out


class ZipfLike(UrnDistribution):
    kind = Kind.ZIPF

    def __init__(self, theta: float, truncation_index: int, tail_mass_tol: float):
        self.theta = float(theta)
        self.exponent = 1.0 / self.theta
        self.truncation_index = int(truncation_index)
        self.tail_mass_tol = float(tail_mass_tol)
        s = self.exponent
        zeta_s = float(special.zeta(s))
        self.tail_mass = float(special.zeta(s, self.truncation_index + 1.0)) / zeta_s
        self.norm = zeta_s * (1.0 - self.tail_mass)
        h = min(self.truncation_index, HEAD_SIZE)
        super().__init__(self.prob(np.arange(1, h + 1, dtype=float)))

    def prob(self, i):
        i = np.asarray(i, dtype=float)
        p = i ** -self.exponent / self.norm
        return np.where((i >= 1) & (i <= self.truncation_index), p, 0.0)

    def continuous_index(self, x):
        return (np.asarray(x, dtype=float) / self.norm) ** self.theta

    def _alpha_beyond_head(self, x):
        j = np.floor(self.continuous_index(x))
        j = np.clip(j, self.head_size, self.truncation_index).astype(np.int64)
        thr = 1.0 / x
        # the closed form can be one off at exact boundaries
        up = (j < self.truncation_index) & (self.prob((j + 1).astype(float)) >= thr)
        j = j + up
        down = (j > self.head_size) & (self.prob(j.astype(float)) < thr)
        return j - down

    def _draw_beyond_head(self, rng, count):
        s = self.exponent
        lo, hi = float(self.head_size), float(self.truncation_index)
        a, b = lo ** (1 - s), hi ** (1 - s)

        def envelope(v):
            return (a - v * (a - b)) ** (1.0 / (1 - s))

        def cell(i):
            # integral of y**-s over [i-1, i], written to avoid cancellation
            return i ** (1 - s) * np.expm1((1 - s) * np.log1p(-1.0 / i)) / (s - 1)

        return _rejection(rng, count, envelope, cell, lambda i: i ** -s,
                          self.head_size + 1, self.truncation_index)


class LogZipf(UrnDistribution):
    kind = Kind.LOGZIPF
    theta = 1.0

    def __init__(self, truncation_index: int, tail_mass_tol: float):
        self.truncation_index = int(truncation_index)
        self.tail_mass_tol = float(tail_mass_tol)
        h = min(self.truncation_index, HEAD_SIZE)
        k = np.arange(1, h + 1, dtype=float)
        kept = float(np.sum(self._weight(k)))
        kept += _em_sum(self._weight, h + 1, self.truncation_index)
        beyond = _logzipf_tail(self.truncation_index + 1)
        self.tail_mass = beyond / (kept + beyond)
        self.norm = kept
        super().__init__(self._weight(k) / self.norm)

    @staticmethod
    def _weight(x):
        x = np.asarray(x, dtype=float)
        return 1.0 / (x * np.log(x + math.e) ** 2)

    def prob(self, i):
        i = np.asarray(i, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = self._weight(np.maximum(i, 1.0)) / self.norm
        return np.where((i >= 1) & (i <= self.truncation_index), p, 0.0)

    def continuous_index(self, x):
        # solve u + 2 log(log(e^u + e)) = log(x / norm) for u = log z
        target = np.log(np.asarray(x, dtype=float) / self.norm)
        lo = np.zeros_like(target)
        hi = np.maximum(target, 1.0)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            val = mid + 2.0 * np.log(mid + np.log1p(math.e * np.exp(-mid)))
            up = val < target
            lo = np.where(up, mid, lo)
            hi = np.where(up, hi, mid)
        return np.exp(0.5 * (lo + hi))

    def _draw_beyond_head(self, rng, count):
        lo, hi = float(self.head_size), float(self.truncation_index)
        a, b = 1.0 / math.log(lo), 1.0 / math.log(hi)

        def envelope(v):
            return np.exp(1.0 / (a - v * (a - b)))

        def cell(i):
            # integral of 1/(y log^2 y) over [i-1, i]
            return -np.log1p(-1.0 / i) / (np.log(i) * np.log(i - 1.0))

        return _rejection(rng, count, envelope, cell, self._weight,
                          self.head_size + 1, self.truncation_index)


def _logzipf_tail(a: int) -> float:
    """``sum_{k >= a} 1/(k log(k+e)^2)`` via Euler-Maclaurin, integral in log k."""

    def in_log(u):
        return 1.0 / (u + np.log1p(math.e * np.exp(-u))) ** 2

    w = LogZipf._weight
    ua = math.log(a)
    integral, _ = integrate(in_log, [ua, np.inf], rtol=1e-13)
    h = 1e-3 * a
    da = float(np.diff(w(np.array([a - h, a + h])))[0]) / (2 * h)
    return integral + 0.5 * float(w(np.array([float(a)]))[0]) - da / 12.0


def _rejection(rng, count, envelope, cell, weight, lo, hi):
    """Exact draws from ``P(I = i) ~ weight(i)`` on ``lo..hi``.

    ``envelope(v)`` inverts the continuous envelope CDF on ``[lo-1, hi]``;
    ``cell(i)`` is the envelope mass of ``[i-1, i]``, which dominates
    ``weight(i)`` because the envelope density is decreasing.
    """
    out = np.empty(count, dtype=np.int64)
    filled = 0
    while filled < count:
        need = count - filled
        batch = need + need // 8 + 16
        y = envelope(rng.random(batch))
        i = np.clip(np.ceil(y), lo, hi)
        keep = rng.random(batch) * cell(i) <= weight(i)
        got = i[keep][:need].astype(np.int64)
        out[filled:filled + got.size] = got
        filled += got.size
    return out


class FiniteExplicit(UrnDistribution):
    kind = Kind.EXPLICIT
    theta = None

    def __init__(self, probs):
        p = np.asarray(probs, dtype=float)
        self.truncation_index = int(p.size)
        self.tail_mass_tol = 0.0
        self.tail_mass = 0.0
        super().__init__(p)

    def prob(self, i):
        i = np.asarray(i, dtype=float)
        idx = np.clip(i.astype(np.int64) - 1, 0, self.truncation_index - 1)
        return np.where((i >= 1) & (i <= self.truncation_index), self.head[idx], 0.0)


def make_zipf(theta: float, truncation_index: int | None = None,
              tail_mass_tol: float = 1e-12) -> ZipfLike:
    """Zipf-like urns ``p_i ~ i**(-1/theta)``, ``0 < theta < 1``.

    Without ``truncation_index`` the smallest index meeting ``tail_mass_tol``
    is chosen.  Raises :class:`ConfigurationError` when the tolerance cannot
    be met at the requested (or any representable) truncation index.
    """
    if not 0.0 < theta < 1.0:
        raise DomainError(f"theta out of range (0,1): {theta}")
    if not tail_mass_tol > 0:
        raise ConfigurationError("tail_mass_tol must be positive")
    s = 1.0 / theta
    zeta_s = float(special.zeta(s))

    def tail(n):
        return float(special.zeta(s, n + 1.0)) / zeta_s

    if truncation_index is None:
        guess = (tail_mass_tol * (s - 1.0) * zeta_s) ** (1.0 / (1.0 - s))
        if not guess < MAX_INDEX / 2:
            raise ConfigurationError(
                f"tail mass {tail_mass_tol:g} needs ~{guess:.3g} urns, beyond {MAX_INDEX}")
        lo, hi = 1, max(2, int(2 * guess) + 2)
        while tail(hi) > tail_mass_tol:
            hi *= 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if tail(mid) <= tail_mass_tol:
                hi = mid
            else:
                lo = mid
        truncation_index = hi if tail(lo) > tail_mass_tol else lo
    truncation_index = int(truncation_index)
    if not 1 <= truncation_index <= MAX_INDEX:
        raise ConfigurationError(f"truncation_index must lie in [1, 2**62], got {truncation_index}")
    if tail(truncation_index) > tail_mass_tol:
        raise ConfigurationError(
            f"tail mass {tail(truncation_index):.3g} beyond index {truncation_index} "
            f"exceeds tail_mass_tol={tail_mass_tol:g}")
    return ZipfLike(theta, truncation_index, tail_mass_tol)


def make_logzipf(truncation_index: int = MAX_INDEX, tail_mass_tol: float = 0.05) -> LogZipf:
    """The ``theta = 1`` family ``p_i ~ 1/(i log(i+e)**2)``.

    Its tail decays only like ``1/log N``, so the default keeps the largest
    representable prefix and accepts the resulting ~1.5% renormalisation.
    """
    truncation_index = int(truncation_index)
    if truncation_index < 10:
        raise ConfigurationError("truncation_index must be at least 10")
    if truncation_index > MAX_INDEX:
        raise ConfigurationError(f"truncation_index must not exceed 2**62, got {truncation_index}")
    d = LogZipf(truncation_index, tail_mass_tol)
    if d.tail_mass > tail_mass_tol:
        raise ConfigurationError(
            f"tail mass {d.tail_mass:.3g} beyond index {truncation_index} "
            f"exceeds tail_mass_tol={tail_mass_tol:g}")
    return d


def make_explicit(probs, tol: float = 1e-9) -> FiniteExplicit:
    """Finite urn list; probabilities must be positive, nonincreasing, sum to 1."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ConfigurationError("explicit probabilities must be a non-empty list")
    if np.any(p <= 0):
        raise ConfigurationError("explicit probabilities must be positive")
    if np.any(np.diff(p) > 0):
        raise ConfigurationError("explicit probabilities must be nonincreasing")
    if abs(p.sum() - 1.0) > tol:
        raise ConfigurationError(f"explicit probabilities sum to {p.sum()!r}, not 1")
    return FiniteExplicit(p / p.sum())


def alpha(d: UrnDistribution, x):
    return d.alpha(x)


# --- integrals against the counting function --------------------------------

_EXP_CUTOFF = 745.0


def integrate_against_alpha(d: UrnDistribution, weight_v: Callable[[np.ndarray], np.ndarray],
                            v_lo: float, extra_points=(), rtol: float = 1e-10) -> float:
    """``int weight_v(v) * alpha(e**v) dv`` over ``[v_lo, inf)``.

    Panels are aligned with the jumps of ``alpha`` inside the head, so the
    integrand is smooth on each panel.  Past the head (where ``alpha`` exceeds
    ``HEAD_SIZE``) the step function is replaced by its running mean
    ``z(x) - 1/2``, ``z`` being the continuous index; the sawtooth it drops
    integrates to ``O(1/HEAD_SIZE**2)`` relative error.
    """
    jumps = -np.log(d.head)
    head_end = jumps[-1]
    has_beyond = d.truncation_index > d.head_size
    if has_beyond:
        last = -math.log(float(d.prob(float(d.truncation_index))))
    pts = [v_lo, *extra_points, *jumps[jumps > v_lo]]
    if has_beyond:
        pts.append(last)
    pts.append(np.inf)
    pts = np.asarray(pts, dtype=float)
    pts = pts[pts >= v_lo]

    def count(v):
        a = np.searchsorted(d._neg_head, -np.exp(-v), side="right").astype(float)
        if has_beyond:
            mid = (v >= head_end) & (v < last)
            if np.any(mid):
                a[mid] = np.maximum(d.continuous_index(np.exp(v[mid])) - 0.5, d.head_size)
            a[v >= last] = d.truncation_index
        return a

    value, _ = integrate(lambda v: weight_v(v) * count(v), pts, rtol=rtol)
    return value


def _l_star_weight(n):
    logn = math.log(n)

    def w(v):
        # e^{-n/x} / x^2 * dx/dv with x = e^v
        return np.exp(-np.exp(logn - v) - v)

    return w


def l_star(d: UrnDistribution, n: float, rtol: float = 1e-10) -> float:
    """``L*(n) = int_0^inf e^{-1/y} y^{-1} L(n y) dy`` with ``L(x) = alpha(x)/x``.

    Evaluated as ``int e^{-n/x} alpha(x) x^{-2} dx`` in ``v = log x``, split at
    ``y = 1`` (``v = log n``) and at the jumps of ``alpha``.
    """
    if d.theta != 1.0:
        raise DomainError("l_star is defined for the theta = 1 family only")
    if n < 1:
        raise DomainError("l_star needs n >= 1")
    v_lo = math.log(n / _EXP_CUTOFF)
    return integrate_against_alpha(d, _l_star_weight(n), v_lo, extra_points=(math.log(n),), rtol=rtol)


def l_star_from_alpha(alpha_fn: Callable[[np.ndarray], np.ndarray], n: float,
                      rtol: float = 1e-10) -> float:
    """Same integral for a user-supplied smooth counting function."""
    w = _l_star_weight(n)
    logn = math.log(n)
    v_lo = math.log(n / _EXP_CUTOFF)
    def f(v):
        # past v = 700 the weight has underflowed; keep alpha_fn finite there
        return w(v) * alpha_fn(np.exp(np.minimum(v, 700.0)))

    value, _ = integrate(f, [v_lo, logn, np.inf], rtol=rtol)
    return value
