"""Closed-form and integral quantities of the infinite occupancy scheme.

Covers the constants ``K_{k,theta}``, the limit covariance kernel
``c*_{ij}(tau, t)`` of the at-least-``k`` processes, the exact-``k``
covariances at ``t = 1``, normalisations ``B_n``, exact finite-intensity
covariances and exact expectations used for centring.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import ContractError, DomainError
from .model import UrnDistribution, integrate_against_alpha, l_star
from .quadrature import integrate


class Regime(str, enum.Enum):
    FIXED = "fixed"
    POISSONIZED = "poissonized"


@dataclass(frozen=True)
class KernelParams:
    theta: float
    nu: int

    def __post_init__(self):
        _check_theta(self.theta)
        if self.nu < 1:
            raise DomainError("nu must be at least 1")


def _check_theta(theta):
    if not 0.0 < theta < 1.0:
        raise DomainError(f"theta out of range (0,1): {theta}")


# --- special functions -------------------------------------------------------

def gamma_fn(x: float) -> float:
    """Gamma function for positive arguments."""
    if not x > 0:
        raise DomainError(f"gamma_fn needs x > 0, got {x}")
    return math.gamma(x)


@lru_cache(maxsize=None)
def k_const(k: int, theta: float) -> float:
    """``K_{0,theta} = -Gamma(1-theta)``; ``K_{k,theta} = theta Gamma(k-theta)``."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    if k == 0:
        return -gamma_fn(1.0 - theta)
    return theta * gamma_fn(k - theta)


def k_const_integral(r: int, theta: float, atol: float = 1e-12) -> float:
    """``int_0^inf (r y^{theta-r-1} - y^{theta-r-2}) e^{-1/y} dy`` by quadrature.

    With ``u = 1/y`` and then ``u = v**q``, ``q = 1/(1-theta)``, the integrand
    becomes ``q (r v^{q(r-1)} - v^{qr}) exp(-v^q)``, which is smooth at 0.
    """
    _check_theta(theta)
    if r < 0:
        raise DomainError("r must be nonnegative")
    q = 1.0 / (1.0 - theta)
    upper = (60.0 + 4.0 * r) ** (1.0 - theta)

    def f(v):
        vq = v ** q
        first = r * v ** (q * (r - 1)) if r > 0 else 0.0
        return q * (first - v ** (q * r)) * np.exp(-vq)

    value, _ = integrate(f, [0.0, 1.0, upper], atol=atol, rtol=1e-13)
    return value


# --- limit kernel ------------------------------------------------------------

def cov_limit(i: int, j: int, tau: float, t: float, theta: float) -> float:
    """Limit covariance ``c*_{ij}(tau, t)`` of ``(Y*_i(tau), Y*_j(t))``.

    The kernel is stated for ``tau <= t``; other orderings use
    ``c*_{ij}(tau, t) = c*_{ji}(t, tau)``.  ``0**0`` is taken as 1.
    """
    _check_theta(theta)
    if i < 1 or j < 1:
        raise DomainError("component indices start at 1")
    if tau < 0 or t < 0:
        raise DomainError("times must be nonnegative")
    if tau > t:
        i, j, tau, t = j, i, t, tau
    if tau == 0.0:
        return 0.0
    fact = math.factorial
    second = 0.0
    for s in range(i):
        for m in range(j):
            second += (tau ** s * t ** m * k_const(m + s, theta)
                       / ((t + tau) ** (m + s - theta) * fact(s) * fact(m)))
    if i < j:
        first = 0.0
        for s in range(i):
            for m in range(j - s):
                first += (tau ** s * (t - tau) ** m * k_const(m + s, theta)
                          / (t ** (m + s - theta) * fact(s) * fact(m)))
    else:
        first = t ** theta * sum(k_const(m, theta) / fact(m) for m in range(j))
    return first - second


def cov_karlin_theorem2(ri: int, rj: int, theta: float) -> float:
    """Limit covariance of the exact-``r`` counts ``R_{n,ri}``, ``R_{n,rj}`` at ``t = 1``."""
    _check_theta(theta)
    if ri < 1 or rj < 1:
        raise DomainError("r must be positive")
    g = gamma_fn
    if ri != rj:
        return (-theta * g(ri + rj - theta) / (math.factorial(ri) * math.factorial(rj))
                * 2.0 ** (theta - ri - rj))
    r = ri
    return theta / g(r + 1) * (g(r - theta) - 2.0 ** (theta - 2 * r) * g(2 * r - theta) / g(r + 1))


def theorem2_identity_residual(i: int, j: int, theta: float) -> float:
    """``|c_{ij} - (c*_{ij} - c*_{i+1,j} - c*_{i,j+1} + c*_{i+1,j+1})|`` at ``(1, 1)``."""
    c = cov_limit
    combo = (c(i, j, 1.0, 1.0, theta) - c(i + 1, j, 1.0, 1.0, theta)
             - c(i, j + 1, 1.0, 1.0, theta) + c(i + 1, j + 1, 1.0, 1.0, theta))
    return abs(cov_karlin_theorem2(i, j, theta) - combo)


# --- Poisson / binomial tails --------------------------------------------------

def _pois_sf(r: int, lam):
    """``P(Poisson(lam) >= r)``."""
    if r <= 0:
        return np.ones_like(lam)
    return special.gammainc(r, lam)


def _pois_pmf(s: int, lam):
    lam = np.asarray(lam, dtype=float)
    if s == 0:
        return np.exp(-lam)
    with np.errstate(divide="ignore"):
        return np.exp(s * np.log(lam) - lam - math.lgamma(s + 1))


def _binom_sf(k: int, m: int, p):
    """``P(Binomial(m, p) >= k)``."""
    if k <= 0:
        return np.ones_like(p)
    if m < k:
        return np.zeros_like(p)
    return special.betainc(k, m - k + 1, p)


# --- exact finite quantities -------------------------------------------------

def expected_occupancy(d: UrnDistribution, m: float, k: int,
                       mode: Regime | str = Regime.FIXED) -> float:
    """``E R*_{m,k}`` (fixed ``m`` balls) or ``E R*_{Pi(m),k}`` (Poisson(m) balls)."""
    mode = Regime(mode)
    if m < 0:
        raise DomainError("m must be nonnegative")
    if k < 1:
        raise DomainError("k must be at least 1")
    if m == 0:
        return 0.0
    if mode is Regime.FIXED:
        mi = int(math.floor(m))
        return d.sum_over_urns(lambda p: _binom_sf(k, mi, p))
    return d.sum_over_urns(lambda p: _pois_sf(k, m * p))


def _joint_upper(i, j, a, b):
    """``P(Pi(tau) >= i, Pi(t) >= j)`` per urn, with ``a = tau p``, ``b = (t - tau) p``.

    Written as a sum of nonnegative terms, so small-``p`` urns lose no
    precision to cancellation.
    """
    out = _pois_sf(max(i, j), a)
    for s in range(i, j):
        out = out + _pois_pmf(s, a) * _pois_sf(j - s, b)
    return out


def cov_exact_poissonized(i: int, j: int, tau: float, t: float, d: UrnDistribution) -> float:
    """Exact ``cov(R*_{Pi(tau),i}, R*_{Pi(t),j})`` summed over all urns."""
    if tau < 0 or t < 0:
        raise DomainError("times must be nonnegative")
    if tau > t:
        i, j, tau, t = j, i, t, tau
    if tau == 0.0:
        return 0.0

    def g(p):
        a = tau * p
        both = _joint_upper(i, j, a, (t - tau) * p)
        return both - _pois_sf(i, a) * _pois_sf(j, t * p)

    return d.sum_over_urns(g)


def b_n(d: UrnDistribution, n: float) -> float:
    """Normalisation ``B_n`` of the number of occupied urns."""
    if d.theta is None:
        raise DomainError("b_n needs a regularly varying distribution")
    if d.theta == 1.0:
        return n * l_star(d, n)
    theta = d.theta
    return gamma_fn(1.0 - theta) * (2.0 ** theta - 1.0) * float(d.alpha(n))


def gamma_tail_asymptotic_check(r: int, t: float, d: UrnDistribution) -> float:
    """``int_0^inf y^{-r-2} e^{-1/y} alpha(t y) dy / (alpha(t) Gamma(r+1-theta))``.

    Quadrature in ``v = log(t y)``; tends to 1 as ``t`` grows.
    """
    if d.theta is None or not 0 < d.theta < 1:
        raise DomainError("needs a Zipf-like distribution with theta in (0,1)")
    if r < 0:
        raise DomainError("r must be nonnegative")
    logt = math.log(t)

    def w(v):
        # t^{r+1} x^{-r-2} e^{-t/x} dx with x = e^v
        return np.exp((r + 1) * (logt - v) - np.exp(logt - v))

    lhs = integrate_against_alpha(d, w, logt - math.log(745.0), extra_points=(logt,))
    return lhs / (float(d.alpha(t)) * gamma_fn(r + 1 - d.theta))


def gamma_tail_exact(r: int, t: float, d: UrnDistribution) -> float:
    """Same left-hand side as a sum over urns: ``sum_i gamma(r+1, t p_i)``."""
    return math.gamma(r + 1) * d.sum_over_urns(lambda p: special.gammainc(r + 1, t * p))


# --- centring tables ------------------------------------------------------------

@dataclass(frozen=True)
class MomentTable:
    """Exact expectations ``E R*_{[nt],k}`` and ``E R*_{Pi(nt),k}`` on a grid."""

    grid: np.ndarray
    n: int
    kmax: int
    values: np.ndarray
    poissonized: np.ndarray
    alpha_n: float

    def for_regime(self, regime: Regime | str) -> np.ndarray:
        return self.values if Regime(regime) is Regime.FIXED else self.poissonized


def floor_times(n: int, grid) -> np.ndarray:
    """Ball counts ``[n t]`` for grid times, robust to binary rounding of ``t``."""
    return np.floor(np.round(n * np.asarray(grid, dtype=float), 9)).astype(np.int64)


def normalizer(d: UrnDistribution, n: float) -> float:
    """``alpha(n)`` for ``theta < 1`` (and explicit lists), ``n L*(n)`` for ``theta = 1``."""
    if d.theta == 1.0:
        return n * l_star(d, n)
    return float(d.alpha(n))


def moment_table(d: UrnDistribution, n: int, grid, kmax: int) -> MomentTable:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ContractError("grid must be strictly ascending")
    if kmax < 1:
        raise ContractError("kmax must be at least 1")
    counts = floor_times(n, grid)
    fixed = np.array([[expected_occupancy(d, m, k, Regime.FIXED) for k in range(1, kmax + 1)]
                      for m in counts])
    pois = np.array([[expected_occupancy(d, n * t, k, Regime.POISSONIZED) for k in range(1, kmax + 1)]
                     for t in grid])
    return MomentTable(grid, int(n), int(kmax), fixed, pois, normalizer(d, n))
