"""Monte-Carlo verification of the limit theorems, plus exact oracles.

:func:`run_experiment` simulates ``m_reps`` replications, normalises them,
and compares empirical covariances and marginal laws with the limit kernel.
Every comparison becomes a :class:`CriterionResult`; the report passes when
all of them do.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .config import ConfigFile, DistributionSpec, Tolerances
from .errors import ContractError, DomainError
from .gp import kernel_matrix
from .model import UrnDistribution, make_explicit
from .sim import run_replications
from .theory import (Regime, b_n, cov_exact_poissonized, cov_karlin_theorem2, cov_limit,
                     expected_occupancy, moment_table, normalizer)

MIN_KS_SAMPLES = 50
SMALL_M = 30


# --- configuration and report types -------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    distribution: DistributionSpec
    n: int
    grid: tuple[float, ...] = (1.0,)
    kmax: int = 1
    regime: Regime = Regime.FIXED
    m_reps: int = 1000
    master_seed: int = 0
    tolerances: Tolerances = Tolerances()
    out_dir: str | None = None
    formats: tuple[str, ...] = ("json", "csv")

    def __post_init__(self):
        if self.m_reps < 2:
            raise ContractError("m_reps must be at least 2")
        if self.kmax < 1:
            raise ContractError("kmax must be at least 1")
        if any(not v > 0 for v in vars(self.tolerances).values()):
            raise ContractError("tolerances must be positive")
        object.__setattr__(self, "regime", Regime(self.regime))
        object.__setattr__(self, "grid", tuple(float(t) for t in self.grid))

    @classmethod
    def from_file(cls, cf: ConfigFile, seed: int | None = None,
                  out_dir: str | None = None) -> "ExperimentConfig":
        return cls(cf.distribution, cf.n, cf.grid, cf.kmax, cf.regime, cf.m_reps,
                   cf.master_seed if seed is None else seed, cf.tolerances,
                   out_dir if out_dir is not None else cf.output.directory, cf.output.formats)


@dataclass(frozen=True)
class CriterionResult:
    """One pass/fail comparison: ``passed`` is ``value <= threshold`` (or ``>=`` for p-values)."""

    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class KSResult:
    component: int
    sigma: float
    statistic: float
    p_value: float


@dataclass
class ExperimentReport:
    """Aggregated statistics of one experiment.

    Coordinates are ``(k, t)`` pairs ordered grid-major, matching the row
    layout of :func:`urnscheme.gp.kernel_matrix`.
    """

    n: int
    m_reps: int
    theta: float | None
    coordinates: list[tuple[int, float]]
    empirical_cov: np.ndarray
    cov_se: np.ndarray
    theory_cov: np.ndarray | None
    relative_error: np.ndarray | None
    ks: list[KSResult] = field(default_factory=list)
    clt: dict = field(default_factory=dict)
    exact_k: list[dict] = field(default_factory=list)
    wiener: dict | None = None
    theta_estimate: float = math.nan
    flags: list[str] = field(default_factory=list)
    criteria: list[CriterionResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def criterion(self, name: str) -> CriterionResult:
        for c in self.criteria:
            if c.name == name:
                return c
        raise KeyError(name)


# --- elementary statistics ----------------------------------------------------

def empirical_cov(samples) -> np.ndarray:
    """Unbiased sample covariance (divisor ``reps - 1``) of a ``reps x coords`` matrix."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ContractError("empirical covariance needs at least 2 replications")
    centred = x - x.mean(axis=0)
    cov = centred.T @ centred / (x.shape[0] - 1)
    return 0.5 * (cov + cov.T)


def cov_standard_errors(samples) -> np.ndarray:
    """Monte-Carlo standard error of each entry of :func:`empirical_cov`."""
    x = np.asarray(samples, dtype=float)
    m = x.shape[0]
    centred = x - x.mean(axis=0)
    prod = centred[:, :, None] * centred[:, None, :]
    return prod.std(axis=0, ddof=1) / math.sqrt(m)


def kolmogorov_sf(lam: float) -> float:
    """``P(K > lam)`` for the Kolmogorov distribution."""
    if lam <= 0:
        return 1.0
    if lam < 1.0:
        # theta-function form, fast for small lam
        s = sum(math.exp(-((2 * k - 1) ** 2) * math.pi ** 2 / (8 * lam * lam)) for k in range(1, 8))
        return max(0.0, min(1.0, 1.0 - math.sqrt(2 * math.pi) / lam * s))
    s = sum((-1) ** (k - 1) * math.exp(-2 * k * k * lam * lam) for k in range(1, 101))
    return max(0.0, min(1.0, 2.0 * s))


def ks_normal(samples, sigma: float) -> tuple[float, float]:
    """One-sample KS statistic and asymptotic p-value against ``Normal(0, sigma^2)``."""
    if not sigma > 0:
        raise ContractError("sigma must be positive")
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    m = x.size
    if m < MIN_KS_SAMPLES:
        raise ContractError(f"KS needs at least {MIN_KS_SAMPLES} samples, got {m}")
    if not np.all(np.isfinite(x)):
        return 1.0, 0.0
    cdf = ndtr(x / sigma)
    idx = np.arange(1, m + 1)
    stat = float(max(np.max(idx / m - cdf), np.max(cdf - (idx - 1) / m)))
    stat = min(max(stat, 0.0), 1.0)
    lam = math.sqrt(m) * stat
    return stat, kolmogorov_sf(lam)


def estimate_theta(r_n: int, n: int) -> float:
    """Log-ratio estimator ``ln r_n / ln n``."""
    if r_n < 1 or n < 2:
        raise DomainError("need r_n >= 1 and n >= 2")
    return math.log(r_n) / math.log(n)


def brute_force_expectation(probs, n: int, k: int) -> float:
    """``E R*_{n,k}`` by enumerating all ``len(probs)**n`` ball sequences."""
    probs = [float(p) for p in probs]
    if len(probs) > 4 or n > 8:
        raise ContractError("brute force limited to 4 urns and 8 balls")
    if n < 0 or k < 1:
        raise ContractError("need n >= 0 and k >= 1")
    terms = []
    for seq in itertools.product(range(len(probs)), repeat=n):
        weight = 1.0
        counts = [0] * len(probs)
        for u in seq:
            weight *= probs[u]
            counts[u] += 1
        terms.append(weight * sum(c >= k for c in counts))
    # compensated sum: up to 4**8 terms would otherwise drift past 1e-12
    return math.fsum(terms)


# --- comparisons ----------------------------------------------------------------

def _within(emp, theory, se, tol: Tolerances):
    """Excess ratio ``|emp - theory| / max(rel |theory|, se_mult SE)``; pass when <= 1."""
    allowed = np.maximum(tol.cov_rel * np.abs(theory), tol.cov_se * se)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(emp - theory) / allowed
    return np.where(allowed > 0, ratio, np.where(emp == theory, 0.0, np.inf))


def _rel(emp, theory):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.abs(emp - theory) / np.abs(theory)


def _corr(a, b):
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    return float(a @ b) / den if den > 0 else 0.0


def wiener_statistics(values, grid, tol: Tolerances) -> tuple[dict, list[CriterionResult]]:
    """Variance-in-``t`` regression and increment correlations of normalised paths.

    ``values`` has shape ``(M, G)``; the limit is a standard Wiener process.
    """
    values = np.asarray(values, dtype=float)
    grid = np.asarray(grid, dtype=float)
    var = values.var(axis=0, ddof=1)
    if grid.size >= 2:
        slope, intercept = np.polyfit(grid, var, 1)
    else:
        slope, intercept = var[0] / grid[0], 0.0
    incr = np.diff(np.concatenate([np.zeros((values.shape[0], 1)), values], axis=1), axis=1)
    corrs = [_corr(incr[:, g], incr[:, g + 1]) for g in range(grid.size - 1)]
    var_t1 = float(var[-1])
    section = {
        "grid": grid.tolist(),
        "variance": var.tolist(),
        "slope": float(slope),
        "intercept": float(intercept),
        "increment_correlations": corrs,
        "variance_t1": var_t1,
    }
    crit = [
        CriterionResult("wiener_slope", abs(slope - 1.0), tol.wiener_slope,
                        abs(slope - 1.0) <= tol.wiener_slope, f"slope={slope:.6g}"),
        CriterionResult("wiener_variance_t1", abs(var_t1 - 1.0), tol.var_rel,
                        abs(var_t1 - 1.0) <= tol.var_rel, f"Var W(1)={var_t1:.6g}"),
    ]
    if corrs:
        worst = max(abs(c) for c in corrs)
        crit.append(CriterionResult("wiener_increment_corr", worst, tol.wiener_corr,
                                    worst <= tol.wiener_corr, f"max |rho|={worst:.6g}"))
    half = np.flatnonzero(np.isclose(grid, 0.5))
    if half.size:
        ratio = float(var[half[0]] / var[-1])
        section["variance_ratio_half"] = ratio
        crit.append(CriterionResult("wiener_variance_ratio", abs(ratio / 0.5 - 1.0), tol.var_rel,
                                    abs(ratio / 0.5 - 1.0) <= tol.var_rel,
                                    f"Var(0.5)/Var(1)={ratio:.6g}"))
    return section, crit


# --- experiments ------------------------------------------------------------------

def simulate_normalized(cfg: ExperimentConfig, threads: int = 1, d: UrnDistribution | None = None):
    """Raw paths, normalised paths ``(M, G, kmax)`` and the moment table."""
    d = cfg.distribution.build() if d is None else d
    table = moment_table(d, cfg.n, cfg.grid, cfg.kmax)
    raw = run_replications(d, cfg.n, cfg.grid, cfg.kmax, cfg.regime, cfg.m_reps,
                           cfg.master_seed, threads)
    centre = table.for_regime(cfg.regime)
    norm = (raw - centre[None]) / math.sqrt(table.alpha_n)
    return d, table, raw, norm


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Simulate, normalise and compare with the limit theory.

    The result depends only on ``cfg``: replication ``r`` has a fixed child
    seed, so ``threads`` changes speed but not a single bit of the report.
    """
    tol = cfg.tolerances
    d, table, raw, norm = simulate_normalized(cfg, threads)
    theta = d.theta
    m, g_count, kmax = norm.shape
    coords = [(k, t) for t in cfg.grid for k in range(1, kmax + 1)]
    flat = norm.reshape(m, g_count * kmax)
    emp = empirical_cov(flat)
    se = cov_standard_errors(flat)
    report = ExperimentReport(n=cfg.n, m_reps=m, theta=theta, coordinates=coords,
                              empirical_cov=emp, cov_se=se, theory_cov=None, relative_error=None)
    if m < SMALL_M:
        report.flags.append(f"m_reps={m} < {SMALL_M}: standard errors unreliable, "
                            "SE-based tolerances are wide")
    if m < MIN_KS_SAMPLES:
        report.flags.append(f"m_reps={m} < {MIN_KS_SAMPLES}: KS tests skipped")

    r_n = raw[:, -1, 0]
    if cfg.n >= 2:
        est = [estimate_theta(int(r), cfg.n) for r in r_n if r >= 1]
        report.theta_estimate = float(np.mean(est)) if est else math.nan

    if theta is not None and 0 < theta < 1:
        _kernel_section(report, cfg, norm, emp, se, theta, tol)
    elif theta == 1.0:
        section, crit = wiener_statistics(norm[:, :, 0], cfg.grid, tol)
        report.wiener = section
        report.criteria.extend(crit)
    else:
        report.flags.append("explicit distribution: no limit theory to compare against")

    if theta is not None and cfg.grid[-1] == 1.0:
        _clt_section(report, cfg, d, table, r_n, tol)
    return report


def _kernel_section(report, cfg, norm, emp, se, theta, tol):
    m, _, kmax = norm.shape
    theory = kernel_matrix(cfg.grid, kmax, theta)
    report.theory_cov = theory
    report.relative_error = _rel(emp, theory)
    excess = _within(emp, theory, se, tol)
    worst = float(np.max(excess))
    report.criteria.append(CriterionResult(
        "kernel_covariance", worst, 1.0, worst <= 1.0,
        f"max |emp-theory|/max({tol.cov_rel:g} rel, {tol.cov_se:g} SE) over {excess.size} entries"))
    diag = np.abs(np.diag(emp) / np.diag(theory) - 1.0)
    report.criteria.append(CriterionResult(
        "diagonal_variance", float(np.max(diag)), tol.var_rel, bool(np.max(diag) <= tol.var_rel),
        "max relative error of the diagonal"))
    if m >= MIN_KS_SAMPLES:
        for k in range(1, kmax + 1):
            sigma = math.sqrt(cov_limit(k, k, 1.0, 1.0, theta))
            stat, p = ks_normal(norm[:, -1, k - 1], sigma)
            report.ks.append(KSResult(k, sigma, stat, p))
            report.criteria.append(CriterionResult(
                f"ks_marginal_{k}", p, tol.ks_level, p > tol.ks_level, f"KS statistic={stat:.6g}"))
    if kmax >= 2 and cfg.grid[-1] == 1.0:
        exact = norm[:, -1, :-1] - norm[:, -1, 1:]
        e_cov = empirical_cov(exact)
        e_se = cov_standard_errors(exact)
        worst = 0.0
        for a in range(kmax - 1):
            for b in range(kmax - 1):
                th = cov_karlin_theorem2(a + 1, b + 1, theta)
                ex = float(_within(e_cov[a, b], th, e_se[a, b], tol))
                worst = max(worst, ex)
                report.exact_k.append({"r_i": a + 1, "r_j": b + 1, "empirical": float(e_cov[a, b]),
                                       "se": float(e_se[a, b]), "theory": th})
        report.criteria.append(CriterionResult(
            "exact_k_covariance", worst, 1.0, worst <= 1.0, "exact-k counts at t=1"))


def _clt_section(report, cfg, d, table, r_n, tol):
    """Standardised number of occupied urns at ``t = 1`` against ``Normal(0, 1)``."""
    bn = b_n(d, cfg.n)
    centre = table.for_regime(cfg.regime)[-1, 0]
    z = (r_n - centre) / math.sqrt(bn)
    var = float(z.var(ddof=1))
    report.clt = {"b_n": bn, "variance": var}
    report.criteria.append(CriterionResult(
        "clt_variance", abs(var - 1.0), tol.var_rel, abs(var - 1.0) <= tol.var_rel,
        f"Var((R_n - E R_n)/sqrt(B_n))={var:.6g}"))
    if z.size >= MIN_KS_SAMPLES:
        stat, p = ks_normal(z, 1.0)
        report.clt.update(ks_statistic=stat, ks_p_value=p)
        report.criteria.append(CriterionResult(
            "clt_ks", p, tol.ks_level, p > tol.ks_level, f"KS statistic={stat:.6g}"))


def wiener_limit_check(cfg: ExperimentConfig, threads: int = 1) -> tuple[dict, list[CriterionResult]]:
    """Wiener-limit section for a ``theta = 1`` configuration."""
    d = cfg.distribution.build()
    if d.theta != 1.0:
        raise ContractError("wiener_limit_check needs a theta = 1 distribution")
    if cfg.kmax != 1:
        cfg = ExperimentConfig(cfg.distribution, cfg.n, cfg.grid, 1, cfg.regime, cfg.m_reps,
                               cfg.master_seed, cfg.tolerances)
    _, _, _, norm = simulate_normalized(cfg, threads, d)
    return wiener_statistics(norm[:, :, 0], cfg.grid, cfg.tolerances)


# --- deterministic checks -------------------------------------------------------

def growth_ratio(d: UrnDistribution, n: float, deltas) -> np.ndarray:
    """``E R_{Pi(n delta)} / (a_n delta^{theta/2})``, ``a_n`` = :func:`normalizer`."""
    if d.theta is None:
        raise DomainError("needs a regularly varying distribution")
    a_n = normalizer(d, n)
    deltas = np.asarray(deltas, dtype=float)
    if np.any(deltas <= 0) or np.any(deltas > 1):
        raise DomainError("deltas must lie in (0, 1]")
    return np.array([expected_occupancy(d, n * dl, 1, Regime.POISSONIZED) / (a_n * dl ** (d.theta / 2))
                     for dl in deltas])


def growth_bound_check(d: UrnDistribution, ns=(1e4, 1e6), deltas=None, stability: float = 2.0) -> dict:
    """Boundedness of :func:`growth_ratio` over ``delta`` and its stability in ``n``.

    "Stable" means the largest and smallest per-``n`` maxima differ by at
    most the factor ``stability``.
    """
    if deltas is None:
        deltas = 2.0 ** -np.arange(10, -1, -1)
    maxima = [float(np.max(growth_ratio(d, n, deltas))) for n in ns]
    spread = max(maxima) / min(maxima)
    return {"n": list(ns), "max_ratio": maxima, "spread": spread,
            "passed": bool(np.all(np.isfinite(maxima)) and spread <= stability)}


def increment_bound_check(d: UrnDistribution, n: float, fractions=(0.1, 0.25, 0.5, 0.75, 1.0),
                          kmax: int = 3, rtol: float = 1e-9) -> dict:
    """``E(R*_{Pi(t),k} - R*_{Pi(tau),k}) <= E R_{Pi(t-tau)}`` on all ``tau <= t`` grid pairs."""
    times = [n * f for f in fractions]
    occ = {(t, k): expected_occupancy(d, t, k, Regime.POISSONIZED) for t in times for k in range(1, kmax + 1)}
    rows = []
    for tau, t in itertools.combinations_with_replacement(times, 2):
        bound = expected_occupancy(d, t - tau, 1, Regime.POISSONIZED) if t > tau else 0.0
        for k in range(1, kmax + 1):
            lhs = occ[(t, k)] - occ[(tau, k)]
            ok = lhs <= bound * (1 + rtol) + 1e-12 * max(1.0, bound)
            rows.append({"tau": tau, "t": t, "k": k, "lhs": lhs, "rhs": bound, "holds": bool(ok)})
    violations = sum(not r["holds"] for r in rows)
    return {"rows": rows, "violations": violations}


def finite_n_errors(d: UrnDistribution, ns=(1e4, 1e5, 1e6), imax: int = 3,
                    tau: float = 0.5, t: float = 1.0) -> dict:
    """Relative errors ``|c~_{ij}(n tau, n t)/alpha(n) - c*_{ij}(tau, t)| / |c*|`` per ``n``."""
    if d.theta is None or not 0 < d.theta < 1:
        raise DomainError("needs a distribution with theta in (0, 1)")
    out = {}
    for i in range(1, imax + 1):
        for j in range(1, imax + 1):
            limit = cov_limit(i, j, tau, t, d.theta)
            errs = [abs(cov_exact_poissonized(i, j, n * tau, n * t, d) / float(d.alpha(n)) - limit)
                    / abs(limit) for n in ns]
            out[(i, j)] = errs
    return out


def explicit_oracle_cases(max_urns: int = 4, max_n: int = 8, max_k: int = 3):
    """Yield ``(probs, n, k)`` over a fixed family of small explicit distributions."""
    families = [
        [1.0],
        [0.5, 0.5],
        [0.7, 0.3],
        [0.6, 0.3, 0.1],
        [1 / 3, 1 / 3, 1 / 3],
        [0.4, 0.3, 0.2, 0.1],
        [0.25, 0.25, 0.25, 0.25],
        [0.85, 0.05, 0.05, 0.05],
    ]
    for probs in families:
        if len(probs) > max_urns:
            continue
        for n in range(0, max_n + 1):
            for k in range(1, max_k + 1):
                yield probs, n, k


def oracle_max_error(cases=None) -> float:
    """Largest ``|expected_occupancy - brute_force_expectation|`` over ``cases``."""
    worst = 0.0
    cache = {}
    for probs, n, k in (explicit_oracle_cases() if cases is None else cases):
        key = tuple(probs)
        if key not in cache:
            cache[key] = make_explicit(probs)
        d = cache[key]
        worst = max(worst, abs(expected_occupancy(d, n, k) - brute_force_expectation(probs, n, k)))
    return worst
