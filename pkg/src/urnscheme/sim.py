"""Path simulation of the occupancy counts ``R*_{m,k}``.

Balls are drawn in bulk (inverse CDF), then each ball's *arrival rank* in its
urn is computed: ball ``q`` is the ``r``-th ball of its urn.  An urn joins
the at-least-``k`` set exactly when its ``k``-th ball lands, so
``R*_{m,k}`` is the number of balls among the first ``m`` with rank ``k``.
This is the bulk form of the streaming update in :class:`OccupancyState`
(increment ``r_star[k]`` when an urn's count reaches ``k``) and yields every
checkpoint of a path from a single pass.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractError
from .model import UrnDistribution
from .theory import MomentTable, Regime, floor_times

MAX_BALLS = 1 << 40


class OccupancyState:
    """Streaming occupancy counters for one replication."""

    def __init__(self, kmax: int):
        if kmax < 1:
            raise ContractError("kmax must be at least 1")
        self.kmax = kmax
        self.counts: dict[int, int] = {}
        self._r_star = [0] * (kmax + 1)
        self.balls_thrown = 0

    def add(self, urn: int) -> None:
        c = self.counts.get(urn, 0) + 1
        self.counts[urn] = c
        if c <= self.kmax:
            self._r_star[c] += 1
        self.balls_thrown += 1

    @property
    def r_star(self) -> np.ndarray:
        """``r_star[k-1] = R*_{.,k}`` for ``k = 1..kmax``."""
        return np.array(self._r_star[1:], dtype=np.int64)

    def rescan(self) -> np.ndarray:
        """Recompute ``r_star`` from the raw counts (consistency check)."""
        c = np.fromiter(self.counts.values(), dtype=np.int64, count=len(self.counts))
        return np.array([np.count_nonzero(c >= k) for k in range(1, self.kmax + 1)], dtype=np.int64)


@dataclass(frozen=True)
class PathRecord:
    grid: np.ndarray
    raw: np.ndarray          # [grid, k] -> R*_{., k}
    n: int
    regime: Regime
    seed: object
    balls: np.ndarray        # balls thrown by each grid time

    @property
    def kmax(self) -> int:
        return self.raw.shape[1]


@dataclass(frozen=True)
class NormalizedPath:
    grid: np.ndarray
    values: np.ndarray
    alpha_n: float


def child_seed(master_seed: int, replication: int) -> np.random.SeedSequence:
    """Seed of replication ``replication``: SeedSequence hash of ``(master, index)``."""
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(replication),))


def sample_urn(d: UrnDistribution, rng: np.random.Generator) -> int:
    return int(d.sample(rng, 1)[0])


def arrival_ranks(urns: np.ndarray) -> np.ndarray:
    """``rank[q]`` = number of balls ``<= q`` that landed in ``urns[q]``."""
    m = urns.size
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(urns, kind="stable")
    ordered = urns[order]
    pos = np.arange(m, dtype=np.int64)
    first = np.empty(m, dtype=bool)
    first[0] = True
    np.not_equal(ordered[1:], ordered[:-1], out=first[1:])
    start = np.maximum.accumulate(np.where(first, pos, 0))
    rank = np.empty(m, dtype=np.int64)
    rank[order] = pos - start + 1
    return rank


def threshold_counts(urns: np.ndarray, checkpoints: np.ndarray, kmax: int) -> np.ndarray:
    """``R*_{m,k}`` for ``m`` in ``checkpoints`` (prefix lengths) and ``k = 1..kmax``."""
    rank = arrival_ranks(urns)
    out = np.empty((len(checkpoints), kmax), dtype=np.int64)
    for k in range(1, kmax + 1):
        pos = np.flatnonzero(rank == k)
        out[:, k - 1] = np.searchsorted(pos, checkpoints, side="left")
    return out


def _validate_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ContractError("grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ContractError("grid not ascending")
    if grid[0] < 0 or grid[-1] != 1.0:
        raise ContractError("grid must lie in [0, 1] and end at 1")
    return grid


def run_path(d: UrnDistribution, n: int, grid, kmax: int,
             regime: Regime | str = Regime.FIXED, seed=0) -> PathRecord:
    """Simulate one path of ``R*_{[nt],k}`` (or ``R*_{Pi(nt),k}``) on ``grid``.

    The Poissonized path draws independent Poisson increments of the ball
    count between grid times, which gives the exact joint law of
    ``(Pi(n t_g))_g``; balls are then thrown in arrival order as usual.
    """
    regime = Regime(regime)
    grid = _validate_grid(grid)
    if kmax < 1:
        raise ContractError("kmax must be at least 1")
    if n < 0 or n > MAX_BALLS:
        raise ConfigurationError(f"n must lie in [0, 2**40], got {n}")
    rng = np.random.default_rng(seed)
    if regime is Regime.FIXED:
        balls = floor_times(n, grid)
    else:
        widths = np.diff(np.concatenate([[0.0], grid]))
        balls = np.cumsum(rng.poisson(n * widths)).astype(np.int64)
    urns = d.sample(rng, int(balls[-1]))
    raw = threshold_counts(urns, balls, kmax)
    return PathRecord(grid, raw, int(n), regime, seed, balls)


def normalize_path(p: PathRecord, m: MomentTable) -> NormalizedPath:
    """``(raw - E raw) / sqrt(alpha_n)`` with centring matched to the regime."""
    if m.grid.shape != p.grid.shape or np.any(m.grid != p.grid):
        raise ContractError("moment table grid does not match the path grid")
    if m.n != p.n:
        raise ContractError(f"moment table is for n={m.n}, path has n={p.n}")
    if m.kmax < p.kmax:
        raise ContractError("moment table has fewer levels than the path")
    centre = m.for_regime(p.regime)[:, :p.kmax]
    return NormalizedPath(p.grid, (p.raw - centre) / math.sqrt(m.alpha_n), m.alpha_n)


def differences_exact_k(p: PathRecord) -> np.ndarray:
    """Exact-``k`` counts ``R_{.,k} = R*_{.,k} - R*_{.,k+1}`` for ``k < kmax``."""
    if p.kmax < 2:
        raise ContractError("exact-k counts need kmax >= 2")
    return p.raw[:, :-1] - p.raw[:, 1:]


def simulate_urn_counts(d: UrnDistribution, n: int, urns, regime: Regime | str = Regime.FIXED,
                        seed=0) -> np.ndarray:
    """Ball counts ``J_i`` after ``n`` (or ``Poisson(n)``) balls for the listed urns."""
    rng = np.random.default_rng(seed)
    total = n if Regime(regime) is Regime.FIXED else int(rng.poisson(n))
    draws = d.sample(rng, total)
    urns = np.asarray(urns, dtype=np.int64)
    hits = np.bincount(np.searchsorted(urns, draws[np.isin(draws, urns)]), minlength=urns.size)
    return hits


def run_replications(d: UrnDistribution, n: int, grid, kmax: int, regime: Regime | str,
                     m_reps: int, master_seed: int, threads: int = 1) -> np.ndarray:
    """Raw paths of ``m_reps`` independent replications, shape ``(M, G, kmax)``.

    Replication ``r`` always uses ``child_seed(master_seed, r)``, so the
    result does not depend on ``threads`` or on scheduling.
    """
    grid = _validate_grid(grid)
    out = np.empty((m_reps, grid.size, kmax), dtype=np.int64)

    def one(r):
        out[r] = run_path(d, n, grid, kmax, regime, child_seed(master_seed, r)).raw

    if threads <= 1:
        for r in range(m_reps):
            one(r)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, range(m_reps)))
    return out
