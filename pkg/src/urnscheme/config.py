"""Experiment configuration files (TOML).

A complete file::

    version = 1

    [distribution]
    kind = "zipf"            # zipf | logzipf | explicit
    theta = 0.5              # zipf: 0 < theta < 1
    # truncation_index = 1000000
    # tail_mass_tol = 1e-12
    # probabilities = [0.5, 0.3, 0.2]   # explicit only

    [experiment]
    n = 100000
    grid = [0.25, 0.5, 0.75, 1.0]
    kmax = 2
    regime = "fixed"         # fixed | poissonized
    m_reps = 1000
    master_seed = 20240501

    [tolerances]
    cov_rel = 0.15
    cov_se = 5.0
    var_rel = 0.15
    ks_level = 0.01
    wiener_slope = 0.15
    wiener_corr = 0.1

    [output]
    directory = "out"
    formats = ["json", "csv"]

Unknown keys are rejected.  Validation collects every problem before
raising, so one run reports all of them.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigurationError
from .model import MAX_INDEX, UrnDistribution, make_explicit, make_logzipf, make_zipf
from .theory import Regime

CONFIG_VERSION = 1
OUT_DIR_ENV = "URNSCHEME_OUT_DIR"


class ConfigError(ConfigurationError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class DistributionSpec:
    kind: str
    theta: float | None = None
    truncation_index: int | None = None
    tail_mass_tol: float | None = None
    probabilities: tuple[float, ...] | None = None

    def build(self) -> UrnDistribution:
        if self.kind == "zipf":
            kw = {}
            if self.truncation_index is not None:
                kw["truncation_index"] = self.truncation_index
            if self.tail_mass_tol is not None:
                kw["tail_mass_tol"] = self.tail_mass_tol
            return make_zipf(self.theta, **kw)
        if self.kind == "logzipf":
            kw = {}
            if self.truncation_index is not None:
                kw["truncation_index"] = self.truncation_index
            if self.tail_mass_tol is not None:
                kw["tail_mass_tol"] = self.tail_mass_tol
            return make_logzipf(**kw)
        return make_explicit(self.probabilities)


@dataclass(frozen=True)
class Tolerances:
    cov_rel: float = 0.15
    cov_se: float = 5.0
    var_rel: float = 0.15
    ks_level: float = 0.01
    wiener_slope: float = 0.15
    wiener_corr: float = 0.1


@dataclass(frozen=True)
class OutputSpec:
    directory: str = field(default_factory=lambda: os.environ.get(OUT_DIR_ENV, "urnscheme-out"))
    formats: tuple[str, ...] = ("json", "csv")


@dataclass(frozen=True)
class ConfigFile:
    version: int
    distribution: DistributionSpec
    n: int
    grid: tuple[float, ...] = (1.0,)
    kmax: int = 1
    regime: Regime = Regime.FIXED
    m_reps: int = 1000
    master_seed: int = 0
    tolerances: Tolerances = Tolerances()
    output: OutputSpec = field(default_factory=OutputSpec)


_DIST_KEYS = {"kind", "theta", "truncation_index", "tail_mass_tol", "probabilities"}
_EXP_KEYS = {"n", "grid", "kmax", "regime", "m_reps", "master_seed"}
_TOL_KEYS = set(Tolerances.__dataclass_fields__)
_OUT_KEYS = {"directory", "formats"}
_TOP_KEYS = {"version", "distribution", "experiment", "tolerances", "output"}


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def parse_config(text: str) -> ConfigFile:
    """Parse and validate a TOML experiment configuration."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"syntax error: {exc}"]) from None
    errors: list[str] = []

    def unknown(table, allowed, prefix):
        for key in sorted(set(table) - allowed):
            errors.append(f"{prefix}{key}: unknown key")

    unknown(raw, _TOP_KEYS, "")
    version = raw.get("version")
    if version is None:
        errors.append("version: required")
    elif version != CONFIG_VERSION:
        errors.append(f"version: unsupported version {version!r} (expected {CONFIG_VERSION})")

    def table(name):
        value = raw.get(name, {})
        if not isinstance(value, dict):
            errors.append(f"{name}: must be a table")
            return {}
        return value

    dist = table("distribution")
    exp = table("experiment")
    tol = table("tolerances")
    out = table("output")
    if "distribution" not in raw:
        errors.append("distribution: required")
    unknown(dist, _DIST_KEYS, "distribution.")
    unknown(exp, _EXP_KEYS, "experiment.")
    unknown(tol, _TOL_KEYS, "tolerances.")
    unknown(out, _OUT_KEYS, "output.")

    # distribution
    kind = dist.get("kind")
    theta = dist.get("theta")
    if "distribution" in raw and kind not in ("zipf", "logzipf", "explicit"):
        errors.append(f"distribution.kind: must be zipf, logzipf or explicit, got {kind!r}")
    if theta is not None:
        if not _is_num(theta) or not 0 < theta <= 1:
            errors.append("distribution.theta: theta out of range (0,1]")
        elif kind == "zipf" and theta == 1:
            errors.append('distribution.theta: zipf needs theta < 1; use kind = "logzipf"')
        elif kind == "logzipf" and theta != 1:
            errors.append("distribution.theta: logzipf has theta = 1")
    if kind == "zipf" and theta is None:
        errors.append("distribution.theta: required for zipf")
    trunc = dist.get("truncation_index")
    if trunc is not None and (not _is_int(trunc) or not 1 <= trunc <= MAX_INDEX):
        errors.append("distribution.truncation_index: must be an integer in [1, 2**62]")
    tail = dist.get("tail_mass_tol")
    if tail is not None and (not _is_num(tail) or not tail > 0):
        errors.append("distribution.tail_mass_tol: must be positive")
    probs = dist.get("probabilities")
    if kind == "explicit":
        if not isinstance(probs, list) or not probs or not all(_is_num(p) for p in probs):
            errors.append("distribution.probabilities: required non-empty list of numbers for explicit")
            probs = None
    elif probs is not None:
        errors.append("distribution.probabilities: only valid for kind = \"explicit\"")

    # experiment
    n = exp.get("n")
    if n is None:
        errors.append("experiment.n: required")
    elif not _is_int(n) or n < 0:
        errors.append("experiment.n: must be a nonnegative integer")
    grid = exp.get("grid", [1.0])
    if not isinstance(grid, list) or not grid or not all(_is_num(t) for t in grid):
        errors.append("experiment.grid: must be a non-empty list of numbers")
        grid = [1.0]
    else:
        if any(b <= a for a, b in zip(grid, grid[1:])):
            errors.append("experiment.grid: grid not ascending")
        if grid[0] <= 0 or grid[-1] > 1:
            errors.append("experiment.grid: grid must lie in (0, 1]")
        elif grid[-1] != 1:
            errors.append("experiment.grid: grid must end at 1")
    kmax = exp.get("kmax", 1)
    if not _is_int(kmax) or kmax < 1:
        errors.append("experiment.kmax: must be a positive integer")
    regime = exp.get("regime", "fixed")
    if regime not in ("fixed", "poissonized"):
        errors.append(f"experiment.regime: must be fixed or poissonized, got {regime!r}")
        regime = "fixed"
    m_reps = exp.get("m_reps", 1000)
    if not _is_int(m_reps) or m_reps < 2:
        errors.append("experiment.m_reps: must be an integer >= 2")
    seed = exp.get("master_seed", 0)
    if not _is_int(seed) or seed < 0:
        errors.append("experiment.master_seed: must be a nonnegative integer")

    for key, value in tol.items():
        if key in _TOL_KEYS and (not _is_num(value) or not value > 0):
            errors.append(f"tolerances.{key}: must be positive")

    formats = out.get("formats", ["json", "csv"])
    if not isinstance(formats, list) or not set(formats) <= {"json", "csv"}:
        errors.append("output.formats: must be a list drawn from json, csv")
        formats = ["json", "csv"]
    directory = out.get("directory")
    if directory is not None and not isinstance(directory, str):
        errors.append("output.directory: must be a string")

    if errors:
        raise ConfigError(errors)
    spec = DistributionSpec(
        kind=kind,
        theta=float(theta) if theta is not None else (1.0 if kind == "logzipf" else None),
        truncation_index=trunc,
        tail_mass_tol=float(tail) if tail is not None else None,
        probabilities=tuple(float(p) for p in probs) if probs is not None else None,
    )
    output = OutputSpec(directory=directory, formats=tuple(formats)) if directory else OutputSpec(
        formats=tuple(formats))
    return ConfigFile(
        version=version,
        distribution=spec,
        n=n,
        grid=tuple(float(t) for t in grid),
        kmax=kmax,
        regime=Regime(regime),
        m_reps=m_reps,
        master_seed=seed,
        tolerances=Tolerances(**{k: float(v) for k, v in tol.items()}),
        output=output,
    )


def load_config(path) -> ConfigFile:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
