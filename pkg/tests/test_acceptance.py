"""Acceptance criteria 1-12, each at its stated tolerance and time budget.

Every criterion records one PASS/FAIL line; the lines are printed as they
happen and repeated in the pytest terminal summary.
"""

import math
import time

import numpy as np
import pytest

from urnscheme.cli import main
from urnscheme.config import DistributionSpec
from urnscheme.gp import build_kernel_matrix
from urnscheme.model import make_logzipf, make_zipf
from urnscheme.theory import (cov_exact_poissonized, cov_limit, k_const, k_const_integral,
                              theorem2_identity_residual)
from urnscheme.verify import (ExperimentConfig, explicit_oracle_cases, increment_bound_check,
                              growth_bound_check, oracle_max_error, run_experiment,
                              wiener_limit_check)

THETAS = (0.25, 0.5, 0.75)
QUARTERS = (0.25, 0.5, 0.75, 1.0)
MC_SEED = 20240501
RESULTS: list[str] = []
TIMINGS: dict[int, float] = {}


def record(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    RESULTS.append(line)
    print(line)


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_c01_identity_suite():
    with Timer() as tm:
        worst = max(theorem2_identity_residual(i, j, th)
                    for th in THETAS for i in (1, 2, 3) for j in (1, 2, 3))
    ok = worst <= 1e-10 and tm.elapsed < 1.0
    record(1, "exact-k identity", ok, f"max residual {worst:.3g} (<= 1e-10), {tm.elapsed:.3f}s (< 1s)")
    assert worst <= 1e-10
    assert tm.elapsed < 1.0


def test_c02_diagonal_reduction():
    with Timer() as tm:
        worst = 0.0
        for th in THETAS:
            for t in np.round(np.arange(1, 11) / 10, 10):
                expected = math.gamma(1 - th) * (2 ** th - 1) * t ** th
                worst = max(worst, abs(cov_limit(1, 1, t, t, th) - expected))
    ok = worst <= 1e-12 and tm.elapsed < 1.0
    record(2, "diagonal reduction", ok, f"max error {worst:.3g} (<= 1e-12), {tm.elapsed:.3f}s")
    assert worst <= 1e-12
    assert tm.elapsed < 1.0


def test_c03_self_similarity():
    times = np.round(np.arange(1, 11) / 10, 10)
    with Timer() as tm:
        worst = 0.0
        for th in THETAS:
            for i in (1, 2, 3):
                for j in (1, 2, 3):
                    for tau in times:
                        for t in times:
                            base = cov_limit(i, j, tau, t, th)
                            for a in (0.5, 2.0):
                                worst = max(worst, abs(cov_limit(i, j, a * tau, a * t, th) - a ** th * base))
    ok = worst <= 1e-12 and tm.elapsed < 1.0
    record(3, "self-similarity", ok, f"max error {worst:.3g} (<= 1e-12), {tm.elapsed:.3f}s")
    assert worst <= 1e-12
    assert tm.elapsed < 1.0


def test_c04_k_constant_integral():
    with Timer() as tm:
        worst = max(abs(k_const_integral(r, th) - k_const(r, th)) for th in THETAS for r in range(5))
    ok = worst <= 1e-8 and tm.elapsed < 10.0
    record(4, "K-constant integral identity", ok, f"max error {worst:.3g} (<= 1e-8), {tm.elapsed:.2f}s")
    assert worst <= 1e-8
    assert tm.elapsed < 10.0


def test_c05_psd():
    grid = np.linspace(0.1, 1.0, 10)
    with Timer() as tm:
        mins = {th: float(np.linalg.eigvalsh(build_kernel_matrix(grid, 3, th).matrix).min()) for th in THETAS}
    worst = min(mins.values())
    ok = worst >= -1e-9 and tm.elapsed < 5.0
    record(5, "kernel matrix PSD", ok,
           ", ".join(f"theta={th}: {v:.4g}" for th, v in mins.items()) + f" (>= -1e-9), {tm.elapsed:.2f}s")
    assert worst >= -1e-9
    assert tm.elapsed < 5.0


def test_c06_finite_n_convergence():
    with Timer() as tm:
        d = make_zipf(0.5)
        errs = {}
        for i in (1, 2):
            for j in (1, 2):
                limit = cov_limit(i, j, 0.5, 1.0, 0.5)
                errs[(i, j)] = [abs(cov_exact_poissonized(i, j, 0.5 * n, n, d) / d.alpha(n) - limit) / abs(limit)
                                for n in (1e4, 1e6)]
    at_1e6 = max(e[1] for e in errs.values())
    shrinks = all(e[1] < e[0] for e in errs.values())
    ok = at_1e6 <= 0.05 and shrinks and tm.elapsed < 120
    record(6, "finite-n convergence", ok,
           f"max rel error at 1e6 {at_1e6:.4f} (<= 0.05), decreasing from 1e4: {shrinks}, {tm.elapsed:.1f}s")
    assert at_1e6 <= 0.05
    assert shrinks
    assert tm.elapsed < 120


def test_c07_oracle_equivalence():
    cases = list(explicit_oracle_cases(max_urns=4, max_n=8, max_k=3))
    with Timer() as tm:
        worst = oracle_max_error(cases)
    ok = worst <= 1e-12 and tm.elapsed < 10.0
    record(7, "expected occupancy vs enumeration", ok,
           f"{len(cases)} cases, max error {worst:.3g} (<= 1e-12), {tm.elapsed:.2f}s")
    assert worst <= 1e-12
    assert tm.elapsed < 10.0


def test_c08_clt_number_of_occupied_urns():
    cfg = ExperimentConfig(DistributionSpec("zipf", 0.5), 10 ** 5, (1.0,), 1, "fixed", 1000, MC_SEED)
    with Timer() as tm:
        report = run_experiment(cfg)
    var = report.clt["variance"]
    p = report.clt["ks_p_value"]
    ok = abs(var - 1) <= 0.15 and p > 0.01 and tm.elapsed < 300
    record(8, "CLT for R_n", ok, f"Var {var:.4f} (within 15% of 1), KS p {p:.4f} (> 0.01), {tm.elapsed:.1f}s")
    assert abs(var - 1) <= 0.15
    assert p > 0.01
    assert tm.elapsed < 300


@pytest.fixture(scope="module")
def kernel_run():
    cfg = ExperimentConfig(DistributionSpec("zipf", 0.5), 10 ** 5, QUARTERS, 2, "fixed", 1000, MC_SEED)
    with Timer() as tm:
        report = run_experiment(cfg)
    TIMINGS[9] = tm.elapsed
    return report, tm.elapsed


def test_c09_kernel_covariances(kernel_run):
    report, elapsed = kernel_run
    emp, th, se = report.empirical_cov, report.theory_cov, report.cov_se
    allowed = np.maximum(0.15 * np.abs(th), 5 * se)
    excess = np.abs(emp - th) / allowed
    worst = float(excess.max())
    ok = worst <= 1.0 and elapsed < 600
    record(9, "Monte-Carlo kernel", ok,
           f"{excess.size} entries, max |emp-theory|/max(15%, 5 SE) = {worst:.3f} (<= 1), {elapsed:.1f}s")
    assert worst <= 1.0
    assert elapsed < 600


def test_c10_wiener_limit():
    cfg = ExperimentConfig(DistributionSpec("logzipf", 1.0), 10 ** 6, QUARTERS, 1, "fixed", 1000, MC_SEED)
    with Timer() as tm:
        section, _ = wiener_limit_check(cfg)
    slope = section["slope"]
    rho = max(abs(c) for c in section["increment_correlations"])
    ok = abs(slope - 1) <= 0.15 and rho <= 0.1 and tm.elapsed < 600
    record(10, "Wiener limit", ok,
           f"variance slope {slope:.4f} (within 15% of 1), max |rho| {rho:.4f} (<= 0.1), "
           f"variances {np.round(section['variance'], 4).tolist()}, {tm.elapsed:.1f}s")
    assert tm.elapsed < 600
    assert abs(slope - 1) <= 0.15
    assert rho <= 0.1


def test_c11_expectation_bounds():
    deltas = 2.0 ** -np.arange(10, -1, -1)
    with Timer() as tm:
        bounded = {name: growth_bound_check(d, ns=(1e4, 1e6), deltas=deltas)
                   for name, d in (("zipf", make_zipf(0.5)), ("logzipf", make_logzipf()))}
        violations = sum(increment_bound_check(d, n)["violations"]
                         for d in (make_zipf(0.5), make_logzipf()) for n in (1e4, 1e6))
    stable = all(b["passed"] for b in bounded.values())
    ok = stable and violations == 0 and tm.elapsed < 60
    summary = "; ".join(f"{k}: max ratio {np.round(v['max_ratio'], 4).tolist()}" for k, v in bounded.items())
    record(11, "expectation bounds", ok, f"{summary}, bounded and stable: {stable}, "
                                         f"increment violations {violations}, {tm.elapsed:.1f}s")
    assert stable
    assert violations == 0
    assert tm.elapsed < 60


CONFIG = f"""
version = 1
[distribution]
kind = "zipf"
theta = 0.5
[experiment]
n = 100000
grid = [0.25, 0.5, 0.75, 1.0]
kmax = 2
m_reps = 1000
master_seed = {MC_SEED}
"""


def test_c12_determinism(kernel_run, tmp_path, capsys):
    _, t9 = kernel_run
    path = tmp_path / "c9.toml"
    path.write_text(CONFIG)
    runs = {}
    for threads in (1, 8):
        out = tmp_path / f"threads{threads}"
        with Timer() as tm:
            code = main(["verify", str(path), "--threads", str(threads), "--out-dir", str(out)])
        runs[threads] = (out, code, tm.elapsed)
    capsys.readouterr()
    names = sorted(p.name for p in runs[1][0].iterdir())
    same = names == sorted(p.name for p in runs[8][0].iterdir()) and all(
        (runs[1][0] / n).read_bytes() == (runs[8][0] / n).read_bytes() for n in names)
    slowest = max(r[2] for r in runs.values())
    ok = same and slowest < 2 * t9
    record(12, "determinism across threads", ok,
           f"{len(names)} files byte-identical: {same}, slowest run {slowest:.1f}s (< 2 x {t9:.1f}s)")
    assert same
    assert runs[1][1] == runs[8][1] == 0
    assert slowest < 2 * t9
