"""Karlin's infinite urn scheme: limit kernels, simulation and Monte-Carlo checks."""

from .errors import (ConfigurationError, ContractError, DomainError, NumericalError,
                     UrnSchemeError)
from .model import (FiniteExplicit, LogZipf, UrnDistribution, ZipfLike, alpha, l_star,
                    make_explicit, make_logzipf, make_zipf)
from .theory import (MomentTable, Regime, b_n, cov_exact_poissonized, cov_karlin_theorem2,
                     cov_limit, expected_occupancy, k_const, k_const_integral, moment_table)
from .sim import PathRecord, NormalizedPath, normalize_path, run_path, run_replications
from .gp import GridKernelMatrix, build_kernel_matrix, sample_gaussian_paths, sample_wiener
from .verify import (ExperimentConfig, ExperimentReport, brute_force_expectation, empirical_cov,
                     estimate_theta, ks_normal, run_experiment)

__version__ = "0.1.0"
