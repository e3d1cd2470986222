import pytest

from urnscheme.model import make_explicit, make_logzipf, make_zipf


@pytest.fixture(scope="session")
def zipf05():
    return make_zipf(0.5)


@pytest.fixture(scope="session")
def logzipf():
    return make_logzipf()


@pytest.fixture(scope="session")
def coin():
    return make_explicit([0.5, 0.5])


@pytest.fixture(scope="session")
def kernel_experiment():
    """Zipf(0.5), n = 10**5, 1000 replications, two levels on a quarter grid."""
    from urnscheme.config import DistributionSpec
    from urnscheme.verify import ExperimentConfig, run_experiment

    cfg = ExperimentConfig(DistributionSpec("zipf", 0.5), 10 ** 5, (0.25, 0.5, 0.75, 1.0), 2,
                           "fixed", 1000, 20240501)
    return cfg, run_experiment(cfg)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", [])
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
