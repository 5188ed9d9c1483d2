import numpy as np
import pytest

from qutritctx import bell
from qutritctx.inequality import kappa_expression
from qutritctx.rays import build_catalog, build_graph


@pytest.fixture(scope="session")
def catalog():
    return build_catalog()


@pytest.fixture(scope="session")
def graph(catalog):
    return build_graph(catalog)


@pytest.fixture(scope="session")
def kappa(graph):
    return kappa_expression(graph)


@pytest.fixture(scope="session")
def kappa_prime(kappa):
    return bell.split_expression(kappa, bell.default_split())


@pytest.fixture(scope="session")
def beta_uncertified(kappa_prime, catalog):
    return bell.symmetrize(kappa_prime, catalog, certify=False)


@pytest.fixture(scope="session")
def beta(beta_uncertified):
    cert = bell.lhv_bound(beta_uncertified)
    return beta_uncertified.with_bound(cert.bound)


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
