import numpy as np
import pytest
from hypothesis import settings

from robinbose.spectral import BoxGeometry, build_spectrum_1d, spectrum_for
from robinbose.thermo import critical_density, solve_mu

settings.register_profile("repo", max_examples=30, deadline=None)
settings.load_profile("repo")

# heat-kernel series value of rho_c(beta=1, sigma=-1, nu=1), frozen from an mpmath polylog oracle
RHO_C_1D = 0.1427484612968665


@pytest.fixture(scope="session")
def spec10():
    return build_spectrum_1d(BoxGeometry(1, 10.0, -1.0), 40)


@pytest.fixture(scope="session")
def rho_c():
    return critical_density(1.0, -1.0, 1)


@pytest.fixture(scope="session")
def state_factory():
    cache = {}

    def make(L, rho, nu=1, beta=1.0, sigma=-1.0):
        key = (L, rho, nu, beta, sigma)
        if key not in cache:
            spec = spectrum_for(BoxGeometry(nu, L, sigma), beta)
            cache[key] = (spec, solve_mu(spec, nu, beta, rho))
        return cache[key]

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance_report(request):
    return request.config.stash.setdefault(ACCEPTANCE_KEY, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    report = config.stash.get(ACCEPTANCE_KEY, None)
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(report):
        terminalreporter.write_line(report[n])
