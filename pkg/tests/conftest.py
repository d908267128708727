import numpy as np
import pytest

from diraclab.spectral_core import normal_form_gamma, validate_dirac_data


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def aps4():
    """``A = diag(1, 0, -1, 0)`` with ``γ`` in normal form."""
    return validate_dirac_data(np.diag([1.0, 0.0, -1.0, 0.0]), normal_form_gamma(4))


def normal_form(diag):
    return validate_dirac_data(np.diag(np.asarray(diag, dtype=float)),
                               normal_form_gamma(len(diag)))


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance criterion lines after the run."""
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
