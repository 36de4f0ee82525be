import mpmath
import numpy as np
import pytest

mpmath.mp.dps = 40


def mp_ncdf(x) -> float:
    """Independent normal CDF: complementary error function in 40-digit arithmetic."""
    x = mpmath.mpf(x)
    return float(mpmath.erfc(-x / mpmath.sqrt(2)) / 2)


def mp_cauchy_cdf(x) -> float:
    return float(mpmath.mpf(1) / 2 + mpmath.atan(mpmath.mpf(x)) / mpmath.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


# -- acceptance summary ----------------------------------------------------

_ACCEPTANCE: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _ACCEPTANCE.append((props["criterion"], "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{outcome}  {name}")
