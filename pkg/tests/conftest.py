import pytest

from bns_lrm.model import PRESETS, MarketState, martingale_drift

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def scho():
    return PRESETS["Scho-Gamma"]


@pytest.fixture(scope="session")
def state0():
    return MarketState(spot=1124.47, sigma_sq=0.0145, t=0.0, maturity=1.0, r=0.019, q=0.012)


@pytest.fixture(scope="session")
def mu0(scho, state0):
    return martingale_drift(scho, state0.r, state0.q)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split()[0]), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
