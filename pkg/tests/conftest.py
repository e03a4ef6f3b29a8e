import pytest
from hypothesis import HealthCheck, settings

from tirealloc.params import Config
from tirealloc.tire import build_inverse_lateral

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by tests/test_acceptance.py: criterion id -> (passed, detail)
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def cfg():
    return Config()


@pytest.fixture(scope="session")
def vp(cfg):
    return cfg.vehicle


@pytest.fixture(scope="session")
def tp(cfg):
    return cfg.tire


@pytest.fixture(scope="session")
def ap(cfg):
    return cfg.actuators


@pytest.fixture(scope="session")
def table(cfg):
    return build_inverse_lateral(cfg.tire, 1.0, (cfg.control.load_floor, cfg.vehicle.m * cfg.vehicle.g))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: int(c[1:])):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{cid} {'PASS' if ok else 'FAIL'}  {detail}")
