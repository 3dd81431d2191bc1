import pytest

from lorenzlab.expanding_map import LorenzMap
from lorenzlab.params import DEFAULT_PARAMS

# criterion number -> (passed, detail); filled by the acceptance tests
ACCEPTANCE = {}


@pytest.fixture
def params():
    return DEFAULT_PARAMS


@pytest.fixture
def fmap():
    return LorenzMap(DEFAULT_PARAMS)


@pytest.fixture(scope="session")
def rl_rll_table():
    """Block table of the RL/RLL horseshoe at the automatic depth (about 15 s)."""
    from lorenzlab.measures import block_table, choose_depth
    from lorenzlab.symbolic import build_horseshoe

    cert = build_horseshoe(DEFAULT_PARAMS, "RL", "RLL")
    return block_table(DEFAULT_PARAMS, cert, choose_depth(DEFAULT_PARAMS, cert))


@pytest.fixture
def record():
    def _record(criterion: int, passed: bool, detail: str):
        ACCEPTANCE[criterion] = (bool(passed), detail)
        print(f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
