import pytest

from membrane_lab.config import parse_config
from membrane_lab.experiments import run_driver

# criterion id -> (title, passed, detail); filled by test_acceptance.py
CRITERIA = {}
_RUNS = {}


def driver_result(experiment: str, seed: int = 0):
    """Run an experiment at its default configuration once per session."""
    key = (experiment, seed)
    if key not in _RUNS:
        _RUNS[key] = run_driver(parse_config("", experiment), experiment, seed)
    return _RUNS[key]


@pytest.fixture
def record():
    def _record(cid: int, title: str, passed: bool, detail: str = ""):
        CRITERIA[cid] = (title, bool(passed), detail)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(CRITERIA):
        title, ok, detail = CRITERIA[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {cid:2d}  {title}: {detail}")
