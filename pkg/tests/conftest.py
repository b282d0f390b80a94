import pytest

from ftlwave.bvp import BvpProblem, solve_bvp
from ftlwave.model import ModelParams


@pytest.fixture(scope="session")
def params():
    return ModelParams(0.5, 1.0)


@pytest.fixture(scope="session")
def problem(params):
    return BvpProblem(params, 0.3, 0.7)


@pytest.fixture(scope="session")
def converged(problem):
    """Normalized 0.3/0.7 profile at ell = 0.5 and its sequence record."""
    return solve_bvp(problem)


@pytest.fixture(scope="session")
def curve(converged):
    return converged[0]


ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def record_criterion(request):
    """Store ``(title, [(label, ok, detail), ...], seconds)`` under the criterion number."""
    log = request.config.stash[ACCEPTANCE]

    def record(number, title, checks, seconds):
        log[number] = (title, checks, seconds)
        return all(ok for _, ok, _ in checks)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(ACCEPTANCE, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(log):
        title, checks, seconds = log[number]
        verdict = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {title} ({seconds:.1f} s)")
        for label, ok, detail in checks:
            terminalreporter.write_line(f"    [{'ok' if ok else 'FAIL'}] {label}: {detail}")
