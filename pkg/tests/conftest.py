import pytest

from exitlab import KernelSpec, StableProfile, build_ledger

_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA] = {}


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` prints and records one pass/fail line, then asserts ``ok``."""
    def report(n, ok, detail=""):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        print(line)
        request.config.stash[_CRITERIA][n] = line
        assert ok, line
    return report


@pytest.fixture(scope="session")
def cauchy():
    """Isotropic Cauchy process on the line: l(u) = 1/u, L(r) = 1/r."""
    return KernelSpec(1, StableProfile(alpha=1.0, R=2.0), c0=1.1, K0=4.2)


@pytest.fixture(scope="session")
def stable_ledger():
    return build_ledger(1, 1.1, 2.0, 1.1, 11.0, 4.2)
