import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from multirate_poro.fem import build_spaces  # noqa: E402
from multirate_poro.mesh import build_unit_square_mesh  # noqa: E402

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion; call as acceptance(n, ok, detail)."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(number, ok, detail=""):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda item: item[0]):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def spaces_factory():
    cache = {}

    def make(n):
        if n not in cache:
            cache[n] = build_spaces(build_unit_square_mesh(n))
        return cache[n]

    return make
