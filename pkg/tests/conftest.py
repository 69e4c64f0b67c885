import pytest

from samplan.domains import load_bundled
from samplan.statespace import enumerate_forward


@pytest.fixture(scope="session")
def toy3():
    return load_bundled("toy3")


@pytest.fixture(scope="session")
def spaces():
    cache = {}

    def get(name):
        if name not in cache:
            task = load_bundled(name)
            cache[name] = (task, enumerate_forward(task))
        return cache[name]

    return get


def pytest_terminal_summary(terminalreporter):
    from micro import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        def key(line):
            label = line.split()[1].rstrip(":")
            digits = label.rstrip("abcdefghijklmnopqrstuvwxyz")
            return int(digits), label

        for line in sorted(ACCEPTANCE_LINES, key=key):
            terminalreporter.write_line(line)
