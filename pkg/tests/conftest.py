import pytest

from varnoether import corpus
from varnoether.model import parse_expression, parse_system
from varnoether.verify import load_system


def expr(text, coords=("q",), params=()):
    return parse_expression(text, coords=coords, params=params)


def system(text):
    sysdef, gens = parse_system(text)
    return sysdef, {g.name: g for g in gens}


@pytest.fixture(scope="session")
def bundled():
    """Every corpus system, parsed once per session."""
    return {name: load_system(name) for name in corpus.NAMES}


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
