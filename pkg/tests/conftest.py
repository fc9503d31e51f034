import numpy as np
import pytest

from fichain.chain import build_chain
from fichain.models import build_lamplighter, build_trivial, build_zrp, ZrpSpec, random_reversible_chain

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def two_point():
    return build_chain([[0, 1], [1, 0]])


@pytest.fixture(scope="session")
def path3():
    return build_chain([[0, 1, 0], [1, 0, 1], [0, 1, 0]])


@pytest.fixture(scope="session")
def lamp3():
    return build_lamplighter("cycle:3")


@pytest.fixture(scope="session")
def zrp33():
    return build_zrp(ZrpSpec.mean_field(3, 3))


@pytest.fixture(scope="session")
def random_chains():
    rng = np.random.default_rng(2024)
    return [random_reversible_chain(int(rng.integers(3, 13)), rng) for _ in range(20)]


@pytest.fixture(scope="session")
def uniform3():
    return build_trivial([1 / 3] * 3)
