import numpy as np
import pytest

from gridsor.netlist import parse

RC_MIN = "VDD vdd 0 1.0\nR1 vdd n1 1.0\nC1 n1 0 1e-12\n.tran 1e-12 1e-11\n.end\n"

# Single node, g = 1 S to a 1 V rail, C = 1 F, h = 0.1 s, starts discharged.
RC_UNIT = """* unit RC cell
VDD vdd 0 1
R1 vdd n1 1
C1 n1 0 1
.ic V(n1)=0
.tran 0.1 1
"""

# Two RC cells sharing the rail but with no branch between them.
TWO_CELLS = """VDD vdd 0 1.0
R1 vdd a 1
C1 a 0 1p
R2 vdd b 2
C2 b 0 1p
I1 b 0 PWL(0 0 5p 1m 10p 0)
.tran 1p 20p
"""

# Rail -- L -- n1, n1 -- R -- ground.
L_TO_RAIL = """VDD vdd 0 1
L1 vdd n1 1n
R1 n1 0 1
.tran 1p 10p
"""


@pytest.fixture
def rc_min():
    return parse(RC_MIN)


@pytest.fixture
def rc_unit():
    return parse(RC_UNIT)


@pytest.fixture
def two_cells():
    return parse(TWO_CELLS)


@pytest.fixture
def l_to_rail():
    return parse(L_TO_RAIL)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Acceptance outcomes, collected by tests/test_acceptance.py and printed in
# the terminal summary so they appear without ``-s``.
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
