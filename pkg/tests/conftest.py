import numpy as np
import pytest
from hypothesis import settings

from seqpt.channels import Channel, builtin_channel
from seqpt.designs import mub_design

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def record_criterion():
    def record(label, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        print(ACCEPTANCE_LINES[-1])
        return ok

    return record


@pytest.fixture(scope="session")
def design1():
    return mub_design(1)


@pytest.fixture(scope="session")
def identity():
    return builtin_channel("identity")


@pytest.fixture(scope="session")
def qwp():
    return builtin_channel("qwp", [0])


# diag(1, i) = ((1+i)/2) I + ((1-i)/2) Z, chi_ab = u_a conj(u_b); order I, X, Y, Z
QWP_CHI = np.zeros((4, 4), dtype=complex)
QWP_CHI[0, 0] = QWP_CHI[3, 3] = 0.5
QWP_CHI[0, 3] = 0.5j
QWP_CHI[3, 0] = -0.5j

IDENTITY_CHI = np.zeros((4, 4), dtype=complex)
IDENTITY_CHI[0, 0] = 1.0


def kraus_oracle_apply(kraus, rho):
    return sum(A @ rho @ A.conj().T for A in kraus)
