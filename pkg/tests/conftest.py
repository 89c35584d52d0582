import numpy as np
import pytest

from fhks import DomainSpec, GridField


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_field(domain, rng, lo=0.0, hi=1.0):
    return GridField(rng.uniform(lo, hi, domain.shape), domain)


def line(n=32, length=1.0, mode="discrete"):
    return DomainSpec((length,), (n,), mode)


def rect(n0=16, n1=12, lengths=(1.0, 1.5), mode="discrete"):
    return DomainSpec(lengths, (n0, n1), mode)


ACCEPTANCE_LINES: list[str] = []


def report(number, passed, detail):
    """Record one acceptance line; shown in the terminal summary and on stdout."""
    text = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(text)
    print(text)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for text in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(text)
