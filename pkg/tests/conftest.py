import numpy as np
import pytest

from pathid import expdsl

_ACCEPTANCE = {}


def random_rho(rng, rank=4):
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def fig1c_text(eps=0.1, r=0.184, gamma=1.0):
    eps, r, gamma = float(eps), float(r), float(gamma)
    return f"""
source P1 signal=1:H idler=3:V eps={eps!r}
source P2 signal=4:H idler=2:V eps={eps * r!r}
rotator path=1
rotator path=4
source P3 signal=1:H idler=2:V eps={eps * r!r}
source P4 signal=4:H idler=3:V eps={eps!r}
order 2
gamma {gamma!r}
detect 1=one 2=bucket:V 4=one
"""


@pytest.fixture
def bundled():
    def _load(name):
        from importlib import resources
        text = resources.files("pathid").joinpath("data", name).read_text()
        return expdsl.parse(text, name=name)
    return _load


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    _ACCEPTANCE[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: int(n.split("_")[2])):
        terminalreporter.write_line(f"{_ACCEPTANCE[name]}  {name}")
