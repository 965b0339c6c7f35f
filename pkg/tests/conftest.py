import numpy as np
import pytest

from sublinrobin import continuation as ct
from sublinrobin import nonlinear
from sublinrobin.domain_grid import build_domain, make_weight
from sublinrobin.elliptic import ProblemSpec

# one line per acceptance criterion, echoed in the terminal summary
VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def verdict():
    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}" + (f" ({detail})" if detail else "")
        VERDICTS.append(line)
        print(line)
        return ok

    return record


@pytest.fixture(scope="session")
def dom():
    return build_domain("interval", 2.0, 1, 256)


@pytest.fixture(scope="session")
def canon(dom):
    return make_weight("cos_shift", {"delta": 0.25}, dom)


@pytest.fixture(scope="session")
def hip_weight(dom, canon):
    # the canonical weight violates the boundary-flux condition; scaling a⁺ by 1.4 restores it
    return make_weight("k_split", {"k": 1.4, "base": canon}, dom)


@pytest.fixture(scope="session")
def spec_p(dom, canon):
    return ProblemSpec("P", 0.9, canon, dom)


@pytest.fixture(scope="session")
def spec_s(dom, canon):
    return ProblemSpec("S", 0.9, canon, dom)


@pytest.fixture(scope="session")
def spec_hip(dom, hip_weight):
    return ProblemSpec("P", 0.9, hip_weight, dom)


@pytest.fixture(scope="session")
def u_n(dom, canon):
    return nonlinear.solve_uN(canon, 0.9, dom).solution


@pytest.fixture(scope="session")
def branch_p(spec_p, u_n):
    return ct.trace_branch(spec_p, ct.start_point(spec_p, u_n))


@pytest.fixture(scope="session")
def branch_s(spec_s, u_n):
    return ct.trace_branch(spec_s, ct.start_point(spec_s, u_n))


@pytest.fixture(scope="session")
def branch_hip(spec_hip):
    return ct.trace_branch(spec_hip)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
