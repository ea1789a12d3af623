import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    rows = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            for key, value in rep.user_properties:
                if key == "acceptance":
                    rows.append((value[0], outcome, value[1], value[2]))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, outcome, title, detail in sorted(rows):
        flag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {number:2d} {flag} {title}: {detail}")
