import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" not in nodeid or getattr(rep, "when", None) != "call":
                continue
            name = nodeid.split("::")[-1]
            lines.append((name, outcome.upper().replace("ERROR", "FAIL")))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(set(lines)):
        terminalreporter.write_line(f"{outcome:4}  {name}")
