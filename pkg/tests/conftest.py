import numpy as np
import pytest

from farscatter.identify import precompute, shipped_catalog


@pytest.fixture(scope="session")
def catalog_k2():
    """Shipped sound-hard catalog (disk, ellipse, kite) at k = 2."""
    return precompute(shipped_catalog(), 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, in criterion order."""
    lines = []
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            if "test_acceptance" not in getattr(rep, "nodeid", "") or rep.when != "call":
                continue
            props = dict(rep.user_properties)
            if "criterion" in props:
                verdict = "PASS" if rep.passed else "FAIL"
                lines.append((props["criterion"], f"{verdict}  {props['line']}"))
            else:
                lines.append((99, f"FAIL  {rep.nodeid} (raised before reporting)"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
