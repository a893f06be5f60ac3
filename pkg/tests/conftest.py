import re
from pathlib import Path

import numpy as np
import pytest

from sharerec.graphs import InteractionGraph, SocialGraph

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def micro_dir():
    return FIXTURES / "micro"


def random_problem(rng, m=None, n=None, density=0.35, edge_p=0.3, split=None):
    """Small random interaction + social graph where every user has >= 1 item."""
    m = m or int(rng.integers(3, 10))
    n = n or int(rng.integers(3, 10))
    mask = rng.random((m, n)) < density
    for u in range(m):
        if not mask[u].any():
            mask[u, rng.integers(n)] = True
        if mask[u].all():
            mask[u, rng.integers(n)] = False
    users, items = np.nonzero(mask)
    graph = InteractionGraph(m, n, users, items, np.ones(len(users)), split)
    iu, ju = np.triu_indices(m, k=1)
    keep = rng.random(len(iu)) < edge_p
    if not keep.any():
        keep[0] = True
    social = SocialGraph(m, iu[keep], ju[keep], rng.uniform(0.2, 1.0, keep.sum()))
    return graph, social


# ---- acceptance summary: one PASS/FAIL/SKIP line per criterion

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    match = re.search(r"test_criterion_(\d+)_(\w+)", report.nodeid)
    if not match:
        return
    num, name = int(match.group(1)), match.group(2)
    if report.when == "call" or report.skipped:
        outcome = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        if report.when == "setup" and not report.skipped:
            return
        _ACCEPTANCE[num] = (outcome, name.replace("_", " "))
    elif report.failed:
        _ACCEPTANCE[num] = ("FAIL", name.replace("_", " "))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        outcome, name = _ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:>2}: {outcome:<4} {name}")
