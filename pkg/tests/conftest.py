import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from honeypot_bsg.network import CASE_STUDY_CATALOG, Network, case_study_network  # noqa: E402


@pytest.fixture(scope="session")
def case_net():
    return case_study_network()


def make_net(edges, targets, alpha=0.4, entry=0, catalog=CASE_STUDY_CATALOG, labels=None):
    """Small network from ``(u, v, {exploits})`` triples."""
    nodes = sorted({entry, *targets, *(u for u, _, _ in edges), *(v for _, v, _ in edges)})
    return Network(tuple(nodes), tuple((u, v, frozenset(ex)) for u, v, ex in edges), entry, dict(targets), alpha, catalog, labels or {})


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record the one-line verdict for an acceptance criterion."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
