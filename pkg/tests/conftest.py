import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

_RESULTS: list[tuple[str, bool, str]] = []


class CriterionLog:
    """Collects one pass/fail line per acceptance criterion for the terminal summary."""

    def record(self, name: str, ok: bool, detail: str = ""):
        _RESULTS.append((name, bool(ok), detail))
        return ok


@pytest.fixture(scope="session")
def criteria():
    return CriterionLog()


def pytest_collection_modifyitems(config, items):
    if os.environ.get("SMS_FULL") == "1":
        return
    skip = pytest.mark.skip(reason="full-size run; set SMS_FULL=1 to enable")
    for item in items:
        if "full" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
