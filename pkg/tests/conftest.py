import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ROOT = Path(__file__).resolve().parents[1]

_ACCEPTANCE = {}


@pytest.fixture
def problems_dir():
    return ROOT / "problems"


@pytest.fixture
def record_criterion():
    """Store one acceptance outcome; the terminal summary prints them all."""

    def record(number, title, passed, elapsed, limit, detail=""):
        _ACCEPTANCE[number] = (title, bool(passed), elapsed, limit, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, elapsed, limit, detail = _ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        extra = f" | {detail}" if detail else ""
        terminalreporter.write_line(
            f"{status} criterion {number}: {title} ({elapsed:.2f}s, limit {limit:g}s){extra}"
        )
