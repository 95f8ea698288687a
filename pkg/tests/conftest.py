from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

ORACLES = Path(__file__).parent / "oracles"
sys.path.insert(0, str(ORACLES))


@pytest.fixture(scope="session")
def fixtures() -> dict:
    return json.loads((ORACLES / "fixtures.json").read_text())


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one pass/fail line per acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(label: str, ok: bool, detail: str) -> None:
        line = f"{label:<4} {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
