import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def record():
    def _record(name: str, ok: bool, detail: str = "") -> None:
        ACCEPTANCE[name] = (bool(ok), detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0][1:])):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}  {detail}")
