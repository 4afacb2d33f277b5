import os
from pathlib import Path

import pytest

_ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


class AcceptanceLog:
    """Collects per-criterion outcomes; printed as one line per criterion at the end."""

    def record(self, criterion: int, ok: bool, detail: str) -> None:
        _ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


@pytest.fixture(scope="session")
def artifact_dir():
    path = Path(os.environ.get("ALBO_ARTIFACTS", Path(__file__).resolve().parents[1] / "artifacts"))
    path.mkdir(parents=True, exist_ok=True)
    return path


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[criterion]
        ok = all(p for p, _ in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
