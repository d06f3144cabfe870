from __future__ import annotations

import pytest

# criterion number -> (title, detail) filled in by test_acceptance
ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture
def record():
    def _record(number: int, title: str, detail: str) -> None:
        ACCEPTANCE[number] = (title, detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    reports = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in nodeid and rep.when == "call" or (
                outcome == "error" and "test_acceptance.py" in nodeid
            ):
                reports.append((nodeid, outcome))
    if not reports:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in sorted(reports, key=lambda r: int(r[0].split("_criterion_")[1].split("_")[0])):
        n = int(nodeid.split("_criterion_")[1].split("_")[0])
        title, detail = ACCEPTANCE.get(n, (nodeid.split("::")[-1], ""))
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {n}: {title}  {detail}".rstrip())
