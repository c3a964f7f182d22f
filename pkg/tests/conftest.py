from __future__ import annotations

import os
import sys
from pathlib import Path

from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default",
    max_examples=200,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    detail = "; ".join(str(v) for k, v in report.user_properties if k == "measured")
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.outcome == "passed" else "FAIL"
        if status == "FAIL" and getattr(report, "wasxfail", ""):
            # An environment-conditioned expected failure still counts as FAIL.
            detail = f"{detail}; expected here: {report.wasxfail}" if detail else f"expected here: {report.wasxfail}"
        _ACCEPTANCE[name] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: int(n.split("_")[2]) if n.split("_")[2].isdigit() else 99):
        status, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{status}  {name}" + (f"  [{detail}]" if detail else ""))
