import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

CRITERIA = {
    1: "friends program semantics (0.18 within 1e-9, < 1 s)",
    2: "Gaussian CDF path (Phi(2) within 1e-6, < 1 s)",
    3: "exact vs Monte Carlo on 50 programs (< 0.01)",
    4: "estimator consistency (3 standard errors, < 60 s)",
    5: "tiling invariance and speedup",
    6: "interpolation MSE non-increasing",
    7: "mission program end to end (< 5 min)",
    8: "parser corpus, roundtrip and fuzz",
    9: "partition of unity (1e-12)",
    10: "scale check (< 10 min)",
}

_outcomes: dict[int, list[bool]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker and marker.args:
        outcome.get_result().criterion = marker.args[0]


def pytest_runtest_logreport(report):
    criterion = getattr(report, "criterion", None)
    if criterion is not None and (report.when == "call" or report.failed):
        _outcomes.setdefault(criterion, []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        verdict = "PASS" if all(_outcomes[n]) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {verdict}  {CRITERIA[n]}")
