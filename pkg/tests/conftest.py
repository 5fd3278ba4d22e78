import sys
from collections import defaultdict
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

CRITERIA = {
    1: "matching derivations",
    2: "global-rule composition",
    3: "agreement formulae",
    4: "visitors properties",
    5: "oracle equivalence",
    6: "property suites",
    7: "CLI contract",
}

_outcomes: dict[int, list[tuple[str, bool]]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion the test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes[marker.args[0]].append((item.name, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        results = _outcomes.get(n)
        if not results:
            continue
        passed = sum(ok for _, ok in results)
        verdict = "PASS" if passed == len(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n} ({title}): {verdict} [{passed}/{len(results)} checks]")
