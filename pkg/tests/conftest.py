import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"

# criterion number -> (title, outcome); filled by tests marked with ``criterion``
ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    num, title = mark.args
    prev = ACCEPTANCE.get(num, (title, "PASS"))[1]
    if rep.failed or rep.skipped:
        ACCEPTANCE[num] = (title, "FAIL")
    elif rep.when == "call":
        ACCEPTANCE[num] = (title, prev)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, verdict = ACCEPTANCE[num]
        terminalreporter.write_line(f"{verdict} criterion {num}: {title}")
