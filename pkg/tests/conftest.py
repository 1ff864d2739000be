import re
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    match = re.match(r"test_criterion_(\d+)", item.name)
    if not match:
        return
    number = int(match.group(1))
    title = (item.function.__doc__ or item.name).strip().splitlines()[0]
    detail = getattr(item, "acceptance_detail", "")
    if report.when == "call" or (report.when == "setup" and report.failed):
        _CRITERIA[number] = ("PASS" if report.passed else "FAIL", title, detail)


@pytest.fixture
def record(request):
    """Attach a short measured summary to the acceptance line of the running test."""

    def _record(text):
        request.node.acceptance_detail = text

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        line = f"ACCEPTANCE {number:2d} {status}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
