import os
from collections import defaultdict

import pytest

os.environ.setdefault("HYPOTHESIS_PROFILE", "ci")

CRITERIA = {
    1: "interval instance solve",
    2: "strongly-UC falsification on the sup-norm segments",
    3: "contraction classification of the function-space map",
    4: "cyclic-contraction corollary on midpoint-pull",
    5: "solution identities on every converged gallery solve",
    6: "property suite",
}

_outcomes = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): test belongs to acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _outcomes[marker.args[0]].append((item.name, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(CRITERIA):
        results = _outcomes.get(n)
        if not results:
            continue
        failed = [name for name, ok in results if not ok]
        status = "PASS" if not failed else "FAIL"
        line = f"criterion {n} ({CRITERIA[n]}): {status} [{len(results) - len(failed)}/{len(results)} checks]"
        if failed:
            line += " failing: " + ", ".join(failed)
        tr.write_line(line)
