import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synth import make_tone_dataset  # noqa: E402

_labels = {}  # nodeid -> "n. description" for acceptance tests
_status = {}


@pytest.fixture(scope="session")
def tone_root(tmp_path_factory):
    return make_tone_dataset(tmp_path_factory.mktemp("tones"))


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _labels[item.nodeid] = (m.args[0], m.args[1])


def pytest_runtest_logreport(report):
    if report.nodeid not in _labels:
        return
    if report.failed or report.skipped:
        _status[report.nodeid] = "FAIL"
    else:
        _status.setdefault(report.nodeid, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _status:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (num, text) in sorted(_labels.items(), key=lambda kv: kv[1][0]):
        if nodeid in _status:
            terminalreporter.write_line(f"{_status[nodeid]}  criterion {num}: {text}")
