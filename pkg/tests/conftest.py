from __future__ import annotations

import pytest

_LOG = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request) -> list[str]:
    return request.config.stash.setdefault(_LOG, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LOG, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
