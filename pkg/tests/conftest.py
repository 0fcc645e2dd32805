from __future__ import annotations

import sys

import pytest

from framewise.testing import HashEmbedder, synthetic_video


@pytest.fixture
def video():
    return synthetic_video(1000, 23.97, "testvid")


@pytest.fixture
def embedder():
    return HashEmbedder()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # Surface the acceptance-criteria verdicts even when stdout is captured.
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "ACCEPTANCE_RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed in results.items():
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}")
