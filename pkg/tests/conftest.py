"""Session-wide synthetic benchmarks.

Generating and fitting a benchmark takes tens of seconds, so each one is
built at most once per test session and shared by the tests that need it.
"""

import os

import pytest

from sloshsense.dataset import extract_features, make_benchmark

WORKERS = int(os.environ.get("SLOSHSENSE_WORKERS", "1"))


class BenchmarkCache:
    def __init__(self):
        self._store = {}

    def get(self, name: str, seed: int = 0):
        """(manifest, features) for a named benchmark."""
        key = (name, seed)
        if key not in self._store:
            manifest = make_benchmark(name, seed)
            self._store[key] = (manifest, extract_features(manifest, workers=WORKERS))
        return self._store[key]


@pytest.fixture(scope="session")
def benchmarks():
    return BenchmarkCache()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def record_criterion():
    """Log one PASS/FAIL line per acceptance criterion (shown in the terminal summary)."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record
