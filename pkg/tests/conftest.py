import time
from contextlib import contextmanager

import pytest

_LINES = []


class _Criterion:
    def __init__(self, number, title, target):
        self.number = number
        self.title = title
        self.target = target
        self.checks = []

    def check(self, ok, detail):
        self.checks.append((bool(ok), detail))
        return ok

    @property
    def passed(self):
        return bool(self.checks) and all(ok for ok, _ in self.checks)


@pytest.fixture
def criterion():
    """``with criterion(n, title, target_seconds) as c: c.check(ok, detail)``; failing checks fail the test."""

    @contextmanager
    def run(number, title, target):
        c = _Criterion(number, title, target)
        start = time.perf_counter()
        try:
            yield c
        except Exception as exc:
            c.check(False, f"error: {exc!r}")
        finally:
            elapsed = time.perf_counter() - start
            status = "PASS" if c.passed else "FAIL"
            details = "; ".join(("" if ok else "[x] ") + d for ok, d in c.checks)
            clock = f"{elapsed:.1f}s (target {target}s)"
            _LINES.append((number, f"criterion {number:2d} {status}  {title}: {details}  [{clock}]"))
        failed = [d for ok, d in c.checks if not ok]
        assert not failed, f"criterion {number} failed: {failed}"

    return run


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES):
        terminalreporter.write_line(line)
