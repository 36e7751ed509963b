import time
from contextlib import contextmanager

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

_LINES: list[str] = []


class _Report:
    detail = ""


@contextmanager
def _criterion(number: int, title: str):
    rep = _Report()
    t0 = time.perf_counter()
    try:
        yield rep
    except BaseException as exc:
        msg = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        _emit(f"ACCEPTANCE {number:>2} FAIL  {title}: {msg} ({time.perf_counter() - t0:.1f} s)")
        raise
    _emit(f"ACCEPTANCE {number:>2} PASS  {title}: {rep.detail} ({time.perf_counter() - t0:.1f} s)")


def _emit(line: str):
    _LINES.append(line)
    print(line, flush=True)


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
