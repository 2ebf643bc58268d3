import io
import sys
import time
from contextlib import contextmanager

import mpmath
import pytest

from orbitforge import cli
from orbitforge.core import OrbitSequence

ACCEPTANCE_RESULTS = {}


@contextmanager
def criterion(number: int, title: str, limit_s: float):
    """Record one acceptance line (PASS/FAIL with runtime) for the summary."""
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        ACCEPTANCE_RESULTS[number] = (title, "FAIL", time.perf_counter() - start,
                                      f"{type(exc).__name__}: {exc}".splitlines()[0][:160])
        raise
    elapsed = time.perf_counter() - start
    if elapsed >= limit_s:
        ACCEPTANCE_RESULTS[number] = (title, "FAIL", elapsed, f"runtime limit {limit_s} s exceeded")
        raise AssertionError(f"criterion {number} took {elapsed:.2f} s (limit {limit_s} s)")
    ACCEPTANCE_RESULTS[number] = (title, "PASS", elapsed, f"limit {limit_s} s")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        title, status, elapsed, note = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}  {title}  [{elapsed:.2f} s; {note}]")


def geometric(count: int = 10, bits: int = 256) -> OrbitSequence:
    with mpmath.workprec(bits):
        return OrbitSequence(tuple(mpmath.ldexp(1, -(n + 1)) for n in range(count)), bits)


def squaring(count: int = 10, bits: int = 256) -> OrbitSequence:
    with mpmath.workprec(bits):
        return OrbitSequence(tuple(mpmath.ldexp(1, -(2 ** n)) for n in range(count)), bits)


def spiral(count: int = 9, bits: int = 256) -> OrbitSequence:
    with mpmath.workprec(bits):
        return OrbitSequence(tuple(mpmath.ldexp(1, -(n + 1)) * mpmath.expj(n * mpmath.pi / 8)
                                   for n in range(count)), bits)


@pytest.fixture
def geo():
    return geometric()


@pytest.fixture
def sq():
    return squaring()


def run_cli(argv, stdin: bytes = b""):
    """Run the CLI in-process; returns (exit code, stdout text)."""
    old_in, old_out = sys.stdin, sys.stdout
    sys.stdin = io.TextIOWrapper(io.BytesIO(stdin), encoding="utf-8")
    sys.stdout = io.StringIO()
    try:
        code = cli.main(argv)
        return code, sys.stdout.getvalue()
    finally:
        sys.stdin, sys.stdout = old_in, old_out
