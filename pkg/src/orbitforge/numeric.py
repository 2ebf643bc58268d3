"""Precision plumbing shared by every module.

All arithmetic runs on mpmath numbers. Each public operation enters
``working_precision(bits)`` so results depend only on the precision carried
by its inputs, not on whatever the global context happened to be.
"""

from __future__ import annotations

import contextlib
import os
import sys
from typing import Iterator, Sequence

import mpmath
from mpmath import mp
from mpmath.libmp import repr_dps, to_str

DEFAULT_PRECISION = 256
MIN_PRECISION = 53
DEFAULT_PRECISION_CAP = 2**20


class PrecisionCapExceeded(ValueError):
    """Raised when an operation would need more bits than the configured cap."""


def precision_cap() -> int:
    env = os.environ.get("ORBITFORGE_PRECISION_CAP")
    if env:
        return int(env)
    return DEFAULT_PRECISION_CAP


def working_precision(bits: int):
    return mp.workprec(int(bits))


@contextlib.contextmanager
def _unlimited_int_digits() -> Iterator[None]:
    # huge decimal strings (Ex3_2 reaches ~3e5 digits) trip CPython's guard
    getter = getattr(sys, "get_int_max_str_digits", None)
    if getter is None:
        yield
        return
    old = getter()
    sys.set_int_max_str_digits(0)
    try:
        yield
    finally:
        sys.set_int_max_str_digits(old)


def parse_real(text: str | int | float, bits: int) -> mpmath.mpf:
    """Parse a decimal string at ``bits`` of precision, rounding once."""
    with working_precision(bits), _unlimited_int_digits():
        value = mpmath.mpf(text.strip() if isinstance(text, str) else text)
    if not mpmath.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def parse_complex(pair, bits: int) -> mpmath.mpc:
    """Parse ``[re, im]`` (strings or numbers), a bare real, or ``"re,im"``."""
    if isinstance(pair, str):
        parts = pair.split(",")
        if len(parts) == 1:
            parts.append("0")
        if len(parts) != 2:
            raise ValueError(f"expected 're,im', got {pair!r}")
        pair = parts
    elif isinstance(pair, (int, float)):
        pair = [pair, 0]
    elif isinstance(pair, complex):
        pair = [pair.real, pair.imag]
    elif isinstance(pair, mpmath.mpc):
        with working_precision(bits):
            return +pair
    elif isinstance(pair, mpmath.mpf):
        with working_precision(bits):
            return mpmath.mpc(pair)
    if len(pair) != 2:
        raise ValueError(f"complex point must have two components, got {pair!r}")
    re = parse_real(pair[0], bits)
    im = parse_real(pair[1], bits)
    with working_precision(bits):
        return mpmath.mpc(re, im)


def to_complex(value, bits: int) -> mpmath.mpc:
    return parse_complex(value, bits)


def format_real(x, bits: int) -> str:
    """Shortest-safe decimal string that round-trips at ``bits``."""
    x = mpmath.mpf(x) if not isinstance(x, mpmath.mpf) else x
    with _unlimited_int_digits():
        return to_str(x._mpf_, repr_dps(int(bits)))


def format_complex(z, bits: int) -> list[str]:
    z = mpmath.mpc(z) if not isinstance(z, mpmath.mpc) else z
    return [format_real(z.real, bits), format_real(z.imag, bits)]


def rounding_slack(bits: int) -> mpmath.mpf:
    """Relative allowance for accumulated rounding in comparisons."""
    return mpmath.ldexp(1, -(int(bits) - 16))


def is_exactly_equal(a: mpmath.mpc, b: mpmath.mpc) -> bool:
    return a.real == b.real and a.imag == b.imag


def principal_arg(z) -> mpmath.mpf:
    """Argument in (-pi, pi]."""
    return mpmath.arg(z)


def max_abs(values: Sequence) -> mpmath.mpf:
    return max((abs(v) for v in values), default=mpmath.mpf(0))
