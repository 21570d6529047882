"""Exact-rational parsing and formatting.

Rationals travel as ``"a/b"`` strings in every file and on the command line.
Decimal notation is rejected so that no value is ever rounded on the way in.
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable

_RATIONAL = re.compile(r"^\s*(-?\d+)(?:\s*/\s*(\d+))?\s*$")


def parse_rational(text: str | int | Fraction) -> Fraction:
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int) and not isinstance(text, bool):
        return Fraction(text)
    if not isinstance(text, str):
        raise ValueError(f"expected a rational like '1/2', got {text!r}")
    m = _RATIONAL.match(text)
    if not m:
        raise ValueError(f"not an exact rational (use a/b, decimals are rejected): {text!r}")
    num, den = m.group(1), m.group(2)
    if den is not None and int(den) == 0:
        raise ValueError(f"zero denominator in {text!r}")
    return Fraction(int(num), int(den) if den else 1)


def fmt(x: Fraction | int) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def short(x: Fraction | int) -> str:
    """Human-facing form: ``1`` rather than ``1/1``."""
    return str(Fraction(x))


def parse_grid(text: str | Iterable) -> tuple[Fraction, ...]:
    if isinstance(text, str):
        items = [t for t in text.split(",") if t.strip()]
    else:
        items = list(text)
    return tuple(parse_rational(t) for t in items)


def fmt_vector(xs: Iterable[Fraction]) -> str:
    return "(" + ", ".join(short(x) for x in xs) + ")"
