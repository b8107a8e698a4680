"""Exact rational parsing/formatting for JSON payloads.

All quantities that enter strict threshold comparisons (powers, the
threshold itself, rewards, deposits) are kept as `fractions.Fraction` and
serialized as strings like "7/20" so that no precision is lost on a
round trip.
"""

from __future__ import annotations

from fractions import Fraction


def parse_rational(value: object, field: str = "value") -> Fraction:
    """Parse a rational from a JSON-decoded value.

    Accepts rational strings ("7/20", "3", "-0.25"), ints, and Fractions.
    Floats are rejected: a JSON number like 0.55 must be parsed with
    `parse_float=Fraction` at decode time to keep its decimal meaning.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError(f"{field}: expected a rational, got a boolean")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"{field}: not a rational string: {value!r}") from exc
    raise ValueError(f"{field}: expected a rational string, got {type(value).__name__}")


def format_rational(value: Fraction) -> str:
    """Canonical string form: "3", "2/5", "-63/20"."""
    return str(Fraction(value))


def format_rational_list(values) -> list[str]:
    return [format_rational(v) for v in values]


def parse_rational_list(values: object, field: str) -> tuple[Fraction, ...]:
    if not isinstance(values, (list, tuple)):
        raise ValueError(f"{field}: expected an array of rational strings")
    return tuple(parse_rational(v, f"{field}[{i}]") for i, v in enumerate(values))
