"""Exact decimal parsing and rendering for money amounts.

Costs, budgets and metric values are :class:`fractions.Fraction` end to end.
Parsing decimal strings must never round-trip through binary floats, and
rendering must be reproducible byte for byte, so both directions live here.
"""

from __future__ import annotations

from fractions import Fraction

__all__ = ["parse_rational", "format_rational"]


def parse_rational(text: str) -> Fraction:
    """Parse a numeric string into an exact :class:`Fraction`.

    Accepts plain integers (``"120"``), decimals (``"120.50"``), scientific
    notation (``"1.2e3"``) and fraction literals (``"1/3"``). Raises
    ``ValueError`` for anything else.
    """
    stripped = text.strip()
    if not stripped:
        raise ValueError("empty numeric field")
    # Fraction's string constructor handles all accepted forms exactly.
    return Fraction(stripped)


def format_rational(value: Fraction) -> str:
    """Render a :class:`Fraction` exactly and canonically.

    Integers render bare (``"120"``), rationals with a terminating decimal
    expansion render as minimal decimals (``"120.5"``), everything else
    falls back to ``"num/den"``. ``parse_rational(format_rational(q)) == q``
    for every input.
    """
    num, den = value.numerator, value.denominator
    if den == 1:
        return str(num)
    twos = fives = 0
    rest = den
    while rest % 2 == 0:
        rest //= 2
        twos += 1
    while rest % 5 == 0:
        rest //= 5
        fives += 1
    if rest != 1:
        return f"{num}/{den}"
    digits = max(twos, fives)
    scaled = str(abs(num) * 10**digits // den).rjust(digits + 1, "0")
    sign = "-" if num < 0 else ""
    return f"{sign}{scaled[:-digits]}.{scaled[-digits:]}"
