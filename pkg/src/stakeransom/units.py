"""Gwei amounts and their human-readable rendering.

All economics are exact integers in Gwei. ETH strings are produced with
integer arithmetic only, as 9-decimal fixed point.
"""

from fractions import Fraction

Gwei = int

GWEI_PER_ETH: Gwei = 10**9
ETH = GWEI_PER_ETH


def eth(amount) -> Gwei:
    """Convert an ETH quantity (int, str or Fraction) to Gwei exactly.

    >>> eth("28.25")
    28250000000
    """
    value = Fraction(amount) * GWEI_PER_ETH
    if value.denominator != 1:
        raise ValueError(f"{amount!r} ETH is not a whole number of Gwei")
    return int(value)


def format_gwei(amount: Gwei) -> str:
    return f"{amount:,}"


def format_eth(amount: Gwei) -> str:
    sign = "-" if amount < 0 else ""
    whole, frac = divmod(abs(amount), GWEI_PER_ETH)
    return f"{sign}{whole}.{frac:09d}"


def describe(amount: Gwei) -> str:
    """``1,390,000,000 Gwei (1.390000000 ETH)``"""
    return f"{format_gwei(amount)} Gwei ({format_eth(amount)} ETH)"


def as_fraction(value) -> Fraction:
    """Parse a scale factor given as int, ``"3/2"`` string or ``[num, den]`` pair."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (list, tuple)):
        num, den = value
        return Fraction(int(num), int(den))
    if isinstance(value, float):
        raise TypeError("scale factors must be exact (int, 'p/q' string or [p, q])")
    return Fraction(value)
