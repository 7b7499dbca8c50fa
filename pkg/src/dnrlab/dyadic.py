"""Exact dyadic rationals: integers divided by powers of two.

Measures of clopen sets in Cantor space are dyadic, so every measure
computation here stays in this type: no floats, no rounding, and equality
means equality.  Values are kept normalized (odd numerator, or exponent
zero), which makes the representation canonical and hashing safe.

Serialization uses decimal strings for both fields so that arbitrarily
large numerators survive JSON round-trips without precision loss.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import total_ordering
from typing import Iterable, Mapping


@total_ordering
@dataclass(frozen=True)
class DyadicRational:
    """numerator / 2**exponent, normalized."""

    numerator: int
    exponent: int = 0

    def __post_init__(self) -> None:
        if self.exponent < 0:
            raise ValueError("exponent is a natural")
        num, exp = self.numerator, self.exponent
        if num == 0:
            exp = 0
        else:
            while num % 2 == 0 and exp > 0:
                num //= 2
                exp -= 1
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "exponent", exp)

    @classmethod
    def from_int(cls, n: int) -> "DyadicRational":
        return cls(n, 0)

    @classmethod
    def half_power(cls, c: int) -> "DyadicRational":
        """2**-c for c >= 0, and 2**-c == 2**|c| for negative c."""
        if c >= 0:
            return cls(1, c)
        return cls(1 << (-c), 0)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other: "DyadicRational") -> "DyadicRational":
        e = max(self.exponent, other.exponent)
        num = (self.numerator << (e - self.exponent)) + (other.numerator << (e - other.exponent))
        return DyadicRational(num, e)

    def __sub__(self, other: "DyadicRational") -> "DyadicRational":
        return self + (-other)

    def __neg__(self) -> "DyadicRational":
        return DyadicRational(-self.numerator, self.exponent)

    def __mul__(self, other: "DyadicRational") -> "DyadicRational":
        return DyadicRational(self.numerator * other.numerator,
                              self.exponent + other.exponent)

    def scaled(self, k: int) -> "DyadicRational":
        return DyadicRational(self.numerator * k, self.exponent)

    # -- order --------------------------------------------------------------

    def __lt__(self, other: "DyadicRational") -> bool:
        e = max(self.exponent, other.exponent)
        return (self.numerator << (e - self.exponent)) < (other.numerator << (e - other.exponent))

    @property
    def is_zero(self) -> bool:
        return self.numerator == 0

    @property
    def is_negative(self) -> bool:
        return self.numerator < 0

    # -- presentation -------------------------------------------------------

    def __str__(self) -> str:
        if self.exponent == 0:
            return str(self.numerator)
        return f"{self.numerator}/2^{self.exponent}"

    def as_float(self) -> float:
        """Lossy convenience for display only; never used in comparisons."""
        return self.numerator / (1 << self.exponent)

    def to_jsonable(self) -> dict:
        return {"num": str(self.numerator), "exp": str(self.exponent)}

    @classmethod
    def from_jsonable(cls, data: Mapping) -> "DyadicRational":
        return cls(int(data["num"]), int(data["exp"]))


ZERO = DyadicRational(0)
ONE = DyadicRational(1)


def dyadic_sum(terms: Iterable[DyadicRational]) -> DyadicRational:
    total = ZERO
    for t in terms:
        total = total + t
    return total
