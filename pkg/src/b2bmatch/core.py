"""Shared primitives: binary target distribution, bit strings, and
log-domain probability / divergence arithmetic.

All probabilities are carried as log2 values in double precision; dyadic
masses (k/2**e) additionally carry exact integer representations so that
Kraft-type identities can be checked without rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


class ResourceLimitError(RuntimeError):
    """An operation would exceed a configured size or enumeration cap."""


class Bits:
    """Immutable bit string, most-significant-bit first.

    ``value`` holds the bits as a big-endian integer, so ``Bits(3, 0b001)``
    is the string ``001``. The empty string is ``Bits(0, 0)``.
    """

    __slots__ = ("length", "value")

    def __init__(self, length: int, value: int):
        if length < 0:
            raise ValueError("bit string length must be >= 0")
        if value < 0 or value >> length:
            raise ValueError(f"value {value} does not fit in {length} bits")
        object.__setattr__(self, "length", length)
        object.__setattr__(self, "value", value)

    def __setattr__(self, name, val):
        raise AttributeError("Bits is immutable")

    @classmethod
    def from01(cls, text: str) -> "Bits":
        """Parse a string of '0'/'1' characters."""
        if text and set(text) - {"0", "1"}:
            raise ValueError(f"not a bit string: {text!r}")
        return cls(len(text), int(text, 2) if text else 0)

    def to01(self) -> str:
        return format(self.value, "b").zfill(self.length) if self.length else ""

    def ones(self) -> int:
        return self.value.bit_count()

    def concat(self, other: "Bits") -> "Bits":
        return Bits(self.length + other.length,
                    (self.value << other.length) | other.value)

    def __add__(self, other: "Bits") -> "Bits":
        return self.concat(other)

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.value >> (self.length - 1 - i)) & 1

    def __iter__(self):
        for i in range(self.length):
            yield (self.value >> (self.length - 1 - i)) & 1

    def __eq__(self, other) -> bool:
        return (isinstance(other, Bits)
                and self.length == other.length and self.value == other.value)

    def __hash__(self) -> int:
        return hash((self.length, self.value))

    def __repr__(self) -> str:
        return f"Bits({self.to01()!r})"

    def __reduce__(self):
        return (Bits, (self.length, self.value))


class TargetDistribution:
    """Binary target distribution with 0 < P(0) < 1.

    ``exact0``/``exact1`` are the exact rationals of the stored double, with
    ``exact0 + exact1 == 1`` exactly; they back all tie-sensitive comparisons.
    """

    __slots__ = ("p0", "p1", "exact0", "exact1", "log2_p0", "log2_p1")

    def __init__(self, p0: float):
        p0 = float(p0)
        if not 0.0 < p0 < 1.0:
            raise ValueError(f"p0 must be in (0, 1), got {p0}")
        exact0 = Fraction(p0)
        exact1 = 1 - exact0
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "exact0", exact0)
        object.__setattr__(self, "exact1", exact1)
        object.__setattr__(self, "p1", float(exact1))
        object.__setattr__(self, "log2_p0", math.log2(p0))
        object.__setattr__(self, "log2_p1", math.log2(float(exact1)))

    def __setattr__(self, name, val):
        raise AttributeError("TargetDistribution is immutable")

    def __eq__(self, other) -> bool:
        return isinstance(other, TargetDistribution) and self.p0 == other.p0

    def __hash__(self) -> int:
        return hash(("TargetDistribution", self.p0))

    def __repr__(self) -> str:
        return f"TargetDistribution(p0={self.p0!r})"

    def __reduce__(self):
        return (TargetDistribution, (self.p0,))


@dataclass(frozen=True)
class FiniteDistribution:
    """Finite distribution over bit strings.

    ``items`` holds (bit string, log2 probability) pairs. ``dyadic``, when
    present, gives each mass exactly as numerator / 2**exponent and must sum
    to one exactly.
    """

    items: tuple[tuple[Bits, float], ...]
    dyadic: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        total = math.fsum(2.0 ** lp for _, lp in self.items)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total}, not 1")
        if self.dyadic is not None:
            if len(self.dyadic) != len(self.items):
                raise ValueError("dyadic length mismatch")
            emax = max(e for _, e in self.dyadic)
            if sum(num << (emax - e) for num, e in self.dyadic) != 1 << emax:
                raise ValueError("dyadic masses do not sum to 1 exactly")

    @classmethod
    def uniform(cls, items) -> "FiniteDistribution":
        """Uniform distribution; carries exact dyadic masses when the
        support size is a power of two."""
        items = tuple(items)
        if not items:
            raise ValueError("empty support")
        count = len(items)
        lp = -math.log2(count)
        dyadic = None
        if count & (count - 1) == 0:
            e = count.bit_length() - 1
            dyadic = tuple((1, e) for _ in items)
        return cls(tuple((x, lp) for x in items), dyadic)

    @classmethod
    def point_mass(cls, item: Bits) -> "FiniteDistribution":
        return cls(((item, 0.0),), ((1, 0),))


def binary_entropy(dist: TargetDistribution) -> float:
    """H2(p0) in bits."""
    return -dist.p0 * dist.log2_p0 - dist.p1 * dist.log2_p1


def sequence_log_prob(y: Bits, dist: TargetDistribution) -> float:
    """log2 of the iid product probability of ``y`` under the target."""
    w = y.ones()
    return w * dist.log2_p1 + (y.length - w) * dist.log2_p0


def divergence(p: FiniteDistribution, dist: TargetDistribution) -> float:
    """D(p || target product) in bits, summed over the support of ``p``.

    Each support item is weighed against the iid extension of the target at
    the item's own length.
    """
    total = math.fsum(
        (2.0 ** lp) * (lp - sequence_log_prob(x, dist)) for x, lp in p.items
    )
    # Mathematically >= 0; clamp float noise at the equality case.
    return max(total, 0.0)
