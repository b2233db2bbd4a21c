"""Fixed-to-variable-length matcher codes.

A code maps every j-bit input block to one codeword of a complete
prefix-free set (Kraft sum exactly 1). The greedy builder repeatedly splits
the most probable leaf; the exhaustive builder finds the global optimum of
the per-bit divergence over all complete trees and serves as an oracle for
the greedy one.
"""

from __future__ import annotations

import heapq
import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction

from .core import Bits, ResourceLimitError, TargetDistribution

MAX_GREEDY_INPUT_BITS = 20
MAX_EXHAUSTIVE_INPUT_BITS = 4
DEPTH_CAP_FACTOR = 64

# Leaf probabilities are ordered by an integer fixed-point rendering of
# -log2 P; at this resolution distinct leaf probabilities of any sane target
# cannot collide, and true ties (notably p0 = 0.5) compare equal exactly.
_FP = 1 << 62


@dataclass(frozen=True)
class F2vMetrics:
    expected_length: float
    divergence: float
    per_bit_divergence: float
    entropy_rate: float


class F2vCode:
    """Complete prefix-free codebook of 2**j codewords in DFS leaf order
    (0-branch before 1-branch, i.e. lexicographic order)."""

    __slots__ = ("j", "target", "codewords", "log_probs",
                 "_lengths", "_values", "_lmax", "_starts")

    def __init__(self, j: int, target: TargetDistribution, codewords):
        codewords = tuple(codewords)
        if j < 1:
            raise ValueError("j must be >= 1")
        if len(codewords) != 1 << j:
            raise ValueError(f"expected {1 << j} codewords, got {len(codewords)}")
        if any(c.length < 1 for c in codewords):
            raise ValueError("codewords must be non-empty")
        lmax = max(c.length for c in codewords)
        aligned = [c.value << (lmax - c.length) for c in codewords]
        for i in range(len(codewords) - 1):
            if aligned[i + 1] <= aligned[i]:
                raise ValueError("codewords not in strict lexicographic order")
            a, b = codewords[i], codewords[i + 1]
            if a.length <= b.length and (b.value >> (b.length - a.length)) == a.value:
                raise ValueError(f"codeword {a.to01()} is a prefix of {b.to01()}")
        if sum(1 << (lmax - c.length) for c in codewords) != 1 << lmax:
            raise ValueError("Kraft sum is not exactly 1 (incomplete tree)")
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "codewords", codewords)
        object.__setattr__(self, "log_probs", tuple(
            (c.length - c.ones()) * target.log2_p0 + c.ones() * target.log2_p1
            for c in codewords))
        object.__setattr__(self, "_lengths", tuple(c.length for c in codewords))
        object.__setattr__(self, "_values", tuple(c.value for c in codewords))
        object.__setattr__(self, "_lmax", lmax)
        object.__setattr__(self, "_starts", tuple(aligned))

    def __setattr__(self, name, val):
        raise AttributeError("F2vCode is immutable")

    def __eq__(self, other) -> bool:
        return (isinstance(other, F2vCode) and self.j == other.j
                and self.target == other.target
                and self.codewords == other.codewords)

    def __hash__(self) -> int:
        return hash((self.j, self.target, self.codewords))

    def __repr__(self) -> str:
        return f"F2vCode(j={self.j}, p0={self.target.p0}, {len(self.codewords)} codewords)"

    def __reduce__(self):
        return (F2vCode, (self.j, self.target, self.codewords))


def build_greedy(j: int, target: TargetDistribution) -> F2vCode:
    """Grow a code by repeatedly splitting the most probable leaf.

    Starts from the two-leaf tree {0, 1} and performs 2**j - 2 splits. Ties
    are broken by shorter codeword first, then lexicographically smaller.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    if j > MAX_GREEDY_INPUT_BITS:
        raise ResourceLimitError(f"j={j} exceeds the build cap {MAX_GREEDY_INPUT_BITS}")
    depth_cap = DEPTH_CAP_FACTOR * j
    neg0 = round(-target.log2_p0 * _FP)
    neg1 = round(-target.log2_p1 * _FP)
    # heap entries: (-log2 prob fixed point, length, value); min entry is the
    # most probable leaf, ties falling through to (length, value)
    heap = [(neg0, 1, 0), (neg1, 1, 1)]
    heapq.heapify(heap)
    for _ in range((1 << j) - 2):
        key, ln, v = heapq.heappop(heap)
        if ln + 1 > depth_cap:
            raise ResourceLimitError(
                f"leaf depth would exceed {depth_cap} (pathological target?)")
        v <<= 1
        heapq.heappush(heap, (key + neg0, ln + 1, v))
        heapq.heappush(heap, (key + neg1, ln + 1, v | 1))
    lmax = max(ln for _, ln, _ in heap)
    leaves = sorted((v << (lmax - ln), ln, v) for _, ln, v in heap)
    return F2vCode(j, target, (Bits(ln, v) for _, ln, v in leaves))


def build_exhaustive(j: int, target: TargetDistribution) -> F2vCode:
    """Globally optimal code by exhaustive search over complete binary trees.

    Minimizes per-bit divergence; ties broken by smaller expected length,
    then by lexicographically smallest codeword list. The objective of a
    tree depends only on the total number of 0-edges (A) and 1-edges (B)
    over all root-to-leaf paths, so the search enumerates every achievable
    (A, B) pair instead of every tree shape.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    if j > MAX_EXHAUSTIVE_INPUT_BITS:
        raise ResourceLimitError(
            f"exhaustive enumeration capped at j <= {MAX_EXHAUSTIVE_INPUT_BITS}")
    leaves_total = 1 << j
    achievable: list[set[tuple[int, int]]] = [set() for _ in range(leaves_total + 1)]
    achievable[1] = {(0, 0)}
    for size in range(2, leaves_total + 1):
        acc = set()
        for left in range(1, size):
            right = size - left
            for a0, b0 in achievable[left]:
                for a1, b1 in achievable[right]:
                    acc.add((a0 + left + a1, b0 + b1 + right))
        achievable[size] = acc

    lp0, lp1 = target.log2_p0, target.log2_p1
    scale = 2.0 ** -j

    def objective(ab):
        a, b = ab
        div = -j - (a * lp0 + b * lp1) * scale
        exp_len = (a + b) * scale
        return div / exp_len, exp_len

    best_obj = min(objective(ab) for ab in achievable[leaves_total])
    candidates = [ab for ab in achievable[leaves_total] if objective(ab) == best_obj]

    memo: dict[tuple[int, int, int], tuple[str, ...]] = {}

    def lexmin(size: int, a: int, b: int) -> tuple[str, ...]:
        """Lexicographically smallest codeword list achieving (a, b)."""
        if size == 1:
            return ("",)
        key = (size, a, b)
        got = memo.get(key)
        if got is not None:
            return got
        best = None
        for left in range(1, size):
            right = size - left
            for a0, b0 in achievable[left]:
                a1 = a - a0 - left
                b1 = b - b0 - right
                if (a1, b1) not in achievable[right]:
                    continue
                cand = (tuple("0" + w for w in lexmin(left, a0, b0))
                        + tuple("1" + w for w in lexmin(right, a1, b1)))
                if best is None or cand < best:
                    best = cand
        memo[key] = best
        return best

    words = min(lexmin(leaves_total, a, b) for a, b in candidates)
    return F2vCode(j, target, (Bits.from01(w) for w in words))


def metrics(code: F2vCode) -> F2vMetrics:
    """Expected codeword length, divergence from the target, and the derived
    per-bit divergence and entropy rate."""
    j = code.j
    exp_len = float(expected_length_fraction(code))
    div = math.fsum((2.0 ** -j) * (-j - lp) for lp in code.log_probs)
    div = max(div, 0.0)
    return F2vMetrics(
        expected_length=exp_len,
        divergence=div,
        per_bit_divergence=div / exp_len,
        entropy_rate=j / exp_len,
    )


def expected_length_fraction(code: F2vCode) -> Fraction:
    """E[codeword length] as an exact rational."""
    return Fraction(sum(code._lengths), 1 << code.j)


def encode_block(code: F2vCode, b: Bits) -> Bits:
    """Map a j-bit block to its codeword (input read as a big-endian leaf index)."""
    if b.length != code.j:
        raise ValueError(f"input must have length {code.j}, got {b.length}")
    return code.codewords[b.value]


def parse_one(code: F2vCode, stream: Bits, offset: int) -> tuple[int, int] | None:
    """Parse one codeword from ``stream`` starting at ``offset``.

    Returns (codeword index, new offset), or None if the stream ends before
    a codeword is complete (an internal node of the code tree).
    """
    if not 0 <= offset <= stream.length:
        raise ValueError(f"offset {offset} out of range")
    return _parse_value(code, stream.value, stream.length, offset)


def _parse_value(code: F2vCode, value: int, bitlen: int, offset: int):
    # Equivalent to walking the code tree bit by bit: the DFS-ordered
    # codewords tile [0, 2**lmax) with dyadic intervals, so the next
    # codeword is located by interval lookup on the zero-padded window.
    rem = bitlen - offset
    if rem <= 0:
        return None
    lmax = code._lmax
    take = rem if rem < lmax else lmax
    window = ((value >> (rem - take)) & ((1 << take) - 1)) << (lmax - take)
    i = bisect_right(code._starts, window) - 1
    ln = code._lengths[i]
    if ln > rem:
        return None
    return i, offset + ln


def to_json(code: F2vCode) -> str:
    """Serialize as a JSON document; round-trips exactly."""
    return json.dumps(
        {"j": code.j, "p0": code.target.p0,
         "codewords": [c.to01() for c in code.codewords]},
        sort_keys=True)


def from_json(text: str) -> F2vCode:
    doc = json.loads(text)
    return F2vCode(int(doc["j"]), TargetDistribution(doc["p0"]),
                   (Bits.from01(w) for w in doc["codewords"]))
