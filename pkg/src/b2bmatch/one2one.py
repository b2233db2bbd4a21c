"""Optimal one-to-one block-to-block matcher.

For input length m, the codebook holds the 2**m most probable length-n
sequences, stored by weight classes. Encoding and decoding use enumerative
(combinadic) ranking within a weight class, so codebooks never have to be
materialized.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction

from .core import Bits, ResourceLimitError, TargetDistribution, binary_entropy

MAX_ORACLE_INPUT_BITS = 4

# Per-bit divergence values closer than this are treated as ties, resolved
# toward the smaller output length. Exact ties across different n do occur
# (e.g. m=1, p0=0.8 yields the same value for every n).
_TIE_TOL = 1e-12


class NotInCodebookError(ValueError):
    """The given sequence is not in the codebook."""


class One2OneCode:
    """Codebook of the 2**m most probable length-n sequences, as an ordered
    weight plan: (weight, count taken from that weight class)."""

    __slots__ = ("m", "n", "target", "weight_plan", "_bases", "_by_weight")

    def __init__(self, m: int, n: int, target: TargetDistribution, weight_plan):
        weight_plan = tuple((int(w), int(c)) for w, c in weight_plan)
        if not 1 <= m <= n:
            raise ValueError(f"need 1 <= m <= n, got m={m} n={n}")
        total = 0
        for i, (w, cnt) in enumerate(weight_plan):
            if not 0 <= w <= n:
                raise ValueError(f"weight {w} out of range")
            full = math.comb(n, w)
            if not 1 <= cnt <= full:
                raise ValueError(f"count {cnt} invalid for weight class {w}")
            if cnt < full and i != len(weight_plan) - 1:
                raise ValueError("only the last weight class may be partial")
            total += cnt
        if total != 1 << m:
            raise ValueError(f"weight plan covers {total} sequences, need {1 << m}")
        order = _weight_order(n, target)
        expect = [w for w in order][: len(weight_plan)]
        if [w for w, _ in weight_plan] != expect:
            raise ValueError("weight classes not in descending-probability order")
        bases = []
        acc = 0
        for _, cnt in weight_plan:
            bases.append(acc)
            acc += cnt
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "weight_plan", weight_plan)
        object.__setattr__(self, "_bases", tuple(bases))
        object.__setattr__(self, "_by_weight", {
            w: (bases[i], cnt) for i, (w, cnt) in enumerate(weight_plan)})

    def __setattr__(self, name, val):
        raise AttributeError("One2OneCode is immutable")

    def __eq__(self, other) -> bool:
        return (isinstance(other, One2OneCode) and self.m == other.m
                and self.n == other.n and self.target == other.target
                and self.weight_plan == other.weight_plan)

    def __repr__(self) -> str:
        return f"One2OneCode(m={self.m}, n={self.n}, p0={self.target.p0})"

    def __reduce__(self):
        return (One2OneCode, (self.m, self.n, self.target, self.weight_plan))


def _weight_order(n: int, target: TargetDistribution) -> list[int]:
    """Weights 0..n by strictly decreasing sequence probability, ties (only
    possible at p0 = 0.5) broken toward the lower weight. Exact arithmetic."""
    f0, f1 = target.exact0, target.exact1
    return sorted(range(n + 1), key=lambda w: (-(f1 ** w) * (f0 ** (n - w)), w))


def divergence_for_n(m: int, n: int, target: TargetDistribution):
    """Per-output-bit divergence of the most-probable codebook at output
    length n. Returns (divergence per bit, code)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > n:
        raise ValueError(f"need m <= n, got m={m} n={n}")
    remaining = 1 << m
    plan = []
    terms = []
    lp0, lp1 = target.log2_p0, target.log2_p1
    for w in _weight_order(n, target):
        take = min(math.comb(n, w), remaining)
        plan.append((w, take))
        terms.append(take * (2.0 ** -m) * (-m - (w * lp1 + (n - w) * lp0)))
        remaining -= take
        if remaining == 0:
            break
    div = max(math.fsum(terms), 0.0)
    return div / n, One2OneCode(m, n, target, plan)


def per_bit_divergence(code: One2OneCode) -> float:
    """Recompute the per-output-bit divergence of an existing code."""
    lp0, lp1 = code.target.log2_p0, code.target.log2_p1
    m, n = code.m, code.n
    div = math.fsum(
        cnt * (2.0 ** -m) * (-m - (w * lp1 + (n - w) * lp0))
        for w, cnt in code.weight_plan)
    return max(div, 0.0) / n


def design(m: int, target: TargetDistribution, n_cap: int | None = None) -> One2OneCode:
    """Pick the output length minimizing per-bit divergence.

    Line search around m / H(target), expanding the window while an edge is
    the running minimum. The search is clipped to [m, n_cap]; for degenerate
    small-m/skewed-target combinations the per-bit divergence decreases in n
    without attaining a minimum, so an uncapped expansion would not
    terminate. The default cap matches the brute-force oracle's range.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if n_cap is None:
        n_cap = 2 * m + 4
    center = round(m / binary_entropy(target))
    half = max(2, math.ceil(m / 10))
    lo = max(m, min(center - half, n_cap))
    hi = min(n_cap, max(center + half, lo))
    vals: dict[int, tuple[float, One2OneCode]] = {
        n: divergence_for_n(m, n, target) for n in range(lo, hi + 1)}

    def current_best():
        best_n = lo
        for n in range(lo + 1, hi + 1):
            if vals[n][0] < vals[best_n][0] - _TIE_TOL:
                best_n = n
        return best_n

    while True:
        best_n = current_best()
        dmin = vals[best_n][0]
        if lo > m and vals[lo][0] <= dmin + _TIE_TOL:
            lo -= 1
            vals[lo] = divergence_for_n(m, lo, target)
        elif hi < n_cap and vals[hi][0] <= dmin + _TIE_TOL:
            hi += 1
            vals[hi] = divergence_for_n(m, hi, target)
        else:
            return vals[best_n][1]


def encode(code: One2OneCode, b: Bits) -> Bits:
    """Map an m-bit input (read as a rank) to the length-n codebook sequence."""
    if b.length != code.m:
        raise ValueError(f"input must have length {code.m}, got {b.length}")
    r = b.value
    for (w, cnt), base in zip(code.weight_plan, code._bases):
        if r < base + cnt:
            return Bits(code.n, _unrank(code.n, w, r - base))
    raise AssertionError("rank outside weight plan")  # plan covers 2**m


def decode(code: One2OneCode, y: Bits) -> Bits:
    """Inverse of encode; raises NotInCodebookError for sequences outside
    the codebook (cannot happen in closed-loop use)."""
    if y.length != code.n:
        raise ValueError(f"input must have length {code.n}, got {y.length}")
    w = y.ones()
    hit = code._by_weight.get(w)
    if hit is None:
        raise NotInCodebookError(f"weight {w} not in the codebook")
    base, cnt = hit
    r = _rank(code.n, w, y.value)
    if r >= cnt:
        raise NotInCodebookError(f"sequence {y.to01()} beyond the partial class")
    return Bits(code.m, base + r)


def _unrank(n: int, w: int, i: int) -> int:
    """i-th (lexicographic) n-bit value with w ones."""
    v = 0
    for rest in range(n - 1, -1, -1):
        zeros_here = math.comb(rest, w)
        if i >= zeros_here:
            v |= 1 << rest
            i -= zeros_here
            w -= 1
    return v


def _rank(n: int, w: int, v: int) -> int:
    """Lexicographic rank of ``v`` within the weight-w class."""
    r = 0
    for rest in range(n - 1, -1, -1):
        if (v >> rest) & 1:
            r += math.comb(rest, w)
            w -= 1
    return r


def brute_force_oracle(m: int, target: TargetDistribution,
                       n_max: int | None = None) -> tuple[int, float]:
    """Independent check of ``design``: enumerate and sort all 2**n
    sequences for every n in [m, n_max], take the top 2**m, minimize D/n."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > MAX_ORACLE_INPUT_BITS:
        raise ResourceLimitError(f"oracle capped at m <= {MAX_ORACLE_INPUT_BITS}")
    if n_max is None:
        n_max = 2 * m + 4
    lp0, lp1 = target.log2_p0, target.log2_p1
    best = None
    for n in range(m, n_max + 1):
        def logprob(v):
            w = v.bit_count()
            return w * lp1 + (n - w) * lp0
        top = sorted(range(1 << n), key=lambda v: (-logprob(v), v))[: 1 << m]
        div = math.fsum((2.0 ** -m) * (-m - logprob(v)) for v in top) / n
        if best is None or div < best[1] - _TIE_TOL:
            best = (n, div)
    return best


def to_json(code: One2OneCode) -> str:
    """Serialize the weight plan; counts as decimal strings."""
    return json.dumps(
        {"m": code.m, "n": code.n, "p0": code.target.p0,
         "classes": [[w, str(cnt)] for w, cnt in code.weight_plan]},
        sort_keys=True)


def from_json(text: str) -> One2OneCode:
    doc = json.loads(text)
    return One2OneCode(int(doc["m"]), int(doc["n"]),
                       TargetDistribution(doc["p0"]),
                       [(int(w), int(c)) for w, c in doc["classes"]])
