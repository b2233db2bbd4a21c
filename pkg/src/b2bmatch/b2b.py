"""Block-to-block matcher with a small, tunable error probability.

The encoder applies an f2v code to each of k j-bit chunks, pads underflow
with random target-distributed bits, and truncates overflow (which the
decoder detects and reports). The total-codeword-length distribution is
computed by exact convolution, which gives the error probability exactly
instead of a typicality bound.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import Bits, ResourceLimitError, TargetDistribution
from . import f2v as f2v_mod
from .f2v import F2vCode, _parse_value, expected_length_fraction

MAX_EXACT_DIVERGENCE_BITS = 20
DEFAULT_PMF_CELL_CAP = 10 ** 7

# Exact dyadic convolution is kept while the denominator 2**(j*k) stays
# cheap; beyond that only the float pmf is carried.
EXACT_PMF_BIT_CAP = 512


class OverflowDetected(RuntimeError):
    """Decoding hit a truncated block (codeword stream longer than n)."""


@dataclass(frozen=True)
class EncodeResult:
    block: Bits
    overflowed: bool
    padded_bits: int


class B2bMatcher:
    """An f2v code applied k times, emitting fixed blocks of n bits."""

    __slots__ = ("code", "k", "n", "undersized")

    def __init__(self, code: F2vCode, k: int, n: int, *, allow_undersized: bool = False):
        if k < 1:
            raise ValueError("k must be >= 1")
        if n < 1:
            raise ValueError("n must be >= 1")
        undersized = k * expected_length_fraction(code) > n
        if undersized and not allow_undersized:
            raise ValueError(
                f"n={n} is below the overflow threshold k*E[len]="
                f"{float(k * expected_length_fraction(code)):.6g}; "
                "pass allow_undersized=True to experiment below it")
        object.__setattr__(self, "code", code)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "undersized", undersized)

    @property
    def m(self) -> int:
        return self.code.j * self.k

    def __setattr__(self, name, val):
        raise AttributeError("B2bMatcher is immutable")

    def __repr__(self) -> str:
        return (f"B2bMatcher(j={self.code.j}, k={self.k}, n={self.n}, "
                f"p0={self.code.target.p0})")

    def __reduce__(self):
        return (_rebuild_matcher, (self.code, self.k, self.n))


def _rebuild_matcher(code, k, n):
    return B2bMatcher(code, k, n, allow_undersized=True)


def threshold_from_epsilon(code: F2vCode, k: int, epsilon: float) -> int:
    """Output length n = ceil((1 + epsilon) * k * E[len]).

    Computed as a real-number ceiling: float slop within 1e-9 of an integer
    is rounded to it, so e.g. (1 + 0.08) * 100 * 2.25 yields 243, not 244.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if k < 1:
        raise ValueError("k must be >= 1")
    x = (1.0 + epsilon) * k * float(expected_length_fraction(code))
    nearest = round(x)
    if abs(x - nearest) <= 1e-9 * max(1.0, abs(x)):
        return int(nearest)
    return math.ceil(x)


def encode(matcher: B2bMatcher, b: Bits, rng: random.Random) -> EncodeResult:
    """Encode an m-bit block; pads underflow with Bernoulli(P(0)=p0) bits
    drawn from ``rng``, truncates overflow."""
    if b.length != matcher.m:
        raise ValueError(f"input must have length {matcher.m}, got {b.length}")
    value, overflowed, pad = _encode_value(matcher, b.value, rng)
    return EncodeResult(Bits(matcher.n, value), overflowed, pad)


def _encode_value(matcher: B2bMatcher, input_value: int,
                  rng: random.Random) -> tuple[int, bool, int]:
    """(n-bit block value, overflowed, padded bit count) for a raw input."""
    value, total = _apply_f2v(matcher, input_value)
    n = matcher.n
    if total <= n:
        pad = n - total
        p0 = matcher.code.target.p0
        for _ in range(pad):
            value <<= 1
            if rng.random() >= p0:
                value |= 1
        return value, False, pad
    return value >> (total - n), True, 0


def decode(matcher: B2bMatcher, v: Bits) -> Bits:
    """Recover the m input bits, or raise OverflowDetected if ``v`` arose
    from a truncated codeword stream."""
    if v.length != matcher.n:
        raise ValueError(f"input must have length {matcher.n}, got {v.length}")
    out = _decode_value(matcher, v.value)
    if out is None:
        raise OverflowDetected("block cannot be parsed into k codewords")
    return Bits(matcher.m, out)


def _apply_f2v(matcher: B2bMatcher, input_value: int) -> tuple[int, int]:
    """Concatenated codewords for the k j-bit chunks: (value, total length)."""
    code = matcher.code
    j, k = code.j, matcher.k
    values, lengths = code._values, code._lengths
    mask = (1 << j) - 1
    acc = 0
    total = 0
    for i in range(k - 1, -1, -1):
        idx = (input_value >> (j * i)) & mask
        acc = (acc << lengths[idx]) | values[idx]
        total += lengths[idx]
    return acc, total


def _decode_value(matcher: B2bMatcher, value: int) -> int | None:
    """Parse k codewords out of the n-bit block value; None on overflow.
    Trailing bits after the k-th codeword are padding and ignored."""
    code = matcher.code
    j, k, n = code.j, matcher.k, matcher.n
    out = 0
    offset = 0
    for _ in range(k):
        res = _parse_value(code, value, n, offset)
        if res is None:
            return None
        idx, offset = res
        out = (out << j) | idx
    return out


@dataclass(frozen=True)
class LengthDistribution:
    """Distribution of the total codeword length over k blocks.

    ``probs[i]`` is P(total length == offset + i). When ``counts`` is
    present each mass is exactly counts[i] / 2**denom_exp and the counts sum
    to 2**denom_exp exactly.
    """

    offset: int
    probs: np.ndarray
    denom_exp: int
    counts: tuple[int, ...] | None = None

    def tail_fraction_above(self, n: int) -> Fraction | None:
        """Exact P(length > n), when exact counts are carried."""
        if self.counts is None:
            return None
        lo = max(0, n + 1 - self.offset)
        return Fraction(sum(self.counts[lo:]), 1 << self.denom_exp)

    def tail_mass_above(self, n: int) -> float:
        """P(length > n); exact when counts are carried, otherwise the
        smaller-side float sum (accurate near both 0 and 1)."""
        exact = self.tail_fraction_above(n)
        if exact is not None:
            return float(exact)
        lo = max(0, n + 1 - self.offset)
        if lo >= len(self.probs):
            return 0.0
        if lo <= 0:
            return 1.0
        upper = float(np.sum(self.probs[lo:]))
        lower = float(np.sum(self.probs[:lo]))
        if upper <= lower:
            return min(upper, 1.0)
        return min(max(1.0 - lower, 0.0), 1.0)


def _single_block_counts(code: F2vCode) -> tuple[int, list[int]]:
    by_len = Counter(code._lengths)
    lmin, lmax = min(by_len), max(by_len)
    return lmin, [by_len.get(l, 0) for l in range(lmin, lmax + 1)]


def _conv_counts(a: list[int], b: list[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for jj, y in enumerate(b):
                out[i + jj] += x * y
    return out


def _pow_counts(base: list[int], k: int) -> list[int]:
    result = [1]
    sq = base
    while k:
        if k & 1:
            result = _conv_counts(result, sq)
        k >>= 1
        if k:
            sq = _conv_counts(sq, sq)
    return result


def _trim(offset: int, arr: np.ndarray) -> tuple[int, np.ndarray]:
    nz = np.nonzero(arr)[0]
    if len(nz) == 0:
        return offset, arr[:1]
    return offset + int(nz[0]), arr[nz[0]: nz[-1] + 1]


def _conv_float(a: tuple[int, np.ndarray], b: tuple[int, np.ndarray]):
    return _trim(a[0] + b[0], np.convolve(a[1], b[1]))


def float_length_pmf(code: F2vCode, k: int,
                     max_cells: int = DEFAULT_PMF_CELL_CAP) -> tuple[int, np.ndarray]:
    """Float-only k-fold length pmf as (offset, probability array), with
    underflowed (exactly zero) tails trimmed."""
    lmin, counts = _single_block_counts(code)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k * (len(counts) - 1) + 1 > max_cells:
        raise ResourceLimitError(f"length pmf would exceed {max_cells} cells")
    base = (lmin, np.array(counts, dtype=np.float64) / (1 << code.j))
    result = (0, np.array([1.0]))
    sq = base
    kk = k
    while kk:
        if kk & 1:
            result = _conv_float(result, sq)
        kk >>= 1
        if kk:
            sq = _conv_float(sq, sq)
    return result


def length_pmf(code: F2vCode, k: int, *, exact: bool | None = None,
               max_cells: int = DEFAULT_PMF_CELL_CAP) -> LengthDistribution:
    """Distribution of the total codeword length of k independent blocks,
    by iterated/doubling convolution of the single-block pmf."""
    if k < 1:
        raise ValueError("k must be >= 1")
    lmin, counts = _single_block_counts(code)
    span = k * (len(counts) - 1) + 1
    if span > max_cells:
        raise ResourceLimitError(f"length pmf would exceed {max_cells} cells")
    denom_exp = code.j * k
    if exact is None:
        exact = denom_exp <= EXACT_PMF_BIT_CAP
    if exact:
        counts_k = _pow_counts(counts, k)
        denom = 1 << denom_exp
        probs = np.array([c / denom for c in counts_k], dtype=np.float64)
        return LengthDistribution(offset=k * lmin, probs=probs,
                                  denom_exp=denom_exp, counts=tuple(counts_k))
    offset, probs = float_length_pmf(code, k, max_cells)
    return LengthDistribution(offset=offset, probs=probs, denom_exp=denom_exp)


def error_probability(matcher: B2bMatcher) -> float:
    """Exact probability of a decoding error, P(total length > n).

    Overflow detection is deterministic, so this equals the probability of
    the decoder reporting an error (and no other error can occur).
    """
    pmf = length_pmf(matcher.code, matcher.k)
    return pmf.tail_mass_above(matcher.n)


def divergence_upper_bound(matcher: B2bMatcher) -> float:
    """Per-output-bit divergence bound: the internal f2v code's per-bit
    divergence. Only claimed at or above the overflow threshold."""
    if matcher.undersized:
        raise ValueError(
            "bound requires n >= k*E[len]; matcher is below the threshold")
    return f2v_mod.metrics(matcher.code).per_bit_divergence


def exact_divergence(matcher: B2bMatcher) -> float:
    """D(P_V || target^n) in bits by full enumeration of the output
    distribution. Exponential in m and n; guarded accordingly."""
    n, m = matcher.n, matcher.m
    if n > MAX_EXACT_DIVERGENCE_BITS or m > MAX_EXACT_DIVERGENCE_BITS:
        raise ResourceLimitError(
            f"exact divergence needs n,m <= {MAX_EXACT_DIVERGENCE_BITS}")
    target = matcher.code.target
    p0, p1 = target.p0, target.p1
    # suffix_probs[s][y] = P(target emits the s-bit string y)
    suffix_probs: list[np.ndarray] = [np.array([1.0])]
    for _ in range(n):
        prev = suffix_probs[-1]
        suffix_probs.append(np.concatenate([p0 * prev, p1 * prev]))
    out = np.zeros(1 << n, dtype=np.float64)
    in_mass = 2.0 ** -m
    for bv in range(1 << m):
        value, total = _apply_f2v(matcher, bv)
        if total > n:
            out[value >> (total - n)] += in_mass
        else:
            s = n - total
            lo = value << s
            out[lo: lo + (1 << s)] += in_mass * suffix_probs[s]
    log_q = np.log2(suffix_probs[n])
    mask = out > 0
    div = float(np.sum(out[mask] * (np.log2(out[mask]) - log_q[mask])))
    return max(div, 0.0)


def rate(matcher: B2bMatcher) -> Fraction:
    """Matching rate m/n = j*k/n as an exact rational."""
    return Fraction(matcher.code.j * matcher.k, matcher.n)


# -- bit-stream file format ---------------------------------------------
# 8-byte little-endian bit count, then the bits packed big-endian within
# bytes, 8 per byte, final partial byte zero-padded.

def pack_bits(bits: Bits) -> bytes:
    header = bits.length.to_bytes(8, "little")
    nbytes = (bits.length + 7) // 8
    payload = (bits.value << (-bits.length % 8)).to_bytes(nbytes, "big")
    return header + payload


def unpack_bits(data: bytes) -> Bits:
    if len(data) < 8:
        raise ValueError("stream too short for the bit-count header")
    count = int.from_bytes(data[:8], "little")
    nbytes = (count + 7) // 8
    if len(data) != 8 + nbytes:
        raise ValueError(f"expected {8 + nbytes} bytes for {count} bits, got {len(data)}")
    raw = int.from_bytes(data[8:], "big")
    pad = -count % 8
    if raw & ((1 << pad) - 1):
        raise ValueError("nonzero padding in final byte")
    return Bits(count, raw >> pad)


# -- matcher configuration ----------------------------------------------

def matcher_to_config(matcher: B2bMatcher, *, builder: str = "greedy",
                      epsilon: float | None = None) -> dict:
    cfg = {"p0": matcher.code.target.p0, "j": matcher.code.j,
           "k": matcher.k, "builder": builder}
    if epsilon is not None:
        cfg["epsilon"] = epsilon
    else:
        cfg["n"] = matcher.n
    return cfg


def matcher_from_config(cfg: dict, *, allow_undersized: bool = False) -> B2bMatcher:
    """Build a matcher from {p0, j, k, n or epsilon, builder}."""
    target = TargetDistribution(cfg["p0"])
    builder = cfg.get("builder", "greedy")
    if builder == "greedy":
        code = f2v_mod.build_greedy(int(cfg["j"]), target)
    elif builder == "exhaustive":
        code = f2v_mod.build_exhaustive(int(cfg["j"]), target)
    else:
        raise ValueError(f"unknown builder {builder!r}")
    k = int(cfg["k"])
    has_n, has_eps = "n" in cfg, "epsilon" in cfg
    if has_n == has_eps:
        raise ValueError("exactly one of 'n' and 'epsilon' must be given")
    n = int(cfg["n"]) if has_n else threshold_from_epsilon(code, k, float(cfg["epsilon"]))
    return B2bMatcher(code, k, n, allow_undersized=allow_undersized)


def config_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True)
