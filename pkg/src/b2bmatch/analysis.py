"""Trade-off sweeps, the converse (Fano) bound, Monte Carlo cross-checks,
and figure-data generation.

All sweep and Monte Carlo work is split into fixed-size chunks whose
results merge by summation/concatenation, so runs are bit-identical for
any worker count.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Bits, ResourceLimitError, TargetDistribution, binary_entropy
from . import b2b as b2b_mod
from . import f2v as f2v_mod
from . import one2one as one2one_mod
from .b2b import B2bMatcher, _conv_float, float_length_pmf
from .f2v import F2vCode

SWEEP_CHUNK = 32
MC_CHUNK = 4096

MAX_FIG1_ONE2ONE_BITS = 24
MAX_FIG1_F2V_BITS = 14


@dataclass(frozen=True)
class TradeoffPoint:
    j: int
    k: int
    n: int
    rate: float
    rate_gap: float
    error_probability: float
    divergence_bound: float


@dataclass(frozen=True)
class CurvePoint:
    x: int
    per_bit_divergence: float


@dataclass(frozen=True)
class McResult:
    trials: int
    error_count: int
    decoded_count: int
    position_one_counts: np.ndarray

    def bit_one_frequencies(self) -> np.ndarray:
        if self.decoded_count == 0:
            return np.full_like(self.position_one_counts, np.nan, dtype=np.float64)
        return self.position_one_counts / self.decoded_count


def _tail_above(pmf: tuple[int, np.ndarray], n: int) -> float:
    offset, probs = pmf
    lo = max(0, n + 1 - offset)
    if lo >= len(probs):
        return 0.0
    if lo <= 0:
        return 1.0
    upper = float(np.sum(probs[lo:]))
    lower = float(np.sum(probs[:lo]))
    if upper <= lower:
        return min(upper, 1.0)
    return min(max(1.0 - lower, 0.0), 1.0)


def _sweep_chunk(code: F2vCode, n: int, ks: tuple[int, ...]) -> list[float]:
    """Error probabilities for an ascending run of k values; the pmf is
    advanced incrementally between neighbors."""
    pmf = float_length_pmf(code, ks[0])
    errors = [_tail_above(pmf, n)]
    steps: dict[int, tuple[int, np.ndarray]] = {}
    for prev, k in zip(ks, ks[1:]):
        gap = k - prev
        step = steps.get(gap)
        if step is None:
            step = steps[gap] = float_length_pmf(code, gap)
        pmf = _conv_float(pmf, step)
        errors.append(_tail_above(pmf, n))
    return errors


def tradeoff_sweep(code: F2vCode, n: int, k_values, *,
                   workers: int = 1) -> list[TradeoffPoint]:
    """Rate / error-probability / divergence-bound curve over k.

    The divergence bound column is the internal code's per-bit divergence;
    it is only a valid output-divergence bound for points at or above the
    overflow threshold (k*E[len] <= n).
    """
    ks = sorted(set(int(k) for k in k_values))
    if not ks or ks[0] < 1:
        raise ValueError("k values must be a non-empty set of positive ints")
    chunks = [tuple(ks[i: i + SWEEP_CHUNK]) for i in range(0, len(ks), SWEEP_CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            error_runs = list(pool.map(_sweep_chunk, [code] * len(chunks),
                                       [n] * len(chunks), chunks))
    else:
        error_runs = [_sweep_chunk(code, n, chunk) for chunk in chunks]
    bound = f2v_mod.metrics(code).per_bit_divergence
    entropy = binary_entropy(code.target)
    points = []
    for chunk, errors in zip(chunks, error_runs):
        for k, err in zip(chunk, errors):
            r = code.j * k / n
            points.append(TradeoffPoint(
                j=code.j, k=k, n=n, rate=r, rate_gap=entropy - r,
                error_probability=err, divergence_bound=bound))
    return points


def fig2_k_grid(code: F2vCode, n: int) -> list[int]:
    """k grid bracketing the overflow threshold: floor(0.8*n/E[len]) up to
    floor(n/E[len]) in steps of 1% of the range."""
    exp_len = float(f2v_mod.metrics(code).expected_length)
    k_hi = math.floor(n / exp_len)
    k_lo = max(1, math.floor(0.8 * n / exp_len))
    step = max(1, math.floor(0.01 * (k_hi - k_lo)))
    return list(range(k_lo, k_hi + 1, step))


def fig2_data(target: TargetDistribution, n: int, j_list, *,
              builder: str = "greedy", workers: int = 1) -> list[TradeoffPoint]:
    """Rate-vs-error trade-off curves for each j, concatenated in j order."""
    build = f2v_mod.build_greedy if builder == "greedy" else f2v_mod.build_exhaustive
    points = []
    for j in j_list:
        code = build(int(j), target)
        points.extend(tradeoff_sweep(code, n, fig2_k_grid(code, n), workers=workers))
    return points


def _h2(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def fano_bound(m: int, n: int, target: TargetDistribution) -> float:
    """Smallest error probability compatible with h2(Pe)/m + Pe >= 1 - (n/m)H.

    Returns 0 when the right side is nonpositive; otherwise the root of the
    equality, found by bisection on the increasing branch of the left side.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    slack = 1.0 - (n / m) * binary_entropy(target)
    if slack <= 0.0:
        return 0.0

    def lhs(x: float) -> float:
        return _h2(x) / m + x

    # lhs increases up to x_peak = 1/(1 + 2**-m) and lhs(x_peak) > 1 > slack,
    # so the smallest root lies in (0, x_peak).
    hi = min(1.0 / (1.0 + 2.0 ** -m), 1.0 - 1e-16)
    lo = 0.0
    while hi - lo > 1e-14:
        mid = 0.5 * (lo + hi)
        if lhs(mid) < slack:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fig1_data(target: TargetDistribution, m_range, j_range):
    """Per-bit divergence curves: optimal one-to-one matcher vs input
    length m (red), and greedy f2v code vs input length j (blue)."""
    m_range = [int(m) for m in m_range]
    j_range = [int(j) for j in j_range]
    if m_range and max(m_range) > MAX_FIG1_ONE2ONE_BITS:
        raise ResourceLimitError(f"one-to-one curve capped at m <= {MAX_FIG1_ONE2ONE_BITS}")
    if j_range and max(j_range) > MAX_FIG1_F2V_BITS:
        raise ResourceLimitError(f"f2v curve capped at j <= {MAX_FIG1_F2V_BITS}")
    red = [CurvePoint(m, one2one_mod.per_bit_divergence(one2one_mod.design(m, target)))
           for m in m_range]
    blue = [CurvePoint(j, f2v_mod.metrics(f2v_mod.build_greedy(j, target)).per_bit_divergence)
            for j in j_range]
    return red, blue


def _derive_seed(master_seed: int, chunk_index: int) -> int:
    x = (master_seed * 0x9E3779B97F4A7C15 + (chunk_index + 1) * 0xBF58476D1CE4E5B9)
    x &= (1 << 64) - 1
    x ^= x >> 31
    return x


def _mc_chunk(matcher: B2bMatcher, seed: int, count: int):
    rng = random.Random(seed)
    n, m = matcher.n, matcher.m
    errors = 0
    blocks = []
    for _ in range(count):
        bv = rng.getrandbits(m)
        block_value, overflowed, _pad = b2b_mod._encode_value(matcher, bv, rng)
        out = b2b_mod._decode_value(matcher, block_value)
        if out is None:
            if not overflowed:
                raise RuntimeError("decoder flagged overflow on a padded block")
            errors += 1
        else:
            if overflowed or out != bv:
                raise RuntimeError("undetected decoding error")
            blocks.append(block_value)
    nbytes = (n + 7) // 8
    counts = np.zeros(n, dtype=np.int64)
    if blocks:
        buf = b"".join(v.to_bytes(nbytes, "big") for v in blocks)
        mat = np.unpackbits(np.frombuffer(buf, dtype=np.uint8).reshape(len(blocks), nbytes),
                            axis=1)[:, nbytes * 8 - n:]
        counts = mat.sum(axis=0, dtype=np.int64)
    return errors, len(blocks), counts


def monte_carlo(matcher: B2bMatcher, trials: int, master_seed: int, *,
                workers: int = 1) -> McResult:
    """Encode/decode uniform random inputs; count detected errors and
    accumulate per-position frequency of bit 1 over non-erased outputs.

    Trials run in fixed chunks with seeds derived from (master_seed, chunk
    index), so results are identical for any worker count.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sizes = [MC_CHUNK] * (trials // MC_CHUNK)
    if trials % MC_CHUNK:
        sizes.append(trials % MC_CHUNK)
    seeds = [_derive_seed(master_seed, i) for i in range(len(sizes))]
    if workers > 1 and len(sizes) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_mc_chunk, [matcher] * len(sizes), seeds, sizes))
    else:
        parts = [_mc_chunk(matcher, s, c) for s, c in zip(seeds, sizes)]
    errors = sum(p[0] for p in parts)
    decoded = sum(p[1] for p in parts)
    counts = np.zeros(matcher.n, dtype=np.int64)
    for p in parts:
        counts += p[2]
    return McResult(trials=trials, error_count=errors,
                    decoded_count=decoded, position_one_counts=counts)


# -- CSV emission ---------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _write_csv(path, comment: str, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {comment}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_fig1_csv(path, red, blue, comment: str) -> None:
    by_x: dict[int, list[str]] = {}
    for p in red:
        by_x.setdefault(p.x, ["nan", "nan"])[0] = _fmt(p.per_bit_divergence)
    for p in blue:
        by_x.setdefault(p.x, ["nan", "nan"])[1] = _fmt(p.per_bit_divergence)
    rows = [[str(x)] + by_x[x] for x in sorted(by_x)]
    _write_csv(path, comment, "m,red_divergence_per_bit,blue_divergence_per_bit", rows)


def write_fig2_csv(path, points, comment: str) -> None:
    rows = [[str(p.j), str(p.k), _fmt(p.rate), _fmt(p.rate_gap),
             _fmt(p.error_probability), _fmt(p.divergence_bound)]
            for p in points]
    _write_csv(path, comment, "j,k,rate,rate_gap,error_probability,divergence_bound", rows)


def write_fano_csv(path, rows, comment: str) -> None:
    out = [[str(m), str(n), _fmt(bound)] for m, n, bound in rows]
    _write_csv(path, comment, "m,n,bound", out)
