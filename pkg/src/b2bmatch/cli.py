"""Command-line front end: code design, block codec over bit-stream files,
and figure/sweep data generation with reproducible seeding."""

from __future__ import annotations

import argparse
import json
import random
import sys

from . import __version__
from . import analysis, b2b, f2v
from .core import Bits, ResourceLimitError, TargetDistribution


def _fmt(x) -> str:
    return format(float(x), ".12g")


def _comment(cfg: dict) -> str:
    return f"b2bmatch {__version__} {json.dumps(cfg, sort_keys=True)}"


def _write_json(path, cfg: dict, rows) -> None:
    doc = {"tool": f"b2bmatch {__version__}", "config": cfg, "rows": rows}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _build_code(args):
    target = TargetDistribution(args.p0)
    build = f2v.build_greedy if args.builder == "greedy" else f2v.build_exhaustive
    return build(args.j, target)


def _matcher_config(args) -> dict:
    cfg = {"p0": args.p0, "j": args.j, "k": args.k, "builder": args.builder}
    if args.n is not None and args.epsilon is not None:
        raise ValueError("give exactly one of --n and --epsilon")
    if args.n is not None:
        cfg["n"] = args.n
    elif args.epsilon is not None:
        cfg["epsilon"] = args.epsilon
    else:
        raise ValueError("one of --n and --epsilon is required")
    return cfg


def _slice_bits(stream: Bits, index: int, width: int) -> Bits:
    shift = stream.length - (index + 1) * width
    return Bits(width, (stream.value >> shift) & ((1 << width) - 1))


def cmd_design_f2v(args) -> int:
    code = _build_code(args)
    met = f2v.metrics(code)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f2v.to_json(code) + "\n")
    print(f"j={code.j} p0={code.target.p0} codewords={len(code.codewords)}")
    print(f"expected_length={_fmt(met.expected_length)}")
    print(f"divergence={_fmt(met.divergence)}")
    print(f"per_bit_divergence={_fmt(met.per_bit_divergence)}")
    print(f"entropy_rate={_fmt(met.entropy_rate)}")
    return 0


def cmd_encode(args) -> int:
    cfg = _matcher_config(args)
    cfg["seed"] = args.seed
    matcher = b2b.matcher_from_config(cfg, allow_undersized=args.allow_undersized)
    with open(args.infile, "rb") as fh:
        stream = b2b.unpack_bits(fh.read())
    m = matcher.m
    if stream.length % m:
        raise ValueError(f"input holds {stream.length} bits, not a multiple of m={m}")
    nblocks = stream.length // m
    rng = random.Random(args.seed)
    out_value = 0
    flags = []
    for i in range(nblocks):
        res = b2b.encode(matcher, _slice_bits(stream, i, m), rng)
        out_value = (out_value << matcher.n) | res.block.value
        flags.append(res.overflowed)
    with open(args.out, "wb") as fh:
        fh.write(b2b.pack_bits(Bits(nblocks * matcher.n, out_value)))
    sidecar = args.sidecar or args.out + ".sidecar.csv"
    with open(sidecar, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {_comment(cfg)}\n")
        fh.write("block,overflowed\n")
        for i, f in enumerate(flags):
            fh.write(f"{i},{int(f)}\n")
    overflowed = sum(flags)
    print(f"encoded {nblocks} blocks, {overflowed} overflowed")
    return 1 if overflowed else 0


def cmd_decode(args) -> int:
    cfg = _matcher_config(args)
    matcher = b2b.matcher_from_config(cfg, allow_undersized=args.allow_undersized)
    with open(args.infile, "rb") as fh:
        stream = b2b.unpack_bits(fh.read())
    n = matcher.n
    if stream.length % n:
        raise ValueError(f"input holds {stream.length} bits, not a multiple of n={n}")
    nblocks = stream.length // n
    out_value = 0
    errors = []
    for i in range(nblocks):
        try:
            decoded = b2b.decode(matcher, _slice_bits(stream, i, n))
            errors.append(False)
        except b2b.OverflowDetected:
            decoded = Bits(matcher.m, 0)  # error marker block; see sidecar
            errors.append(True)
        out_value = (out_value << matcher.m) | decoded.value
    with open(args.out, "wb") as fh:
        fh.write(b2b.pack_bits(Bits(nblocks * matcher.m, out_value)))
    sidecar = args.sidecar or args.out + ".sidecar.csv"
    with open(sidecar, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {_comment(cfg)}\n")
        fh.write("block,error\n")
        for i, e in enumerate(errors):
            fh.write(f"{i},{int(e)}\n")
    nerr = sum(errors)
    print(f"decoded {nblocks} blocks, {nerr} errors")
    return 1 if nerr else 0


def cmd_fig1(args) -> int:
    j_max = args.j_max if args.j_max is not None else args.m_max
    cfg = {"p0": args.p0, "m_max": args.m_max, "j_max": j_max,
           "format": args.format}
    target = TargetDistribution(args.p0)
    red, blue = analysis.fig1_data(target, range(1, args.m_max + 1),
                                   range(1, j_max + 1))
    if args.format == "csv":
        analysis.write_fig1_csv(args.out, red, blue, _comment(cfg))
    else:
        by_x = {}
        for p in red:
            by_x.setdefault(p.x, {"m": p.x})["red_divergence_per_bit"] = p.per_bit_divergence
        for p in blue:
            by_x.setdefault(p.x, {"m": p.x})["blue_divergence_per_bit"] = p.per_bit_divergence
        _write_json(args.out, cfg, [by_x[x] for x in sorted(by_x)])
    print(f"wrote {args.out}")
    return 0


def cmd_fig2(args) -> int:
    js = args.j or [5, 10]
    # workers is an execution detail: results are identical for any count,
    # so it is kept out of the recorded config
    cfg = {"p0": args.p0, "n": args.n, "j": js, "builder": args.builder,
           "format": args.format}
    target = TargetDistribution(args.p0)
    points = analysis.fig2_data(target, args.n, js, builder=args.builder,
                                workers=args.workers)
    _emit_points(args, cfg, points)
    print(f"wrote {args.out} ({len(points)} points)")
    return 0


def cmd_sweep(args) -> int:
    if args.k_min < 1 or args.k_max < args.k_min or args.k_step < 1:
        raise ValueError("need 1 <= k-min <= k-max and k-step >= 1")
    cfg = {"p0": args.p0, "j": args.j, "n": args.n, "k_min": args.k_min,
           "k_max": args.k_max, "k_step": args.k_step,
           "builder": args.builder, "format": args.format}
    code = _build_code(args)
    ks = range(args.k_min, args.k_max + 1, args.k_step)
    points = analysis.tradeoff_sweep(code, args.n, ks, workers=args.workers)
    _emit_points(args, cfg, points)
    print(f"wrote {args.out} ({len(points)} points)")
    return 0


def _emit_points(args, cfg, points) -> None:
    if args.format == "csv":
        analysis.write_fig2_csv(args.out, points, _comment(cfg))
    else:
        _write_json(args.out, cfg, [
            {"j": p.j, "k": p.k, "rate": p.rate, "rate_gap": p.rate_gap,
             "error_probability": p.error_probability,
             "divergence_bound": p.divergence_bound} for p in points])


def cmd_fano(args) -> int:
    if len(args.m) != len(args.n):
        raise ValueError("--m and --n must be given the same number of times")
    cfg = {"p0": args.p0, "m": args.m, "n": args.n, "format": args.format}
    target = TargetDistribution(args.p0)
    rows = [(m, n, analysis.fano_bound(m, n, target))
            for m, n in zip(args.m, args.n)]
    for m, n, bound in rows:
        print(f"m={m} n={n} bound={_fmt(bound)}")
    if args.out:
        if args.format == "csv":
            analysis.write_fano_csv(args.out, rows, _comment(cfg))
        else:
            _write_json(args.out, cfg,
                        [{"m": m, "n": n, "bound": b} for m, n, b in rows])
    return 0


def cmd_mc(args) -> int:
    cfg = _matcher_config(args)
    cfg.update({"seed": args.seed, "trials": args.trials})
    matcher = b2b.matcher_from_config(cfg, allow_undersized=args.allow_undersized)
    result = analysis.monte_carlo(matcher, args.trials, args.seed,
                                  workers=args.workers)
    try:
        exact = b2b.error_probability(matcher)
    except ResourceLimitError:
        exact = None
    freqs = result.bit_one_frequencies()
    mean_freq = float(freqs.mean()) if result.decoded_count else None
    print(f"trials={result.trials} errors={result.error_count} "
          f"fraction={_fmt(result.error_count / result.trials)}"
          + (f" exact={_fmt(exact)}" if exact is not None else ""))
    if args.out:
        doc = {"n": matcher.n, "m": matcher.m,
               "error_count": result.error_count,
               "error_fraction": result.error_count / result.trials,
               "exact_error_probability": exact,
               "decoded_count": result.decoded_count,
               "mean_bit_one_frequency": mean_freq}
        _write_json(args.out, cfg, [doc])
    return 0


def _add_target_args(p, with_builder=True):
    p.add_argument("--p0", type=float, required=True, help="target P(0), in (0,1)")
    if with_builder:
        p.add_argument("--builder", choices=("greedy", "exhaustive"),
                       default="greedy", help="f2v code builder")


def _add_matcher_args(p):
    _add_target_args(p)
    p.add_argument("--j", type=int, required=True, help="f2v input bits per block")
    p.add_argument("--k", type=int, required=True, help="f2v blocks per output block")
    p.add_argument("--n", type=int, default=None, help="output block length")
    p.add_argument("--epsilon", type=float, default=None,
                   help="threshold slack; n = ceil((1+epsilon)*k*E[len])")
    p.add_argument("--allow-undersized", action="store_true",
                   help="permit n below the overflow threshold k*E[len]")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="b2bmatch",
        description="Binary block-to-block distribution matching toolkit")
    ap.add_argument("--version", action="version", version=f"b2bmatch {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design-f2v", help="build an f2v code and report metrics")
    _add_target_args(p)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--out", default=None, help="write the code JSON here")
    p.set_defaults(func=cmd_design_f2v)

    p = sub.add_parser("encode", help="encode a bit-stream file into n-bit blocks")
    _add_matcher_args(p)
    p.add_argument("--seed", type=int, default=0, help="padding RNG seed")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sidecar", default=None, help="per-block overflow flags CSV")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode n-bit blocks back to m-bit blocks")
    _add_matcher_args(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sidecar", default=None, help="per-block error markers CSV")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("fig1", help="per-bit divergence: one-to-one vs f2v curves")
    _add_target_args(p, with_builder=False)
    p.add_argument("--m-max", type=int, default=12)
    p.add_argument("--j-max", type=int, default=None)
    p.add_argument("--out", default="fig1.csv")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("fig2", help="rate vs error-probability trade-off curves")
    _add_target_args(p)
    p.add_argument("--n", type=int, default=58320)
    p.add_argument("--j", type=int, action="append",
                   help="internal f2v size; repeatable (default: 5 and 10)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="fig2.csv")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("sweep", help="rate/error sweep over an explicit k range")
    _add_target_args(p)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k-min", type=int, required=True)
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--k-step", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="sweep.csv")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fano", help="converse bound on the error probability")
    _add_target_args(p, with_builder=False)
    p.add_argument("--m", type=int, action="append", required=True)
    p.add_argument("--n", type=int, action="append", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_fano)

    p = sub.add_parser("mc", help="Monte Carlo encode/decode cross-check")
    _add_matcher_args(p)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="write a JSON summary here")
    p.set_defaults(func=cmd_mc)

    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse printed its own message
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
