import json
import random

import pytest

from b2bmatch import b2b, f2v
from b2bmatch.cli import main
from b2bmatch.core import Bits, TargetDistribution


def run(*args):
    return main([str(a) for a in args])


def write_stream(path, bits: Bits):
    path.write_bytes(b2b.pack_bits(bits))


def read_stream(path) -> Bits:
    return b2b.unpack_bits(path.read_bytes())


class TestDesignF2v:
    def test_reports_metrics_and_writes_code(self, tmp_path, capsys):
        out = tmp_path / "code.json"
        assert run("design-f2v", "--p0", 0.8, "--j", 2, "--out", out) == 0
        text = capsys.readouterr().out
        assert "per_bit_divergence=0.0997058726651" in text
        assert "expected_length=2.25" in text
        assert "entropy_rate=0.888888888889" in text
        code = f2v.from_json(out.read_text())
        assert code == f2v.build_greedy(2, TargetDistribution(0.8))

    def test_uniform_target_zero_divergence(self, capsys):
        assert run("design-f2v", "--p0", 0.5, "--j", 3) == 0
        assert "divergence=0" in capsys.readouterr().out

    def test_exhaustive_builder_matches_greedy_here(self, tmp_path):
        a, b_ = tmp_path / "a.json", tmp_path / "b.json"
        run("design-f2v", "--p0", 0.8, "--j", 2, "--out", a)
        run("design-f2v", "--p0", 0.8, "--j", 2, "--builder", "exhaustive", "--out", b_)
        assert a.read_bytes() == b_.read_bytes()


class TestCodecCommands:
    def test_round_trip_1000_blocks(self, tmp_path):
        m_bits = 100  # j=2, k=50
        rng = random.Random(0)
        payload = Bits(1000 * m_bits, rng.getrandbits(1000 * m_bits))
        src = tmp_path / "in.bits"
        enc = tmp_path / "enc.bits"
        dec = tmp_path / "dec.bits"
        write_stream(src, payload)
        assert run("encode", "--p0", 0.8, "--j", 2, "--k", 50,
                   "--epsilon", 0.2, "--seed", 0,
                   "--in", src, "--out", enc) == 0
        sidecar = (tmp_path / "enc.bits.sidecar.csv").read_text().splitlines()
        assert sidecar[1] == "block,overflowed"
        assert all(line.endswith(",0") for line in sidecar[2:])
        assert len(sidecar) == 2 + 1000
        assert run("decode", "--p0", 0.8, "--j", 2, "--k", 50,
                   "--epsilon", 0.2, "--in", enc, "--out", dec) == 0
        assert read_stream(dec) == payload

    def test_identity_transport(self, tmp_path):
        payload = Bits.from01("101100111000")
        src, enc, dec = tmp_path / "a", tmp_path / "b", tmp_path / "c"
        write_stream(src, payload)
        assert run("encode", "--p0", 0.8, "--j", 1, "--k", 4, "--n", 4,
                   "--in", src, "--out", enc) == 0
        assert read_stream(enc) == payload
        assert run("decode", "--p0", 0.8, "--j", 1, "--k", 4, "--n", 4,
                   "--in", enc, "--out", dec) == 0
        assert read_stream(dec) == payload

    def test_forced_overflow_exits_nonzero(self, tmp_path):
        src, enc, dec = tmp_path / "a", tmp_path / "b", tmp_path / "c"
        write_stream(src, Bits.from01("00"))  # encodes to 000, n=2 truncates
        rc = run("encode", "--p0", 0.8, "--j", 2, "--k", 1, "--n", 2,
                 "--allow-undersized", "--in", src, "--out", enc,
                 "--sidecar", tmp_path / "flags.csv")
        assert rc == 1
        assert (tmp_path / "flags.csv").read_text().splitlines()[2] == "0,1"
        rc = run("decode", "--p0", 0.8, "--j", 2, "--k", 1, "--n", 2,
                 "--allow-undersized", "--in", enc, "--out", dec,
                 "--sidecar", tmp_path / "errs.csv")
        assert rc == 1
        assert (tmp_path / "errs.csv").read_text().splitlines()[2] == "0,1"

    def test_stream_length_mismatch(self, tmp_path):
        src = tmp_path / "a"
        write_stream(src, Bits.from01("000"))  # not a multiple of m=4
        assert run("encode", "--p0", 0.8, "--j", 2, "--k", 2, "--n", 5,
                   "--in", src, "--out", tmp_path / "b") == 2

    def test_encode_deterministic_for_seed(self, tmp_path):
        src = tmp_path / "a"
        write_stream(src, Bits(40, random.Random(5).getrandbits(40)))
        outs = []
        for name in ("e1", "e2"):
            out = tmp_path / name
            assert run("encode", "--p0", 0.8, "--j", 2, "--k", 2,
                       "--epsilon", 0.5, "--seed", 9,
                       "--in", src, "--out", out,
                       "--sidecar", tmp_path / (name + ".csv")) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestConfigErrors:
    def test_both_n_and_epsilon(self, tmp_path):
        src = tmp_path / "a"
        write_stream(src, Bits.from01("0000"))
        assert run("encode", "--p0", 0.8, "--j", 2, "--k", 2, "--n", 5,
                   "--epsilon", 0.1, "--in", src, "--out", tmp_path / "b") == 2

    def test_neither_n_nor_epsilon(self, tmp_path):
        src = tmp_path / "a"
        write_stream(src, Bits.from01("0000"))
        assert run("encode", "--p0", 0.8, "--j", 2, "--k", 2,
                   "--in", src, "--out", tmp_path / "b") == 2

    def test_bad_p0(self):
        assert run("design-f2v", "--p0", 1.5, "--j", 2) == 2

    def test_unknown_flag(self):
        assert run("design-f2v", "--p0", 0.8, "--j", 2, "--frobnicate") == 2

    def test_missing_subcommand(self):
        assert run() == 2

    def test_undersized_without_flag(self, tmp_path):
        src = tmp_path / "a"
        write_stream(src, Bits.from01("00"))
        assert run("encode", "--p0", 0.8, "--j", 2, "--k", 1, "--n", 2,
                   "--in", src, "--out", tmp_path / "b") == 2

    def test_resource_limit_exit_code(self):
        assert run("design-f2v", "--p0", 0.8, "--j", 25) == 3

    def test_help_exits_zero(self):
        assert run("--help") == 0
        assert run("encode", "--help") == 0


class TestFigureCommands:
    def test_fig1(self, tmp_path):
        out = tmp_path / "fig1.csv"
        assert run("fig1", "--p0", 0.8, "--m-max", 4, "--out", out) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# b2bmatch ")
        assert lines[1] == "m,red_divergence_per_bit,blue_divergence_per_bit"
        assert len(lines) == 2 + 4

    def test_fig1_defaults_j_max_to_m_max(self, tmp_path):
        out = tmp_path / "fig1.csv"
        assert run("fig1", "--p0", 0.8, "--m-max", 3, "--out", out) == 0
        rows = out.read_text().splitlines()[2:]
        assert all("nan" not in r for r in rows)

    def test_fig2_small(self, tmp_path):
        out = tmp_path / "fig2.csv"
        assert run("fig2", "--p0", 0.8, "--n", 400, "--j", 2, "--j", 3,
                   "--out", out) == 0
        lines = out.read_text().splitlines()
        assert lines[1] == "j,k,rate,rate_gap,error_probability,divergence_bound"
        assert {r.split(",")[0] for r in lines[2:]} == {"2", "3"}

    def test_fano_prints_and_writes(self, tmp_path, capsys):
        out = tmp_path / "fano.csv"
        assert run("fano", "--p0", 0.8, "--m", 100, "--n", 200,
                   "--m", 100, "--n", 100, "--out", out) == 0
        text = capsys.readouterr().out
        assert "m=100 n=200 bound=0" in text
        lines = out.read_text().splitlines()
        assert lines[1] == "m,n,bound"
        assert len(lines) == 4

    def test_fano_mismatched_pairs(self):
        assert run("fano", "--p0", 0.8, "--m", 100) == 2

    def test_fano_json_format(self, tmp_path):
        out = tmp_path / "fano.json"
        assert run("fano", "--p0", 0.8, "--m", 100, "--n", 200,
                   "--out", out, "--format", "json") == 0
        doc = json.loads(out.read_text())
        assert doc["rows"] == [{"m": 100, "n": 200, "bound": 0.0}]

    def test_sweep(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert run("sweep", "--p0", 0.8, "--j", 2, "--n", 50,
                   "--k-min", 5, "--k-max", 20, "--out", out) == 0
        assert len(out.read_text().splitlines()) == 2 + 16

    def test_sweep_validation(self, tmp_path):
        assert run("sweep", "--p0", 0.8, "--j", 2, "--n", 50,
                   "--k-min", 5, "--k-max", 4, "--out", tmp_path / "s.csv") == 2


class TestDeterminism:
    def test_fig2_workers_identical_bytes(self, tmp_path):
        outs = []
        for name, workers in (("a", 1), ("b", 4), ("c", 4)):
            out = tmp_path / f"{name}.csv"
            assert run("fig2", "--p0", 0.8, "--n", 300, "--j", 2,
                       "--workers", workers, "--out", out) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] == outs[2]

    def test_mc_workers_identical_bytes(self, tmp_path):
        outs = []
        for name, workers in (("a", 1), ("b", 4), ("c", 4)):
            out = tmp_path / f"{name}.json"
            assert run("mc", "--p0", 0.8, "--j", 2, "--k", 2, "--n", 6,
                       "--trials", 9000, "--seed", 3, "--workers", workers,
                       "--out", out) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] == outs[2]


class TestMc:
    def test_summary_matches_exact(self, tmp_path, capsys):
        out = tmp_path / "mc.json"
        assert run("mc", "--p0", 0.8, "--j", 2, "--k", 1, "--n", 2,
                   "--allow-undersized", "--trials", 10000, "--seed", 0,
                   "--out", out) == 0
        doc = json.loads(out.read_text())
        row = doc["rows"][0]
        assert row["exact_error_probability"] == 0.5
        assert abs(row["error_fraction"] - 0.5) < 0.02
        assert row["decoded_count"] == 10000 - row["error_count"]
