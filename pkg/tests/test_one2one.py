import math
from fractions import Fraction

import pytest

from b2bmatch.core import Bits, ResourceLimitError, TargetDistribution
from b2bmatch import one2one

P0_GRID = (0.6, 0.7, 0.8, 0.9)


def enumerate_top_divergence(m, n, p0):
    """Test-local oracle: sort all 2**n sequences by probability, take the
    top 2**m, evaluate the per-bit divergence directly."""
    lp0, lp1 = math.log2(p0), math.log2(1 - p0)

    def logprob(v):
        w = v.bit_count()
        return w * lp1 + (n - w) * lp0

    top = sorted(range(1 << n), key=lambda v: (-logprob(v), v))[: 1 << m]
    return math.fsum(2.0 ** -m * (-m - logprob(v)) for v in top) / n, top


class TestDivergenceForN:
    def test_m2_n3_p08(self):
        t = TargetDistribution(0.8)
        d, code = one2one.divergence_for_n(2, 3, t)
        assert code.weight_plan == ((0, 1), (1, 3))
        assert d == pytest.approx(0.155261428221, abs=1e-9)
        assert d * 3 == pytest.approx(0.465784284662, abs=1e-9)
        # codebook == the 4 most probable of 8 sequences
        expect, top = enumerate_top_divergence(2, 3, 0.8)
        assert d == pytest.approx(expect, abs=1e-13)
        assert sorted(top) == [0b000, 0b001, 0b010, 0b100]

    def test_m2_n2_full_codebook(self):
        d, code = one2one.divergence_for_n(2, 2, TargetDistribution(0.8))
        assert sum(c for _, c in code.weight_plan) == 4
        assert d == pytest.approx(0.321928094887, abs=1e-9)
        assert d * 2 == pytest.approx(0.643856189775, abs=1e-9)

    def test_identity_capacity(self):
        d, _ = one2one.divergence_for_n(3, 3, TargetDistribution(0.5))
        assert d == 0.0

    def test_rejects_m_above_n(self):
        with pytest.raises(ValueError):
            one2one.divergence_for_n(3, 2, TargetDistribution(0.8))

    @pytest.mark.parametrize("p0", P0_GRID)
    def test_matches_enumeration(self, p0):
        t = TargetDistribution(p0)
        for m in (1, 2, 3):
            for n in range(m, m + 5):
                d, _ = one2one.divergence_for_n(m, n, t)
                expect, _ = enumerate_top_divergence(m, n, p0)
                assert d == pytest.approx(expect, abs=1e-13)


class TestDesign:
    def test_m2_p08(self):
        code = one2one.design(2, TargetDistribution(0.8))
        assert code.n == 3
        assert one2one.per_bit_divergence(code) == pytest.approx(
            0.155261428221, abs=1e-9)

    def test_m1_uniform(self):
        code = one2one.design(1, TargetDistribution(0.5))
        assert code.n == 1
        assert one2one.per_bit_divergence(code) == 0.0

    def test_m1_p08_ties_resolve_to_smallest_n(self):
        # per-bit divergence is exactly constant over n here
        code = one2one.design(1, TargetDistribution(0.8))
        assert code.n == 1

    @pytest.mark.parametrize("p0", P0_GRID)
    def test_agrees_with_brute_force_oracle(self, p0):
        t = TargetDistribution(p0)
        for m in (1, 2, 3, 4):
            code = one2one.design(m, t)
            _, expect = one2one.brute_force_oracle(m, t)
            assert one2one.per_bit_divergence(code) == pytest.approx(
                expect, abs=1e-12)


class TestBruteForceOracle:
    def test_examples(self):
        n, d = one2one.brute_force_oracle(2, TargetDistribution(0.8))
        assert (n, d) == (3, pytest.approx(0.155261428221, abs=1e-9))
        assert one2one.brute_force_oracle(1, TargetDistribution(0.5)) == (1, 0.0)

    def test_frozen_regression_m3_p08(self):
        # value computed by this oracle pre-build and frozen
        n, d = one2one.brute_force_oracle(3, TargetDistribution(0.8))
        assert n == 7
        assert d == pytest.approx(0.1433566663159338, abs=1e-12)

    def test_guard(self):
        with pytest.raises(ResourceLimitError):
            one2one.brute_force_oracle(5, TargetDistribution(0.8))


class TestCodec:
    def test_encode_examples(self):
        _, code = one2one.divergence_for_n(2, 3, TargetDistribution(0.8))
        assert one2one.encode(code, Bits.from01("00")).to01() == "000"
        assert one2one.encode(code, Bits.from01("01")).to01() == "001"
        assert one2one.encode(code, Bits.from01("11")).to01() == "100"

    def test_decode_examples(self):
        _, code = one2one.divergence_for_n(2, 3, TargetDistribution(0.8))
        assert one2one.decode(code, Bits.from01("000")).to01() == "00"
        assert one2one.decode(code, Bits.from01("100")).to01() == "11"
        with pytest.raises(one2one.NotInCodebookError):
            one2one.decode(code, Bits.from01("111"))

    def test_length_validation(self):
        _, code = one2one.divergence_for_n(2, 3, TargetDistribution(0.8))
        with pytest.raises(ValueError):
            one2one.encode(code, Bits.from01("0"))
        with pytest.raises(ValueError):
            one2one.decode(code, Bits.from01("0000"))

    def test_partial_class_takes_lexicographically_smallest(self):
        _, code = one2one.divergence_for_n(2, 4, TargetDistribution(0.8))
        assert code.weight_plan == ((0, 1), (1, 3))
        got = [one2one.encode(code, Bits(2, r)).to01() for r in range(4)]
        assert got == ["0000", "0001", "0010", "0100"]
        with pytest.raises(one2one.NotInCodebookError):
            one2one.decode(code, Bits.from01("1000"))  # beyond the partial class

    @pytest.mark.parametrize("p0", P0_GRID)
    def test_round_trip_exhaustive(self, p0):
        t = TargetDistribution(p0)
        for m in range(1, 11):
            code = one2one.design(m, t)
            for r in range(1 << m):
                b = Bits(m, r)
                assert one2one.decode(code, one2one.encode(code, b)) == b


class TestWeightPlan:
    @pytest.mark.parametrize("p0", (0.5, 0.6, 0.8, 0.9))
    def test_probability_monotone(self, p0):
        t = TargetDistribution(p0)
        for m in (2, 4, 6):
            code = one2one.design(m, t)
            f0, f1 = t.exact0, t.exact1
            n = code.n
            probs = [f1 ** w * f0 ** (n - w) for w, _ in code.weight_plan]
            # taken classes in non-increasing probability order, exactly
            for a, b in zip(probs, probs[1:]):
                assert a >= b
            taken = {w for w, _ in code.weight_plan}
            untaken = [f1 ** w * f0 ** (n - w)
                       for w in range(n + 1) if w not in taken]
            if untaken:
                assert min(probs) >= max(untaken)

    def test_plan_validation(self):
        t = TargetDistribution(0.8)
        with pytest.raises(ValueError):  # wrong total
            one2one.One2OneCode(2, 3, t, [(0, 1), (1, 2)])
        with pytest.raises(ValueError):  # count above class size
            one2one.One2OneCode(2, 3, t, [(0, 2), (1, 2)])
        with pytest.raises(ValueError):  # partial class not last
            one2one.One2OneCode(3, 3, t, [(0, 1), (1, 2), (2, 3), (3, 1)])
        with pytest.raises(ValueError):  # wrong class order
            one2one.One2OneCode(2, 3, t, [(1, 3), (0, 1)])


class TestSerialization:
    def test_json_round_trip(self):
        code = one2one.design(6, TargetDistribution(0.8))
        back = one2one.from_json(one2one.to_json(code))
        assert back == code
        assert one2one.to_json(back) == one2one.to_json(code)

    def test_counts_are_strings(self):
        code = one2one.design(2, TargetDistribution(0.8))
        assert '"1"' in one2one.to_json(code)
