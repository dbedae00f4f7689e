import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from sampcomp.core import (BitString, DomainError, DyadicProb, MalformedPrefixError,
                           NoPrimeInRangeError, RngSeed, ceil_log2, prime_count, random_prime,
                           sd_decode, sd_decode_int, sd_encode, sd_encode_int, sd_length)

bits = st.text(alphabet="01", max_size=80).map(BitString)


class TestBitString:
    def test_length_and_equality_are_exact(self):
        assert BitString("0011") != BitString("011")
        assert len(BitString.from_int(3, 6)) == 6
        assert str(BitString.from_int(3, 6)) == "000011"

    def test_lexicographic_order(self):
        words = ["", "0", "00", "01", "1", "10", "11"]
        assert sorted(BitString(w) for w in reversed(words)) == [BitString(w) for w in words]

    def test_bytes_roundtrip(self):
        assert BitString.from_bytes(b"\xa5").to_bytes() == b"\xa5"
        assert str(BitString.from_bytes(b"\x80\x01")) == "1000000000000001"

    def test_slicing_and_concat(self):
        b = BitString("110010")
        assert b[1:4] == BitString("100")
        assert b[0] == 1 and b[-1] == 0
        assert b + BitString("1") == BitString("1100101")
        assert b.startswith(BitString("110"))

    def test_rejects_non_binary(self):
        with pytest.raises((DomainError, ValueError)):
            BitString("012")

    def test_binary_of_zero(self):
        assert BitString.binary(0) == BitString("0")
        assert BitString.binary(6) == BitString("110")


class TestDyadicProb:
    def test_parse_forms(self):
        assert DyadicProb.parse("2^-5").value == Fraction(1, 32)
        assert DyadicProb.parse("1/2^3").value == Fraction(1, 8)
        assert DyadicProb.parse("1/4").log2_inverse == 2
        assert DyadicProb.parse("1").value == 1

    @pytest.mark.parametrize("text", ["3/4", "1/3", "0", "2^3", "abc"])
    def test_rejects_non_dyadic(self, text):
        with pytest.raises(DomainError):
            DyadicProb.parse(text)

    def test_invariants(self):
        with pytest.raises(DomainError):
            DyadicProb(3, 2)
        assert DyadicProb(2, 5).value == Fraction(1, 8)


class TestRngSeed:
    def test_reproducible(self):
        a = RngSeed.from_hex("deadbeef").child("x").child(3)
        b = RngSeed.from_hex("0xDEADBEEF").child("x").child(3)
        assert a == b and a.bits(64) == b.bits(64)

    def test_labels_separate_streams(self):
        r = RngSeed(7)
        assert r.child("a").bits(64) != r.child("b").bits(64)

    def test_bad_hex(self):
        with pytest.raises(DomainError):
            RngSeed.from_hex("xyz")


class TestSelfDelimiting:
    def test_doubled_bit_example(self):
        assert sd_encode(BitString("101")) == BitString("111101101")

    def test_empty_payload(self):
        assert sd_encode(BitString("")) == BitString("0001")
        assert sd_decode(BitString("0001")) == (BitString(""), BitString(""))

    def test_decode_examples(self):
        assert sd_decode(BitString("111101101")) == (BitString("101"), BitString(""))
        assert sd_decode(BitString("11110110111")) == (BitString("101"), BitString("11"))

    @pytest.mark.parametrize("bad", ["10", "1101", "111", "01", "1111010"])
    def test_malformed(self, bad):
        with pytest.raises(MalformedPrefixError):
            sd_decode(BitString(bad))

    def test_length_formula_all_lengths(self):
        for n in range(1001):
            assert len(sd_encode(BitString.from_int(0, n))) == sd_length(n)
            # closed form for n >= 1: n + 2 ceil(log2(n + 1)) + 2
            if n:
                assert sd_length(n) == n + 2 * ceil_log2(n + 1) + 2

    def test_prefix_free_exhaustive(self):
        codes = [sd_encode(BitString("".join(p)))
                 for n in range(11) for p in itertools.product("01", repeat=n)]
        as_str = sorted(str(c) for c in codes)
        # in sorted order a prefix is always immediately followed by some extension of it
        for a, b in zip(as_str, as_str[1:]):
            assert not b.startswith(a)

    def test_random_roundtrips(self):
        gen = random.Random(1)
        for _ in range(1000):
            n, j = gen.randrange(41), gen.randrange(21)
            x = BitString.from_int(gen.getrandbits(n) if n else 0, n)
            junk = BitString.from_int(gen.getrandbits(j) if j else 0, j)
            assert sd_decode(sd_encode(x) + junk) == (x, junk)

    @given(bits, bits)
    @settings(max_examples=300, deadline=None)
    def test_roundtrip_property(self, x, junk):
        assert sd_decode(sd_encode(x) + junk) == (x, junk)

    @given(st.integers(min_value=0, max_value=10**30))
    def test_int_roundtrip(self, v):
        assert sd_decode_int(sd_encode_int(v) + BitString("1")) == (v, BitString("1"))


class TestPrimes:
    def test_two_primes_half_each(self):
        draws = [random_prime(2, 3, RngSeed(i)) for i in range(4000)]
        assert set(draws) == {2, 3}
        assert abs(draws.count(2) / 4000 - 0.5) < 0.03

    def test_no_prime(self):
        with pytest.raises(NoPrimeInRangeError):
            random_prime(24, 28, RngSeed(0))

    def test_uniform_over_primes_chi_square(self):
        primes = [p for p in range(100, 201) if all(p % q for q in range(2, int(p ** 0.5) + 1))]
        assert len(primes) == 21 == prime_count(100, 200)
        gen = random.Random(2024)
        counts = dict.fromkeys(primes, 0)
        for _ in range(100_000):
            counts[random_prime(100, 200, gen)] += 1
        assert chisquare(list(counts.values())).pvalue > 1e-3

    def test_large_interval_rejection_path(self):
        p = random_prime(10**12, 2 * 10**12, RngSeed(5))
        assert 10**12 <= p <= 2 * 10**12
        assert all(p % q for q in (2, 3, 5, 7, 11, 13))


def test_ceil_log2_exact():
    assert ceil_log2(1) == 0 and ceil_log2(2) == 1 and ceil_log2(3) == 2
    assert ceil_log2(Fraction(1, 8)) == -3 and ceil_log2(Fraction(3, 16)) == -2
