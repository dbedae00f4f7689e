from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from sampcomp.core import BitString, DomainError, RngSeed
from sampcomp.sampler import (BudgetExceededError, BytecodeError, SamplerSpec, Tape,
                              TapeExhaustedError, biased_bit, build_suspects, builtin_samplers,
                              coin_count, declared_distribution, dyadic_table, execute,
                              format_sampler, heavy_target, micro_vm, parse_sampler,
                              prg_stretch, run_sampler, sample_many, toy_prg, uniform_subset)


def frequencies(spec, n, count, seed):
    outs, _ = sample_many(spec, n, count, RngSeed(seed))
    c = Counter(outs)
    return {BitString.from_int(v, n): k / count for v, k in c.items()}


def test_uniform_subset_frequencies():
    freq = frequencies(uniform_subset(["0000", "1111"]), 4, 10_000, 1)
    assert set(freq) == {BitString("0000"), BitString("1111")}
    assert all(abs(f - 0.5) < 0.02 for f in freq.values())


def test_dyadic_table_frequencies():
    table = {"00": Fraction(1, 2), "01": Fraction(1, 4), "10": Fraction(1, 4)}
    freq = frequencies(dyadic_table(table), 2, 10_000, 2)
    for s, p in table.items():
        assert abs(freq[BitString(s)] - p) < 0.02


@pytest.mark.parametrize("name", list(builtin_samplers()))
def test_builtin_matches_declared_distribution(name):
    spec, n = builtin_samplers()[name]
    dist = declared_distribution(spec, n)
    assert sum(dist.values()) == 1
    freq = frequencies(spec, n, 4000, 3)
    assert set(freq) <= set(dist)
    # the five heaviest strings: 4 standard errors at 4000 draws is below 0.032
    for x, p in sorted(dist.items(), key=lambda kv: -kv[1])[:5]:
        assert abs(freq.get(x, 0) - float(p)) < 0.032


def test_prg_support_is_seed_image():
    spec = prg_stretch()
    for n in (8, 12, 16):
        image = {toy_prg(spec.params[0], z, n) for z in range(1 << (n // 2))}
        assert len(image) <= 1 << (n // 2)
        outs, _ = sample_many(spec, n, 300, RngSeed(n))
        assert set(outs) <= image


def test_prg_seed_enumeration_at_24_bits():
    spec = prg_stretch()
    image = {toy_prg(spec.params[0], z, 24) for z in range(1 << 12)}
    outs, _ = sample_many(spec, 24, 200, RngSeed(9))
    assert set(outs) <= image


def test_step_determinism_and_budget():
    for name, (spec, n) in builtin_samplers().items():
        a = run_sampler(spec, n, RngSeed(11))
        b = run_sampler(spec, n, RngSeed(11))
        assert a == b
        assert len(a.output) == n
        assert a.steps <= spec.step_budget(n)


def test_analytic_step_formulas():
    assert run_sampler(uniform_subset(["0000", "1111"]), 4, RngSeed(0)).steps == 1 + 4
    assert run_sampler(biased_bit(Fraction(3, 4)), 4, RngSeed(0)).steps == 4 * 3
    assert run_sampler(dyadic_table({"0": Fraction(1, 2), "1": Fraction(1, 2)}), 1, RngSeed(0)).steps == 2
    assert run_sampler(prg_stretch(), 8, RngSeed(0)).steps == 4 + 4 * 8 + 8


def test_budget_exceeded():
    tight = SamplerSpec("uniform-subset", uniform_subset(["00", "11"]).params, (0, 1))
    with pytest.raises(BudgetExceededError):
        run_sampler(tight, 2, RngSeed(0))
    loop = micro_vm(bytes([0x05, 0x00]), (1, 10))
    with pytest.raises(BudgetExceededError):
        run_sampler(loop, 4, RngSeed(0))


def test_micro_vm_instructions():
    # EMIT1, EMIT0, LIT8 0xF0, COPY 2
    code = bytes([0x02, 0x01, 0x07, 0xF0, 0x04, 0x02])
    out = run_sampler(micro_vm(code), 11, RngSeed(0)).output
    assert out == BitString("10111100000")
    # HALT pads with zeros
    assert run_sampler(micro_vm(bytes([0x02, 0x00])), 4, RngSeed(0)).output == BitString("1000")
    with pytest.raises(BytecodeError):
        run_sampler(micro_vm(bytes([0x09])), 2, RngSeed(0))


def test_heavy_target_distribution():
    x = BitString("1011001110001111")
    dist = declared_distribution(heavy_target(x), 16)
    assert dist[x] == Fraction(1, 2) + Fraction(1, 2 ** 17)
    assert len(dist) == 1 << 16


def test_tape_coin_source():
    spec = dyadic_table({"00": Fraction(1, 2), "01": Fraction(1, 4), "10": Fraction(1, 4)})
    assert coin_count(spec, 2) == 2
    seen = {execute(spec, 2, Tape(BitString.from_int(w, 2)))[0] for w in range(4)}
    assert seen == {0, 1, 2}
    with pytest.raises(TapeExhaustedError):
        execute(spec, 2, Tape(BitString("1")))


def test_wrong_length_rejected():
    with pytest.raises(DomainError):
        run_sampler(uniform_subset(["0000", "1111"]), 5, RngSeed(0))


def test_non_power_of_two_support_rejected():
    with pytest.raises(DomainError):
        uniform_subset(["00", "01", "10"])


def test_table_must_sum_to_one():
    with pytest.raises(DomainError):
        dyadic_table({"0": Fraction(1, 2), "1": Fraction(1, 4)})


class TestSuspects:
    def test_constant_sampler(self):
        spec = uniform_subset(["0110"])
        assert build_suspects(spec, 4, 50, RngSeed(1)) == {BitString("0110")}

    def test_k_one(self):
        spec = uniform_subset(["00", "01", "10", "11"])
        assert len(build_suspects(spec, 2, 1, RngSeed(2))) == 1

    def test_miss_rate_matches_formula(self):
        spec = uniform_subset([BitString.from_int(v, 4) for v in range(16)])
        x = BitString("0101")
        trials = 10_000
        misses = sum(x not in build_suspects(spec, 4, 64, RngSeed(7).child(i))
                     for i in range(trials))
        expected = (15 / 16) ** 64
        assert abs(expected - 0.0160) < 5e-4
        assert abs(misses / trials - expected) < 0.005


class TestSerialization:
    @pytest.mark.parametrize("name", list(builtin_samplers()))
    def test_code_bits_roundtrip(self, name):
        spec, _ = builtin_samplers()[name]
        assert SamplerSpec.from_code_bits(spec.code_bits) == spec

    @pytest.mark.parametrize("name", list(builtin_samplers()))
    def test_config_roundtrip(self, name):
        spec, _ = builtin_samplers()[name]
        assert parse_sampler(format_sampler(spec)) == spec

    def test_config_errors(self):
        with pytest.raises(DomainError):
            parse_sampler("[sampler]\nkind = nope\n")
        with pytest.raises(DomainError):
            parse_sampler("no section here")
        with pytest.raises(DomainError):
            parse_sampler("[sampler]\nkind = biased-bit\np = 1/3\n")

    @given(st.sets(st.text("01", min_size=5, max_size=5), min_size=1, max_size=8))
    @settings(max_examples=50, deadline=None)
    def test_uniform_subset_roundtrip_property(self, items):
        items = sorted(items)[: 1 << (len(items).bit_length() - 1)]
        spec = uniform_subset(items)
        assert SamplerSpec.from_code_bits(spec.code_bits) == spec
