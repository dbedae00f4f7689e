"""Distinguishing structured inputs from uniform ones with a compressor.

A compressor that is both short and correct on samples from a structured
source gives a test: accept y when some probability guess delta' yields a
codeword within the length budget that decodes back to y within the step
budget.  Uniform strings rarely pass; by counting, at most 2^(k+1) strings of
length n have any codeword of length at most k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .codec import compress, decompress_traced
from .core import BitString, DomainError, DyadicProb, RngSeed, sd_encode
from .sampler import SamplerSpec, run_sampler

# Constant C in the default length budget (1 + gamma) log2(1/delta') + C (log2 n)^C.
BUDGET_CONSTANT = 3


@dataclass
class CompressorUnderTest:
    """A compressor/decompressor pair.

    ``compress_fn(y, delta, rng)`` returns the codeword bits;
    ``decompress_fn(code, rng)`` returns (output or None, steps).
    """

    compress_fn: Callable[[BitString, DyadicProb, RngSeed], BitString]
    decompress_fn: Callable[[BitString, RngSeed], tuple[BitString | None, int]]
    name: str = "compressor"


def codec_under_test(spec: SamplerSpec, eps) -> CompressorUnderTest:
    """The library codec wired to a known sampler."""
    from .codec import Codeword

    def comp(y, delta, rng):
        return compress(y, delta, eps, rng).to_bits()

    def decomp(code_bits, rng):
        tr = decompress_traced(spec, Codeword.from_bits(code_bits), rng)
        return tr.output, tr.steps

    return CompressorUnderTest(comp, decomp, f"codec[{spec.kind}]")


def default_length_budget(n: int, gamma: float = 0.0, constant: int = BUDGET_CONSTANT) -> Callable[[DyadicProb], float]:
    polylog = constant * max(1.0, math.log2(n)) ** constant
    return lambda delta: (1 + gamma) * delta.log2_inverse + polylog


def counting_bound(n: int, k: int) -> Fraction:
    """Fraction of n-bit strings that can have a description of at most k bits."""
    return min(Fraction(1), Fraction(2 ** (k + 1), 2 ** n))


@dataclass
class Verdict:
    accepted: bool
    q: int | None
    code_length: int | None
    steps: int | None


def distinguish(y: BitString, cut: CompressorUnderTest, ell: int,
                length_budget: Callable[[DyadicProb], float], step_budget: int,
                rng: RngSeed) -> Verdict:
    """Try delta' = 2^q / 2^ell for q = 0..ell; accept on the first success.

    The same compressor and decompressor randomness is used for every guess.
    """
    if not 0 <= ell <= len(y) // 2:
        raise DomainError(f"ell must lie in [0, |y|/2], got {ell}")
    c_rng, d_rng = rng.child("compress"), rng.child("decompress")
    for q in range(ell + 1):
        delta = DyadicProb.pow2(ell - q)
        code = cut.compress_fn(y, delta, c_rng)
        if len(code) > length_budget(delta):
            continue
        out, steps = cut.decompress_fn(code, d_rng)
        if out == y and steps <= step_budget:
            return Verdict(True, q, len(code), steps)
    return Verdict(False, None, None, None)


@dataclass
class DistinguisherReport:
    n: int
    trials: int
    structured_rate: float
    uniform_rate: float
    per_q: dict[int, list[int]] = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return self.structured_rate - self.uniform_rate

    def record(self) -> dict:
        return {"n": self.n, "trials": self.trials, "structured_rate": self.structured_rate,
                "uniform_rate": self.uniform_rate, "gap": self.gap,
                "accepted_at_q": {str(q): v for q, v in sorted(self.per_q.items())}}


def run_distinguisher(spec: SamplerSpec, n: int, cut: CompressorUnderTest, trials: int,
                      rng: RngSeed, ell: int | None = None,
                      length_budget: Callable[[DyadicProb], float] | None = None,
                      step_budget: int | None = None) -> DistinguisherReport:
    """Acceptance rates on sampler outputs versus uniform n-bit strings.

    ``per_q[q]`` counts (structured, uniform) acceptances at each guess.
    """
    ell = n // 2 if ell is None else ell
    length_budget = length_budget or default_length_budget(n)
    step_budget = step_budget if step_budget is not None else 1 << 30
    per_q: dict[int, list[int]] = {}
    hits = [0, 0]
    for i in range(trials):
        structured = run_sampler(spec, n, rng.child(("sample", i))).output
        uniform = BitString.from_int(rng.child(("uniform", i)).stream().getrandbits(n), n)
        for col, y in enumerate((structured, uniform)):
            v = distinguish(y, cut, ell, length_budget, step_budget, rng.child(("run", col, i)))
            if v.accepted:
                hits[col] += 1
                per_q.setdefault(v.q, [0, 0])[col] += 1
    return DistinguisherReport(n, trials, hits[0] / trials, hits[1] / trials, per_q)


def kraft_audit(codewords) -> Fraction:
    """Sum of 2^-|sd(c)| over the codewords; at most 1 for any distinct population."""
    return sum((Fraction(1, 1 << len(sd_encode(c))) for c in set(codewords)), Fraction(0))


def recovered_strings(decode_fn: Callable[[BitString], BitString | None], k: int, n: int) -> set[BitString]:
    """Distinct n-bit outputs of ``decode_fn`` over every codeword of at most k bits."""
    found = set()
    for length in range(k + 1):
        for v in range(1 << length):
            out = decode_fn(BitString.from_int(v, length))
            if out is not None and len(out) == n:
                found.add(out)
    return found
