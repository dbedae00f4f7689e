"""Sequential estimate of the probability that a sampler outputs a given string."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .codec import Codeword, compress
from .core import BitString, DomainError, DyadicProb, RngSeed, ceil_log2
from .sampler import SamplerSpec, execute

SUCCESS, CAP_HIT = "success-count", "cap-hit"


@dataclass(frozen=True)
class Estimate:
    p_tilde: Fraction
    calls: int
    mode: str
    successes_needed: int


def successes_needed(eps) -> int:
    """ceil(4 * log2(1/eps))."""
    eps = Fraction(eps)
    exact = 4 * math.log2(1 / eps)
    return math.ceil(exact - 1e-12)


def call_cap(n: int, eps) -> int:
    return 2 * successes_needed(eps) * (1 << n)


def estimate_probability(spec: SamplerSpec, x: BitString, eps, rng: RngSeed) -> Estimate:
    """Sample until x has appeared s times (return s/T) or 2*s*2^n calls pass (return 2^-n)."""
    eps = Fraction(eps)
    if not 0 < eps < Fraction(1, 2):
        raise DomainError("eps must lie in (0, 1/2)")
    n = len(x)
    s = successes_needed(eps)
    cap = call_cap(n, eps)
    target = x.to_int()
    coins = rng.stream()
    hits = 0
    for calls in range(1, cap + 1):
        value, _ = execute(spec, n, coins)
        if value == target:
            hits += 1
            if hits == s:
                return Estimate(Fraction(s, calls), calls, SUCCESS, s)
    return Estimate(Fraction(1, 1 << n), cap, CAP_HIT, s)


def delta_from_estimate(est: Estimate) -> DyadicProb:
    """Largest power of two not above p_tilde / 2."""
    return DyadicProb.pow2(ceil_log2(2 / est.p_tilde))


def estimate_then_compress(spec: SamplerSpec, x: BitString, eps, rng: RngSeed) -> tuple[Estimate, Codeword]:
    est = estimate_probability(spec, x, eps, rng.child("estimate"))
    return est, compress(x, delta_from_estimate(est), eps, rng.child("compress"))
