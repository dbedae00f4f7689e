"""Two-stage fingerprints and their inverter.

A fingerprint of x is a right node ``y = g(x, rho)`` of a hash graph plus a
residue of x modulo a random prime.  Given a suspect set S containing x, the
inverter first prunes S to a short list using only y (the seed rho is not
transmitted, so every seed is tried), then returns the first survivor whose
residue matches.

Serialized layout (all widths are functions of |x|, k and eps only)::

    sd(d) | f1 (m bits) | sd(w) | prime (w bits) | residue (w bits)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .conductor import HashGraph, evaluate_batch, identity_seed, seeded_family
from .core import (BitString, DomainError, RngSeed, SampCompError, ceil_log2,
                   random_prime, sd_decode_int, sd_encode_int, sd_length)

GRAPH_FAMILY_SEED = 0x9E3779B97F4A7C15


class RecursionCapExceededError(SampCompError):
    pass


@dataclass(frozen=True)
class PrimeHash:
    prime: int
    residue: int


@dataclass(frozen=True)
class Fingerprint:
    f1: BitString
    f2: PrimeHash
    k: int
    n: int
    d: int
    width: int
    seed_used: BitString | None = field(default=None, compare=False)

    def to_bits(self) -> BitString:
        return (sd_encode_int(self.d) + self.f1 + sd_encode_int(self.width)
                + BitString.from_int(self.f2.prime, self.width)
                + BitString.from_int(self.f2.residue, self.width))

    @classmethod
    def from_bits(cls, bits: BitString, n: int, k: int) -> tuple["Fingerprint", BitString]:
        d, rest = sd_decode_int(bits)
        m = graph_output_bits(k, d)
        if len(rest) < m:
            raise DomainError("fingerprint truncated in f1")
        f1, rest = rest[:m], rest[m:]
        width, rest = sd_decode_int(rest)
        if len(rest) < 2 * width:
            raise DomainError("fingerprint truncated in prime hash")
        prime = rest[:width].to_int()
        residue = rest[width:2 * width].to_int()
        if prime < 2 or residue >= prime:
            raise DomainError("fingerprint carries an invalid prime hash")
        return cls(f1, PrimeHash(prime, residue), k, n, d, width), rest[2 * width:]

    def __len__(self) -> int:
        return len(self.to_bits())


######## parameters ########

def seed_bits(eps) -> int:
    return max(1, ceil_log2(1 / Fraction(eps)))


def graph_output_bits(k: int, d: int) -> int:
    # Small suspect sets use the seed-only graph; otherwise leave d extra bits of
    # room above k + d so that a random graph is lossless up to error about eps.
    return d if k <= 1 else k + 2 * d


def fingerprint_graph(n: int, k: int, d: int) -> HashGraph:
    if k <= 1:
        return identity_seed(n, d)
    return seeded_family(n, d, graph_output_bits(k, d), GRAPH_FAMILY_SEED ^ (n << 40) ^ (k << 20) ^ d)


def list_bound(set_size: int, r: int) -> int:
    """Maximum length of a pruned list: (1 + ceil(log2 |S|)) * 2^(r+1)."""
    return (1 + max(0, ceil_log2(max(1, set_size)))) * (1 << (r + 1))


def prime_floor(s: int, n: int, eps) -> int:
    return max(3, math.ceil(Fraction(4 * s * n) / Fraction(eps)))


def hash_width(s: int, n: int, eps) -> int:
    return (2 * prime_floor(s, n, eps)).bit_length()


def competitors(k: int, d: int) -> int:
    return (1 + k) * (1 << (d + 1))


def fingerprint_length(n: int, k: int, eps) -> int:
    """Serialized length for any x of length n; the overhead over k is ``fingerprint_length - k``."""
    d = seed_bits(eps)
    w = hash_width(competitors(k, d), n, eps)
    return sd_length(d.bit_length()) + graph_output_bits(k, d) + sd_length(w.bit_length()) + 2 * w


def precision_term(n: int, k: int, eps) -> float:
    """log n + (log log 2^k + log 1/eps) * log log 2^k, all base 2."""
    loglog = math.log2(k) if k > 1 else 0.0
    return math.log2(n) + (loglog + math.log2(1 / Fraction(eps))) * loglog


######## prime stage ########

def prime_hash(x: BitString, s: int, eps, rng: RngSeed) -> PrimeHash:
    if s < 1:
        raise DomainError("s must be at least 1")
    lo = prime_floor(s, len(x), eps)
    p = random_prime(lo, 2 * lo, rng)
    return PrimeHash(p, x.to_int() % p)


######## fingerprint ########

def _check(x: BitString, k: int, eps):
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    if not 0 <= k <= len(x):
        raise DomainError(f"k={k} outside [0, |x|={len(x)}]")
    return eps


def fingerprint_with(x: BitString, k: int, eps, seed: int, prime: int) -> Fingerprint:
    """Deterministic fingerprint for explicit randomness (conductor seed, prime)."""
    eps = _check(x, k, eps)
    n = len(x)
    d = seed_bits(eps)
    g = fingerprint_graph(n, k, d)
    xs = np.array([x.to_int()], dtype=np.uint64) if n <= 64 else [x.to_int()]
    y = int(evaluate_batch(g, xs, [seed])[0, 0])
    width = hash_width(competitors(k, d), n, eps)
    return Fingerprint(BitString.from_int(y, g.m_bits), PrimeHash(prime, x.to_int() % prime),
                       k, n, d, width, BitString.from_int(seed, d))


def fingerprint(x: BitString, k: int, eps, rng: RngSeed) -> Fingerprint:
    eps = _check(x, k, eps)
    d = seed_bits(eps)
    seed = rng.child("conductor-seed").stream().getrandbits(d)
    ph = prime_hash(x, competitors(k, d), eps, rng.child("prime"))
    return fingerprint_with(x, k, eps, seed, ph.prime)


def fingerprint_primes(n: int, k: int, eps) -> tuple[int, int]:
    """Interval [P, 2P] the fingerprint prime is drawn from."""
    d = seed_bits(eps)
    lo = prime_floor(competitors(k, d), n, eps)
    return lo, 2 * lo


######## pruning ########

@dataclass
class PruneReport:
    levels: int = 0
    evaluations: int = 0
    level_sizes: list[int] = field(default_factory=list)
    capped: bool = False


def _as_array(xs: list[int], n: int):
    return np.array(xs, dtype=np.uint64) if n <= 64 else xs


def heavy_nodes(g: HashGraph, xs: list[int], r: int, eps, table=None) -> list[int]:
    """Left nodes with more than a 2*eps fraction of neighbours hit more than 2^(r+1) times."""
    if not xs:
        return []
    if table is None:
        table = evaluate_batch(g, _as_array(xs, g.n_bits))
    _, inverse, counts = np.unique(table, return_inverse=True, return_counts=True)
    heavy = counts[inverse.reshape(table.shape)] > (1 << (r + 1))
    frac = heavy.mean(axis=1)
    keep = frac > 2 * float(eps)
    return [x for x, flag in zip(xs, keep.tolist()) if flag]


def prune_ints(g: HashGraph, xs: list[int], y: int, r: int, eps,
               report: PruneReport | None = None, strict: bool = False) -> list[int]:
    """Pruning on sorted integer labels; see ``prune_suspects``."""
    report = report if report is not None else PruneReport()
    bound = list_bound(len(xs), r)
    take = 1 << (r + 1)
    out: list[int] = []
    current = xs
    while current:
        if report.levels >= g.n_bits:
            report.capped = True
            break
        report.levels += 1
        report.level_sizes.append(len(current))
        table = evaluate_batch(g, _as_array(current, g.n_bits))
        report.evaluations += table.size
        hits = (table == np.uint64(y)).any(axis=1)
        nbrs = [x for x, h in zip(current, hits.tolist()) if h]
        out.extend(nbrs[:take])
        if len(nbrs) <= take:
            break
        nxt = heavy_nodes(g, current, r, eps, table)
        if len(nxt) == len(current):
            # No shrinkage: further levels would repeat this one up to the cap.
            report.capped = True
            break
        current = nxt
    if report.capped and strict:
        raise RecursionCapExceededError(
            f"pruning did not terminate within {g.n_bits} levels; graph is not lossless on this set")
    seen = set()
    uniq = []
    for x in out:
        if x not in seen:
            seen.add(x)
            uniq.append(x)
    return uniq[:bound]


def prune_suspects(g: HashGraph, S, y: BitString, r: int, eps, strict: bool = False) -> list[BitString]:
    """Short list of suspects that are left neighbours of y, via recursive heavy-node removal.

    Suspects are scanned in lexicographic order.  The result never exceeds
    (1 + ceil(log2 |S|)) * 2^(r+1) entries.  If the recursion stalls, the list
    collected so far is returned (or ``RecursionCapExceededError`` is raised
    when ``strict``).
    """
    if len(y) != g.m_bits:
        raise DomainError(f"right node has {len(y)} bits, graph outputs {g.m_bits}")
    xs = sorted(s.to_int() for s in S)
    n = g.n_bits
    return [BitString.from_int(v, n) for v in prune_ints(g, xs, y.to_int(), r, eps, strict=strict)]


######## inversion ########

@dataclass
class InvertTrace:
    output: BitString | None
    pruned: int
    report: PruneReport
    steps: int


def eval_cost(g: HashGraph) -> int:
    return g.n_bits + g.m_bits


def invert_ints(xs: list[int], fp: Fingerprint) -> InvertTrace:
    g = fingerprint_graph(fp.n, fp.k, fp.d)
    report = PruneReport()
    pruned = prune_ints(g, xs, fp.f1.to_int(), g.d_bits, Fraction(1, 1 << fp.d), report)
    steps = report.evaluations * eval_cost(g)
    found = None
    for c in pruned:
        steps += fp.n
        if c % fp.f2.prime == fp.f2.residue:
            found = BitString.from_int(c, fp.n)
            break
    return InvertTrace(found, len(pruned), report, steps)


def invert(S, fp: Fingerprint) -> BitString | None:
    """The first pruned suspect whose residue matches, or None."""
    xs = sorted(s.to_int() for s in S if len(s) == fp.n)
    return invert_ints(xs, fp).output
