"""Seeded bipartite hash graphs standing in for lossless conductors.

Left nodes are n-bit strings, edges are labelled by d-bit seeds, right nodes
are m-bit strings.  The ``seeded-family`` kind is a multilinear
multiply-shift hash: x is cut into 32-bit chunks c_i and every (seed, output
block) pair owns random 64-bit keys a_i, b; the block value is the top 32
bits of (sum a_i c_i + b) mod 2^64.  Keys come from ``family_seed``, so the
function is fixed once the seed is.

Everything vectorises over numpy uint64, which limits right labels to 64
bits.  Left labels may be longer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .core import BitString, DomainError, RngSeed, SampCompError, ceil_log2

SEEDED, COMPOSE, IDENTITY = "seeded-family", "compose", "identity-seed"

# Stand-ins for the unspecified big-O constants in the parameter formulas.
CONSTANTS = {"bz_seed": 1, "bz_output": 1}

MAX_SEED_BITS = 20


class LengthMismatchError(SampCompError):
    pass


class InterfaceMismatchError(SampCompError):
    pass


class EnumerationBudgetError(SampCompError):
    pass


@dataclass(frozen=True)
class HashGraph:
    n_bits: int
    d_bits: int
    m_bits: int
    family_seed: int = 0
    kind: str = SEEDED
    outer: "HashGraph | None" = None
    inner: "HashGraph | None" = None

    def __post_init__(self):
        if self.kind not in (SEEDED, COMPOSE, IDENTITY):
            raise DomainError(f"unknown graph kind {self.kind!r}")
        if self.n_bits < 1 or self.d_bits < 0 or self.m_bits < 1:
            raise DomainError("graph dimensions out of range")
        if self.m_bits > 64:
            raise DomainError("right labels are limited to 64 bits")
        if self.kind == IDENTITY and self.m_bits != self.d_bits:
            raise DomainError("identity-seed graphs need m == d")
        if self.kind != COMPOSE and self.d_bits > MAX_SEED_BITS:
            raise DomainError(f"seed length {self.d_bits} too large to enumerate")

    @property
    def degree(self) -> int:
        return 1 << self.d_bits


def seeded_family(n: int, d: int, m: int, family_seed: int | RngSeed = 0) -> HashGraph:
    if isinstance(family_seed, RngSeed):
        family_seed = family_seed.seed
    return HashGraph(n, d, m, family_seed, SEEDED)


def identity_seed(n: int, d: int) -> HashGraph:
    return HashGraph(n, d, d, 0, IDENTITY)


def compose_graphs(outer: HashGraph, inner: HashGraph) -> HashGraph:
    """x, (y1, y2) -> outer(inner(x, y1), y2); seed bits are y1 then y2."""
    if inner.m_bits != outer.n_bits:
        raise InterfaceMismatchError(
            f"inner outputs {inner.m_bits} bits but outer expects {outer.n_bits}")
    return HashGraph(inner.n_bits, inner.d_bits + outer.d_bits, outer.m_bits,
                     0, COMPOSE, outer=outer, inner=inner)


######## evaluation ########

@lru_cache(maxsize=64)
def _keys(family_seed: int, d: int, blocks: int, chunks: int) -> np.ndarray:
    gen = np.random.Generator(np.random.PCG64(family_seed))
    return gen.integers(0, 1 << 64, size=(1 << d, blocks, chunks + 1), dtype=np.uint64, endpoint=False)


def graph_keys(g: HashGraph) -> np.ndarray:
    """Key array of a seeded-family graph, shape (2^d, blocks, chunks + 1); last column is b."""
    return _keys(g.family_seed, g.d_bits, -(-g.m_bits // 32), -(-g.n_bits // 32))


def _chunk(xs, n: int) -> np.ndarray:
    """Split n-bit left labels into 32-bit chunks (least significant first)."""
    count = -(-n // 32)
    if isinstance(xs, np.ndarray) and xs.dtype == np.uint64:
        lo = xs & np.uint64(0xFFFFFFFF)
        if count == 1:
            return lo[:, None]
        return np.stack([lo, xs >> np.uint64(32)], axis=1)
    out = np.empty((len(xs), count), dtype=np.uint64)
    for row, x in enumerate(xs):
        for i in range(count):
            out[row, i] = (x >> (32 * i)) & 0xFFFFFFFF
    return out


def _seeded_eval(g: HashGraph, xs, seeds: np.ndarray) -> np.ndarray:
    keys = graph_keys(g)[seeds]                        # (S, B, L+1)
    chunks = _chunk(xs, g.n_bits)                      # (N, L)
    with np.errstate(over="ignore"):
        acc = np.einsum("nl,sbl->nsb", chunks, keys[:, :, :-1], dtype=np.uint64,
                        casting="unsafe") + keys[None, :, :, -1]
    top = acc >> np.uint64(32)                          # (N, S, B)
    blocks = top.shape[2]
    out = np.zeros(top.shape[:2], dtype=np.uint64)
    # Concatenate blocks, then keep the leading m bits.
    width = 32 * blocks
    for b in range(blocks):
        shift = width - 32 * (b + 1) - (width - g.m_bits)
        part = top[:, :, b]
        if shift >= 0:
            out |= part << np.uint64(shift)
        else:
            out |= part >> np.uint64(-shift)
    if g.m_bits < 64:
        out &= np.uint64((1 << g.m_bits) - 1)
    return out


def evaluate_batch(g: HashGraph, xs, seeds=None) -> np.ndarray:
    """Right labels for every left label in ``xs`` and every seed in ``seeds``.

    ``xs`` is a sequence of ints (or a uint64 array when n <= 64); ``seeds``
    defaults to all 2^d seeds.  Returns a uint64 array of shape (len(xs), len(seeds)).
    """
    if seeds is None:
        seeds = np.arange(g.degree, dtype=np.uint64)
    seeds = np.asarray(seeds, dtype=np.uint64)
    if g.kind == SEEDED:
        return _seeded_eval(g, xs, seeds.astype(np.int64))
    if g.kind == IDENTITY:
        return np.broadcast_to(seeds, (len(xs), len(seeds))).copy()
    outer, inner = g.outer, g.inner
    y1 = seeds >> np.uint64(outer.d_bits)
    y2 = seeds & np.uint64((1 << outer.d_bits) - 1)
    mids = evaluate_batch(inner, xs)                   # (N, 2^d_inner)
    picked = mids[:, y1.astype(np.int64)]              # (N, S)
    flat = picked.reshape(-1)
    # outer seeds pair up element-wise with the inner outputs
    res = np.empty_like(flat)
    y2_rep = np.broadcast_to(y2, picked.shape).reshape(-1)
    for s in np.unique(y2_rep):
        mask = y2_rep == s
        res[mask] = evaluate_batch(outer, flat[mask], np.array([s], dtype=np.uint64))[:, 0]
    return res.reshape(picked.shape)


def evaluate(g: HashGraph, x: BitString, seed: BitString) -> BitString:
    if len(x) != g.n_bits or len(seed) != g.d_bits:
        raise LengthMismatchError(
            f"expected |x|={g.n_bits}, |seed|={g.d_bits}; got {len(x)}, {len(seed)}")
    xs = np.array([x.to_int()], dtype=np.uint64) if g.n_bits <= 64 else [x.to_int()]
    val = evaluate_batch(g, xs, [seed.to_int()])[0, 0]
    return BitString.from_int(int(val), g.m_bits)


######## parameter arithmetic ########

@dataclass(frozen=True)
class ConductorParams:
    d: int
    m: int
    kind: str

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise DomainError("conductor parameters must be positive")


def _clog(x) -> int:
    return max(0, ceil_log2(x))


def conductor_params(kind: str, n: int, t_max: int, eps) -> ConductorParams:
    """Seed and output lengths with base-2 logs rounded up and constants from CONSTANTS.

    ``t_max == 1`` falls back to the seed-only conductor for every kind.
    """
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    if not 1 <= t_max <= n:
        raise DomainError(f"need 1 <= t_max <= n, got t_max={t_max}, n={n}")
    if t_max == 1:
        d = max(1, _clog(1 / eps))
        return ConductorParams(d, d, IDENTITY)
    if kind == "GUV":
        d = _clog(n) + _clog(t_max) + _clog(1 / eps) + 1
        return ConductorParams(d, d * (t_max + 2), kind)
    if kind == "BZ":
        d = max(1, CONSTANTS["bz_seed"] * _clog(Fraction(n) / eps) * _clog(t_max))
        return ConductorParams(d, t_max + CONSTANTS["bz_output"] * d, kind)
    if kind == "composed":
        guv = conductor_params("GUV", n, t_max, eps)
        bz = conductor_params("BZ", guv.m, t_max + guv.d, eps)
        return ConductorParams(guv.d + bz.d, bz.m, kind)
    raise DomainError(f"unknown conductor kind {kind!r}")


######## condenser oracle ########

def output_distribution(g: HashGraph, S, max_evals: int = 1 << 22) -> dict[int, Fraction]:
    """Exact law of g(U_S, U_seed) as {right label: probability}."""
    S = sorted(S)
    if not S:
        raise DomainError("S must be non-empty")
    if len(S) * g.degree > max_evals:
        raise EnumerationBudgetError(f"|S| * 2^d = {len(S) * g.degree} exceeds {max_evals}")
    xs = [s.to_int() if isinstance(s, BitString) else s for s in S]
    if g.n_bits <= 64:
        xs = np.array(xs, dtype=np.uint64)
    vals, counts = np.unique(evaluate_batch(g, xs), return_counts=True)
    total = len(S) * g.degree
    return {int(v): Fraction(int(c), total) for v, c in zip(vals, counts)}


def condenser_deficit(g: HashGraph, S, t_prime: int, max_evals: int = 1 << 22) -> Fraction:
    """Statistical distance from g(U_S, U_seed) to the nearest source of min-entropy t_prime."""
    if t_prime > g.m_bits:
        raise DomainError("t' exceeds the output length")
    cap = Fraction(1, 1 << t_prime) if t_prime >= 0 else Fraction(1 << -t_prime)
    dist = output_distribution(g, S, max_evals)
    return sum((p - cap for p in dist.values() if p > cap), Fraction(0))


def neighbourhood_size(g: HashGraph, S) -> int:
    xs = [s.to_int() if isinstance(s, BitString) else s for s in S]
    if g.n_bits <= 64:
        xs = np.array(xs, dtype=np.uint64)
    return len(np.unique(evaluate_batch(g, xs)))


def greedy_adversarial_set(g: HashGraph, size: int, rng: RngSeed, pool: int = 256) -> list[int]:
    """Grow a left set by always adding the candidate whose neighbours overlap most."""
    gen = rng.stream()
    cands = sorted({gen.getrandbits(g.n_bits) for _ in range(pool)})
    arr = np.array(cands, dtype=np.uint64) if g.n_bits <= 64 else cands
    table = evaluate_batch(g, arr)
    chosen = [0]
    covered = set(table[0].tolist())
    while len(chosen) < min(size, len(cands)):
        best, best_hits = None, -1
        for i in range(len(cands)):
            if i in chosen:
                continue
            hits = sum(1 for v in table[i].tolist() if v in covered)
            if hits > best_hits:
                best, best_hits = i, hits
        chosen.append(best)
        covered.update(table[best].tolist())
    return [cands[i] for i in chosen]


######## descriptor files ########

def describe(g: HashGraph) -> dict:
    out = {"kind": g.kind, "n": g.n_bits, "d": g.d_bits, "m": g.m_bits,
           "family_seed": f"{g.family_seed:x}"}
    if g.kind == COMPOSE:
        out["outer"] = describe(g.outer)
        out["inner"] = describe(g.inner)
    return out


def from_description(desc: dict) -> HashGraph:
    kind = desc["kind"]
    if kind == COMPOSE:
        g = compose_graphs(from_description(desc["outer"]), from_description(desc["inner"]))
    else:
        g = HashGraph(int(desc["n"]), int(desc["d"]), int(desc["m"]),
                      int(desc["family_seed"], 16), kind)
    if (g.n_bits, g.d_bits, g.m_bits) != (int(desc["n"]), int(desc["d"]), int(desc["m"])):
        raise DomainError("descriptor dimensions disagree with its composition tree")
    return g


def dumps(g: HashGraph) -> str:
    return json.dumps(describe(g), indent=2, sort_keys=True) + "\n"


def loads(text: str) -> HashGraph:
    return from_description(json.loads(text))
