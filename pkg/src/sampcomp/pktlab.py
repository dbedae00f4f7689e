"""Toy laboratory for probabilistic time-bounded Kolmogorov complexity.

The toy machine reads a program bit string and a random tape.  Instructions
(prefix-free opcodes)::

    00 b            literal: append bit b
    01              random: append the next unread tape bit
    100 cc          repeat: append the last output bit cc+1 more times (0 if none)
    101             copy: append a copy of the whole output so far
    11 ii lll v     run sampler ii of the registry on tape block v, where v has
                    lll bits and block v is tape[v*T : (v+1)*T] with T the
                    sampler's coin count

A program halts when its bits are used up.  Step costs: literal, random and
copy-of-nothing cost 1; repeat costs cc+1; copy costs the output length;
running a sampler costs lll plus the sampler's own steps.  The tape and the
time bound share the length t, as in the definition of pK^t.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product

import numpy as np

from .core import BitString, DomainError, RngSeed, SampCompError
from .sampler import (SamplerSpec, Tape, biased_bit, coin_count, declared_distribution,
                      dyadic_table, execute, uniform_subset)

# Calibrated constants, pinned once (see tests/test_pktlab.py for the calibration).
THM_CONSTANT = 4      # pK^t(x) <= log2(1/delta) + THM_CONSTANT * log2(T)
LEMMA_CONSTANT = 4    # K(x) <= pK^t(x) + LEMMA_CONSTANT * ceil(log2 |x|)
DOMINATION_CONSTANT = 4  # m^t(x) >= D(x) / |x|^c for the registry samplers
THRESHOLD = Fraction(2, 3)
MAX_PROGRAM_BITS = 12


class NotFoundWithinKMaxError(SampCompError):
    pass


class CapExceededError(SampCompError):
    pass


class SupportMismatchError(SampCompError):
    pass


@dataclass(frozen=True)
class MicroProgram:
    bits: BitString

    @classmethod
    def parse(cls, text: str) -> "MicroProgram":
        return cls(BitString(text.replace(" ", "")))


@dataclass(frozen=True)
class PktResult:
    k: int
    witness_fraction: Fraction
    exhaustive: bool


######## decoding and execution ########

@lru_cache(maxsize=1 << 16)
def decode(bits: str) -> tuple | None:
    """Instruction list for a program, or None if the bits end mid-instruction."""
    ops = []
    i, n = 0, len(bits)
    while i < n:
        head = bits[i:i + 2]
        if len(head) < 2:
            return None
        if head == "00":
            if i + 3 > n:
                return None
            ops.append(("lit", int(bits[i + 2])))
            i += 3
        elif head == "01":
            ops.append(("rnd",))
            i += 2
        elif head == "10":
            if i + 3 > n:
                return None
            if bits[i + 2] == "1":
                ops.append(("copy",))
                i += 3
            else:
                if i + 5 > n:
                    return None
                ops.append(("rep", int(bits[i + 3:i + 5], 2) + 1))
                i += 5
        else:
            if i + 7 > n:
                return None
            idx = int(bits[i + 2:i + 4], 2)
            ell = int(bits[i + 4:i + 7], 2)
            if i + 7 + ell > n:
                return None
            v = int(bits[i + 7:i + 7 + ell], 2) if ell else 0
            ops.append(("run", idx, ell, v))
            i += 7 + ell
    return tuple(ops)


class _Lookup:
    """Coin source reading fixed tape positions from a lookup function."""

    def __init__(self, read, start: int):
        self.read = read
        self.pos = start

    def getrandbits(self, k: int) -> int:
        v = 0
        for _ in range(k):
            v = (v << 1) | self.read(self.pos)
            self.pos += 1
        return v


class _OffTape(Exception):
    pass


@dataclass(frozen=True)
class ToyMachine:
    """The universal toy machine with a registry of up to four samplers."""

    registry: tuple[tuple[str, SamplerSpec, int], ...]

    def __post_init__(self):
        if len(self.registry) > 4:
            raise DomainError("the registry holds at most four samplers")
        for name, spec, n in self.registry:
            if coin_count(spec, n) is None:
                raise DomainError(f"registry sampler {name} needs a fixed coin count")

    def block_width(self, idx: int) -> int:
        _, spec, n = self.registry[idx]
        return coin_count(spec, n)

    def layout(self, ops) -> tuple[int, list[int]] | None:
        """(output length, tape positions read) for a decoded program; None if invalid."""
        out_len = 0
        reads: list[int] = []
        ptr = 0
        for op in ops:
            if op[0] == "lit":
                out_len += 1
            elif op[0] == "rnd":
                reads.append(ptr)
                ptr += 1
                out_len += 1
            elif op[0] == "rep":
                out_len += op[1]
            elif op[0] == "copy":
                out_len *= 2
            else:
                _, idx, _, v = op
                if idx >= len(self.registry):
                    return None
                width = self.block_width(idx)
                reads.extend(range(v * width, (v + 1) * width))
                out_len += self.registry[idx][2]
        return out_len, reads

    def run(self, ops, read, limit: int | None) -> tuple[int, int] | None:
        """Execute decoded ``ops`` reading tape bits through ``read(pos)``.

        Returns (output as int, output length) or None when the step limit is
        passed or the tape runs out.
        """
        out = 0
        out_len = 0
        steps = 0
        ptr = 0
        try:
            for op in ops:
                kind = op[0]
                if kind == "lit":
                    out = (out << 1) | op[1]
                    out_len += 1
                    steps += 1
                elif kind == "rnd":
                    out = (out << 1) | read(ptr)
                    ptr += 1
                    out_len += 1
                    steps += 1
                elif kind == "rep":
                    last = out & 1 if out_len else 0
                    for _ in range(op[1]):
                        out = (out << 1) | last
                    out_len += op[1]
                    steps += op[1]
                elif kind == "copy":
                    out = (out << out_len) | out
                    steps += max(1, out_len)
                    out_len *= 2
                else:
                    _, idx, ell, v = op
                    _, spec, n = self.registry[idx]
                    width = coin_count(spec, n)
                    value, s_steps = execute(spec, n, _Lookup(read, v * width))
                    out = (out << n) | value
                    out_len += n
                    steps += ell + s_steps
                if limit is not None and steps > limit:
                    return None
        except _OffTape:
            return None
        return out, out_len

    def run_program(self, program: MicroProgram, tape: BitString, limit: int | None) -> BitString | None:
        ops = decode(str(program.bits))
        if ops is None or self.layout(ops) is None:
            return None
        t_bits, t_len = tape.to_int(), len(tape)

        def read(pos):
            if pos >= t_len:
                raise _OffTape
            return (t_bits >> (t_len - 1 - pos)) & 1

        res = self.run(ops, read, limit)
        return None if res is None else BitString.from_int(*res)


def default_machine() -> ToyMachine:
    return ToyMachine(tuple(PKT_SAMPLERS.items_for_registry()))


class _Registry(dict):
    def items_for_registry(self):
        return [(name, spec, n) for name, (spec, n) in self.items()]


PKT_SAMPLERS = _Registry({
    "pair": (dyadic_table({"00": Fraction(1, 2), "01": Fraction(1, 4), "10": Fraction(1, 4)}), 2),
    "skew3": (dyadic_table({"000": Fraction(1, 2), "011": Fraction(1, 4),
                            "101": Fraction(1, 8), "110": Fraction(1, 8)}), 3),
    "uniform3": (biased_bit(Fraction(1, 2)), 3),
    "twins": (uniform_subset(["0101", "1010"]), 4),
})


######## brute-force pK^t ########

@lru_cache(maxsize=None)
def _programs_of_length(k: int) -> tuple[tuple[str, tuple], ...]:
    out = []
    for v in range(1 << k):
        bits = format(v, f"0{k}b")
        ops = decode(bits)
        if ops is not None:
            out.append((bits, ops))
    return tuple(out)


def _witness_cubes(machine: ToyMachine, ops, x: BitString, t: int) -> list[tuple[list[int], int]] | None:
    """Tape cubes (positions, values packed in read order) on which the program prints x.

    Returns [] if it never does, or None when it prints x on every tape.
    """
    lay = machine.layout(ops)
    if lay is None or lay[0] != len(x):
        return []
    positions = sorted(set(lay[1]))
    if positions and positions[-1] >= t:
        return []
    target = x.to_int()
    if not positions:
        res = machine.run(ops, lambda pos: 0, t)
        return None if res is not None and res[0] == target else []
    cubes = []
    index = {p: i for i, p in enumerate(positions)}
    width = len(positions)
    for assignment in range(1 << width):
        def read(pos, a=assignment):
            return (a >> (width - 1 - index[pos])) & 1
        res = machine.run(ops, read, t)
        if res is not None and res[0] == target:
            cubes.append((positions, assignment))
    return cubes


def _tapes(t: int, w_budget: int, rng: RngSeed) -> tuple[np.ndarray, bool]:
    if t <= 16:
        return np.arange(1 << t, dtype=np.uint64), True
    if t > 64:
        raise DomainError("sampled tapes are limited to 64 bits")
    gen = rng.stream()
    return np.array([gen.getrandbits(t) for _ in range(w_budget)], dtype=np.uint64), False


def _mark(covered: np.ndarray, tapes: np.ndarray, t: int, positions: list[int], assignment: int):
    mask = 0
    value = 0
    width = len(positions)
    for i, p in enumerate(positions):
        mask |= 1 << (t - 1 - p)
        if (assignment >> (width - 1 - i)) & 1:
            value |= 1 << (t - 1 - p)
    covered |= (tapes & np.uint64(mask)) == np.uint64(value)


def pkt_brute_force(x: BitString, t: int, k_max: int, w_budget: int, rng: RngSeed,
                    machine: ToyMachine | None = None) -> PktResult:
    """Least k <= k_max such that at least 2/3 of tapes admit a program of at most k bits printing x within t steps.

    Tapes have t bits; they are enumerated when t <= 16 and ``w_budget`` of
    them are sampled otherwise.
    """
    if k_max > MAX_PROGRAM_BITS:
        raise DomainError(f"k_max is limited to {MAX_PROGRAM_BITS}")
    machine = machine or default_machine()
    tapes, exhaustive = _tapes(t, w_budget, rng)
    covered = np.zeros(len(tapes), dtype=bool)
    for k in range(1, k_max + 1):
        for _, ops in _programs_of_length(k):
            cubes = _witness_cubes(machine, ops, x, t)
            if cubes is None:
                return PktResult(k, Fraction(1), exhaustive)
            for positions, assignment in cubes:
                _mark(covered, tapes, t, positions, assignment)
        frac = Fraction(int(covered.sum()), len(tapes))
        if frac >= THRESHOLD:
            return PktResult(k, frac, exhaustive)
    raise NotFoundWithinKMaxError(f"no k <= {k_max} reaches 2/3 for x={x}, t={t}")


######## time-unbounded deterministic complexity ########

def k_toy(x: BitString) -> int:
    """Shortest tape-free program printing x (literal, repeat and copy only), by shortest path."""
    s = str(x)
    n = len(s)
    best = [math.inf] * (n + 1)
    best[0] = 0
    heap = [(0, 0)]
    while heap:
        cost, i = heapq.heappop(heap)
        if cost > best[i]:
            continue
        moves = []
        if i < n:
            moves.append((i + 1, 3))
        last = s[i - 1] if i else "0"
        for c in range(1, 5):
            if i + c <= n and s[i:i + c] == last * c:
                moves.append((i + c, 5))
        if 0 < i and 2 * i <= n and s[i:2 * i] == s[:i]:
            moves.append((2 * i, 3))
        for j, w in moves:
            if cost + w < best[j]:
                best[j] = cost + w
                heapq.heappush(heap, (cost + w, j))
    return int(best[n])


def k_toy_brute(x: BitString, k_max: int = MAX_PROGRAM_BITS) -> int | None:
    """Same quantity by enumerating every tape-free program of at most k_max bits."""
    target = x.to_int()
    for k in range(1, k_max + 1):
        for _, ops in _programs_of_length(k):
            if any(op[0] in ("rnd", "run") for op in ops):
                continue
            out_len = 0
            for op in ops:
                out_len = out_len * 2 if op[0] == "copy" else out_len + (op[1] if op[0] == "rep" else 1)
            if out_len != len(x):
                continue
            res = ToyMachine(()).run(ops, lambda pos: 0, None)
            if res[0] == target:
                return k
    return None


######## hitting family ########

def print_probability(program: MicroProgram, x: BitString, T: int,
                      machine: ToyMachine | None = None) -> Fraction:
    """Exact probability over a uniform T-bit tape that the program prints x."""
    machine = machine or default_machine()
    hits = sum(machine.run_program(program, BitString.from_int(w, T), None) == x for w in range(1 << T))
    return Fraction(hits, 1 << T)


def hitting_experiment(program: MicroProgram, x: BitString, ell: int, T: int, trials: int,
                       rng: RngSeed, machine: ToyMachine | None = None) -> Fraction:
    """Fraction of random functions H: {0,1}^ell -> {0,1}^T with some v where the program on tape H(v) prints x."""
    machine = machine or default_machine()
    if (1 << ell) * T > 1 << 22:
        raise DomainError("2^ell * T too large to enumerate")
    gen = rng.stream()
    cache: dict[int, bool] = {}

    def prints(w: int) -> bool:
        if w not in cache:
            cache[w] = machine.run_program(program, BitString.from_int(w, T), None) == x
        return cache[w]

    wins = 0
    for _ in range(trials):
        wins += any(prints(gen.getrandbits(T)) for _ in range(1 << ell))
    return Fraction(wins, trials)


def hitting_probability(delta, ell: int) -> Fraction:
    return 1 - (1 - Fraction(delta)) ** (1 << ell)


######## the universal semi-distribution and its sampler ########

@dataclass(frozen=True)
class Poly:
    coeffs: tuple[int, ...]  # constant term first

    def __call__(self, n: int) -> int:
        return sum(c * n ** i for i, c in enumerate(self.coeffs))


def pick_length(gen, cap: int) -> int:
    """n with probability proportional to 1/(n(n+1)), conditioned on n <= cap."""
    while True:
        u = 1.0 - gen.random()
        n = int(1 / u)
        if 1 <= n <= cap:
            return n


def m_sampler(poly: Poly, d: int, rng: RngSeed, n_cap: int = 8,
              machine: ToyMachine | None = None) -> BitString | None:
    """One draw of the dominating sampler; None when the drawn program fails."""
    machine = machine or default_machine()
    gen = rng.stream()
    n = pick_length(gen, n_cap)
    j = gen.randrange(1, n + d + 1)
    t = poly(n)
    w = BitString.from_int(gen.getrandbits(t), t)
    program = MicroProgram(BitString.from_int(gen.getrandbits(j), j))
    return machine.run_program(program, w, t)


def m_sampler_bound(n: int, d: int, k0: int) -> Fraction:
    return THRESHOLD * Fraction(1, 1 << k0) / (n * (n + 1) * (n + d))


def m_weight(x: BitString, t: int, rng: RngSeed, w_budget: int = 4096,
             machine: ToyMachine | None = None) -> Fraction:
    """2^-pK^t(x)."""
    return Fraction(1, 1 << pkt_brute_force(x, t, MAX_PROGRAM_BITS, w_budget, rng, machine).k)


def domination_check(D: dict, Dprime: dict, c: int) -> bool:
    """True iff D(x) >= Dprime(x) / |x|^c at every x of the shared support."""
    if set(D) != set(Dprime):
        raise SupportMismatchError("distributions are over different supports")
    return all(Fraction(D[x]) * max(1, len(x)) ** c >= Fraction(Dprime[x]) for x in D)


######## batteries ########

@dataclass(frozen=True)
class BatteryEntry:
    sampler: str
    x: BitString
    delta: Fraction
    t: int


def parse_battery(text: str) -> list[BatteryEntry]:
    """Lines of ``sampler x delta t``; '#' starts a comment."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise DomainError(f"battery line {lineno}: expected 4 fields, got {len(parts)}")
        name, x, delta, t = parts
        if name not in PKT_SAMPLERS:
            raise DomainError(f"battery line {lineno}: unknown sampler {name!r}")
        out.append(BatteryEntry(name, BitString(x), Fraction(delta), int(t)))
    return out


def default_battery() -> list[BatteryEntry]:
    entries = []
    for name, (spec, n) in PKT_SAMPLERS.items():
        coins = coin_count(spec, n)
        for x, p in declared_distribution(spec, n).items():
            ell = max(0, math.ceil(math.log2(1 / p)))
            # room for the hitting family: 2^(ell+1) blocks of the sampler's coins
            t = max(16, (1 << (ell + 1)) * max(1, coins))
            entries.append(BatteryEntry(name, x, p, min(t, 64)))
    return entries


def sampler_time(name: str) -> int:
    spec, n = PKT_SAMPLERS[name]
    coins = coin_count(spec, n)
    _, steps = execute(spec, n, Tape(BitString.from_int(0, coins)))
    return steps


def run_battery(entries: list[BatteryEntry], rng: RngSeed, w_budget: int = 4096,
                machine: ToyMachine | None = None) -> list[dict]:
    machine = machine or default_machine()
    rows = []
    for i, e in enumerate(entries):
        res = pkt_brute_force(e.x, e.t, MAX_PROGRAM_BITS, w_budget, rng.child(i), machine)
        T = sampler_time(e.sampler)
        log_inv = math.log2(1 / e.delta)
        kt = k_toy(e.x)
        thm_rhs = log_inv + THM_CONSTANT * math.log2(T)
        lemma_rhs = res.k + LEMMA_CONSTANT * math.ceil(math.log2(len(e.x)))
        rows.append({
            "sampler": e.sampler, "x": str(e.x), "delta": str(e.delta), "t": e.t,
            "pkt": res.k, "witness_fraction": float(res.witness_fraction),
            "exhaustive": res.exhaustive, "sampler_time": T, "k_toy": kt,
            "coding_bound": round(thm_rhs, 3), "coding_ok": res.k <= thm_rhs,
            "lemma_bound": lemma_rhs, "lemma_ok": kt <= lemma_rhs,
        })
    return rows


def format_table(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    widths = {c: max(len(c), *(len(str(r[c])) for r in rows)) for c in cols}
    lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
    for r in rows:
        lines.append("  ".join(str(r[c]).ljust(widths[c]) for c in cols))
    return "\n".join(lines) + "\n"
