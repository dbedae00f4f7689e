"""Step-counted samplers.

A sampler is described by a frozen ``SamplerSpec`` and executed against a
source of coins (anything with ``getrandbits``).  Built-in kinds have closed
form step counts; the ``micro-vm`` kind runs user bytecode and counts one
step per instruction (eight for ``LIT8``).

Bytecode reference for ``micro-vm`` (one opcode byte, optional operand byte):

    00 HALT        stop; output is zero-padded to n bits
    01 EMIT0       append 0
    02 EMIT1       append 1
    03 FLIP        append one coin
    04 COPY a      append the bit a positions back (0 if absent)
    05 JMP a       jump to byte address a
    06 COIN a      read a coin, jump to a when it is 1
    07 LIT8 v      append the 8 bits of v, most significant first

Execution stops as soon as n bits have been written.
"""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Protocol

from .core import (BitString, DomainError, RngSeed, SampCompError, sd_decode,
                   sd_decode_int, sd_encode, sd_encode_int)

KINDS = ("uniform-subset", "biased-bit", "dyadic-table", "prg-stretch", "micro-vm")
PRG_ROUNDS = 4


class BudgetExceededError(SampCompError):
    pass


class EnumerationBudgetError(SampCompError):
    pass


class CoinSource(Protocol):
    def getrandbits(self, k: int) -> int: ...


class TapeExhaustedError(SampCompError):
    pass


class Tape:
    """Coins read sequentially from a fixed bit string."""

    def __init__(self, bits: BitString):
        self.bits = bits
        self.pos = 0

    def getrandbits(self, k: int) -> int:
        if self.pos + k > len(self.bits):
            raise TapeExhaustedError(f"tape of {len(self.bits)} bits exhausted")
        out = self.bits[self.pos:self.pos + k].to_int()
        self.pos += k
        return out


@dataclass(frozen=True)
class SamplerSpec:
    kind: str
    params: tuple
    budget: tuple[int, int] = field(default=(0, 0))  # steps <= a*n + b

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown sampler kind {self.kind!r}")

    def step_budget(self, n: int) -> int:
        a, b = self.budget
        return a * n + b

    @property
    def code_bits(self) -> BitString:
        return sd_encode(BitString.from_int(KINDS.index(self.kind), 3)) + sd_encode(_params_blob(self))

    @classmethod
    def from_code_bits(cls, bits: BitString) -> "SamplerSpec":
        tag, rest = sd_decode(bits)
        blob, rest = sd_decode(rest)
        if len(rest) or tag.to_int() >= len(KINDS):
            raise DomainError("malformed sampler code")
        return _spec_from_blob(KINDS[tag.to_int()], blob)


@dataclass(frozen=True)
class SampleResult:
    output: BitString
    steps: int


######## constructors ########

def _dyadic_parts(p) -> tuple[int, int]:
    """Write p = a / 2^L with a odd (or p in {0, 1})."""
    frac = Fraction(p)
    den = frac.denominator
    if den & (den - 1) or not 0 <= frac <= 1:
        raise DomainError(f"{p} is not a dyadic rational in [0, 1]")
    return frac.numerator, den.bit_length() - 1


def uniform_subset(strings, budget: tuple[int, int] | None = None) -> SamplerSpec:
    """Uniform over a set of equal-length strings; the set size must be a power of two
    so that every tape halts after the same number of coins."""
    items = tuple(sorted({BitString(s) if isinstance(s, str) else s for s in strings}))
    if not items:
        raise DomainError("empty support")
    if len({len(s) for s in items}) != 1:
        raise DomainError("support strings differ in length")
    m = len(items)
    if m & (m - 1):
        raise DomainError(f"support size {m} is not a power of two")
    a = m.bit_length() - 1
    return SamplerSpec("uniform-subset", items, budget or (1, a))


def biased_bit(p, budget: tuple[int, int] | None = None) -> SamplerSpec:
    """Independent bits, each 1 with dyadic probability p."""
    num, ell = _dyadic_parts(p)
    return SamplerSpec("biased-bit", (num, ell), budget or (ell + 1, 0))


def dyadic_table(table: dict, budget: tuple[int, int] | None = None) -> SamplerSpec:
    entries = []
    for s, p in table.items():
        s = BitString(s) if isinstance(s, str) else s
        num, ell = _dyadic_parts(p)
        if num == 0:
            continue
        entries.append((s, num, ell))
    entries.sort()
    if not entries or sum(Fraction(a, 1 << e) for _, a, e in entries) != 1:
        raise DomainError("table probabilities must sum to 1")
    if len({len(s) for s, _, _ in entries}) != 1:
        raise DomainError("table strings differ in length")
    ell = max(e for _, _, e in entries)
    return SamplerSpec("dyadic-table", tuple(entries), budget or (1, ell))


def prg_stretch(key: int = 0x5EED_CAFE_F00D_BEEF, budget: tuple[int, int] | None = None) -> SamplerSpec:
    """Outputs G(z) for a uniform seed z of floor(n/2) bits (toy Feistel generator)."""
    return SamplerSpec("prg-stretch", (key,), budget or (2 + PRG_ROUNDS, 0))


def micro_vm(bytecode: bytes, budget: tuple[int, int] = (16, 64)) -> SamplerSpec:
    return SamplerSpec("micro-vm", (bytes(bytecode),), budget)


######## execution ########

def coin_count(spec: SamplerSpec, n: int) -> int | None:
    """Coins consumed per run, or None when it depends on the tape."""
    if spec.kind == "uniform-subset":
        return len(spec.params).bit_length() - 1
    if spec.kind == "biased-bit":
        return n * spec.params[1]
    if spec.kind == "dyadic-table":
        return max(e for _, _, e in spec.params)
    if spec.kind == "prg-stretch":
        return n // 2
    return None


def _check_length(spec: SamplerSpec, n: int):
    if spec.kind == "uniform-subset":
        width = len(spec.params[0])
    elif spec.kind == "dyadic-table":
        width = len(spec.params[0][0])
    else:
        return
    if n != width:
        raise DomainError(f"{spec.kind} sampler only produces {width}-bit strings, asked for {n}")


def supports_length(spec: SamplerSpec, n: int) -> bool:
    try:
        _check_length(spec, n)
    except DomainError:
        return False
    return n >= 1


def execute(spec: SamplerSpec, n: int, coins: CoinSource) -> tuple[int, int]:
    """Run once; returns (output as an n-bit integer, steps)."""
    if n < 1:
        raise DomainError("n must be positive")
    _check_length(spec, n)
    kind = spec.kind
    if kind == "uniform-subset":
        a = len(spec.params).bit_length() - 1
        idx = coins.getrandbits(a) if a else 0
        value, steps = spec.params[idx].to_int(), a + n
    elif kind == "biased-bit":
        num, ell = spec.params
        value = 0
        for _ in range(n):
            u = coins.getrandbits(ell) if ell else 0
            value = (value << 1) | (u < num if ell else num)
        steps = n * (ell + 1)
    elif kind == "dyadic-table":
        ell = max(e for _, _, e in spec.params)
        u = coins.getrandbits(ell) if ell else 0
        acc = 0
        value = spec.params[-1][0].to_int()
        for s, num, e in spec.params:
            acc += num << (ell - e)
            if u < acc:
                value = s.to_int()
                break
        steps = ell + n
    elif kind == "prg-stretch":
        half = n // 2
        z = coins.getrandbits(half) if half else 0
        value = toy_prg(spec.params[0], z, n)
        steps = half + PRG_ROUNDS * n + n
    else:
        value, steps = _run_bytecode(spec.params[0], n, coins, spec.step_budget(n))
    if steps > spec.step_budget(n):
        raise BudgetExceededError(f"{steps} steps exceed budget {spec.step_budget(n)} at n={n}")
    return value, steps


def run_sampler(spec: SamplerSpec, n: int, rng: RngSeed) -> SampleResult:
    value, steps = execute(spec, n, rng.stream())
    return SampleResult(BitString.from_int(value, n), steps)


def sample_many(spec: SamplerSpec, n: int, count: int, rng: RngSeed) -> tuple[list[int], int]:
    """``count`` independent runs from one stream: (outputs as ints, total steps)."""
    stream = rng.stream()
    outs = []
    total = 0
    for _ in range(count):
        v, s = execute(spec, n, stream)
        outs.append(v)
        total += s
    return outs, total


def build_suspects(spec: SamplerSpec, n: int, K: int, rng: RngSeed) -> frozenset[BitString]:
    if K < 1:
        raise DomainError("K must be at least 1")
    outs, _ = sample_many(spec, n, K, rng)
    return frozenset(BitString.from_int(v, n) for v in outs)


######## toy generator ########

def _round_fn(key: int, rnd: int, value: int, width: int) -> int:
    if width == 0:
        return 0
    nbytes = (width + 7) // 8
    out = b""
    block = 0
    while len(out) < nbytes:
        h = hashlib.blake2b(value.to_bytes((value.bit_length() + 7) // 8 or 1, "big"),
                            key=key.to_bytes(16, "big"), digest_size=64,
                            person=f"r{rnd}b{block}".encode())
        out += h.digest()
        block += 1
    return int.from_bytes(out[:nbytes], "big") >> (8 * nbytes - width)


def toy_prg(key: int, z: int, n: int) -> int:
    """Feistel permutation of the n-bit word 0...0z, so distinct seeds give distinct outputs."""
    left_w, right_w = n - n // 2, n // 2
    left, right = 0, z
    for rnd in range(0, PRG_ROUNDS, 2):
        left ^= _round_fn(key, rnd, right, left_w)
        right ^= _round_fn(key, rnd + 1, left, right_w)
    return (left << right_w) | right


######## micro-vm ########

HALT, EMIT0, EMIT1, FLIP, COPY, JMP, COIN, LIT8 = range(8)
_HAS_OPERAND = {COPY, JMP, COIN, LIT8}


class BytecodeError(SampCompError):
    pass


def _run_bytecode(code: bytes, n: int, coins: CoinSource, budget: int) -> tuple[int, int]:
    out: list[int] = []
    pc = 0
    steps = 0
    while len(out) < n and pc < len(code):
        op = code[pc]
        arg = 0
        if op in _HAS_OPERAND:
            if pc + 1 >= len(code):
                raise BytecodeError(f"missing operand at {pc}")
            arg = code[pc + 1]
        nxt = pc + (2 if op in _HAS_OPERAND else 1)
        steps += 8 if op == LIT8 else 1
        if steps > budget:
            raise BudgetExceededError(f"micro-vm exceeded {budget} steps")
        if op == HALT:
            break
        if op == EMIT0 or op == EMIT1:
            out.append(op - EMIT0)
        elif op == FLIP:
            out.append(coins.getrandbits(1))
        elif op == COPY:
            out.append(out[-arg] if 0 < arg <= len(out) else 0)
        elif op == JMP:
            nxt = arg
        elif op == COIN:
            if coins.getrandbits(1):
                nxt = arg
        elif op == LIT8:
            out.extend((arg >> (7 - i)) & 1 for i in range(8))
        else:
            raise BytecodeError(f"unknown opcode {op:#x} at {pc}")
        pc = nxt
    out = (out + [0] * n)[:n]
    value = 0
    for b in out:
        value = (value << 1) | b
    return value, steps


######## exact distributions ########

def declared_distribution(spec: SamplerSpec, n: int, max_paths: int = 1 << 18) -> dict[BitString, Fraction]:
    """Exact output distribution, by enumerating coins."""
    _check_length(spec, n)
    dist: dict[int, Fraction] = {}
    coins = coin_count(spec, n)
    if spec.kind == "uniform-subset":
        w = Fraction(1, len(spec.params))
        for s in spec.params:
            dist[s.to_int()] = w
    elif spec.kind == "dyadic-table":
        for s, num, e in spec.params:
            dist[s.to_int()] = Fraction(num, 1 << e)
    elif spec.kind == "biased-bit":
        num, ell = spec.params
        p = Fraction(num, 1 << ell)
        if n > 20:
            raise EnumerationBudgetError("support too large to tabulate")
        for v in range(1 << n):
            ones = bin(v).count("1")
            pr = p ** ones * (1 - p) ** (n - ones)
            if pr:
                dist[v] = pr
    elif spec.kind == "prg-stretch":
        if coins > 20:
            raise EnumerationBudgetError("seed space too large to tabulate")
        w = Fraction(1, 1 << coins)
        for z in range(1 << coins):
            v = toy_prg(spec.params[0], z, n)
            dist[v] = dist.get(v, 0) + w
    else:
        _enumerate_bytecode(spec, n, dist, max_paths)
    return {BitString.from_int(v, n): p for v, p in sorted(dist.items())}


class _Scripted:
    """Coin source that replays a fixed prefix and records when it runs out."""

    def __init__(self, prefix: list[int]):
        self.prefix = prefix
        self.used = 0

    def getrandbits(self, k: int) -> int:
        v = 0
        for _ in range(k):
            if self.used >= len(self.prefix):
                raise _NeedCoin()
            v = (v << 1) | self.prefix[self.used]
            self.used += 1
        return v


class _NeedCoin(Exception):
    pass


def _enumerate_bytecode(spec, n, dist, max_paths):
    budget = spec.step_budget(n)
    stack = [[]]
    paths = 0
    while stack:
        prefix = stack.pop()
        src = _Scripted(prefix)
        try:
            value, _ = _run_bytecode(spec.params[0], n, src, budget)
        except _NeedCoin:
            stack.append(prefix + [1])
            stack.append(prefix + [0])
            continue
        paths += 1
        if paths > max_paths:
            raise EnumerationBudgetError(f"more than {max_paths} coin paths")
        dist[value] = dist.get(value, 0) + Fraction(1, 1 << len(prefix))


######## serialization ########

def _params_blob(spec: SamplerSpec) -> BitString:
    a, b = spec.budget
    blob = sd_encode_int(a) + sd_encode_int(b)
    if spec.kind == "uniform-subset":
        blob += sd_encode_int(len(spec.params))
        for s in spec.params:
            blob += sd_encode(s)
    elif spec.kind == "biased-bit":
        blob += sd_encode_int(spec.params[0]) + sd_encode_int(spec.params[1])
    elif spec.kind == "dyadic-table":
        blob += sd_encode_int(len(spec.params))
        for s, num, e in spec.params:
            blob += sd_encode(s) + sd_encode_int(num) + sd_encode_int(e)
    elif spec.kind == "prg-stretch":
        blob += sd_encode_int(spec.params[0])
    else:
        blob += sd_encode(BitString.from_bytes(spec.params[0]))
    return blob


def _spec_from_blob(kind: str, blob: BitString) -> SamplerSpec:
    a, rest = sd_decode_int(blob)
    b, rest = sd_decode_int(rest)
    budget = (a, b)
    if kind == "uniform-subset":
        count, rest = sd_decode_int(rest)
        items = []
        for _ in range(count):
            s, rest = sd_decode(rest)
            items.append(s)
        spec = uniform_subset(items, budget)
    elif kind == "biased-bit":
        num, rest = sd_decode_int(rest)
        ell, rest = sd_decode_int(rest)
        spec = biased_bit(Fraction(num, 1 << ell), budget)
    elif kind == "dyadic-table":
        count, rest = sd_decode_int(rest)
        table = {}
        for _ in range(count):
            s, rest = sd_decode(rest)
            num, rest = sd_decode_int(rest)
            e, rest = sd_decode_int(rest)
            table[s] = Fraction(num, 1 << e)
        spec = dyadic_table(table, budget)
    elif kind == "prg-stretch":
        key, rest = sd_decode_int(rest)
        spec = prg_stretch(key, budget)
    else:
        code, rest = sd_decode(rest)
        spec = micro_vm(code.to_bytes(), budget)
    if len(rest):
        raise DomainError("trailing bits in sampler parameters")
    return spec


_BUDGET_RE = re.compile(r"^\s*(\d+)\s*\*?\s*n\s*(?:\+\s*(\d+))?\s*$|^\s*(\d+)\s*$")


def _parse_budget(text: str) -> tuple[int, int]:
    m = _BUDGET_RE.match(text)
    if not m:
        raise DomainError(f"budget must look like '8n + 64' or '200', got {text!r}")
    if m.group(3) is not None:
        return 0, int(m.group(3))
    return int(m.group(1)), int(m.group(2) or 0)


def parse_sampler(text: str) -> SamplerSpec:
    """Read a sampler config (INI body with a [sampler] section)."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
        sec = cp["sampler"]
    except (configparser.Error, KeyError) as exc:
        raise DomainError(f"sampler config: {exc}") from exc
    kind = sec.get("kind", "").strip()
    budget = _parse_budget(sec["budget"]) if "budget" in sec else None
    try:
        if kind == "uniform-subset":
            return uniform_subset([s.strip() for s in sec["support"].split(",")], budget)
        if kind == "biased-bit":
            return biased_bit(Fraction(sec["p"].strip()), budget)
        if kind == "dyadic-table":
            table = {}
            for item in sec["table"].split(","):
                s, p = item.split(":")
                table[s.strip()] = Fraction(p.strip())
            return dyadic_table(table, budget)
        if kind == "prg-stretch":
            return prg_stretch(int(sec.get("key", "5eedcafef00dbeef"), 16), budget)
        if kind == "micro-vm":
            code = bytes.fromhex(sec["bytecode"].replace(" ", ""))
            return micro_vm(code, budget or (16, 64))
    except (KeyError, ValueError) as exc:
        raise DomainError(f"sampler config for {kind!r}: {exc}") from exc
    raise DomainError(f"unknown sampler kind {kind!r}")


def format_sampler(spec: SamplerSpec) -> str:
    a, b = spec.budget
    lines = ["[sampler]", f"kind = {spec.kind}", f"budget = {a}n + {b}"]
    if spec.kind == "uniform-subset":
        lines.append("support = " + ", ".join(str(s) for s in spec.params))
    elif spec.kind == "biased-bit":
        num, ell = spec.params
        lines.append(f"p = {Fraction(num, 1 << ell)}")
    elif spec.kind == "dyadic-table":
        lines.append("table = " + ", ".join(f"{s}:{Fraction(num, 1 << e)}" for s, num, e in spec.params))
    elif spec.kind == "prg-stretch":
        lines.append(f"key = {spec.params[0]:x}")
    else:
        lines.append(f"bytecode = {spec.params[0].hex()}")
    return "\n".join(lines) + "\n"


def load_sampler(path: str | Path) -> SamplerSpec:
    return parse_sampler(Path(path).read_text())


######## shipped samplers ########

def heavy_target(target: BitString) -> SamplerSpec:
    """micro-vm sampler: with probability 1/2 print ``target``, otherwise n fair coins.

    The byte layout is ``COIN lit; loop: FLIP; JMP loop; lit: EMITs/LIT8s``.
    """
    body = bytearray()
    bits = str(target)
    while len(bits) >= 8:
        body += bytes([LIT8, int(bits[:8], 2)])
        bits = bits[8:]
    body += bytes(EMIT1 if c == "1" else EMIT0 for c in bits)
    head = bytes([COIN, 5, FLIP, JMP, 2])
    return micro_vm(head + bytes(body), (2, 8))


def builtin_samplers() -> dict[str, tuple[SamplerSpec, int]]:
    """Named built-in samplers with the output length each is meant for."""
    return {
        "uniform-subset": (uniform_subset(["0000", "1111"]), 4),
        "biased-bit": (biased_bit(Fraction(3, 4)), 4),
        "dyadic-table": (dyadic_table({"00": Fraction(1, 2), "01": Fraction(1, 4), "10": Fraction(1, 4)}), 2),
        "prg-stretch": (prg_stretch(), 8),
        "micro-vm": (heavy_target(BitString("1011001110001111")), 16),
    }
