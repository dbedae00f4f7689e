"""Bit strings, dyadic probabilities, the doubled-bit self-delimiting code,
random primes, and the explicit-seed randomness used everywhere else."""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import Iterable

from sympy import isprime, primerange


class SampCompError(Exception):
    """Base class for every error raised by this package."""


class MalformedPrefixError(SampCompError):
    pass


class NoPrimeInRangeError(SampCompError):
    pass


class DomainError(SampCompError):
    """A parameter is outside the range an operation accepts."""


@total_ordering
class BitString:
    """Immutable bit string with exact length.

    Bits are held as an integer (most significant bit first) plus a length,
    so leading zeros are never lost and conversion to an arbitrary-precision
    integer is free. Ordering is lexicographic on the bit sequence.
    """

    __slots__ = ("_value", "_length")

    def __init__(self, bits: str | Iterable[int] = ""):
        if not isinstance(bits, str):
            bits = "".join("1" if b else "0" for b in bits)
        if bits.strip("01"):
            raise ValueError(f"not a bit string: {bits!r}")
        self._length = len(bits)
        self._value = int(bits, 2) if bits else 0

    @classmethod
    def from_int(cls, value: int, length: int) -> "BitString":
        if value < 0 or length < 0 or value >> length:
            raise ValueError(f"{value} does not fit in {length} bits")
        out = cls.__new__(cls)
        out._value = value
        out._length = length
        return out

    @classmethod
    def from_bytes(cls, data: bytes) -> "BitString":
        return cls.from_int(int.from_bytes(data, "big"), 8 * len(data))

    @classmethod
    def binary(cls, value: int) -> "BitString":
        """Minimal binary representation; zero is the single digit "0"."""
        if value < 0:
            raise ValueError("negative value")
        return cls.from_int(value, max(1, value.bit_length()))

    def to_int(self) -> int:
        return self._value

    def to_bytes(self) -> bytes:
        """Big-endian bytes; only defined for lengths that are multiples of 8."""
        if self._length % 8:
            raise ValueError("length is not a whole number of bytes")
        return self._value.to_bytes(self._length // 8, "big")

    def __len__(self) -> int:
        return self._length

    def __str__(self) -> str:
        return format(self._value, f"0{self._length}b") if self._length else ""

    def __repr__(self) -> str:
        return f"BitString('{self}')"

    def __iter__(self):
        for i in range(self._length - 1, -1, -1):
            yield (self._value >> i) & 1

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            start, stop, step = idx.indices(self._length)
            if step != 1:
                return BitString(str(self)[idx])
            if stop <= start:
                return EMPTY
            width = stop - start
            shifted = self._value >> (self._length - stop)
            return BitString.from_int(shifted & ((1 << width) - 1), width)
        if idx < 0:
            idx += self._length
        if not 0 <= idx < self._length:
            raise IndexError("bit index out of range")
        return (self._value >> (self._length - 1 - idx)) & 1

    def __add__(self, other: "BitString") -> "BitString":
        if not isinstance(other, BitString):
            return NotImplemented
        return BitString.from_int((self._value << other._length) | other._value,
                                  self._length + other._length)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return self._length == other._length and self._value == other._value

    def __lt__(self, other: "BitString") -> bool:
        if self._length == other._length:
            return self._value < other._value
        return str(self) < str(other)

    def __hash__(self) -> int:
        return hash((self._length, self._value))

    def startswith(self, prefix: "BitString") -> bool:
        return len(prefix) <= self._length and self[: len(prefix)] == prefix


EMPTY = BitString()


@dataclass(frozen=True)
class DyadicProb:
    """The probability 2^q / 2^ell."""

    q: int
    ell: int

    def __post_init__(self):
        if not 0 <= self.q <= self.ell:
            raise DomainError(f"need 0 <= q <= ell, got q={self.q}, ell={self.ell}")

    @classmethod
    def pow2(cls, exponent: int) -> "DyadicProb":
        """2^-exponent."""
        return cls(0, exponent)

    @classmethod
    def from_fraction(cls, value) -> "DyadicProb":
        frac = Fraction(value)
        num, den = frac.numerator, frac.denominator
        if not 0 < frac <= 1 or den & (den - 1) or num & (num - 1):
            raise DomainError(f"{value} is not of the form 2^q/2^ell in (0, 1]")
        ell = den.bit_length() - 1
        return cls(num.bit_length() - 1, ell)

    @classmethod
    def parse(cls, text: str) -> "DyadicProb":
        """Accepts "2^-Q", "1/2^Q", "1/N" with N a power of two, or "1"."""
        t = text.strip().replace(" ", "")
        try:
            if t.startswith("2^"):
                e = int(t[2:])
                if e > 0:
                    raise DomainError(f"{text} exceeds 1")
                return cls(0, -e)
            if t.startswith("1/2^"):
                return cls(0, int(t[4:]))
            return cls.from_fraction(Fraction(t))
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainError(f"cannot read dyadic probability {text!r}") from exc

    @property
    def value(self) -> Fraction:
        return Fraction(1 << self.q, 1 << self.ell)

    @property
    def log2_inverse(self) -> int:
        """log2(1/value), an integer for dyadic values."""
        return self.ell - self.q

    def __float__(self) -> float:
        return float(self.value)

    def __str__(self) -> str:
        return f"2^-{self.log2_inverse}"


@dataclass(frozen=True)
class RngSeed:
    """Explicit randomness: a 128-bit seed plus labelled derivation.

    ``child(label)`` hashes the parent seed with the label, so the same seed
    and the same label sequence always reproduce the same stream.
    """

    seed: int

    def __post_init__(self):
        if self.seed < 0:
            raise DomainError("seed must be non-negative")

    @classmethod
    def from_hex(cls, text: str) -> "RngSeed":
        text = text.lower().removeprefix("0x")
        try:
            return cls(int(text, 16))
        except ValueError as exc:
            raise DomainError(f"seed {text!r} is not hexadecimal") from exc

    def child(self, label) -> "RngSeed":
        h = hashlib.blake2b(f"{self.seed:x}/{label}".encode(), digest_size=16)
        return RngSeed(int.from_bytes(h.digest(), "big"))

    def stream(self) -> random.Random:
        """A fresh generator for this seed; identical every call."""
        return random.Random(self.seed)

    def bits(self, n: int) -> BitString:
        return BitString.from_int(self.stream().getrandbits(n) if n else 0, n)

    def hex(self) -> str:
        return f"{self.seed:032x}"


######## self-delimiting code ########

def sd_length(payload_length: int) -> int:
    """Length of sd_encode output for a payload of the given length."""
    digits = max(1, payload_length.bit_length())
    return payload_length + 2 * digits + 2


def sd_encode(payload: BitString) -> BitString:
    """Length in binary with every bit doubled, then "01", then the payload."""
    n = len(payload)
    digits = BitString.binary(n)
    doubled = 0
    for b in digits:
        doubled = (doubled << 2) | (3 * b)
    head = BitString.from_int((doubled << 2) | 1, 2 * len(digits) + 2)
    return head + payload


def sd_decode(stream: BitString) -> tuple[BitString, BitString]:
    """Inverse of sd_encode: returns (payload, rest of stream)."""
    length = 0
    pos = 0
    total = len(stream)
    while True:
        if pos + 2 > total:
            raise MalformedPrefixError("stream ended inside the length prefix")
        a, b = stream[pos], stream[pos + 1]
        pos += 2
        if a == 0 and b == 1:
            break
        if a != b:
            raise MalformedPrefixError(f"non-doubled pair {a}{b} at bit {pos - 2}")
        length = (length << 1) | a
    if pos == 2:
        raise MalformedPrefixError("empty length prefix")
    if pos + length > total:
        raise MalformedPrefixError(f"payload of {length} bits exceeds stream")
    return stream[pos:pos + length], stream[pos + length:]


def sd_encode_int(value: int) -> BitString:
    return sd_encode(BitString.binary(value))


def sd_decode_int(stream: BitString) -> tuple[int, BitString]:
    payload, rest = sd_decode(stream)
    return payload.to_int(), rest


######## primes ########

_ENUMERATE_BELOW = 1 << 14


def random_prime(lo: int, hi: int, rng: RngSeed | random.Random) -> int:
    """A prime drawn uniformly from the primes in [lo, hi]."""
    if lo < 2 or hi < lo:
        raise DomainError(f"bad prime interval [{lo}, {hi}]")
    gen = rng.stream() if isinstance(rng, RngSeed) else rng
    if hi - lo <= _ENUMERATE_BELOW:
        primes = list(primerange(lo, hi + 1))
        if not primes:
            raise NoPrimeInRangeError(f"no prime in [{lo}, {hi}]")
        return primes[gen.randrange(len(primes))]
    # Rejection sampling is exactly uniform over the primes in the interval.
    # Prime gaps below 2**64 are far shorter than 2**14, so a prime exists.
    while True:
        cand = gen.randint(lo, hi)
        if isprime(cand):
            return cand


def prime_count(lo: int, hi: int) -> int:
    """Number of primes in [lo, hi]."""
    from sympy import primepi
    return int(primepi(hi) - primepi(lo - 1))


def ceil_log2(x) -> int:
    """Ceiling of log2 for a positive int or Fraction (exact)."""
    frac = Fraction(x)
    if frac <= 0:
        raise DomainError("log of a non-positive number")
    num, den = frac.numerator, frac.denominator
    # smallest e with 2^e >= num/den
    e = num.bit_length() - den.bit_length()
    while Fraction(2) ** e < frac:
        e += 1
    while Fraction(2) ** (e - 1) >= frac:
        e -= 1
    return e


def log2(x) -> float:
    return math.log2(float(Fraction(x)))
