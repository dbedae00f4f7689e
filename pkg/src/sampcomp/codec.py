"""Compress / decompress against a sampler, certificates, and the codeword file format."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .core import (BitString, DomainError, DyadicProb, MalformedPrefixError, RngSeed,
                   SampCompError, sd_decode_int, sd_encode, sd_encode_int, sd_length)
from .invertible import (Fingerprint, eval_cost, fingerprint, fingerprint_graph,
                         fingerprint_length, invert_ints)
from .sampler import SamplerSpec, sample_many, supports_length

MAGIC = b"SCDC"
VERSION = 1
TRIVIAL, FINGERPRINT = "trivial", "fingerprint"

# Pinned multiplier c in  gamma_rkt <= 2 log2(1/delta) + c * overhead.
CERT_CONSTANT = 4
# Pinned multiplier c in  |code| <= log2(1/delta) + c * precision(n, delta, eps).
LENGTH_CONSTANT = 7


class MalformedCodewordError(SampCompError):
    pass


class CertificationFailedError(SampCompError):
    pass


@dataclass(frozen=True)
class Codeword:
    mode: str
    n: int
    log2_K: int
    body: BitString

    @property
    def header(self) -> BitString:
        if self.mode == TRIVIAL:
            return sd_encode_int(self.n)
        return sd_encode_int(self.n) + sd_encode_int(self.log2_K)

    @property
    def bits(self) -> BitString:
        """The compressed string proper: header then body."""
        return self.header + self.body

    def __len__(self) -> int:
        return len(self.bits)

    def to_bits(self) -> BitString:
        """Mode bit followed by ``bits``; self-describing."""
        return BitString("1" if self.mode == FINGERPRINT else "0") + self.bits

    @classmethod
    def from_bits(cls, bits: BitString) -> "Codeword":
        if len(bits) < 1:
            raise MalformedCodewordError("empty codeword")
        try:
            n, rest = sd_decode_int(bits[1:])
            if n < 1:
                raise MalformedCodewordError("n must be positive")
            if bits[0] == 0:
                if len(rest) != n:
                    raise MalformedCodewordError(f"trivial body has {len(rest)} bits, header says {n}")
                return cls(TRIVIAL, n, 0, rest)
            log2_K, rest = sd_decode_int(rest)
            fp, tail = Fingerprint.from_bits(rest, n, fingerprint_k(n, log2_K))
        except (MalformedPrefixError, DomainError) as exc:
            raise MalformedCodewordError(str(exc)) from exc
        if len(tail):
            raise MalformedCodewordError(f"{len(tail)} trailing bits after fingerprint")
        return cls(FINGERPRINT, n, log2_K, rest)

    def fingerprint(self) -> Fingerprint:
        fp, _ = Fingerprint.from_bits(self.body, self.n, fingerprint_k(self.n, self.log2_K))
        return fp


######## parameters ########

def _eps(eps) -> Fraction:
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    return eps


def _delta(delta) -> DyadicProb:
    return delta if isinstance(delta, DyadicProb) else DyadicProb.from_fraction(delta)


def suspect_count(delta, eps) -> int:
    """K: the least power of two that is at least ceil(ln(1/eps) / delta)."""
    raw = math.ceil(math.log(1 / _eps(eps)) * (1 << _delta(delta).log2_inverse))
    return 1 << max(0, (raw - 1).bit_length())


def fingerprint_k(n: int, log2_K: int) -> int:
    # A suspect set never has more than 2^n members.
    return min(log2_K, n)


def is_trivial(n: int, delta) -> bool:
    return _delta(delta).log2_inverse > n


def codeword_length(n: int, delta, eps) -> int:
    """Length of every codeword for inputs of length n (header plus body)."""
    if is_trivial(n, delta):
        return sd_length(n.bit_length()) + n
    k = suspect_count(delta, eps).bit_length() - 1
    return (sd_length(n.bit_length()) + sd_length(max(1, k.bit_length()))
            + fingerprint_length(n, fingerprint_k(n, k), _eps(eps) / 3))


def precision(n: int, delta, eps) -> float:
    """log n + (log log 1/delta + log 1/eps) * log log 1/delta, all base 2."""
    q = _delta(delta).log2_inverse
    loglog = math.log2(q) if q > 1 else 0.0
    return math.log2(n) + (loglog + math.log2(1 / _eps(eps))) * loglog


def length_bound(n: int, delta, eps) -> float:
    return _delta(delta).log2_inverse + LENGTH_CONSTANT * precision(n, delta, eps)


def overhead(n: int, delta, eps) -> int:
    """Length beyond log2 K and the header: the precision overhead of the fingerprint."""
    eps = _eps(eps)
    if is_trivial(n, delta):
        k = n
    else:
        k = fingerprint_k(n, suspect_count(delta, eps).bit_length() - 1)
    return fingerprint_length(n, k, eps / 3) - k


######## compress / decompress ########

def compress_traced(x: BitString, delta, eps, rng: RngSeed) -> tuple[Codeword, int]:
    """Codeword and the compressor's step count."""
    delta, eps = _delta(delta), _eps(eps)
    n = len(x)
    if n < 1:
        raise DomainError("cannot compress the empty string")
    if is_trivial(n, delta):
        return Codeword(TRIVIAL, n, 0, x), n
    log2_K = suspect_count(delta, eps).bit_length() - 1
    k = fingerprint_k(n, log2_K)
    fp = fingerprint(x, k, eps / 3, rng)
    g = fingerprint_graph(n, k, fp.d)
    steps = eval_cost(g) + n * fp.width
    return Codeword(FINGERPRINT, n, log2_K, fp.to_bits()), steps


def compress(x: BitString, delta, eps, rng: RngSeed) -> Codeword:
    return compress_traced(x, delta, eps, rng)[0]


@dataclass
class DecodeTrace:
    output: BitString | None
    steps: int
    suspects: int = 0
    pruned: int = 0
    capped: bool = False


def decompress_traced(spec: SamplerSpec, code: Codeword, rng: RngSeed) -> DecodeTrace:
    if code.mode == TRIVIAL:
        return DecodeTrace(code.body, code.n)
    fp = code.fingerprint()
    if not supports_length(spec, code.n):
        return DecodeTrace(None, len(code))
    outs, sample_steps = sample_many(spec, code.n, 1 << code.log2_K, rng)
    xs = sorted(set(outs))
    inv = invert_ints(xs, fp)
    return DecodeTrace(inv.output, len(code) + sample_steps + inv.steps,
                       len(xs), inv.pruned, inv.report.capped)


def decompress(spec: SamplerSpec, code: Codeword, rng: RngSeed) -> BitString | None:
    return decompress_traced(spec, code, rng).output


######## certificates ########

@dataclass(frozen=True)
class Certificate:
    representation: BitString
    codeword: Codeword
    decompress_steps: int
    compress_steps: int
    success_rate: float
    trials: int
    overhead: int
    log2_inv_delta: int

    @property
    def gamma_rkt(self) -> int:
        return len(self.representation) + max(0, math.ceil(math.log2(self.decompress_steps)))

    @property
    def gamma_two_sided(self) -> int:
        return len(self.codeword.to_bits()) + math.ceil(math.log2(self.compress_steps + self.decompress_steps))

    @property
    def bound(self) -> int:
        return 2 * self.log2_inv_delta + CERT_CONSTANT * self.overhead

    @property
    def within_bound(self) -> bool:
        return self.gamma_rkt <= self.bound

    def record(self) -> dict:
        return {
            "mode": self.codeword.mode,
            "codeword_bits": len(self.codeword),
            "representation_bits": len(self.representation),
            "sampler_code_bits": len(self.representation) - len(sd_encode(self.codeword.to_bits())),
            "t_decompress": self.decompress_steps,
            "t_compress": self.compress_steps,
            "gamma_rkt": self.gamma_rkt,
            "gamma_two_sided": self.gamma_two_sided,
            "bound": self.bound,
            "cert_constant": CERT_CONSTANT,
            "overhead": self.overhead,
            "success_rate": self.success_rate,
            "trials": self.trials,
        }


def certify(x: BitString, delta, eps, spec: SamplerSpec, rng: RngSeed, trials: int = 32) -> Certificate:
    """Compress once, decompress on ``trials`` fresh seeds, and account lengths and times.

    The decompression time is the largest step count seen over the trials.
    Raises ``CertificationFailedError`` when fewer than 1 - 2 sqrt(eps) of the
    trials return x.
    """
    delta, eps = _delta(delta), _eps(eps)
    code, t_c = compress_traced(x, delta, eps, rng.child("compress"))
    wins = 0
    t_d = 1
    for i in range(trials):
        tr = decompress_traced(spec, code, rng.child(("decompress", i)))
        t_d = max(t_d, tr.steps)
        wins += tr.output == x
    rate = wins / trials
    if rate < 1 - 2 * math.sqrt(eps):
        raise CertificationFailedError(
            f"decoded x in {wins}/{trials} trials, need at least {1 - 2 * math.sqrt(eps):.3f}")
    rep = sd_encode(code.to_bits()) + spec.code_bits
    return Certificate(rep, code, t_d, t_c, rate, trials, overhead(len(x), delta, eps),
                       delta.log2_inverse)


######## file format ########

def dump_codeword(code: Codeword) -> bytes:
    bits = code.to_bits()
    pad = -len(bits) % 8
    payload = BitString.from_int(bits.to_int() << pad, len(bits) + pad).to_bytes()
    return MAGIC + bytes([VERSION]) + payload + bytes([pad])


def load_codeword(data: bytes) -> Codeword:
    if len(data) < 6 or data[:4] != MAGIC:
        raise MalformedCodewordError("not a codeword file (bad magic)")
    if data[4] != VERSION:
        raise MalformedCodewordError(f"unsupported codeword version {data[4]}")
    pad = data[-1]
    if pad > 7:
        raise MalformedCodewordError(f"invalid padding length {pad}")
    bits = BitString.from_bytes(data[5:-1])
    if pad > len(bits) or (pad and bits[len(bits) - pad:].to_int()):
        raise MalformedCodewordError("padding bits must be zero")
    return Codeword.from_bits(bits[:len(bits) - pad])
