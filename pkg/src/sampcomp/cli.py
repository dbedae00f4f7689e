"""Command-line entry point: ``sampcomp <command> ...``.

Every command takes an explicit hex seed and prints one JSON record per line
on stdout.  Exit status: 0 on success, 2 when decoding finds nothing, 1 on
usage or format errors.  ``--manifest FILE`` stores the invocation so that
``sampcomp replay FILE`` reproduces the same output bytes.
"""

from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__, advharness, codec, estimator, pktlab
from .core import BitString, DyadicProb, RngSeed, SampCompError
from .sampler import SamplerSpec, builtin_samplers, load_sampler

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_NOT_FOUND = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(stream, command: str, **fields):
    rec = {"schema_version": SCHEMA_VERSION, "command": command, **fields}
    stream.write(json.dumps(rec, sort_keys=True) + "\n")


def _dyadic(text: str) -> DyadicProb:
    return DyadicProb.parse(text)


def _eps(text: str) -> Fraction:
    eps = _dyadic(text).value
    if eps >= Fraction(1, 2):
        raise UsageError(f"eps must be below 1/2, got {text}")
    return eps


def _sampler(ref: str) -> SamplerSpec:
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        table = builtin_samplers()
        if name not in table:
            raise UsageError(f"unknown built-in sampler {name!r}; choose from {', '.join(table)}")
        return table[name][0]
    return load_sampler(ref)


def _read_bits(path: str, binary: bool) -> BitString:
    data = Path(path).read_bytes()
    if binary:
        return BitString.from_bytes(data)
    text = data.decode("ascii", errors="replace").strip()
    if not text or set(text) - {"0", "1"}:
        raise UsageError(f"{path} must hold a string of 0/1 characters (use --binary for raw bytes)")
    return BitString(text)


def _write_bits(path: str, bits: BitString, binary: bool):
    if binary:
        if len(bits) % 8:
            raise UsageError("decoded string is not a whole number of bytes; drop --binary")
        Path(path).write_bytes(bits.to_bytes())
    else:
        Path(path).write_text(str(bits) + "\n")


######## commands ########

def cmd_compress(a, out) -> int:
    x = _read_bits(a.input, a.binary)
    delta = _dyadic(a.delta)
    code = codec.compress(x, delta, _eps(a.eps), RngSeed.from_hex(a.seed))
    Path(a.out).write_bytes(codec.dump_codeword(code))
    _emit(out, "compress", mode=code.mode, n=code.n, codeword_bits=len(code),
          delta=str(delta), eps=a.eps, output=a.out)
    return EXIT_OK


def cmd_decompress(a, out) -> int:
    spec = _sampler(a.sampler)
    code = codec.load_codeword(Path(a.code).read_bytes())
    tr = codec.decompress_traced(spec, code, RngSeed.from_hex(a.seed))
    if tr.output is None:
        _emit(out, "decompress", status="not-found", steps=tr.steps, suspects=tr.suspects)
        return EXIT_NOT_FOUND
    _write_bits(a.out, tr.output, a.binary)
    _emit(out, "decompress", status="ok", n=len(tr.output), steps=tr.steps,
          suspects=tr.suspects, output=a.out)
    return EXIT_OK


def cmd_estimate(a, out) -> int:
    spec = _sampler(a.sampler)
    x = _read_bits(a.target, a.binary)
    est = estimator.estimate_probability(spec, x, _eps(a.eps), RngSeed.from_hex(a.seed))
    _emit(out, "estimate", p_tilde=str(est.p_tilde), calls=est.calls, mode=est.mode,
          successes_needed=est.successes_needed, delta=str(estimator.delta_from_estimate(est)))
    return EXIT_OK


def cmd_certify(a, out) -> int:
    spec = _sampler(a.sampler)
    x = _read_bits(a.input, a.binary)
    try:
        cert = codec.certify(x, _dyadic(a.delta), _eps(a.eps), spec, RngSeed.from_hex(a.seed), a.trials)
    except codec.CertificationFailedError as exc:
        _emit(out, "certify", status="not-found", reason=str(exc))
        return EXIT_NOT_FOUND
    _emit(out, "certify", status="ok", **cert.record())
    return EXIT_OK


def cmd_pktlab(a, out) -> int:
    entries = pktlab.parse_battery(Path(a.battery).read_text())
    try:
        rows = pktlab.run_battery(entries, RngSeed.from_hex(a.seed), a.tapes)
    except pktlab.NotFoundWithinKMaxError as exc:
        _emit(out, "pktlab", status="not-found", reason=str(exc))
        return EXIT_NOT_FOUND
    for row in rows:
        _emit(out, "pktlab", **row)
    if a.table:
        Path(a.table).write_text(pktlab.format_table(rows))
    return EXIT_OK


def _harness_config(path: str) -> dict:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(Path(path).read_text())
        sec = cp["harness"]
        return {
            "sampler": sec["sampler"],
            "n": sec.getint("n"),
            "ell": sec.getint("ell"),
            "gamma": sec.getfloat("gamma", 0.0),
            "constant": sec.getint("constant", advharness.BUDGET_CONSTANT),
            "step_budget": sec.getint("step_budget", 1 << 30),
            "trials": sec.getint("trials", 100),
            "eps": sec.get("eps", "1/2^4"),
        }
    except (configparser.Error, KeyError, ValueError) as exc:
        raise UsageError(f"harness config {path}: {exc}") from exc


def cmd_harness(a, out) -> int:
    cfg = _harness_config(a.config)
    spec = _sampler(cfg["sampler"])
    cut = advharness.codec_under_test(spec, _eps(cfg["eps"]))
    rep = advharness.run_distinguisher(
        spec, cfg["n"], cut, cfg["trials"], RngSeed.from_hex(a.seed), ell=cfg["ell"],
        length_budget=advharness.default_length_budget(cfg["n"], cfg["gamma"], cfg["constant"]),
        step_budget=cfg["step_budget"])
    _emit(out, "harness", sampler=cfg["sampler"], **rep.record())
    return EXIT_OK


COMMANDS = {
    "compress": cmd_compress, "decompress": cmd_decompress, "estimate": cmd_estimate,
    "certify": cmd_certify, "pktlab": cmd_pktlab, "harness": cmd_harness,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sampcomp", description="Compression against known samplers.")
    p.add_argument("--version", action="version", version=f"sampcomp {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--seed", required=True, help="hex seed (mandatory)")
        sp.add_argument("--manifest", help="write a replayable run manifest here")
        return sp

    c = common(sub.add_parser("compress", help="compress a bit string"))
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--delta", required=True, help="probability lower bound, 2^-Q")
    c.add_argument("--eps", required=True, help="error parameter, 1/2^J")
    c.add_argument("--out", required=True)
    c.add_argument("--binary", action="store_true", help="input is raw bytes, not 0/1 text")

    d = common(sub.add_parser("decompress", help="decode a codeword file"))
    d.add_argument("--sampler", required=True, help="sampler config file or builtin:NAME")
    d.add_argument("--code", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--binary", action="store_true")

    e = common(sub.add_parser("estimate", help="estimate the probability of a target"))
    e.add_argument("--sampler", required=True)
    e.add_argument("--target", required=True)
    e.add_argument("--eps", required=True)
    e.add_argument("--binary", action="store_true")

    f = common(sub.add_parser("certify", help="compress, decode repeatedly, emit a certificate"))
    f.add_argument("--sampler", required=True)
    f.add_argument("--in", dest="input", required=True)
    f.add_argument("--delta", required=True)
    f.add_argument("--eps", required=True)
    f.add_argument("--trials", type=int, default=32)
    f.add_argument("--binary", action="store_true")

    g = common(sub.add_parser("pktlab", help="run a pK^t battery"))
    g.add_argument("--battery", required=True)
    g.add_argument("--tapes", type=int, default=4096, help="sampled tapes when t > 16")
    g.add_argument("--table", help="also write a text table here")

    h = common(sub.add_parser("harness", help="run the structured-vs-uniform distinguisher"))
    h.add_argument("--config", required=True)

    r = sub.add_parser("replay", help="re-run a stored manifest")
    r.add_argument("manifest")
    return p


def _write_manifest(path: str, argv: list[str]):
    from . import codec as _c, pktlab as _p, advharness as _h
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "argv": [x for i, x in enumerate(argv)
                 if x != "--manifest" and (i == 0 or argv[i - 1] != "--manifest")],
        "constants": {"cert_constant": _c.CERT_CONSTANT, "length_constant": _c.LENGTH_CONSTANT,
                      "thm_constant": _p.THM_CONSTANT,
                      "lemma_constant": _p.LEMMA_CONSTANT, "budget_constant": _h.BUDGET_CONSTANT},
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def main(argv: list[str] | None = None, out=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = out or sys.stdout
    try:
        a = build_parser().parse_args(argv)
        if a.command == "replay":
            stored = json.loads(Path(a.manifest).read_text())
            if stored.get("schema_version") != SCHEMA_VERSION:
                raise UsageError(f"manifest schema {stored.get('schema_version')} is not {SCHEMA_VERSION}")
            return main(stored["argv"], out)
        RngSeed.from_hex(a.seed)
        if a.manifest:
            _write_manifest(a.manifest, argv)
        return COMMANDS[a.command](a, out)
    except (UsageError, SampCompError, OSError, ValueError) as exc:
        print(f"sampcomp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
