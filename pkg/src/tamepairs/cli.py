"""Command-line front end: ``tamepairs <command> ...`` writes a JSON report."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any

import mpmath
import numpy as np

from . import __version__
from .classifier import classify_pair, classify_product
from .errors import InvalidCertificate, ParseError, TamePairsError
from .intmaps import MonotoneIntMap, builtin_phi_family
from .operators import QuasiDiagonalOperator, continuity_characteristic, is_S_tame
from .ratio_analysis import check_piszczek, estimate_limit_points
from .sequences import check_stability, parse_sequence
from .spaces import GradedSpace, kothe_from_json
from .witnesses import (FailureCertificate, InfiniteTypeWitness, LinearTameCertificate, NotFound,
                        Refuted, build_infinite_type_witness, build_qd_witness,
                        linear_tame_certificate, search_tameness_failure,
                        verify_failure_certificate, verify_infinite_type_witness,
                        verify_linear_tame_certificate)

DEPTH_ENV = "TAMEPAIRS_DEPTH"
EXIT_OK, EXIT_ERROR, EXIT_REFUTED = 0, 1, 2


def default_depth() -> int:
    raw = os.environ.get(DEPTH_ENV)
    return int(raw) if raw else 2000


# ---------------------------------------------------------------------------
# spec strings


def parse_space_spec(text: str) -> GradedSpace:
    """``L0:<seq>``, ``Linf:<seq>`` or ``kothe:<file>``."""
    text = text.strip()
    head, sep, rest = text.partition(":")
    if not sep:
        raise ParseError("space spec needs a prefix L0:, Linf: or kothe:", text, 0)
    head = head.strip()
    if head == "L0":
        return GradedSpace.finite(parse_sequence(rest))
    if head == "Linf":
        return GradedSpace.infinite(parse_sequence(rest))
    if head == "kothe":
        with open(rest.strip(), encoding="utf-8") as fh:
            return kothe_from_json(json.load(fh))
    raise ParseError(f"unknown space prefix {head!r}", text, 0)


# ---------------------------------------------------------------------------
# deterministic JSON


def _scalar(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, mpmath.mpf):
        f = float(v)
        return _scalar(f) if math.isfinite(f) else json.dumps(mpmath.nstr(v, 17))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not math.isfinite(f):
            return json.dumps("inf" if f > 0 else "-inf" if f < 0 else "nan")
        s = format(f, ".17g")
        return s if any(c in s for c in ".en") else s + ".0"
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps(obj: Any, indent: int | None = None, _level: int = 0) -> str:
    """JSON with sorted keys and 17-significant-digit floats."""
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    sep = ", " if indent is None else ","
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    elif hasattr(obj, "to_json") and not isinstance(obj, (str, bytes)):
        obj = obj.to_json()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [pad + json.dumps(str(k)) + ": " + dumps(obj[k], indent, _level + 1)
                 for k in sorted(obj, key=str)]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[" + sep.join(pad + dumps(v, indent, _level + 1) for v in obj) + end + "]"
    return _scalar(obj)


def write_csv(path: str, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([format(float(c), ".17g") if isinstance(c, (float, np.floating)) else
                    str(c) for c in row])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


# ---------------------------------------------------------------------------
# commands


@dataclass
class Outcome:
    result: Any
    exit_code: int = EXIT_OK
    csv_rows: list | None = None
    extra: dict = field(default_factory=dict)


def _cmd_classify(a):
    return Outcome(classify_pair(parse_space_spec(a.left), parse_space_spec(a.right),
                                 a.depth, a.cutoff))


def _cmd_product(a):
    return Outcome(classify_product(parse_space_spec(a.left), parse_space_spec(a.right),
                                    a.depth, a.cutoff))


def _cmd_stability(a):
    rep = check_stability(parse_sequence(a.seq), a.depth)
    return Outcome(rep)


def _cmd_limitpoints(a):
    est = estimate_limit_points(parse_sequence(a.beta), parse_sequence(a.alpha), a.depth,
                                a.cutoff, a.cluster_eps)
    return Outcome(est, csv_rows=est.csv_rows())


def _cmd_piszczek(a):
    depths = [int(d) for d in a.depths.split(",")]
    run = check_piszczek(parse_space_spec(a.A), parse_space_spec(a.B), MonotoneIntMap.parse(a.psi),
                         MonotoneIntMap.parse(a.phi), a.m, depths, a.n_max)
    rows = [("N", "n_used", "log_C")] + [tuple(c) for c in run.constants]
    return Outcome(run, csv_rows=rows)


def _phis(a):
    if a.phi:
        return {a.phi: MonotoneIntMap.parse(a.phi)}
    return builtin_phi_family(max(64, a.n_target))


def _cmd_witness_qd(a):
    A, B, psi = parse_space_spec(a.A), parse_space_spec(a.B), MonotoneIntMap.parse(a.psi)
    results = {}
    for name, phi in _phis(a).items():
        found = search_tameness_failure(A, B, psi, phi, a.n_target, a.depth)
        if isinstance(found, FailureCertificate):
            T = build_qd_witness(found)
            results[name] = {"certificate": found.to_json(), "operator": T.to_json()}
            return Outcome({"phi": name, **results[name]},
                           csv_rows=[("n", "i_n", "nu_n", "log_ratio", "log_n")] +
                           [(r.n, r.i_n, r.nu_n, r.log_lhs - r.log_rhs, math.log(r.n))
                            for r in found.rows])
        results[name] = found.to_dict()
    return Outcome({"type": "NotFound", "searched": results})


def _cmd_witness_inf(a):
    w = build_infinite_type_witness(parse_sequence(a.alpha), parse_sequence(a.beta),
                                    MonotoneIntMap.parse(a.S), a.k_max, a.depth, a.min_block)
    if isinstance(w, NotFound):
        return Outcome(w)
    rows = [("k", "n", "m", "growth")]
    for b in w.blocks:
        rows += [(b.k, n, m, g) for (n, m), g in zip(b.members, w.growth(b.k))]
    return Outcome(w.to_json(), csv_rows=rows)


def _cmd_check_op(a):
    with open(a.file, encoding="utf-8") as fh:
        T = QuasiDiagonalOperator.from_json(json.load(fh))
    depth = a.depth if a.depth_given else None
    prof = continuity_characteristic(T, a.k_max, a.r_max, depth)
    out = {"profile": prof.to_dict()}
    code = EXIT_OK
    if a.S:
        out["s_tame"] = is_S_tame(T, MonotoneIntMap.parse(a.S), a.k_max, depth, a.r_max).to_dict()
    if a.A is not None:
        cert = linear_tame_certificate(T, a.A, a.k_max, depth or int(T.source.max()))
        if isinstance(cert, Refuted):
            code = EXIT_REFUTED
            out["linear_tame"] = cert.to_dict()
        else:
            out["linear_tame"] = {**cert.to_json(), "operator": T.to_json()}
    return Outcome(out, code, csv_rows=prof.csv_rows())


def verify_document(data: dict) -> list[str]:
    """Independent re-check of a serialized witness or certificate."""
    kind = data.get("type")
    if kind is None and "result" in data:
        data = data["result"]
        kind = data.get("type")
        if kind is None and "certificate" in data:
            data, kind = data["certificate"], "FailureCertificate"
    if kind == "FailureCertificate":
        return verify_failure_certificate(FailureCertificate.from_json(data))
    if kind == "InfiniteTypeWitness":
        return verify_infinite_type_witness(InfiniteTypeWitness.from_json(data))
    if kind == "LinearTameCertificate":
        T = QuasiDiagonalOperator.from_json(data["operator"])
        return verify_linear_tame_certificate(LinearTameCertificate.from_json(data), T)
    if kind is None and "linear_tame" in data:
        return verify_document(data["linear_tame"])
    raise InvalidCertificate(f"cannot verify a document of type {kind!r}")


def _cmd_verify(a):
    with open(a.file, encoding="utf-8") as fh:
        problems = verify_document(json.load(fh))
    return Outcome({"valid": not problems, "problems": problems},
                   EXIT_OK if not problems else EXIT_REFUTED)


# ---------------------------------------------------------------------------


def _positive(kind):
    def conv(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tamepairs", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", help="write the JSON report here (default: stdout)")
    common.add_argument("--csv", help="also write plot data as CSV")
    common.add_argument("--pretty", action="store_true", help="indent the JSON report")
    common.add_argument("--depth", type=_positive(int), default=None,
                        help=f"truncation depth (default 2000, or ${DEPTH_ENV})")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(fn=fn)
        return sp

    for name, fn, help_ in (("classify", _cmd_classify, "tameness cell of a pair"),
                            ("product", _cmd_product, "tameness of a Cartesian product")):
        sp = add(name, fn, help_)
        sp.add_argument("--left", required=True)
        sp.add_argument("--right", required=True)
        sp.add_argument("--cutoff", type=_positive(float), default=10.0)

    sp = add("stability", _cmd_stability, "sup of consecutive ratios")
    sp.add_argument("--seq", required=True)

    sp = add("limitpoints", _cmd_limitpoints, "finite limit points of beta_i/alpha_j")
    sp.add_argument("--beta", required=True)
    sp.add_argument("--alpha", required=True)
    sp.add_argument("--cutoff", type=_positive(float), default=10.0)
    sp.add_argument("--cluster-eps", type=_positive(float), default=1e-2)

    sp = add("piszczek", _cmd_piszczek, "growth of the Piszczek constant C(N)")
    sp.add_argument("--A", required=True)
    sp.add_argument("--B", required=True)
    sp.add_argument("--psi", required=True)
    sp.add_argument("--phi", required=True)
    sp.add_argument("--m", type=_positive(int), default=2)
    sp.add_argument("--n-max", type=_positive(int), default=4)
    sp.add_argument("--depths", default="100,1000,5000,10000")

    sp = add("witness-qd", _cmd_witness_qd, "search a failure certificate and build its operator")
    sp.add_argument("--A", required=True)
    sp.add_argument("--B", required=True)
    sp.add_argument("--psi", required=True)
    sp.add_argument("--phi", help="grade map; default tries the built-in family")
    sp.add_argument("--n-target", type=_positive(int), default=20)

    sp = add("witness-inf", _cmd_witness_inf, "interval-block witness on infinite-type spaces")
    sp.add_argument("--alpha", required=True)
    sp.add_argument("--beta", required=True)
    sp.add_argument("--S", required=True)
    sp.add_argument("--kmax", dest="k_max", type=_positive(int), default=5)
    sp.add_argument("--min-block", type=_positive(int), default=5)

    sp = add("check-op", _cmd_check_op, "continuity characteristic of a quasi-diagonal operator")
    sp.add_argument("--file", required=True)
    sp.add_argument("--kmax", dest="k_max", type=_positive(int), default=5)
    sp.add_argument("--rmax", dest="r_max", type=_positive(int), default=20)
    sp.add_argument("--S", help="also test S-tameness")
    sp.add_argument("--A", type=_positive(float), help="also build a linear tameness certificate")

    sp = add("verify", _cmd_verify, "re-check a serialized witness or certificate")
    sp.add_argument("--file", required=True)
    return p


def _config(args) -> dict:
    skip = {"fn", "json", "csv", "pretty", "depth_given"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.depth_given = args.depth is not None
    if args.depth is None:
        args.depth = default_depth()
    config = _config(args)
    try:
        outcome = args.fn(args)
    except InvalidCertificate as exc:
        outcome = Outcome({"type": "InvalidCertificate", "error": str(exc)}, EXIT_REFUTED)
    except (TamePairsError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"tamepairs: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if isinstance(outcome.result, Refuted):
        outcome.exit_code = EXIT_REFUTED
    text = dumps({"command": args.command, "config": config, "result": outcome.result,
                  "version": __version__}, indent=2 if args.pretty else None) + "\n"
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.csv and outcome.csv_rows:
        write_csv(args.csv, outcome.csv_rows)
    return outcome.exit_code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
