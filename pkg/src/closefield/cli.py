"""Command-line frontend: batch computations with canonical JSON output.

Exit codes: 0 ok, 2 parse error, 3 precision loss, 4 budget or window
exceeded, 5 verification failure.
"""
from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import dataclass

from . import hecke
from .coset_enum import DEFAULT_BUDGET, double_coset_key
from .dvr_linalg import cartan, parse_matrix
from .errors import CloseFieldError, ParseError
from .local_ring import RingSpec, format_literal, parse_e
from .spherical_pairs import PairDescriptor, canonical_point


@dataclass
class RunConfig:
    spec: RingSpec
    prec: int
    level: int
    pair: str | None
    window: int
    budget: int
    seed: int
    out: str | None

    def validate(self):
        if self.prec < self.level:
            raise ParseError(f"precision {self.prec} is below the level {self.level}")
        if self.budget <= 0:
            raise ParseError("budget must be positive")
        if self.window < 0:
            raise ParseError("window radius must be nonnegative")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParseError(message)


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _matrix_json(A):
    return [[format_literal(x) for x in row] for row in A.rows]


def _int_list(text):
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ParseError(f"bad integer list {text!r}") from exc


def parse_cells(text):
    """``0,0;0,1`` for one factor, ``0,0/0;0,1/1`` for products."""
    cells = []
    for part in text.split(";"):
        factors = tuple(_int_list(f) for f in part.split("/"))
        cells.append(factors)
    if not cells:
        raise ParseError("empty window")
    return cells


def parse_deltas(text):
    return [_int_list(part) for part in text.split(";")]


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


# commands -----------------------------------------------------------------------------------

def cmd_cartan(args, cfg: RunConfig):
    A = parse_matrix(args.matrix, cfg.spec, cfg.prec)
    cf = cartan(A, cfg.level)
    return {
        "lambda": list(cf.lam),
        "k1": _matrix_json(cf.k1),
        "k2": _matrix_json(cf.k2),
        "prec_certificate": cf.prec_certificate,
    }


def _pair(cfg):
    if not cfg.pair:
        raise ParseError("--pair is required")
    return PairDescriptor.parse(cfg.pair)


def cmd_canon(args, cfg: RunConfig):
    pair = _pair(cfg)
    X = parse_matrix(args.matrix, cfg.spec, cfg.prec)
    pt = canonical_point(pair, X, cfg.level, cfg.budget)
    out = pt.to_json(cfg.spec.p)
    out["spec"] = str(cfg.spec)
    return out


def cmd_hecke(args, cfg: RunConfig):
    if args.op == "basis":
        mats = [parse_matrix(m, cfg.spec, cfg.prec) for m in args.operands]
        key = tuple(double_coset_key(M, cfg.level, budget=cfg.budget) for M in mats)
        return hecke.HeckeVector.basis(key, cfg.spec).to_json()
    if args.op == "point":
        if len(args.operands) != 1:
            raise ParseError("hecke point takes one matrix")
        X = parse_matrix(args.operands[0], cfg.spec, cfg.prec)
        return hecke.ModuleVector.from_matrix(_pair(cfg), X, cfg.level, cfg.budget).to_json()
    if len(args.operands) != 2:
        raise ParseError(f"hecke {args.op} takes two operand files")
    a, b = (hecke.vector_from_json(_read_json(p)) for p in args.operands)
    if args.op == "mul":
        if not isinstance(a, hecke.HeckeVector) or not isinstance(b, hecke.HeckeVector):
            raise ParseError("hecke mul takes two Hecke vectors")
        return hecke.convolve(a, b, cfg.window, cfg.budget).to_json()
    if not isinstance(a, hecke.HeckeVector) or not isinstance(b, hecke.ModuleVector):
        raise ParseError("hecke act takes a Hecke vector and a module vector")
    return hecke.act(a, b, cfg.window, cfg.budget).to_json()


def cmd_transfer_verify(args, cfg: RunConfig):
    s1 = RingSpec.parse(args.spec1)
    s2 = RingSpec.parse(args.spec2)
    if args.n is not None:
        hecke.check_close(s1, s2, args.n)
    rng = random.Random(cfg.seed)
    if args.mode == "algebra":
        gl = args.gl
        cells = parse_cells(args.cells) if args.cells else _default_gl_cells(gl)
        report = hecke.verify_algebra_transfer(s1, s2, cfg.level, cells, gl, args.n, cfg.window, cfg.budget)
    else:
        pair = _pair(cfg)
        cells = parse_cells(args.cells) if args.cells else _default_pair_cells(pair)
        deltas = parse_deltas(args.deltas) if args.deltas else [pair.zero_delta()]
        report = hecke.verify_module_transfer(pair, s1, s2, cfg.level, cells, deltas, args.n, cfg.window, cfg.budget)
    report["spec1"] = str(s1)
    report["spec2"] = str(s2)
    report["seed"] = cfg.seed
    if report["failures"] and args.max_failures is not None:
        rng.shuffle(report["failures"])
        report["failures"] = report["failures"][: args.max_failures]
    return report


def _default_gl_cells(n):
    zero = (0,) * n
    return [(zero,), (zero[:-1] + (1,),)]


def _default_pair_cells(pair):
    dims = pair.group_dims
    zero = tuple((0,) * d for d in dims)
    step = ((0,) * (dims[0] - 1) + (1,),) + zero[1:]
    return [zero, step]


# entry point --------------------------------------------------------------------------------

def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--p", type=int, default=2)
    common.add_argument("--e", type=parse_e, default="INF")
    common.add_argument("--prec", type=int, default=24)
    common.add_argument("--level", type=int, default=0)
    common.add_argument("--pair", default=None)
    common.add_argument("--window", type=int, default=hecke.DEFAULT_RADIUS, help="max |entry| of any cell")
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None)

    ap = _Parser(prog="closefield", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("cartan", parents=[common], help="Cartan decomposition k1 pi^lambda k2")
    c.add_argument("matrix")
    c.set_defaults(func=cmd_cartan)

    c = sub.add_parser("canon", parents=[common], help="canonical point of K_level x")
    c.add_argument("matrix")
    c.set_defaults(func=cmd_canon)

    c = sub.add_parser("hecke", parents=[common], help="Hecke algebra and module operations")
    c.add_argument("op", choices=["mul", "act", "basis", "point"])
    c.add_argument("operands", nargs="+")
    c.set_defaults(func=cmd_hecke)

    c = sub.add_parser("transfer-verify", parents=[common], help="check the transfer maps are homomorphisms")
    c.add_argument("mode", choices=["algebra", "module"])
    c.add_argument("spec1")
    c.add_argument("spec2")
    c.add_argument("--n", type=int, default=None, help="closeness used for the transfer")
    c.add_argument("--gl", type=int, default=2)
    c.add_argument("--cells", default=None)
    c.add_argument("--deltas", default=None)
    c.add_argument("--max-failures", type=int, default=None)
    c.set_defaults(func=cmd_transfer_verify)
    return ap


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def main(argv=None) -> int:
    out = None
    try:
        args = build_parser().parse_args(argv)
        out = args.out
        cfg = RunConfig(RingSpec(args.p, args.e), args.prec, args.level, args.pair, args.window, args.budget, args.seed, args.out)
        cfg.validate()
        result = args.func(args, cfg)
    except CloseFieldError as exc:
        body = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        if getattr(exc, "required", None) is not None:
            body["required_precision"] = exc.required
        _emit(dumps(body), out)
        return exc.exit_code
    _emit(dumps(result), out)
    if isinstance(result, dict) and result.get("failures"):
        return 5
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
