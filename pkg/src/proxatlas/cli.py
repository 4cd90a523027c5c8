"""Command-line front end.

Exit codes: 0 prox-compatible, 1 not a prox (witness found), 2 inconclusive,
3 domain/locus/unsupported error, 64 usage error or bad operator spec.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .bregman import (GENERATORS, check_bregman_left_prox, check_bregman_right_prox,
                      check_linear_inverse_prox, generator)
from .catalog import CATALOG, catalog_entry, resolve_operator
from .errors import ProxAtlasError, SpecError, StateError, UnsupportedError
from .fields import Box, OperatorSpec
from .proxcheck import (INCONCLUSIVE, NOT_PROX, PROX_COMPATIBLE, check_jacobian_prox,
                        check_monotone_1d, classify_penalty, find_asymmetry_witness)
from .reconstruct import oracle_round_trip, reconstruct
from .report import dumps, timestamp, write_atomic
from .shrinkage import derive_partition

EXIT_OK, EXIT_NOT_PROX, EXIT_INCONCLUSIVE, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2, 3, 64
VERDICT_EXIT = {PROX_COMPATIBLE: EXIT_OK, NOT_PROX: EXIT_NOT_PROX, INCONCLUSIVE: EXIT_INCONCLUSIVE}
DEFAULT_HALF_WIDTH = 5.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def parse_box(text: str | None, op: OperatorSpec) -> Box:
    """``"lo:hi"`` for a cube, ``"lo:hi,lo:hi,..."`` per coordinate; clipped to the domain."""
    if text is None:
        box = Box.cube(-DEFAULT_HALF_WIDTH, DEFAULT_HALF_WIDTH, op.n)
    else:
        try:
            parts = [tuple(float(v) for v in p.split(":")) for p in text.split(",")]
            if any(len(p) != 2 for p in parts):
                raise ValueError
        except ValueError:
            raise UsageError(f"bad box {text!r}; expected lo:hi or lo:hi,lo:hi,...") from None
        if len(parts) == 1:
            parts = parts * op.n
        if len(parts) != op.n:
            raise UsageError(f"box has {len(parts)} intervals, operator dimension is {op.n}")
        box = Box(np.array([p[0] for p in parts]), np.array([p[1] for p in parts]))
    return box.intersect(op.domain)


def _parse_matrix(text: str) -> np.ndarray:
    try:
        return np.array([[float(v) for v in row.split(",")] for row in text.split(";")])
    except ValueError:
        raise UsageError(f"bad matrix {text!r}; expected rows separated by ';'") from None


def _tie_probes(op: OperatorSpec) -> list:
    rule = op.params.get("rule")
    if rule is None or op.n != 1:
        return []
    if rule.kind == "hard" and rule.lam > 0:
        return [[-rule.hard_cut], [rule.hard_cut]]
    if rule.kind == "quantizer":
        return [[x] for x in rule.breakpoints[1:-1]]
    return []


def _emit(payload: dict, out: str | None) -> None:
    payload = dict(payload, timestamp=timestamp(), version=__version__)
    text = dumps(payload) + "\n"
    if out:
        write_atomic(out, text)
    sys.stdout.write(text)


def _config(args, op_text=None, **extra) -> dict:
    cfg = {"command": args.command}
    for key in ("op", "box", "samples", "seed", "grid", "sym_tol", "eig_tol", "gen", "form", "matrix"):
        if hasattr(args, key):
            cfg[key] = getattr(args, key)
    cfg.update(extra)
    return cfg


def run_check(op: OperatorSpec, box: Box, samples: int, seed: int, grid: int,
              sym_tol: float, eig_tol: float):
    """1D monotonicity scan or sampled Jacobian test, then penalty classification."""
    if op.n == 1 and op.n_out == 1:
        report = check_monotone_1d(op, grid, box)
    else:
        report = check_jacobian_prox(op, samples, box, seed, sym_tol, eig_tol)
    if report.verdict == PROX_COMPATIBLE:
        report = classify_penalty(op, report, box, seed=seed)
    return report


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_catalog(args) -> int:
    entries = [catalog_entry(args.id)] if args.id else [dict(e) for e in CATALOG]
    if args.json:
        sys.stdout.write(dumps(entries) + "\n")
        return EXIT_OK
    width = max(len(e["id"]) for e in entries)
    for e in entries:
        params = ", ".join(f"{k}={v}" for k, v in e["params"].items()) or "-"
        tag = "prox" if e["prox"] else "not prox"
        print(f"{e['id']:<{width}}  {e['kind']:<7} {tag:<8}  [{params}]  {e['origin']}")
    return EXIT_OK


def cmd_check(args) -> int:
    op = resolve_operator(args.op)
    box = parse_box(args.box, op)
    report = run_check(op, box, args.samples, args.seed, args.grid, args.sym_tol, args.eig_tol)
    payload = dict(report.to_dict(seed=args.seed), config=_config(args), box_used=box.to_list())
    _emit(payload, args.out)
    return VERDICT_EXIT[report.verdict]


def cmd_reconstruct(args) -> int:
    op = resolve_operator(args.op)
    box = parse_box(args.box, op)
    report = run_check(op, box, args.samples, args.seed, args.grid, 1e-6, 1e-8)
    if report.verdict != PROX_COMPATIBLE and not args.force:
        print(f"check returned {report.verdict}; rerun with --force to reconstruct anyway",
              file=sys.stderr)
        return VERDICT_EXIT[report.verdict] or EXIT_NOT_PROX
    if op.n == 1:
        points = np.linspace(box.lower[0], box.upper[0], args.grid)
    else:
        rng = np.random.default_rng(args.seed)
        points = box.lower + rng.random((args.samples, op.n)) * box.width
    rec = reconstruct(op, points, box=box)
    if args.csv:
        write_atomic(args.csv, rec.to_csv())
    payload = dict(rec.to_dict(), config=_config(args), check_verdict=report.verdict,
                   csv=args.csv, seed=args.seed, schema=1)
    if not args.csv:
        header, body = rec.rows()
        payload["columns"] = header
        payload["data"] = body
    _emit(payload, args.out)
    return EXIT_OK


def cmd_witness(args) -> int:
    op = resolve_operator(args.op)
    spec = op.params.get("social")
    if spec is None:
        raise UsageError(f"witness needs a social shrinkage operator (wglasso or pew), got {args.op!r}")
    part = derive_partition(spec.system)
    payload = {"schema": 1, "seed": args.seed, "config": _config(args), "partition": part.to_dict()}
    if part.ok:
        payload["witness"] = None
        _emit(payload, args.out)
        return EXIT_OK
    wit = find_asymmetry_witness(spec, seed=args.seed, restarts=args.restarts)
    payload["witness"] = None if wit is None else wit.to_dict()
    _emit(payload, args.out)
    return EXIT_NOT_PROX if wit is not None else EXIT_INCONCLUSIVE


def cmd_oracle(args) -> int:
    op = resolve_operator(args.op)
    if op.n > 2:
        raise UnsupportedError("the exhaustive oracle is limited to dimension <= 2")
    box = parse_box(args.box, op)
    res = oracle_round_trip(op, box, args.grid, args.samples, args.seed, probes=_tie_probes(op))
    payload = dict(res.to_dict(), config=_config(args), seed=args.seed, schema=1)
    _emit(payload, args.out)
    return EXIT_OK if res.max_deviation_steps <= 1.0 else EXIT_NOT_PROX


def cmd_bregman(args) -> int:
    op = resolve_operator(args.op)
    box = parse_box(args.box, op)
    tol = {"sym_tol": args.sym_tol, "eig_tol": args.eig_tol}
    if args.form == "linear":
        if args.matrix is None:
            raise UsageError("--form linear needs --matrix")
        report = check_linear_inverse_prox(op, _parse_matrix(args.matrix), args.samples, box, args.seed, **tol)
    else:
        gen = generator(args.gen)
        check = check_bregman_left_prox if args.form == "left" else check_bregman_right_prox
        report = check(op, gen, args.samples, box, args.seed, **tol)
    payload = dict(report.to_dict(seed=args.seed), config=_config(args), box_used=box.to_list())
    _emit(payload, args.out)
    return VERDICT_EXIT[report.verdict]


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="proxatlas", description="Decide whether a map is a proximity operator and recover its penalty.",
                     epilog="exit codes: 0 prox-compatible, 1 not a prox, 2 inconclusive, 3 domain error, 64 usage error")
    parser.add_argument("--version", action="version", version=f"proxatlas {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("catalog", help="list built-in operators")
    p.add_argument("--json", action="store_true")
    p.add_argument("--id")
    p.set_defaults(func=cmd_catalog)

    def common(p, samples=100, grid=10_000):
        p.add_argument("--op", required=True, help="catalog id (name:key=value:...) or JSON spec file")
        p.add_argument("--box", help="lo:hi or lo:hi,lo:hi,... (default -5:5, clipped to the domain)")
        p.add_argument("--samples", type=int, default=samples)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--grid", type=int, default=grid)
        p.add_argument("--out", help="also write the JSON report to this path")

    def tolerances(p):
        p.add_argument("--sym-tol", type=float, default=1e-6)
        p.add_argument("--eig-tol", type=float, default=1e-8)

    p = sub.add_parser("check", help="decide whether an operator can be a prox")
    common(p)
    tolerances(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("reconstruct", help="sample the potential and the penalty")
    common(p, grid=1001)
    p.add_argument("--force", action="store_true", help="reconstruct even if the check fails")
    p.add_argument("--csv", help="write rows y..., f..., psi, x..., phi, component to this file")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("witness", help="partition or asymmetry witness for social shrinkage")
    p.add_argument("--op", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=10_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("oracle", help="compare f with exhaustive minimization of the reconstructed objective")
    common(p, grid=10_001)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bregman-check", help="Bregman or linear-inverse variant of the check")
    common(p)
    tolerances(p)
    p.add_argument("--gen", choices=sorted(GENERATORS), default="sq_norm")
    p.add_argument("--form", choices=("left", "right", "linear"), default="left")
    p.add_argument("--matrix", help="rows separated by ';', entries by ',' (for --form linear)")
    p.set_defaults(func=cmd_bregman)
    return parser


def _join_negative_values(argv: list[str]) -> list[str]:
    """Let ``--box -3:3`` through: argparse would read ``-3:3`` as an option."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--box" and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"--box={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(_join_negative_values(argv))
    try:
        return args.func(args)
    except (UsageError, SpecError) as exc:
        print(f"proxatlas: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StateError as exc:
        print(f"proxatlas: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ProxAtlasError, ValueError, ArithmeticError) as exc:
        print(f"proxatlas: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
