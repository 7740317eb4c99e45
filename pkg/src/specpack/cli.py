"""Command-line front end.

Every subcommand writes one JSON document (to ``--out`` or stdout) with a
fixed envelope::

    {"schema_version", "command", "argv", "input", "result", "pass", "wall_time"}

Exit status: 0 when every check passed, 1 when a check failed or an
internal error occurred, 2 when inputs violate a precondition or a
construction hypothesis, 64 on command-line usage errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, domains, geometry, packing, rayleigh, spectrum
from .checks import Check, all_passed, at_most, holds
from .errors import (
    ConstructionError, ConvergenceError, DomainError, HypothesisError, InvariantError,
    PreconditionError, ValidationError,
)

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_FAIL, EXIT_PRECONDITION, EXIT_USAGE = 0, 1, 2, 64

log = logging.getLogger("specpack")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _dimension_range(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            dims = list(range(int(lo), int(hi) + 1))
        else:
            dims = [int(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or LO..HI, got {text!r}") from None
    if not dims or dims[0] < 1:
        raise argparse.ArgumentTypeError(f"dimensions must be >= 1, got {text!r}")
    return dims


def _radius(text: str):
    if text == "auto":
        return "auto"
    try:
        r = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number or 'auto', got {text!r}") from None
    return r


def _digest(path: Path) -> dict:
    data = path.read_bytes()
    return {"path": str(path), "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)}


def _load_space(args):
    path = Path(args.space)
    if not path.is_file():
        raise DomainError(f"--space: no such file {path}")
    space = domains.load(path, args.format, dimension=args.dimension, eps=args.eps)
    return space, _digest(path)


# -- subcommands ----------------------------------------------------------------------


_BOOLEANS = {"true": True, "false": False}


def _param_value(text: str):
    if text.lower() in _BOOLEANS:
        return _BOOLEANS[text.lower()]
    parts = text.split(",")
    vals = []
    for part in parts:
        try:
            vals.append(int(part))
        except ValueError:
            try:
                vals.append(float(part))
            except ValueError:
                raise DomainError(f"--params: cannot parse value {text!r}") from None
    return tuple(vals) if len(vals) > 1 else vals[0]


def _parse_params(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise DomainError(f"--params: expected key=value, got {item!r}")
        out[key] = _param_value(val)
    return out


def cmd_generate(args) -> tuple[dict, list[Check], dict]:
    params = {key: getattr(args, key)
              for key in ("h", "P", "seed", "eps", "dim", "radius", "amplitude")
              if getattr(args, key) is not None}
    params.update(_parse_params(args.params))
    if args.shape is not None:
        if args.kind in ("path", "cycle"):
            params["P"] = args.shape[0]
        else:
            params["shape"] = tuple(args.shape)
    space = domains.generate(args.kind, **params)
    return space.to_dict(), [], {}


def cmd_constants(args):
    variants = ("hyperbolic", "euclidean") if args.variant == "both" else (args.variant,)
    rows = []
    for n in args.n:
        for v in variants:
            c = geometry.theorem2_constants(n, v)
            rows.append({**c.to_dict(), "k_0_unit_volume": geometry.schedule_radius(c, 1.0, 1)[1]})
    checks = []
    for row in rows:
        n, C1 = row["n"], row["C1"]
        checks.append(holds(f"n={n} {row['variant']}: A_n = 4 C(1) 2^(2/n)",
                            row["A_n"] == geometry.constant_A(C1, n)))
        checks.append(holds(f"n={n} {row['variant']}: B_n = 4 C(1) (8 C(1)^2 w)^(2/n)",
                            row["B_n"] == geometry.constant_B(C1, row["omega_prime_n"], n)))
    return {"constants": rows}, checks, {}


def cmd_pack(args):
    space, digest = _load_space(args)
    mx = packing.CoverageMaximizer(args.strategy, seed=args.seed)
    r = args.r
    source = "argument"
    if r == "auto":
        r = packing.admissible_radius(space, args.N)
        source = "admissible"
        if r is None:
            raise HypothesisError(f"no radius satisfies the packing hypothesis for N={args.N}")
    elif not r > 0:
        raise DomainError("--r must be positive")
    fam = packing.corollary1_family(space, mx, args.N, r, strict=args.strict)
    out = fam.to_dict()
    out["radius_source"] = source
    return out, list(fam.report), digest


def cmd_rayleigh(args):
    space, digest = _load_space(args)
    sets_path = Path(args.sets)
    if not sets_path.is_file():
        raise DomainError(f"--sets: no such file {sets_path}")
    try:
        raw = json.loads(sets_path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"--sets: line {exc.lineno}: {exc.msg}") from None
    fam_dict = raw.get("result", raw)
    if "sets" not in fam_dict:
        raise ValidationError("--sets: JSON has no 'sets' field")
    r = args.r if args.r is not None else float(fam_dict.get("r", 0))
    if not r > 0:
        raise DomainError("--r must be positive (or present in the family file)")
    cores = [space.pointset(s) for s in fam_dict["sets"]]
    fns = [rayleigh.plateau(space, A, r) for A in cores]
    lemma = [rayleigh.rayleigh_bound_lemma2(space, A, r, fn) for A, fn in zip(cores, fns)]
    checks = [holds("R(f_i) <= collar bound", all(f.rayleigh <= b for f, b in zip(fns, lemma))),
              at_most("max Lipschitz excess", max(rayleigh.lipschitz_violation(space, f) for f in fns), 1e-12)]
    result = {
        "r": r,
        "c_geom": rayleigh.c_geom(space),
        "h": space.max_edge_length,
        "plateaus": [{**f.to_dict(), "collar_bound": b} for f, b in zip(fns, lemma)],
    }
    try:
        bounds = rayleigh.eigen_upper_bounds(space, fns)
    except PreconditionError as exc:
        result["minmax"] = None
        result["minmax_skipped"] = str(exc)
        return result, checks, digest
    m = min(len(bounds), space.n_points)
    lam = spectrum.space_spectrum(space, m, args.tol).eigenvalues
    slack = bounds[:m] - lam
    result["minmax"] = [{"m": j + 1, "lambda": lam[j], "bound": bounds[j], "slack": slack[j]}
                        for j in range(m)]
    checks.append(holds("lambda_m <= max_{i<=m} R(f_i)", bool(np.all(slack >= -rayleigh.MINMAX_SLACK))))
    return result, checks, digest


def cmd_spectrum(args):
    space, digest = _load_space(args)
    res = spectrum.space_spectrum(space, args.m, args.tol, method=args.method)
    return res.to_dict(), [], digest


def cmd_verify(args):
    space, digest = _load_space(args)
    consts = geometry.theorem2_constants(space.dimension, args.variant)
    mx = packing.CoverageMaximizer(args.strategy, seed=args.seed)
    run = rayleigh.theorem2_pipeline(space, consts, args.a, args.k, maximizer=mx, tol=args.tol)
    result = dict(run.report)
    checks = list(run.checks)
    if args.kmax is not None:
        sweep = rayleigh.theorem2_sweep(space, consts, args.a, args.kmax, args.tol)
        result["sweep"] = sweep
        checks.append(holds(f"lambda_k <= bound for k <= {len(sweep)}", all(row["pass"] for row in sweep)))
        if args.csv:
            with open(args.csv, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["k", "lambda_k", "bound_k"])
                for row in sweep:
                    w.writerow([row["k"], repr(row["lambda"]), repr(row["bound"])])
    elif args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "lambda_k", "bound_k"])
            w.writerow([args.k, repr(result["lambda_k"]), repr(result["bound_theorem"])])
    return result, checks, digest


# -- parser ----------------------------------------------------------------------------


def _space_args(p):
    p.add_argument("--space", required=True, help="space file")
    p.add_argument("--format", choices=domains.FORMATS, default="space-json")
    p.add_argument("--dimension", type=int, default=None, help="dimension hint for csv/edge-list input")
    p.add_argument("--eps", type=float, default=None, help="eps-graph radius for csv-points input")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="specpack", description="Packing constructions and Neumann eigenvalue bounds "
                 "on finite metric measure spaces.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--out", default=None, help="write JSON here instead of stdout")

    p = sub.add_parser("generate", help="write a test space as JSON")
    p.add_argument("--kind", required=True, choices=domains.KINDS)
    p.add_argument("--shape", type=int, nargs="+", default=None)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--P", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--amplitude", type=float, default=None)
    p.add_argument("--params", nargs="+", metavar="KEY=VALUE", default=None,
                   help="generator parameters, e.g. shape=16,16 h=0.0625")
    common(p)
    p.set_defaults(func=cmd_generate, raw=True)

    p = sub.add_parser("constants", help="table of C(1), omega'_n, A_n, B_n")
    p.add_argument("--n", type=_dimension_range, default=[2, 3, 4], help="N or LO..HI")
    p.add_argument("--variant", choices=("hyperbolic", "euclidean", "both"), default="hyperbolic")
    common(p)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("pack", help="build a separated packing family")
    _space_args(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--r", type=_radius, default="auto", help="radius or 'auto'")
    p.add_argument("--strategy", choices=packing.STRATEGIES, default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true",
                   help="stop when the packing hypothesis fails (default: record it and continue)")
    common(p)
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("rayleigh", help="plateau quotients and min-max bounds for a family")
    _space_args(p)
    p.add_argument("--sets", required=True, help="family JSON (output of 'pack')")
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-9)
    common(p)
    p.set_defaults(func=cmd_rayleigh)

    p = sub.add_parser("spectrum", help="lowest eigenvalues of the discrete Neumann Laplacian")
    _space_args(p)
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--method", choices=("auto", "dense", "lanczos"), default="auto")
    common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("verify", help="end-to-end eigenvalue bound check")
    _space_args(p)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--kmax", type=int, default=None, help="also check the bound for k = 1..KMAX")
    p.add_argument("--variant", choices=("hyperbolic", "euclidean"), default="hyperbolic")
    p.add_argument("--strategy", choices=packing.STRATEGIES, default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--csv", default=None, help="write (k, lambda_k, bound_k) rows here")
    common(p)
    p.set_defaults(func=cmd_verify)
    return ap


def _emit(doc: dict, out: Optional[str]) -> None:
    text = json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    t0 = time.perf_counter()
    try:
        result, checks, digest = args.func(args)
    except (DomainError, ValidationError, HypothesisError) as exc:
        print(f"specpack {args.command}: {exc}", file=sys.stderr)
        if isinstance(exc, HypothesisError) and exc.suggested_r:
            print(f"suggested radius: {exc.suggested_r:.9g}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (ConstructionError, InvariantError, ConvergenceError) as exc:
        print(f"specpack {args.command}: check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except Exception as exc:  # pragma: no cover - last-resort guard
        log.exception("internal error")
        print(f"specpack {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL

    if getattr(args, "raw", False):
        _emit(result, args.out)
        return EXIT_OK
    passed = all_passed(checks) and bool(result.get("pass", True))
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "argv": argv,
        "input": digest,
        "checks": [c.to_dict() for c in checks],
        "result": result,
        "pass": passed,
        "wall_time": time.perf_counter() - t0,
    }
    _emit(doc, args.out)
    return EXIT_OK if passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
