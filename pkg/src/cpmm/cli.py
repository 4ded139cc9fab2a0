"""Command-line front end: descriptor I/O and analysis pipelines.

Every command prints (or writes to --out) a JSON document with sorted keys,
floats rounded to 12 significant digits, the hash of the input descriptor and
the full option set. Exit status is 0 on success, 2 when the answer is
inconclusive at the requested horizon and 1 on error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import classify as cl
from . import graphcore as gc
from . import maps
from . import paths
from . import solutions as sol
from . import spectral as sp
from .exact import Surd

OK, ERROR, INCONCLUSIVE = 0, 1, 2
DIGITS = 12
COMMANDS = ("entropy", "classify", "eigsolve", "linearize", "perturb", "paths", "identities",
            "gallery")
# keys a document written by this tool may carry next to the descriptor
ENVELOPE = {"descriptor", "expected", "advisor", "command", "options", "input_hash", "version", "status"}


class CliError(Exception):
    pass


# --------------------------------------------------------------------------
# output formatting


def _snake(name: Optional[str]) -> Optional[str]:
    if name is None:
        return None
    return re.sub(r"(?<!^)(?=[A-Z])", "_", name).lower()


def canonical(x):
    """JSON-ready copy with fixed float precision and exact values as strings."""
    if isinstance(x, dict):
        return {str(k): canonical(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [canonical(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{DIGITS}g}")
    if isinstance(x, (Fraction, Surd)):
        return str(x) if not isinstance(x, Fraction) or x.denominator != 1 else x.numerator
    if x is None or isinstance(x, str):
        return x
    if hasattr(x, "to_json"):
        return canonical(x.to_json())
    raise CliError(f"cannot serialize {type(x).__name__}")


def dumps(doc) -> str:
    return json.dumps(canonical(doc), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def descriptor_hash(obj) -> str:
    text = json.dumps(canonical(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(text.encode()).hexdigest()


def _flatten(doc, prefix=""):
    if isinstance(doc, dict):
        for k in sorted(doc):
            yield from _flatten(doc[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(doc, list):
        for i, v in enumerate(doc):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, doc


def to_csv(table: Optional[tuple], doc: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if table is None:
        w.writerow(("key", "value"))
        for k, v in _flatten(canonical(doc)):
            w.writerow((k, "" if v is None else v))
    else:
        header, rows = table
        w.writerow(header)
        for r in rows:
            w.writerow([canonical(x) for x in r])
    return buf.getvalue()


# --------------------------------------------------------------------------
# input


@dataclass
class Result:
    doc: dict
    status: int = OK
    table: Optional[tuple] = None
    extra: dict = field(default_factory=dict)


def _read_json(path: str):
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise CliError(f"{path} is not valid JSON: {e}") from None


def _unwrap(d, path: str) -> dict:
    if not isinstance(d, dict):
        raise CliError(f"{path}: descriptor must be a JSON object")
    if "descriptor" in d:
        extra = set(d) - ENVELOPE
        if extra:
            raise CliError(f"{path}: unknown fields {sorted(extra)}")
        return d["descriptor"]
    return d


def load_matrix(args) -> tuple:
    """Matrix, the object whose hash identifies the input, and the family if any."""
    sources = [s for s in ("matrix", "family", "map") if getattr(args, s, None)]
    if len(sources) != 1:
        raise CliError("give exactly one of --matrix, --family, --map")
    if args.family:
        try:
            fam = cl.parse_family(args.family)
        except (ValueError, TypeError) as e:
            raise CliError(f"invalid --family: {e}") from None
        return fam.matrix(), {"family": str(fam)}, fam
    if args.map:
        mapd = load_map(args.map)
        return maps.transition_matrix(mapd), mapd.to_json(), None
    d = _unwrap(_read_json(args.matrix), args.matrix)
    try:
        M = gc.matrix_from_json(d)
    except (KeyError, TypeError, ValueError) as e:
        raise CliError(f"malformed matrix descriptor {args.matrix}: {_msg(e)}") from None
    return M, M.to_json(), cl.family_of(M)


def load_map(path: str) -> maps.MarkovMapDescriptor:
    d = _unwrap(_read_json(path), path)
    try:
        return maps.map_from_json(d)
    except maps.MarkovViolation as e:
        raise CliError(f"map {path} violates the Markov condition: {e}") from None
    except (KeyError, TypeError, ValueError) as e:
        raise CliError(f"malformed map descriptor {path}: {_msg(e)}") from None


def _msg(e: Exception) -> str:
    return f"missing field {e}" if isinstance(e, KeyError) else str(e)


def int_list(text: str) -> list:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def positive_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {n}")
    return n


def positive_float(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not (x > 0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError(f"expected a positive finite number, got {text!r}")
    return x


def schedule(text: str) -> list:
    out = int_list(text)
    if any(n < 1 for n in out) or any(b <= a for a, b in zip(out, out[1:])):
        raise argparse.ArgumentTypeError("schedule must be strictly increasing positive sizes")
    return out


def _param_value(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for conv in (int, Fraction):
        try:
            v = conv(text)
            return v if conv is int or v.denominator != 1 else int(v)
        except (ValueError, ZeroDivisionError):
            pass
    return text


# parameter spellings accepted on the command line
PARAM_ALIASES = {"lambda": "lam"}


def parse_params(items) -> dict:
    out = {}
    for item in items or ():
        for part in item.split(","):
            if not part:
                continue
            key, eq, val = part.partition("=")
            if not eq or not key:
                raise CliError(f"--params expects key=value, got {part!r}")
            key = PARAM_ALIASES.get(key, key)
            if key in out:
                raise CliError(f"parameter {key!r} given twice")
            out[key] = val if key == "a" else _param_value(val)
    return out


# --------------------------------------------------------------------------
# commands


def cmd_entropy(args) -> Result:
    M, _, fam = load_matrix(args)
    closed = None
    if fam is not None:
        v = cl.classify_closed_form(fam)
        closed = v.lam
    summary = sp.perron_value(M, args.schedule, args.tol, closed)
    doc = summary.to_json()
    doc["entropy"] = summary.entropy
    if fam is not None and v.lam_symbolic:
        doc["lambda_symbolic"] = v.lam_symbolic
    table = (("N", "radius"), summary.schedule)
    return Result(doc, OK if summary.converged else INCONCLUSIVE, table)


def cmd_classify(args) -> Result:
    M, _, fam = load_matrix(args)
    if fam is not None and not args.numeric:
        v = cl.classify_closed_form(fam)
    elif args.numeric:
        v = cl.classify_numeric(M, args.state, args.horizon, args.tol)
    else:
        v = cl.classify(M, args.state, args.horizon, args.tol)
    doc = v.to_json()
    doc["class"] = _snake(v.kind)
    status = INCONCLUSIVE if v.confidence == cl.INCONCLUSIVE else OK
    return Result(doc, status)


def cmd_eigsolve(args) -> Result:
    M, _, _ = load_matrix(args)
    diag: list = []
    if args.family and args.family.startswith("bt12") or _is_bt12(M):
        v = sol.bt12_solution(args.lam, window=max(args.horizon, 64))
    else:
        v = sol.perron_solution(M, args.lam, args.horizon) if not args.generic else \
            sol.solve_truncated(M, args.lam, args.horizon, diagnostics=diag)
        if v is None and not args.generic:
            sol.solve_truncated(M, args.lam, args.horizon, diagnostics=diag)
    if v is None:
        reasons = [d.reason for d in diag]
        return Result({"solution": None, "lambda": args.lam, "reasons": reasons}, INCONCLUSIVE)
    report = sol.verify_solution(M, v)
    summ = sol.summability(v)
    doc = {"solution": v.to_json(limit=64), "verify": report.to_json(),
           "summability": summ.to_json()}
    status = OK if report.passed and summ.verdict != sol.UNKNOWN else INCONCLUSIVE
    table = (("j", "v"), [(v.lo + k, x) for k, x in enumerate(v.prefix[:64])])
    return Result(doc, status, table)


def _is_bt12(M) -> bool:
    return not M.index_set.finite and M == gc.bt12_matrix()


def cmd_paths(args) -> Result:
    M, _, _ = load_matrix(args)
    try:
        t = paths.coeff_table(M, args.kind, args.i, args.j, args.horizon)
    except (paths.WindowError, paths.BudgetExceeded) as e:
        raise CliError(str(e)) from None
    doc = {"kind": args.kind, "i": args.i, "j": args.j, "horizon": args.horizon,
           "values": t.as_list()}
    # exact integers go to CSV as decimal strings
    table = (("n", "value"), [(n, str(c)) for n, c in enumerate(t.values)])
    return Result(doc, OK, table)


def cmd_identities(args) -> Result:
    if args.random:
        if args.seedless:
            raise CliError("--random draws graphs from a seeded generator; drop --seedless")
        rng = np.random.default_rng(args.seed)
        summaries, ok = [], True
        for _ in range(args.random):
            F = paths.random_graph(rng)
            M = F.as_countable()
            n = F.size
            pset = sorted(set(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
                              .tolist()))
            rep = paths.check_identities(M, range(n), args.horizon, pset)
            ok &= rep.passed
            summaries.append({"size": n, "pset": pset, "passed": rep.passed,
                              "results": rep.summary()})
        doc = {"graphs": summaries, "passed": ok, "seed": args.seed}
        return Result(doc, OK if ok else ERROR)
    M, _, _ = load_matrix(args)
    rep = paths.check_identities(M, args.window, args.horizon, args.pset)
    doc = {"passed": rep.passed, "results": rep.summary(), "window": args.window}
    return Result(doc, OK if rep.passed else ERROR)


def cmd_linearize(args) -> Result:
    mapd = load_map(args.map)
    try:
        csm = maps.linearize(mapd, args.lam, window=args.window)
    except maps.LinearizeRefused as e:
        raise CliError(f"linearize refused: {e}") from None
    doc = {"constant_slope_map": csm.to_json(),
           "max_slope_deviation": csm.max_slope_deviation()}
    table = (("x", "y"), csm.sample(args.samples))
    return Result(doc, OK, table, {"sample": table})


def cmd_perturb(args) -> Result:
    mapd = load_map(args.map)
    if (args.element is None) == (args.assignments is None):
        raise CliError("give either --element with --order, or --assignments")
    if args.element is not None:
        if args.order is None:
            raise CliError("--element needs --order")
        if args.window is not None:
            raise CliError("--window applies to --assignments only")
        out = maps.window_perturb_local(mapd, args.element, args.order)
    else:
        raw = _read_json(args.assignments)
        if not isinstance(raw, dict) or not raw:
            raise CliError("assignments must be a nonempty JSON object {element: order}")
        try:
            assign = {int(k): int(v) for k, v in raw.items()}
        except (TypeError, ValueError):
            raise CliError("assignments must map integer elements to integer orders") from None
        window = None
        if args.window is not None:
            parts = args.window.split(",")
            if len(parts) != 2:
                raise CliError("--window expects a,b")
            window = tuple(_param_value(p) for p in parts)
        out = maps.window_perturb_global(mapd, assign, window)
    rec = maps.linearizability_advisor(out)
    advice = rec.to_json()
    if "class" in advice.get("details", {}):
        advice["details"]["class"] = _snake(advice["details"]["class"])
    return Result({"descriptor": out.to_json(), "advisor": advice}, OK)


def cmd_gallery(args) -> Result:
    if args.list:
        return Result({"gallery": list(maps.GALLERY)}, OK)
    if not args.name:
        raise CliError("--name is required (or --list)")
    params = parse_params(args.params)
    mapd, expected = maps.gallery(args.name, **params)
    doc = {"descriptor": mapd.to_json()}
    if args.expected:
        exp = dict(expected)
        if "class" in exp:
            exp["class"] = _snake(exp["class"])
        doc["expected"] = exp
    return Result(doc, OK)


HANDLERS = {"entropy": cmd_entropy, "classify": cmd_classify, "eigsolve": cmd_eigsolve,
            "linearize": cmd_linearize, "perturb": cmd_perturb, "paths": cmd_paths,
            "identities": cmd_identities, "gallery": cmd_gallery}


# --------------------------------------------------------------------------
# parser


class Parser(argparse.ArgumentParser):
    """Usage errors exit with 1; status 2 is reserved for inconclusive results."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ERROR, f"{self.prog}: error: {message}\n")


def _matrix_inputs(p: argparse.ArgumentParser):
    p.add_argument("--matrix", help="matrix descriptor JSON file ('-' for stdin)")
    p.add_argument("--family", help="named family, e.g. boundary_n:1,1,3 or banded_z:1,2")
    p.add_argument("--map", help="map descriptor JSON file; its transition matrix is used")


def build_parser() -> argparse.ArgumentParser:
    common = Parser(add_help=False)
    common.add_argument("--out", help="write the result here instead of standard output")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seedless", action="store_true",
                        help="refuse any computation that draws random numbers")

    parser = Parser(prog="cpmm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cpmm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entropy", parents=[common], help="Perron value along a truncation schedule")
    _matrix_inputs(p)
    p.add_argument("--schedule", type=schedule, default=list(sp.DEFAULT_SCHEDULE))
    p.add_argument("--tol", type=positive_float, default=1e-3)

    p = sub.add_parser("classify", parents=[common], help="Vere-Jones class with evidence")
    _matrix_inputs(p)
    p.add_argument("--horizon", type=positive_int, default=400)
    p.add_argument("--state", type=int, default=None, help="reference state j")
    p.add_argument("--tol", type=positive_float, default=cl.DEFAULT_TOL)
    p.add_argument("--numeric", action="store_true", help="skip closed forms")

    p = sub.add_parser("eigsolve", parents=[common], help="positive solution of Mv = lambda v")
    _matrix_inputs(p)
    p.add_argument("--lambda", dest="lam", type=positive_float, required=True)
    p.add_argument("--horizon", type=positive_int, default=200)
    p.add_argument("--generic", action="store_true", help="skip closed-form solvers")

    p = sub.add_parser("paths", parents=[common], help="path-count coefficients")
    _matrix_inputs(p)
    p.add_argument("--i", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--kind", default="m", help="m, f, l, taboo:k or gset:a,b,c")
    p.add_argument("--horizon", type=positive_int, default=20)

    p = sub.add_parser("identities", parents=[common], help="check the convolution identities")
    _matrix_inputs(p)
    p.add_argument("--window", type=int_list, default=[0, 1])
    p.add_argument("--pset", type=int_list, default=None)
    p.add_argument("--horizon", type=positive_int, default=10)
    p.add_argument("--random", type=positive_int, default=0,
                   help="check this many random finite graphs instead")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("linearize", parents=[common], help="constant-slope conjugate map")
    p.add_argument("--map", required=True)
    p.add_argument("--lambda", dest="lam", type=positive_float, default=None)
    p.add_argument("--window", type=positive_int, default=None)
    p.add_argument("--samples", type=positive_int, default=257)
    p.add_argument("--sample-out", help="CSV file for the sampled graph")

    p = sub.add_parser("perturb", parents=[common], help="window perturbation of a map")
    p.add_argument("--map", required=True)
    p.add_argument("--element", type=int, default=None)
    p.add_argument("--order", type=positive_int, default=None)
    p.add_argument("--assignments", default=None, help="JSON object {element: order}")
    p.add_argument("--window", default=None, help="centralized window a,b")

    p = sub.add_parser("gallery", parents=[common], help="named example maps")
    p.add_argument("--name", choices=maps.GALLERY)
    p.add_argument("--params", action="append", help="key=value[,key=value]")
    p.add_argument("--expected", action="store_true", help="include the known results")
    p.add_argument("--list", action="store_true")
    return parser


def _options(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("command",)}


def _input_hash(args) -> Optional[str]:
    parts = {}
    for key in ("matrix", "map", "assignments"):
        path = getattr(args, key, None)
        if path:
            parts[key] = _read_json(path)
    if getattr(args, "family", None):
        parts["family"] = args.family
    if args.command == "gallery" and args.name:
        parts["gallery"] = [args.name, sorted(args.params or [])]
    return descriptor_hash(parts) if parts else None


def run(args) -> int:
    try:
        result = HANDLERS[args.command](args)
        doc = dict(result.doc)
        doc.update(command=args.command, options=_options(args), input_hash=_input_hash(args),
                   version=__version__, status=result.status)
        if args.format == "csv":
            text = to_csv(result.table, doc)
        else:
            text = dumps(doc)
        if args.command == "linearize":
            target = args.sample_out or (str(Path(args.out).with_suffix(".csv")) if args.out
                                         else None)
            if target and target != args.out:
                Path(target).write_text(to_csv(result.extra["sample"], doc))
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return result.status
    except (CliError, gc.DomainError, cl.UnknownFamily, maps.MapError, sp.ConvergenceError,
            sp.UndefinedGrowth, ValueError) as e:
        print(f"cpmm {args.command}: error: {e}", file=sys.stderr)
        return ERROR


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else ERROR
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
