"""``pdfa`` command-line front end.

Exit codes: 0 success, 1 bad input, 2 solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import linalg, pai
from .cfg import Test, flow
from .dfa import gen_lv, kill_lv, solve_lv
from .errors import ParseError, PdfaError, PseudoInverseError, SolverError
from .lang import format_block, load_program, pretty_print
from .probdfa import BranchInfo, extract_branch_probs, solve_plv, solve_prob_forward
from .semantics import StateSpace, block_matrix, run_monte_carlo, test_matrix

SCHEMA = "pdfa/1"
EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2


class InputError(PdfaError):
    pass


# --------------------------------------------------------------------------
# Input helpers


def read_program(path):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{path}: no such file")
    try:
        return load_program(p.read_text(encoding="utf-8"))
    except ParseError as exc:
        if exc.line is None:
            raise InputError(f"{p.name}: {exc}") from None
        raise InputError(f"{p.name}:{exc.line}:{exc.column}: {exc.message}") from None
    except PdfaError as exc:
        raise InputError(f"{p.name}: {exc}") from None


def load_distribution(spec, space: StateSpace, tol=1e-6):
    """``"uniform"`` or a JSON file ``[{"state": {...}, "p": ...}, ...]``."""
    if spec is None or spec == "uniform":
        return space.uniform()
    p = Path(spec)
    if not p.is_file():
        raise InputError(f"{spec}: no such file")
    try:
        entries = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{spec}: invalid JSON ({exc})") from None
    return distribution_from_entries(entries, space, tol)


def distribution_from_entries(entries, space: StateSpace, tol=1e-6):
    rho = np.zeros(space.size)
    for item in entries:
        state = item["state"]
        if set(state) != set(space.names):
            raise InputError(f"state {state} must give a value for each of {list(space.names)}")
        values = []
        for d in space.decls:
            v = int(state[d.name])
            if not d.lo <= v <= d.hi:
                raise InputError(f"value {v} of {d.name!r} outside {d.lo}..{d.hi}")
            values.append(v)
        p = float(item["p"])
        if p < 0:
            raise InputError("negative probability in input distribution")
        rho[space.index(tuple(values))] += p
    total = rho.sum()
    if abs(total - 1.0) > tol:
        raise InputError(f"input distribution has total mass {total}, expected 1")
    return rho / total


def load_static_probs(path):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{path}: no such file")
    data = json.loads(p.read_text(encoding="utf-8"))
    return data.get("branches", data) if isinstance(data, dict) else data


# --------------------------------------------------------------------------
# Output helpers


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(f"{float(obj):.12g}")
        return 0.0 if x == 0 else x
    return obj


def dump_json(payload) -> str:
    return json.dumps(_clean({"schema": SCHEMA, **payload}), indent=2, sort_keys=True) + "\n"


def ast_to_dict(node):
    if dataclasses.is_dataclass(node):
        out = {"type": type(node).__name__}
        for f in dataclasses.fields(node):
            out[f.name] = ast_to_dict(getattr(node, f.name))
        return out
    if isinstance(node, tuple):
        return [ast_to_dict(x) for x in node]
    return node


def fmt(x) -> str:
    return f"{x:.6g}"


# --------------------------------------------------------------------------
# Subcommands; each returns (payload dict, text rendering)


def cmd_parse(args):
    prog = read_program(args.file)
    payload = {"variables": [{"name": d.name, "lo": d.lo, "hi": d.hi} for d in prog.decls],
               "body": ast_to_dict(prog.body)}
    return payload, pretty_print(prog)


def cmd_pretty(args):
    prog = read_program(args.file)
    text = pretty_print(prog)
    return {"source": text}, text


def cmd_cfg(args):
    graph = flow(read_program(args.file).body)
    if args.format == "dot":
        return None, graph.to_dot()
    lines = [f"init: {graph.init}", f"finals: {sorted(graph.finals)}"]
    for l, b in sorted(graph.blocks.items()):
        lines.append(f"  {l}: {format_block(b)}")
    for e in graph.edges:
        mark = " (T)" if e.branch == "true" else " (F)" if e.branch == "false" else ""
        lines.append(f"  {e.src} -> {e.dst}{mark}")
    return graph.to_dict(), "\n".join(lines) + "\n"


def cmd_lv(args):
    prog = read_program(args.file)
    sol = solve_lv(prog)
    graph = flow(prog.body)
    lines = ["label  gen        kill       entry          exit"]
    for l in graph.labels:
        b = graph.blocks[l]
        cols = [sorted(gen_lv(b)), sorted(kill_lv(b)), sorted(sol.entry[l]), sorted(sol.exit[l])]
        lines.append(f"{l:>5}  " + "  ".join(("{" + ",".join(c) + "}").ljust(12) for c in cols))
    return {"labels": sol.to_dict()}, "\n".join(lines) + "\n"


def _forward(args, prog):
    space = StateSpace(prog.decls)
    rho = load_distribution(args.input_dist, space)
    abstraction = pai.parse_abstraction(args.abstraction or "id", space)
    return solve_prob_forward(prog, rho, abstraction, tol=args.tol)


def _branch_text(branches: BranchInfo):
    lines = []
    for row in branches.to_dict()["branches"]:
        target = "exit" if row["to"] is None else row["to"]
        lines.append(f"  p({row['from']},{target}) = {fmt(row['p'])}")
    return lines


def cmd_branch_probs(args):
    prog = read_program(args.file)
    branches = extract_branch_probs(_forward(args, prog))
    return branches.to_dict(), "\n".join(_branch_text(branches)) + "\n"


def cmd_plv(args):
    prog = read_program(args.file)
    if args.static_probs:
        branches = BranchInfo.from_static(flow(prog.body), load_static_probs(args.static_probs))
    else:
        branches = extract_branch_probs(_forward(args, prog))
    sol = solve_plv(prog, branches, random_kills=not args.random_identity, tol=args.tol)
    payload = {**sol.to_dict(), **branches.to_dict(),
               "solver": {"method": sol.solution.method, "iterations": sol.solution.iterations,
                          "residual": sol.solution.residual}}
    lines = ["branch probabilities:", *_branch_text(branches), "live configurations:"]
    for l in sorted(sol.entry):
        for where, vec in (("entry", sol.entry), ("exit", sol.exit)):
            confs = ", ".join(f"{{{k}}}:{fmt(v)}" for k, v in sol.configurations(vec[l]).items())
            lines.append(f"  {where}({l}) = {confs}")
    return payload, "\n".join(lines) + "\n"


def cmd_abstract_test(args):
    ns = args.n or [10, 100, 1000, 10000]
    rows = {n: pai.quality_table(n) for n in ns}
    payload = {"columns": list(pai.QUALITY_COLUMNS),
               "rows": [{"n": n,
                         "exact": {c: m for c, m in table.items()},
                         "rounded": pai.round_table(table)} for n, table in rows.items()]}
    return payload, pai.format_quality_table(rows)


def cmd_exec(args):
    prog = read_program(args.file)
    space = StateSpace(prog.decls)
    rho = load_distribution(args.input_dist, space)
    report = run_monte_carlo(prog, rho, args.trials, seed=args.seed, max_steps=args.max_steps,
                             workers=args.workers)
    d = report.to_dict()
    lines = [f"trials: {d['trials']}  nonterminated: {d['nonterminated']}"]
    for e in d["edges"]:
        target = "exit" if e["to"] is None else e["to"]
        lines.append(f"  {e['from']} -> {target}: {e['count']} ({fmt(e['freq'])})")
    return d, "\n".join(lines) + "\n"


def cmd_ops(args):
    prog = read_program(args.file)
    space = StateSpace(prog.decls)
    abstraction = pai.parse_abstraction(args.abstraction or "id", space)
    graph = flow(prog.body)
    ops = {}
    lines = [f"abstraction {abstraction.name}: {space.size} -> {abstraction.size} states"]
    for l, b in sorted(graph.blocks.items()):
        if isinstance(b, Test):
            m = pai.abstract_test(test_matrix(b.cond, space), abstraction)
            kind = "test"
        else:
            m = abstraction.lift(block_matrix(b, space))
            kind = "transfer"
        ops[str(l)] = {"kind": kind, "block": format_block(b), "matrix": linalg.matrix_to_dict(m)}
        lines.append(f"label {l} ({kind}) {format_block(b)}")
        lines.append(np.array2string(m, precision=4, suppress_small=True, max_line_width=200))
    payload = {"abstraction": abstraction.name,
               "a": linalg.matrix_to_dict(abstraction.a),
               "a_dagger": linalg.matrix_to_dict(abstraction.a_dagger),
               "operators": ops}
    return payload, "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Argument parsing


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "text", "dot"), default="json")
    common.add_argument("--tol", type=float, default=1e-9)

    forward = argparse.ArgumentParser(add_help=False)
    forward.add_argument("--input-dist", default="uniform",
                         help="'uniform' or a JSON file of {state, p} entries")
    forward.add_argument("--abstraction", default="id",
                         help="comma list of forgetful:<var>, parity:<var>, prime:<var>, or id")

    parser = argparse.ArgumentParser(prog="pdfa", description="Probabilistic data-flow analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, func, helptext in (("parse", cmd_parse, "parse and dump the AST"),
                                 ("pretty", cmd_pretty, "pretty-print with labels"),
                                 ("cfg", cmd_cfg, "flow graph as JSON, text or DOT")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("file")
        p.set_defaults(func=func)

    analyze = sub.add_parser("analyze", help="live variable analyses")
    asub = analyze.add_subparsers(dest="analysis", required=True)
    p = asub.add_parser("lv", parents=[common], help="classical live variables")
    p.add_argument("file")
    p.set_defaults(func=cmd_lv)
    p = asub.add_parser("plv", parents=[common, forward], help="probabilistic live variables")
    p.add_argument("file")
    p.add_argument("--static-probs", help="JSON {test: {target|'exit': p}}; skips the forward phase")
    p.add_argument("--random-identity", action="store_true",
                   help="give random assignments the identity liveness transfer")
    p.set_defaults(func=cmd_plv)

    p = sub.add_parser("branch-probs", parents=[common, forward], help="estimated branch probabilities")
    p.add_argument("file")
    p.set_defaults(func=cmd_branch_probs)

    p = sub.add_parser("abstract-test", parents=[common], help="parity/primality quality table")
    p.add_argument("--n", type=int, action="append", help="value range 0..n-1 (repeatable)")
    p.set_defaults(func=cmd_abstract_test)

    p = sub.add_parser("exec", parents=[common], help="Monte Carlo execution")
    p.add_argument("file")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=10 ** 6)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--input-dist", default="uniform")
    p.set_defaults(func=cmd_exec)

    p = sub.add_parser("ops", parents=[common], help="dump abstract block and test matrices")
    p.add_argument("file")
    p.add_argument("--abstraction", default="id")
    p.set_defaults(func=cmd_ops)
    return parser


def validate(args):
    if getattr(args, "trials", 1) < 1:
        raise InputError("--trials must be positive")
    if getattr(args, "max_steps", 1) < 1:
        raise InputError("--max-steps must be positive")
    if getattr(args, "workers", 1) < 1:
        raise InputError("--workers must be positive")
    if any(n < 3 for n in getattr(args, "n", None) or []):
        raise InputError("--n must be at least 3")
    if args.tol <= 0:
        raise InputError("--tol must be positive")
    if args.format == "dot" and args.func is not cmd_cfg:
        raise InputError("--format dot is only available for 'cfg'")


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT

    def fail(code, kind, message, diagnostics=None):
        print(f"pdfa: {message}", file=stderr)
        if args.format == "json":
            error = {"kind": kind, "message": message, "exit_code": code}
            if diagnostics:
                error["diagnostics"] = diagnostics
            stdout.write(dump_json({"error": error}))
        return code

    try:
        validate(args)
        payload, text = args.func(args)
    except (SolverError, PseudoInverseError) as exc:
        diag = getattr(exc, "diagnostics", {}) or {}
        extra = f" ({', '.join(f'{k}={v}' for k, v in diag.items())})" if diag else ""
        if getattr(exc, "residual", None) is not None:
            diag = {**diag, "residual": exc.residual}
        return fail(EXIT_SOLVER, type(exc).__name__, str(exc) + extra, diag)
    except (PdfaError, ValueError, KeyError, OSError) as exc:
        return fail(EXIT_INPUT, type(exc).__name__, str(exc))

    if args.format == "json" and payload is not None:
        stdout.write(dump_json(payload))
    else:
        stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
