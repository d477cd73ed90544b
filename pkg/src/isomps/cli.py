"""Command-line front end.

Exit codes: 0 accept, 1 reject (type error, non-compliance, ill-formed
type), 2 usage or parse error, 3 an exploration cap was exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, TextIO

from . import __version__
from .brute import reachable_envs
from .checker import check_session
from .compliance import check_env, describe_leaf, minimal_partition, closure, exception_driven_compliance
from .errors import CapExceeded, EmptyEnvironment, MPSError, ParseError, WellFormednessError
from .lts import is_consumed, oracle_by_name, to_dot, transition_graph
from .semantics import is_ended, session_transitions, simulate
from .surface import (
    check_env_well_formed,
    check_source_well_formed,
    load_env,
    load_source,
    parse_env,
    parse_file,
    parse_process,
    parse_type,
    print_env,
    print_process,
    print_session,
    print_source,
    print_type,
)
from .syntax import well_formedness_issue

ACCEPT, REJECT, USAGE, CAP = 0, 1, 2, 3


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(message)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--oracle", choices=("lex", "revlex"), default="lex", help="scheduling oracle (default lex)")
    common.add_argument("--label-order", choices=("lex", "syntactic"), default="lex", help="label chosen first when synchronising")
    common.add_argument("--universe-cap", type=int, default=10_000, metavar="N", help="bound on the type universe (default 10000)")
    common.add_argument("--json", action="store_true", help="emit machine-readable JSON")

    parser = _Parser(prog="isomps", description="Iso-recursive multiparty session type checker.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("check", parents=[common], help="type-check a session file (.mps)")
    p.add_argument("file")
    p.add_argument("--no-fast-path", action="store_true", help="disable label-directed routing into sums")

    p = sub.add_parser("compliance", parents=[common], help="check compliance of an environment file (.env)")
    p.add_argument("file")
    p.add_argument("--exception-driven", "--paper-exceptions", dest="exception_driven", action="store_true", help="use the exception-driven single-path procedure (diagnostic only)")

    p = sub.add_parser("closure", parents=[common], help="list the closure leaves of an environment file")
    p.add_argument("file")
    p.add_argument("--dot", metavar="PATH", help="write the environment transition graph in DOT format")

    p = sub.add_parser("simulate", parents=[common], help="run a session with a seeded random scheduler")
    p.add_argument("file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=100)
    p.add_argument("--trace", action="store_true", help="print every step")

    p = sub.add_parser("parse", parents=[common], help="parse a file and print it canonically")
    p.add_argument("file")
    p.add_argument("--as", dest="kind", choices=("auto", "env", "mps", "type", "process"), default="auto")

    p = sub.add_parser("debug", help="debugging aids")
    dsub = p.add_subparsers(dest="debug_command", parser_class=_Parser)
    r = dsub.add_parser("reach", parents=[common], help="exhaustive reachable environments")
    r.add_argument("file")
    r.add_argument("--cap", type=int, default=50_000)
    return parser


class _Out:
    def __init__(self, stdout: TextIO, stderr: TextIO, color: bool):
        self.stdout = stdout
        self.stderr = stderr
        self.color = color

    def line(self, text: str = "") -> None:
        self.stdout.write(text + "\n")

    def err(self, text: str) -> None:
        self.stderr.write(text + "\n")

    def verdict(self, ok: bool) -> str:
        word = "ACCEPT" if ok else "REJECT"
        if self.color:
            return f"\x1b[{32 if ok else 31}m{word}\x1b[0m"
        return word


def _use_color(stream: TextIO) -> bool:
    mode = os.environ.get("MPS_COLOR", "auto").lower()
    if mode == "always":
        return True
    if mode == "never":
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _Usage(f"cannot read {path}: {exc.strerror or exc}")
    except UnicodeDecodeError:
        raise _Usage(f"{path} is not valid UTF-8")


def schema() -> dict:
    """The JSON schema that every ``--json`` output conforms to."""
    text = resources.files("isomps").joinpath("schema/output.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _emit_json(out: _Out, payload: dict) -> None:
    out.line(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=True))


# ------------------------------------------------------------ commands


def _cmd_check(args, out: _Out) -> int:
    sf = parse_file(_read(args.file))
    if not sf.decls:
        raise _Usage("session file declares no participants")
    positions = {d.name: f"{args.file}:{d.line}:{d.column}" for d in sf.decls}
    verdict = check_session(
        sf.session(),
        sf.env(),
        oracle_by_name(args.oracle),
        args.label_order,
        args.universe_cap,
        positions,
        fast_path=not args.no_fast_path,
    )
    code = ACCEPT if verdict.ok else REJECT
    if args.json:
        _emit_json(out, {"command": "check", "exit_code": code, "result": verdict.to_json()})
        return code
    for r in verdict.threads:
        out.line(f"{r.participant}: " + ("typed" if r.ok else "not typed"))
    for b in verdict.blocks:
        names = ", ".join(b.root)
        out.line(f"block {{{names}}}: " + ("compliant" if b.verdict else "not compliant") + f" ({b.explored} environments explored)")
    for f in verdict.failures:
        out.line(f"error: {f}")
    out.line(out.verdict(verdict.ok))
    return code


def _cmd_compliance(args, out: _Out) -> int:
    d = load_env(_read(args.file))
    if len(d) == 0:
        raise EmptyEnvironment("environment file binds no participants")
    omega = oracle_by_name(args.oracle)
    if args.exception_driven:
        results = []
        for block in minimal_partition(d):
            ok, exit_name = exception_driven_compliance(omega, block)
            results.append((block, ok, exit_name))
        overall = all(ok for _, ok, _ in results)
        code = ACCEPT if overall else REJECT
        if args.json:
            _emit_json(out, {
                "command": "compliance",
                "exit_code": code,
                "result": {
                    "verdict": overall,
                    "mode": "exception-driven",
                    "blocks": [{"participants": list(b), "verdict": ok, "exit": e} for b, ok, e in results],
                },
            })
            return code
        out.line("note: exception-driven procedure; may accept non-compliant environments")
        for b, ok, e in results:
            out.line(f"block {{{', '.join(b)}}}: " + ("compliant" if ok else "not compliant") + f" (exit {e})")
        out.line(out.verdict(overall))
        return code
    verdict = check_env(omega, d, args.label_order, args.universe_cap)
    code = ACCEPT if verdict.verdict else REJECT
    if args.json:
        _emit_json(out, {"command": "compliance", "exit_code": code, "result": verdict.to_json()})
        return code
    for b in verdict.blocks:
        names = ", ".join(b.root)
        out.line(f"block {{{names}}}: " + ("compliant" if b.verdict else "not compliant") + f" ({b.explored} environments explored)")
        for leaf in b.leaves:
            if leaf.is_error:
                out.line("  witness: " + describe_leaf(leaf).replace("\n", "\n  "))
    out.line(out.verdict(verdict.verdict))
    return code


def _cmd_closure(args, out: _Out) -> int:
    d = load_env(_read(args.file))
    if len(d) == 0:
        raise EmptyEnvironment("environment file binds no participants")
    omega = oracle_by_name(args.oracle)
    reports = [closure(omega, b, args.label_order, args.universe_cap) for b in minimal_partition(d)]
    if args.dot:
        graph = transition_graph(d)
        try:
            Path(args.dot).write_text(to_dot(graph), encoding="utf-8")
        except OSError as exc:
            raise _Usage(f"cannot write {args.dot}: {exc.strerror or exc}")
    ok = all(r.verdict for r in reports)
    code = ACCEPT if ok else REJECT
    if args.json:
        _emit_json(out, {"command": "closure", "exit_code": code, "result": {"verdict": ok, "blocks": [r.to_json() for r in reports]}})
        return code
    for r in reports:
        out.line(f"block {{{', '.join(r.root)}}}: {len(r.leaves)} leaves, {r.explored} environments explored")
        for i, leaf in enumerate(r.leaves, 1):
            out.line(f"  [{i}] " + describe_leaf(leaf).replace("\n", "\n      "))
    out.line(out.verdict(ok))
    return code


def _cmd_simulate(args, out: _Out) -> int:
    if args.max_steps < 0:
        raise _Usage("--max-steps must be non-negative")
    sf = load_source(_read(args.file))
    m = sf.session()
    trace = simulate(m, args.seed, args.max_steps)
    final = trace.final
    if is_ended(final):
        status = "ended"
    elif not session_transitions(final):
        status = "stuck"
    else:
        status = "running"
    code = REJECT if status == "stuck" else ACCEPT
    if args.json:
        _emit_json(out, {
            "command": "simulate",
            "exit_code": code,
            "result": {
                "seed": args.seed,
                "steps": len(trace.steps),
                "status": status,
                "trace": trace.lines() if args.trace else [],
                "final": print_session(final),
            },
        })
        return code
    if args.trace:
        out.line(f"start ; {print_session(m)}")
        for line in trace.lines():
            out.line(line)
    out.line(f"{status} after {len(trace.steps)} steps")
    if not args.trace:
        out.line(f"final ; {print_session(final)}")
    return code


def _cmd_parse(args, out: _Out) -> int:
    text = _read(args.file)
    kind = args.kind
    if kind == "auto":
        suffix = Path(args.file).suffix
        kind = {".env": "env", ".mps": "mps"}.get(suffix, "type")
    if kind == "env":
        d = parse_env(text)
        check_env_well_formed(d)
        rendered = print_env(d)
    elif kind == "mps":
        sf = parse_file(text)
        check_source_well_formed(sf)
        rendered = print_source(sf)
    elif kind == "type":
        t = parse_type(text)
        issue = well_formedness_issue(t)
        if issue:
            raise WellFormednessError(f"type is ill-formed: {issue}")
        rendered = print_type(t)
    else:
        rendered = print_process(parse_process(text))
    if args.json:
        _emit_json(out, {"command": "parse", "exit_code": ACCEPT, "result": {"kind": kind, "text": rendered}})
    else:
        out.line(rendered)
    return ACCEPT


def _cmd_reach(args, out: _Out) -> int:
    d = load_env(_read(args.file))
    if len(d) == 0:
        raise EmptyEnvironment("environment file binds no participants")
    reach = reachable_envs(d, args.cap)
    deadlocks = [e for e in reach.stuck if not is_consumed(e)]
    code = REJECT if deadlocks else ACCEPT
    if args.json:
        _emit_json(out, {
            "command": "debug-reach",
            "exit_code": code,
            "result": {
                "visited": len(reach.visited),
                "edges": len(reach.edges),
                "stuck": [{p: print_type(t) for p, t in e.pairs()} for e in reach.stuck],
            },
        })
        return code
    out.line(f"{len(reach.visited)} environments, {len(reach.edges)} transitions, {len(reach.stuck)} without successors")
    for e in reach.stuck:
        tag = "consumed" if is_consumed(e) else "deadlock"
        out.line(f"{tag}:")
        for line in print_env(e).splitlines():
            out.line("  " + line)
    return code


_COMMANDS = {
    "check": _cmd_check,
    "compliance": _cmd_compliance,
    "closure": _cmd_closure,
    "simulate": _cmd_simulate,
    "parse": _cmd_parse,
}


def _error_json(out: _Out, command: str, code: int, kind: str, message: str, exc: Optional[Exception] = None) -> None:
    err = {"kind": kind, "message": message}
    if isinstance(exc, ParseError):
        err["line"] = exc.line
        err["column"] = exc.column
        err["expected"] = sorted(exc.expected)
    _emit_json(out, {"command": command, "exit_code": code, "error": err})


def main(argv: Optional[list[str]] = None, stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    out = _Out(stdout, stderr, _use_color(stdout))
    parser = _build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    want_json = "--json" in argv
    try:
        args = parser.parse_args(argv)
    except _Usage as exc:
        out.err(f"usage error: {exc}")
        if want_json:
            _error_json(out, "usage", USAGE, "usage", str(exc))
        return USAGE
    if args.command is None or (args.command == "debug" and args.debug_command is None):
        out.err(parser.format_usage().rstrip())
        return USAGE
    caught: Optional[Exception] = None
    command = "debug-reach" if args.command == "debug" else args.command
    handler = _cmd_reach if args.command == "debug" else _COMMANDS[args.command]
    try:
        return handler(args, out)
    except ParseError as exc:
        code, kind, msg = USAGE, "parse", f"{args.file}:{exc}"
        caught = exc
    except _Usage as exc:
        code, kind, msg = USAGE, "usage", str(exc)
    except EmptyEnvironment as exc:
        code, kind, msg = USAGE, "usage", str(exc)
    except WellFormednessError as exc:
        code, kind, msg = REJECT, "ill-formed", str(exc)
    except CapExceeded as exc:
        code, kind, msg = CAP, "cap", str(exc)
    except MPSError as exc:
        code, kind, msg = REJECT, "error", str(exc)
    except RecursionError:
        code, kind, msg = CAP, "cap", "input nested too deeply"
    out.err(f"{kind} error: {msg}" if kind != "ill-formed" else f"error: {msg}")
    if getattr(args, "json", False):
        _error_json(out, command, code, kind, msg, caught)
    return code


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
