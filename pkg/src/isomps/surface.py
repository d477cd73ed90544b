"""Textual surface language: parsing and canonical printing of types,
processes, environment files (``.env``) and session files (``.mps``).

The grammar is documented in ``docs/grammar.md``.  Printing is canonical:
``parse(print(x)) == x`` for every AST ``x``, with the minimal
parenthesisation needed to respect the precedences (``+`` lowest and
right-associative, prefix ``.`` tighter, ``rec X .`` and ``else`` extending
as far right as possible).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .errors import ParseError, WellFormednessError
from .syntax import (
    END,
    NIL,
    UNIT,
    And,
    BoolLit,
    End,
    Eq,
    EVar,
    Expr,
    If,
    In,
    Inaction,
    IntLit,
    Lt,
    Mu,
    NatLit,
    Not,
    Or,
    Out,
    PMu,
    Process,
    PSum,
    PVar,
    Recv,
    Send,
    Session,
    SessionType,
    Sort,
    StrLit,
    Sum,
    Thread,
    TVar,
    TypeEnv,
    UnitLit,
    well_formedness_issue,
)

KEYWORDS = frozenset(
    {"rec", "end", "if", "then", "else", "true", "false", "and", "or", "not", "participant", "type", "proc"}
    | {s.value for s in Sort}
)

MAX_NESTING = 200

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\x00-\x1f]|\\(?:["\\/bfnrt]|u[0-9a-fA-F]{4}))*")
  | (?P<number>[0-9]+)
  | (?P<lower>[a-z_][A-Za-z0-9_]*)
  | (?P<upper>[A-Z][A-Za-z0-9_]*)
  | (?P<punct>[!?()<>.+\-=:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'string' 'number' 'lower' 'upper' 'kw' 'punct' 'eof'
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos] == '"':
                raise ParseError("unterminated or malformed string literal", line, col)
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        lexeme = m.group()
        if kind not in ("ws", "comment"):
            if kind == "lower" and lexeme in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


@dataclass(frozen=True)
class ParticipantDecl:
    name: str
    declared_type: SessionType
    body: Process
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class SourceFile:
    decls: tuple[ParticipantDecl, ...]

    def session(self) -> Session:
        return Session(tuple(Thread(d.name, d.body) for d in self.decls))

    def env(self) -> TypeEnv:
        return TypeEnv((d.name, d.declared_type) for d in self.decls)


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.depth = 0

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("kw", "punct") and t.text == text

    def fail(self, expected: set[str], message: str | None = None):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(message or f"unexpected {found}", t.line, t.column, frozenset(expected))

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail({repr(text)})
        t = self.tok
        self.i += 1
        return t

    def name(self, kind: str, what: str) -> str:
        t = self.tok
        if t.kind != kind:
            self.fail({what})
        self.i += 1
        return t.text

    def enter(self):
        self.depth += 1
        if self.depth > MAX_NESTING:
            t = self.tok
            raise ParseError("nesting too deep", t.line, t.column)

    def leave(self):
        self.depth -= 1

    def finish(self):
        if self.tok.kind != "eof":
            self.fail({"end of input"})

    # -- sorts and types

    def sort(self) -> Sort:
        t = self.tok
        if t.kind == "kw":
            for s in Sort:
                if s.value == t.text:
                    self.i += 1
                    return s
        self.fail({s.value for s in Sort})

    def type_(self) -> SessionType:
        self.enter()
        left = self.type_prefixed()
        if self.at("+"):
            self.i += 1
            left = Sum(left, self.type_())
        self.leave()
        return left

    def type_prefixed(self) -> SessionType:
        self.enter()
        t = self.tok
        if t.kind == "lower":
            peer = t.text
            self.i += 1
            if self.at("!"):
                ctor = Out
            elif self.at("?"):
                ctor = In
            else:
                self.fail({"'!'", "'?'"})
            self.i += 1
            label = self.name("lower", "label")
            self.expect("(")
            srt = self.sort()
            self.expect(")")
            self.expect(".")
            result = ctor(peer, label, srt, self.type_prefixed())
        elif self.at("rec"):
            self.i += 1
            var = self.name("upper", "type variable")
            self.expect(".")
            result = Mu(var, self.type_())
        elif self.at("end"):
            self.i += 1
            result = END
        elif t.kind == "upper":
            self.i += 1
            result = TVar(t.text)
        elif self.at("("):
            self.i += 1
            result = self.type_()
            self.expect(")")
        else:
            self.fail({"participant", "'rec'", "'end'", "type variable", "'('"})
        self.leave()
        return result

    # -- expressions

    def expr(self) -> Expr:
        self.enter()
        e = self.conj()
        while self.at("or"):
            self.i += 1
            e = Or(e, self.conj())
        self.leave()
        return e

    def conj(self) -> Expr:
        e = self.neg()
        while self.at("and"):
            self.i += 1
            e = And(e, self.neg())
        return e

    def neg(self) -> Expr:
        if self.at("not"):
            self.i += 1
            self.enter()
            e = Not(self.neg())
            self.leave()
            return e
        return self.cmp()

    def cmp(self) -> Expr:
        e = self.atom()
        if self.at("<"):
            self.i += 1
            return Lt(e, self.atom())
        if self.at("="):
            self.i += 1
            return Eq(e, self.atom())
        return e

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "number":
            self.i += 1
            return NatLit(int(t.text))
        if self.at("+") or self.at("-"):
            sign = -1 if t.text == "-" else 1
            self.i += 1
            n = self.tok
            if n.kind != "number":
                self.fail({"number"})
            self.i += 1
            return IntLit(sign * int(n.text))
        if t.kind == "string":
            self.i += 1
            return StrLit(json.loads(t.text))
        if self.at("true") or self.at("false"):
            self.i += 1
            return BoolLit(t.text == "true")
        if t.kind == "lower":
            self.i += 1
            return EVar(t.text)
        if self.at("("):
            self.i += 1
            if self.at(")"):
                self.i += 1
                return UNIT
            e = self.expr()
            self.expect(")")
            return e
        self.fail({"number", "'+'", "'-'", "string", "'true'", "'false'", "variable", "'('"})

    # -- processes

    def proc(self) -> Process:
        self.enter()
        left = self.proc_prefixed()
        if self.at("+"):
            self.i += 1
            left = PSum(left, self.proc())
        self.leave()
        return left

    def proc_prefixed(self) -> Process:
        self.enter()
        t = self.tok
        if t.kind == "lower":
            peer = t.text
            self.i += 1
            if self.at("!"):
                self.i += 1
                label = self.name("lower", "label")
                self.expect("<")
                e = self.expr()
                self.expect(">")
                self.expect(".")
                result = Send(peer, label, e, self.proc_prefixed())
            elif self.at("?"):
                self.i += 1
                label = self.name("lower", "label")
                self.expect("(")
                x = self.name("lower", "variable")
                self.expect(")")
                self.expect(".")
                result = Recv(peer, label, x, self.proc_prefixed())
            else:
                self.fail({"'!'", "'?'"})
        elif t.kind == "number" and t.text == "0":
            self.i += 1
            result = NIL
        elif self.at("rec"):
            self.i += 1
            var = self.name("upper", "process variable")
            self.expect(".")
            result = PMu(var, self.proc())
        elif self.at("if"):
            self.i += 1
            cond = self.expr()
            self.expect("then")
            then = self.proc()
            self.expect("else")
            result = If(cond, then, self.proc())
        elif t.kind == "upper":
            self.i += 1
            result = PVar(t.text)
        elif self.at("("):
            self.i += 1
            result = self.proc()
            self.expect(")")
        else:
            self.fail({"participant", "'0'", "'rec'", "'if'", "process variable", "'('"})
        self.leave()
        return result

    # -- files

    def env(self) -> TypeEnv:
        seen: dict[str, SessionType] = {}
        while self.tok.kind != "eof":
            t = self.tok
            p = self.name("lower", "participant")
            if p in seen:
                raise ParseError(f"participant {p} bound twice", t.line, t.column)
            self.expect(":")
            seen[p] = self.type_()
        return TypeEnv(seen)

    def source(self) -> SourceFile:
        decls: list[ParticipantDecl] = []
        names: set[str] = set()
        while self.tok.kind != "eof":
            start = self.expect("participant")
            t = self.tok
            p = self.name("lower", "participant")
            if p in names:
                raise ParseError(f"participant {p} declared twice", t.line, t.column)
            names.add(p)
            self.expect("type")
            ty = self.type_()
            self.expect("proc")
            body = self.proc()
            decls.append(ParticipantDecl(p, ty, body, start.line, start.column))
        return SourceFile(tuple(decls))


def _run(text: str, rule: str):
    parser = _Parser(text)
    result = getattr(parser, rule)()
    parser.finish()
    return result


def parse_type(text: str) -> SessionType:
    return _run(text, "type_")


def parse_process(text: str) -> Process:
    return _run(text, "proc")


def parse_expr(text: str) -> Expr:
    return _run(text, "expr")


def parse_env(text: str) -> TypeEnv:
    return _run(text, "env")


def parse_file(text: str) -> SourceFile:
    return _run(text, "source")


def check_env_well_formed(d: TypeEnv) -> None:
    for p, t in d.pairs():
        issue = well_formedness_issue(t)
        if issue:
            raise WellFormednessError(f"type of {p} is ill-formed: {issue}")


def check_source_well_formed(sf: SourceFile) -> None:
    for decl in sf.decls:
        issue = well_formedness_issue(decl.declared_type)
        if issue:
            raise WellFormednessError(f"{decl.line}:{decl.column}: type of {decl.name} is ill-formed: {issue}")


def load_env(text: str) -> TypeEnv:
    d = parse_env(text)
    check_env_well_formed(d)
    return d


def load_source(text: str) -> SourceFile:
    sf = parse_file(text)
    check_source_well_formed(sf)
    return sf


# ------------------------------------------------------------- printing


def print_type(t: SessionType) -> str:
    return _ptype(t, True, True)


def _ptype(t: SessionType, allow_sum: bool, tail: bool) -> str:
    # allow_sum: a bare '+' would not be misparsed here
    # tail: nothing follows at this nesting level, so 'rec' may extend freely
    match t:
        case Sum(a, b):
            if not allow_sum:
                return "(" + _ptype(t, True, True) + ")"
            return _ptype(a, False, False) + " + " + _ptype(b, True, tail)
        case Out(p, l, s, k):
            return f"{p}!{l}({s.value})." + _ptype(k, False, tail)
        case In(p, l, s, k):
            return f"{p}?{l}({s.value})." + _ptype(k, False, tail)
        case Mu(x, body):
            text = f"rec {x} . " + _ptype(body, True, True)
            return text if tail else "(" + text + ")"
        case End():
            return "end"
        case TVar(x):
            return x
    raise TypeError(f"not a session type: {t!r}")


def print_expr(e: Expr) -> str:
    return _pexpr(e, 0)


def _expr_level(e: Expr) -> int:
    match e:
        case Or():
            return 0
        case And():
            return 1
        case Not():
            return 2
        case Lt() | Eq():
            return 3
        case _:
            return 4


def _pexpr(e: Expr, min_level: int) -> str:
    if _expr_level(e) < min_level:
        return "(" + _pexpr(e, 0) + ")"
    match e:
        case Or(a, b):
            return _pexpr(a, 0) + " or " + _pexpr(b, 1)
        case And(a, b):
            return _pexpr(a, 1) + " and " + _pexpr(b, 2)
        case Not(a):
            return "not " + _pexpr(a, 2)
        case Lt(a, b):
            return _pexpr(a, 4) + " < " + _pexpr(b, 4)
        case Eq(a, b):
            return _pexpr(a, 4) + " = " + _pexpr(b, 4)
        case NatLit(n):
            return str(n)
        case IntLit(n):
            return f"-{-n}" if n < 0 else f"+{n}"
        case StrLit(s):
            return json.dumps(s)
        case BoolLit(b):
            return "true" if b else "false"
        case UnitLit():
            return "()"
        case EVar(x):
            return x
    raise TypeError(f"not an expression: {e!r}")


def print_process(p: Process) -> str:
    return _pproc(p, True, True)


def _pproc(p: Process, allow_sum: bool, tail: bool) -> str:
    match p:
        case PSum(a, b):
            if not allow_sum:
                return "(" + _pproc(p, True, True) + ")"
            return _pproc(a, False, False) + " + " + _pproc(b, True, tail)
        case Send(r, l, e, k):
            return f"{r}!{l}<{print_expr(e)}>." + _pproc(k, False, tail)
        case Recv(r, l, x, k):
            return f"{r}?{l}({x})." + _pproc(k, False, tail)
        case PMu(x, body):
            text = f"rec {x} . " + _pproc(body, True, True)
            return text if tail else "(" + text + ")"
        case If(c, a, b):
            text = f"if {print_expr(c)} then {_pproc(a, True, True)} else {_pproc(b, True, True)}"
            return text if tail else "(" + text + ")"
        case PVar(x):
            return x
        case Inaction():
            return "0"
    raise TypeError(f"not a process: {p!r}")


def print_env(d: TypeEnv) -> str:
    return "\n".join(f"{p} : {print_type(t)}" for p, t in d.pairs())


def print_source(sf: SourceFile) -> str:
    blocks = [
        f"participant {d.name}\n  type {print_type(d.declared_type)}\n  proc {print_process(d.body)}"
        for d in sf.decls
    ]
    return "\n\n".join(blocks)


def print_session(m: Session) -> str:
    """One-line rendering used in traces: ``p <| P || q <| Q``."""
    return " || ".join(f"{t.participant} <| {print_process(t.body)}" for t in m.threads)
