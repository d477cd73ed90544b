"""Sorting of expressions, iso-recursive typing of processes, and typing of
whole sessions (thread typing plus compliance of each minimal block).

Process typing is a backtracking search over the syntax-directed rules.  A
recursive process must meet a recursive type and its body is checked
against the *unfolding* of that type; a process variable is typed only by
exactly the recursive type it was bound to.  The search records the
derivation it finds, so callers can inspect which rules were used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from .compliance import ClosureReport, closure, describe_leaf, minimal_partition
from .errors import ParticipantMismatch, SortError
from .lts import LabelOrder, Oracle, default_oracle
from .surface import print_expr, print_process, print_type
from .syntax import (
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
    TypeEnv,
    UnitLit,
    labels,
    unfold,
    well_formedness_issue,
)


@dataclass(frozen=True)
class Context:
    """Sorts of expression variables and types of process variables."""

    sorts: Mapping[str, Sort] = field(default_factory=dict)
    procs: Mapping[str, Mu] = field(default_factory=dict)

    def with_sort(self, x: str, s: Sort) -> "Context":
        return Context({**self.sorts, x: s}, self.procs)

    def with_proc(self, x: str, t: Mu) -> "Context":
        return Context(self.sorts, {**self.procs, x: t})


EMPTY = Context()


def sort_expr(ctx: Context, e: Expr) -> Sort:
    match e:
        case NatLit():
            return Sort.NAT
        case IntLit():
            return Sort.INT
        case StrLit():
            return Sort.STR
        case BoolLit():
            return Sort.BOOL
        case UnitLit():
            return Sort.UNIT
        case EVar(x):
            if x not in ctx.sorts:
                raise SortError(f"S-Var: unbound variable {x}")
            return ctx.sorts[x]
        case Lt(a, b):
            sa, sb = sort_expr(ctx, a), sort_expr(ctx, b)
            if sa != sb or sa not in (Sort.NAT, Sort.INT):
                raise SortError(f"S-Lt: operands of {print_expr(e)} must both be nat or both int, got {sa} and {sb}")
            return Sort.BOOL
        case Eq(a, b):
            sa, sb = sort_expr(ctx, a), sort_expr(ctx, b)
            if sa != sb:
                raise SortError(f"S-Eq: operands of {print_expr(e)} have different sorts {sa} and {sb}")
            return Sort.BOOL
        case Not(a):
            _need_bool(ctx, a, "S-Not")
            return Sort.BOOL
        case And(a, b):
            _need_bool(ctx, a, "S-And")
            _need_bool(ctx, b, "S-And")
            return Sort.BOOL
        case Or(a, b):
            _need_bool(ctx, a, "S-Or")
            _need_bool(ctx, b, "S-Or")
            return Sort.BOOL
    raise SortError(f"not an expression: {e!r}")


def _need_bool(ctx: Context, e: Expr, rule: str) -> None:
    s = sort_expr(ctx, e)
    if s != Sort.BOOL:
        raise SortError(f"{rule}: {print_expr(e)} has sort {s}, expected bool")


# ----------------------------------------------------------- processes


@dataclass(frozen=True)
class Derivation:
    rule: str
    process: Process
    type: SessionType
    premises: tuple["Derivation", ...] = ()

    def rules(self) -> list[str]:
        """Rule names in pre-order."""
        out = [self.rule]
        for d in self.premises:
            out.extend(d.rules())
        return out

    def render(self, indent: int = 0) -> str:
        line = "  " * indent + f"{self.rule}: {print_process(self.process)} : {print_type(self.type)}"
        return "\n".join([line] + [d.render(indent + 1) for d in self.premises])


@dataclass(frozen=True)
class Failure:
    rule: str
    message: str
    position: str = ""

    def __str__(self) -> str:
        where = f"{self.position}: " if self.position else ""
        return f"{where}{self.message}"


@dataclass(frozen=True)
class ProcessResult:
    ok: bool
    derivation: Optional[Derivation]
    failure: Optional[Failure]


class _Search:
    def __init__(self, fast_path: bool):
        self.fast_path = fast_path
        self.failure: Optional[Failure] = None
        self.failure_depth = -1

    def fail(self, depth: int, rule: str, message: str) -> None:
        if depth > self.failure_depth:
            self.failure_depth = depth
            self.failure = Failure(rule, f"{rule}: {message}")

    def derive(self, ctx: Context, p: Process, t: SessionType, depth: int = 0) -> Optional[Derivation]:
        if isinstance(t, Sum):
            return self.derive_sum(ctx, p, t, depth)
        match p, t:
            case Inaction(), End():
                return Derivation("T-End", p, t)
            case Inaction(), _:
                self.fail(depth, "T-End", f"0 needs type end, got {print_type(t)}")
            case PMu(x, body), Mu():
                sub = self.derive(ctx.with_proc(x, t), body, unfold(t), depth + 1)
                return None if sub is None else Derivation("T-Rec", p, t, (sub,))
            case PMu(), _:
                self.fail(depth, "T-Rec", f"recursive process needs a recursive type, got {print_type(t)}")
            case PVar(x), _:
                bound = ctx.procs.get(x)
                if bound is None:
                    self.fail(depth, "T-Var", f"process variable {x} is unbound")
                elif not isinstance(t, Mu):
                    self.fail(depth, "T-Var", f"process variable {x} used at non-recursive type {print_type(t)}")
                elif bound != t:
                    self.fail(depth, "T-Var", f"process variable {x} is bound to {print_type(bound)}, not {print_type(t)}")
                else:
                    return Derivation("T-Var", p, t)
            case Send(q, l, e, k), Out(q2, l2, s, kt):
                if (q, l) != (q2, l2):
                    self.fail(depth, "T-Out", f"output {q}!{l} does not match {q2}!{l2}")
                    return None
                try:
                    se = sort_expr(ctx, e)
                except SortError as exc:
                    self.fail(depth, "T-Out", str(exc))
                    return None
                if se != s:
                    self.fail(depth, "T-Out", f"payload {print_expr(e)} has sort {se}, expected {s}")
                    return None
                sub = self.derive(ctx, k, kt, depth + 1)
                return None if sub is None else Derivation("T-Out", p, t, (sub,))
            case Recv(q, l, x, k), In(q2, l2, s, kt):
                if (q, l) != (q2, l2):
                    self.fail(depth, "T-Inp", f"input {q}?{l} does not match {q2}?{l2}")
                    return None
                sub = self.derive(ctx.with_sort(x, s), k, kt, depth + 1)
                return None if sub is None else Derivation("T-Inp", p, t, (sub,))
            case Send(q, l, _, _), _:
                self.fail(depth, "T-Out", f"output {q}!{l} against {print_type(t)}")
            case Recv(q, l, _, _), _:
                self.fail(depth, "T-Inp", f"input {q}?{l} against {print_type(t)}")
            case If(), _:
                return self.derive_if(ctx, p, t, depth)
            case PSum(), _:
                self.fail(depth, "T-Sum", f"sum process against non-sum type {print_type(t)}")
        return None

    def derive_if(self, ctx: Context, p: If, t: SessionType, depth: int) -> Optional[Derivation]:
        try:
            s = sort_expr(ctx, p.cond)
        except SortError as exc:
            self.fail(depth, "T-If", str(exc))
            return None
        if s != Sort.BOOL:
            self.fail(depth, "T-If", f"condition {print_expr(p.cond)} has sort {s}, expected bool")
            return None
        a = self.derive(ctx, p.then, t, depth + 1)
        if a is None:
            return None
        b = self.derive(ctx, p.orelse, t, depth + 1)
        return None if b is None else Derivation("T-If", p, t, (a, b))

    def derive_sum(self, ctx: Context, p: Process, t: Sum, depth: int) -> Optional[Derivation]:
        if self.fast_path and isinstance(p, (Send, Recv)):
            return self.route(ctx, p, t, depth)
        if isinstance(p, PSum):
            a = self.derive(ctx, p.left, t.left, depth + 1)
            if a is not None:
                b = self.derive(ctx, p.right, t.right, depth + 1)
                if b is not None:
                    return Derivation("T-Sum", p, t, (a, b))
        elif isinstance(p, If):
            d = self.derive_if(ctx, p, t, depth)
            if d is not None:
                return d
        sub = self.derive(ctx, p, t.left, depth + 1)
        if sub is not None:
            return Derivation("T-Sum-L", p, t, (sub,))
        sub = self.derive(ctx, p, t.right, depth + 1)
        if sub is not None:
            return Derivation("T-Sum-R", p, t, (sub,))
        return None

    def route(self, ctx: Context, p: Send | Recv, t: SessionType, depth: int) -> Optional[Derivation]:
        # labels are unique in a well-formed sum, so at most one summand fits
        if not isinstance(t, Sum):
            return self.derive(ctx, p, t, depth)
        if p.label in labels(t.left):
            rule, part = "T-Sum-L", t.left
        elif p.label in labels(t.right):
            rule, part = "T-Sum-R", t.right
        else:
            self.fail(depth, "T-Sum-L", f"no summand of {print_type(t)} carries label {p.label}")
            return None
        sub = self.route(ctx, p, part, depth + 1)
        return None if sub is None else Derivation(rule, p, t, (sub,))


def check_process(ctx: Context, p: Process, t: SessionType, fast_path: bool = True) -> ProcessResult:
    """Decide ``ctx |- p : t``; on failure report the deepest failed rule."""
    search = _Search(fast_path)
    d = search.derive(ctx, p, t)
    if d is not None:
        return ProcessResult(True, d, None)
    return ProcessResult(False, None, search.failure or Failure("T-End", "no rule applies"))


# ------------------------------------------------------------ sessions


@dataclass(frozen=True)
class ThreadResult:
    participant: str
    ok: bool
    derivation: Optional[Derivation]
    failure: Optional[Failure]


@dataclass(frozen=True)
class TypingVerdict:
    threads: tuple[ThreadResult, ...]
    blocks: tuple[ClosureReport, ...]
    failures: tuple[Failure, ...]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "failures": [{"position": f.position, "rule": f.rule, "message": f.message} for f in self.failures],
            "threads": [
                {"participant": r.participant, "ok": r.ok, "rules": r.derivation.rules() if r.derivation else []}
                for r in self.threads
            ],
            "blocks": [
                {
                    "participants": list(b.root),
                    "verdict": b.verdict,
                    "explored": b.explored,
                    "witness": None if b.witness is None else b.witness.to_json(),
                }
                for b in self.blocks
            ],
        }


def check_session(
    m: Session,
    declared: TypeEnv,
    omega: Optional[Oracle] = None,
    label_order: LabelOrder = "lex",
    universe_cap: int = 10_000,
    positions: Optional[Mapping[str, str]] = None,
    fast_path: bool = True,
) -> TypingVerdict:
    """Type every thread against its declared type, then check compliance
    of every minimal block of the declared environment."""
    omega = omega or default_oracle()
    positions = positions or {}
    if set(m.participants()) != set(declared):
        raise ParticipantMismatch(
            f"session participants {sorted(m.participants())} differ from declared {sorted(declared)}"
        )
    failures: list[Failure] = []
    results: list[ThreadResult] = []
    for th in m.threads:
        p = th.participant
        where = positions.get(p, p)
        t = declared[p]
        issue = well_formedness_issue(t)
        if issue:
            f = Failure("T-Thr", f"T-Thr: declared type of {p} is ill-formed: {issue}", where)
            results.append(ThreadResult(p, False, None, f))
            failures.append(f)
            continue
        res = check_process(EMPTY, th.body, t, fast_path)
        failure = None if res.ok else Failure(res.failure.rule, res.failure.message, where)
        results.append(ThreadResult(p, res.ok, res.derivation, failure))
        if failure:
            failures.append(failure)
    blocks: list[ClosureReport] = []
    if not any(f.rule == "T-Thr" for f in failures):
        for block in minimal_partition(declared):
            report = closure(omega, block, label_order, universe_cap)
            blocks.append(report)
            if not report.verdict:
                names = ", ".join(block)
                failures.append(
                    Failure("T-Ses", f"T-Ses: block {{{names}}} is not compliant; witness {describe_leaf(report.witness)}", names)
                )
    return TypingVerdict(tuple(results), tuple(blocks), tuple(failures))
