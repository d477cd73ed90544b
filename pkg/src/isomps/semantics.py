"""Operational semantics of sessions: expression evaluation, thread and
session transitions, and a seeded random simulator."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Union

from .errors import EvalError
from .surface import print_session, print_expr
from .syntax import (
    And,
    BoolLit,
    Eq,
    EVar,
    Expr,
    If,
    Inaction,
    IntLit,
    Lt,
    NatLit,
    Not,
    Or,
    PMu,
    Process,
    PSum,
    Recv,
    Send,
    Session,
    Value,
    VALUE_TYPES,
    subst_value,
    unfold_proc,
    value_sort,
)


@dataclass(frozen=True)
class Tau:
    """Internal step: unfolding a recursive thread or resolving a conditional."""

    participant: str

    def __str__(self) -> str:
        return "tau"


@dataclass(frozen=True)
class Sync:
    """Communication of ``label`` from ``sender`` to ``receiver``."""

    label: str
    receiver: str
    sender: str

    def __post_init__(self):
        if self.receiver == self.sender:
            raise ValueError("a participant cannot synchronise with itself")

    def __str__(self) -> str:
        return f"{self.label}@{self.receiver}<>{self.sender}"


SessionAction = Union[Tau, Sync]


@dataclass(frozen=True)
class InAct:
    peer: str
    label: str
    binder: str


@dataclass(frozen=True)
class OutAct:
    peer: str
    label: str
    value: Value


ThreadAction = Union[InAct, OutAct]


def eval_expr(e: Expr) -> Value:
    if isinstance(e, VALUE_TYPES):
        return e
    match e:
        case EVar(x):
            raise EvalError(f"unbound variable {x}")
        case Lt(a, b):
            va, vb = eval_expr(a), eval_expr(b)
            if type(va) is type(vb) and isinstance(va, (NatLit, IntLit)):
                return BoolLit(va.value < vb.value)
            raise EvalError(f"'<' on incompatible operands in {print_expr(e)}")
        case Eq(a, b):
            va, vb = eval_expr(a), eval_expr(b)
            if value_sort(va) != value_sort(vb):
                raise EvalError(f"'=' on operands of different sorts in {print_expr(e)}")
            return BoolLit(va == vb)
        case Not(a):
            return BoolLit(not _bool(eval_expr(a)))
        case And(a, b):
            return BoolLit(_bool(eval_expr(a)) and _bool(eval_expr(b)))
        case Or(a, b):
            return BoolLit(_bool(eval_expr(a)) or _bool(eval_expr(b)))
    raise EvalError(f"not an expression: {e!r}")


def _bool(v: Value) -> bool:
    if not isinstance(v, BoolLit):
        raise EvalError(f"expected a boolean, got {v!r}")
    return v.value


def thread_transitions(body: Process) -> list[tuple[ThreadAction, Process]]:
    """Input and output steps of a thread body, sum branches left to right.

    For an input the continuation still contains the binder; it is
    instantiated once the matching output is known.
    """
    match body:
        case Send(q, l, e, k):
            return [(OutAct(q, l, eval_expr(e)), k)]
        case Recv(q, l, x, k):
            return [(InAct(q, l, x), k)]
        case PSum(a, b):
            return thread_transitions(a) + thread_transitions(b)
        case _:
            return []


def session_transitions(m: Session) -> list[tuple[SessionAction, Session]]:
    """All enabled steps in a deterministic order: internal steps of each
    thread in file order, then communications by receiver in file order."""
    out: list[tuple[SessionAction, Session]] = []
    for t in m.threads:
        match t.body:
            case PMu():
                out.append((Tau(t.participant), m.replace({t.participant: unfold_proc(t.body)})))
            case If(c, a, b):
                branch = a if _bool(eval_expr(c)) else b
                out.append((Tau(t.participant), m.replace({t.participant: branch})))
    steps = {t.participant: thread_transitions(t.body) for t in m.threads}
    for recv in m.threads:
        p = recv.participant
        for act, k in steps[p]:
            if not isinstance(act, InAct) or act.peer == p or act.peer not in steps:
                continue
            q = act.peer
            for oact, ok in steps[q]:
                if isinstance(oact, OutAct) and oact.peer == p and oact.label == act.label:
                    received = subst_value(k, act.binder, oact.value)
                    out.append((Sync(act.label, p, q), m.replace({p: received, q: ok})))
    return out


def is_ended(m: Session) -> bool:
    return all(isinstance(t.body, Inaction) for t in m.threads)


def is_stuck(m: Session) -> bool:
    return not session_transitions(m)


@dataclass(frozen=True)
class Trace:
    start: Session
    steps: tuple[tuple[SessionAction, Session], ...]

    @property
    def final(self) -> Session:
        return self.steps[-1][1] if self.steps else self.start

    def lines(self) -> list[str]:
        return [f"{act} ; {print_session(m)}" for act, m in self.steps]


def simulate(m: Session, seed: int, max_steps: int = 100) -> Trace:
    """Random run of at most ``max_steps`` steps; the choice among enabled
    steps is drawn from a PRNG seeded with ``seed``."""
    rng = random.Random(seed)
    steps: list[tuple[SessionAction, Session]] = []
    current = m
    for _ in range(max_steps):
        enabled = session_transitions(current)
        if not enabled:
            break
        act, current = enabled[rng.randrange(len(enabled))]
        steps.append((act, current))
    return Trace(m, tuple(steps))
