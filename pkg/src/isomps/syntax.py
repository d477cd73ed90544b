"""Abstract syntax of sorts, session types, expressions, processes, sessions
and type environments, together with the structural operations on types:
substitution, unfolding, contractiveness and well-formedness.

All nodes are frozen dataclasses, so equality is syntactic and every node is
hashable.  A recursive type and its unfolding are different values: unfolding
is always an explicit call to :func:`unfold`.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from enum import Enum
from typing import Union

from .errors import NotRecursive


def _node(cls):
    """Frozen dataclass whose structural hash is computed once and cached."""
    cls = dataclass(frozen=True)(cls)
    names = tuple(f.name for f in dataclasses.fields(cls))
    tag = cls.__name__

    def __hash__(self):
        cached = self.__dict__.get("_hash")
        if cached is None:
            cached = hash((tag,) + tuple(getattr(self, n) for n in names))
            object.__setattr__(self, "_hash", cached)
        return cached

    cls.__hash__ = __hash__
    return cls


class Sort(Enum):
    NAT = "nat"
    INT = "int"
    STR = "str"
    BOOL = "bool"
    UNIT = "unit"

    def __str__(self) -> str:
        return self.value

    def __lt__(self, other: "Sort") -> bool:
        return self.value < other.value


# ---------------------------------------------------------------- types


@_node
class Out:
    peer: str
    label: str
    sort: Sort
    cont: "SessionType"


@_node
class In:
    peer: str
    label: str
    sort: Sort
    cont: "SessionType"


@_node
class Sum:
    left: "SessionType"
    right: "SessionType"


@_node
class End:
    pass


@_node
class Mu:
    var: str
    body: "SessionType"


@_node
class TVar:
    name: str


END = End()
SessionType = Union[Out, In, Sum, End, Mu, TVar]
Prefix = Union[Out, In]


# ---------------------------------------------------------- expressions


@_node
class NatLit:
    value: int


@_node
class IntLit:
    value: int


@_node
class StrLit:
    value: str


@_node
class BoolLit:
    value: bool


@_node
class UnitLit:
    pass


@_node
class EVar:
    name: str


@_node
class Lt:
    left: "Expr"
    right: "Expr"


@_node
class Eq:
    left: "Expr"
    right: "Expr"


@_node
class Not:
    arg: "Expr"


@_node
class And:
    left: "Expr"
    right: "Expr"


@_node
class Or:
    left: "Expr"
    right: "Expr"


UNIT = UnitLit()
Value = Union[NatLit, IntLit, StrLit, BoolLit, UnitLit]
Expr = Union[NatLit, IntLit, StrLit, BoolLit, UnitLit, EVar, Lt, Eq, Not, And, Or]
VALUE_TYPES = (NatLit, IntLit, StrLit, BoolLit, UnitLit)


def value_sort(v: Value) -> Sort:
    match v:
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
    raise TypeError(f"not a value: {v!r}")


# ------------------------------------------------------------ processes


@_node
class Send:
    peer: str
    label: str
    expr: Expr
    cont: "Process"


@_node
class Recv:
    peer: str
    label: str
    binder: str
    cont: "Process"


@_node
class PSum:
    left: "Process"
    right: "Process"


@_node
class PMu:
    var: str
    body: "Process"


@_node
class PVar:
    name: str


@_node
class If:
    cond: Expr
    then: "Process"
    orelse: "Process"


@_node
class Inaction:
    pass


NIL = Inaction()
Process = Union[Send, Recv, PSum, PMu, PVar, If, Inaction]


# ------------------------------------------------------------- sessions


@_node
class Thread:
    participant: str
    body: Process


@_node
class Session:
    """Parallel composition of threads, kept in source order.

    Structural congruence only permutes threads, so :func:`congruent`
    compares the threads as a set; ``==`` compares the ordered list.
    """

    threads: tuple[Thread, ...]

    def __post_init__(self):
        names = [t.participant for t in self.threads]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate participants in session: {names}")

    def participants(self) -> list[str]:
        return [t.participant for t in self.threads]

    def body(self, participant: str) -> Process:
        for t in self.threads:
            if t.participant == participant:
                return t.body
        raise KeyError(participant)

    def replace(self, updates: Mapping[str, Process]) -> "Session":
        return Session(tuple(Thread(t.participant, updates.get(t.participant, t.body)) for t in self.threads))


def congruent(m1: Session, m2: Session) -> bool:
    return frozenset(m1.threads) == frozenset(m2.threads) and len(m1.threads) == len(m2.threads)


# ----------------------------------------------------- type environments


class TypeEnv(Mapping):
    """Immutable finite map from participants to session types.

    Iteration is in ascending participant order; equality is pointwise
    syntactic equality of the bound types.
    """

    __slots__ = ("_items", "_dict", "_hash")

    def __init__(self, bindings: Mapping[str, SessionType] | Iterable[tuple[str, SessionType]] = ()):
        pairs = dict(bindings.items() if isinstance(bindings, Mapping) else bindings)
        self._items = tuple(sorted(pairs.items(), key=lambda kv: kv[0]))
        self._dict = dict(self._items)
        self._hash = None

    def __getitem__(self, p: str) -> SessionType:
        return self._dict[p]

    def __iter__(self) -> Iterator[str]:
        return (p for p, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, p: object) -> bool:
        return p in self._dict

    def __eq__(self, other: object) -> bool:
        if isinstance(other, TypeEnv):
            return self._items == other._items
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self._items)
        return self._hash

    def __repr__(self) -> str:
        return "TypeEnv({" + ", ".join(f"{p!r}: {t!r}" for p, t in self._items) + "})"

    def pairs(self) -> tuple[tuple[str, SessionType], ...]:
        return self._items

    def set(self, updates: Mapping[str, SessionType]) -> "TypeEnv":
        merged = dict(self._dict)
        merged.update(updates)
        return TypeEnv(merged)

    def restrict(self, participants: Iterable[str]) -> "TypeEnv":
        keep = set(participants)
        return TypeEnv((p, t) for p, t in self._items if p in keep)


# --------------------------------------------------- operations on types


def subst_type(t: SessionType, var: str, s: SessionType) -> SessionType:
    """t{s/var}.  ``s`` is expected to be closed, so no capture can occur."""
    match t:
        case Out(p, l, srt, k):
            return Out(p, l, srt, subst_type(k, var, s))
        case In(p, l, srt, k):
            return In(p, l, srt, subst_type(k, var, s))
        case Sum(a, b):
            return Sum(subst_type(a, var, s), subst_type(b, var, s))
        case Mu(x, body):
            return t if x == var else Mu(x, subst_type(body, var, s))
        case TVar(x):
            return s if x == var else t
        case End():
            return t
    raise TypeError(f"not a session type: {t!r}")


def unfold(t: SessionType) -> SessionType:
    """unfold(rec X . T) = T{rec X . T / X}."""
    if not isinstance(t, Mu):
        raise NotRecursive(f"cannot unfold a non-recursive type: {t!r}")
    return subst_type(t.body, t.var, t)


def free_vars(t: SessionType) -> frozenset[str]:
    match t:
        case Out(_, _, _, k) | In(_, _, _, k):
            return free_vars(k)
        case Sum(a, b):
            return free_vars(a) | free_vars(b)
        case Mu(x, body):
            return free_vars(body) - {x}
        case TVar(x):
            return frozenset({x})
        case End():
            return frozenset()
    raise TypeError(f"not a session type: {t!r}")


def is_closed(t: SessionType) -> bool:
    return not free_vars(t)


def _unguarded(t: SessionType) -> frozenset[str]:
    # variables reachable without crossing a prefix
    match t:
        case TVar(x):
            return frozenset({x})
        case Sum(a, b):
            return _unguarded(a) | _unguarded(b)
        case Mu(x, body):
            return _unguarded(body) - {x}
        case _:
            return frozenset()


def is_contractive(t: SessionType) -> bool:
    """Every bound variable occurs under at least one prefix of its binder."""
    match t:
        case Out(_, _, _, k) | In(_, _, _, k):
            return is_contractive(k)
        case Sum(a, b):
            return is_contractive(a) and is_contractive(b)
        case Mu(x, body):
            return x not in _unguarded(body) and is_contractive(body)
        case _:
            return True


def summands(t: SessionType) -> list[SessionType]:
    """Leaves of a (possibly nested) sum, left to right."""
    if isinstance(t, Sum):
        return summands(t.left) + summands(t.right)
    return [t]


def make_sum(parts: list[SessionType]) -> SessionType:
    """Right-nested sum of ``parts`` (at least one)."""
    if not parts:
        raise ValueError("empty sum")
    acc = parts[-1]
    for part in reversed(parts[:-1]):
        acc = Sum(part, acc)
    return acc


def labels(t: SessionType) -> list[str]:
    """Multiset of the labels of the top-level prefixes, as a list."""
    match t:
        case Out(_, l, _, _) | In(_, l, _, _):
            return [l]
        case Sum(a, b):
            return labels(a) + labels(b)
        case _:
            return []


def polarity(t: SessionType) -> str | None:
    """'!' for selections, '?' for branchings, None when undefined."""
    match t:
        case Out():
            return "!"
        case In():
            return "?"
        case Sum(a, b):
            pa, pb = polarity(a), polarity(b)
            return pa if pa is not None and pa == pb else None
        case _:
            return None


def sum_peer(t: SessionType) -> str | None:
    """Common peer of all top-level prefixes, None when undefined."""
    match t:
        case Out(p, _, _, _) | In(p, _, _, _):
            return p
        case Sum(a, b):
            pa, pb = sum_peer(a), sum_peer(b)
            return pa if pa is not None and pa == pb else None
        case _:
            return None


def is_uniform(t: SessionType) -> bool:
    ls = labels(t)
    return len(ls) == len(set(ls)) and polarity(t) is not None and sum_peer(t) is not None


def well_behaved_issue(t: SessionType) -> str | None:
    """None if ``t`` is well-behaved, otherwise the reason it is not."""
    match t:
        case Out(_, _, _, k) | In(_, _, _, k):
            return well_behaved_issue(k)
        case Sum(a, b):
            if not is_uniform(t):
                ls = labels(t)
                if len(ls) != len(set(ls)):
                    dup = sorted({l for l in ls if ls.count(l) > 1})
                    return f"Wb-Sum: duplicate label(s) {', '.join(dup)} in a sum"
                if polarity(t) is None:
                    return "Wb-Sum: summands are not all inputs or all outputs"
                return "Wb-Sum: summands do not share a single peer"
            return well_behaved_issue(a) or well_behaved_issue(b)
        case Mu(_, body):
            return well_behaved_issue(body)
        case End() | TVar():
            return None
    raise TypeError(f"not a session type: {t!r}")


def is_well_behaved(t: SessionType) -> bool:
    return well_behaved_issue(t) is None


def well_formedness_issue(t: SessionType) -> str | None:
    """None if ``t`` is well-formed (contractive, closed, well-behaved)."""
    if not is_contractive(t):
        return "not contractive: a recursion variable occurs unguarded by a prefix"
    fv = free_vars(t)
    if fv:
        return "not closed: free variable(s) " + ", ".join(sorted(fv))
    return well_behaved_issue(t)


def is_well_formed_type(t: SessionType) -> bool:
    return well_formedness_issue(t) is None


def parties(t: SessionType) -> frozenset[str]:
    match t:
        case Out(p, _, _, k) | In(p, _, _, k):
            return frozenset({p}) | parties(k)
        case Sum(a, b):
            return parties(a) | parties(b)
        case Mu(_, body):
            return parties(body)
        case _:
            return frozenset()


def parties_env(d: TypeEnv) -> frozenset[str]:
    out = set(d)
    for _, t in d.pairs():
        out |= parties(t)
    return frozenset(out)


def tagged_labels(t: SessionType) -> frozenset[tuple[str, Sort]]:
    """Labels of the top-level prefixes paired with their payload sorts."""
    match t:
        case Out(_, l, s, _) | In(_, l, s, _):
            return frozenset({(l, s)})
        case Sum(a, b):
            return tagged_labels(a) | tagged_labels(b)
        case _:
            return frozenset()


def top(t: SessionType) -> str | None:
    """Peer of the unguarded prefix, None for end, variables and binders."""
    match t:
        case Out(p, _, _, _) | In(p, _, _, _):
            return p
        case Sum(a, _):
            return top(a)
        case _:
            return None


def is_end(t: SessionType) -> bool:
    return isinstance(t, End)


# ----------------------------------------------- operations on processes


def subst_proc(p: Process, var: str, q: Process) -> Process:
    """p{q/var} for process variables; ``q`` is expected to be closed."""
    match p:
        case Send(r, l, e, k):
            return Send(r, l, e, subst_proc(k, var, q))
        case Recv(r, l, x, k):
            return Recv(r, l, x, subst_proc(k, var, q))
        case PSum(a, b):
            return PSum(subst_proc(a, var, q), subst_proc(b, var, q))
        case PMu(x, body):
            return p if x == var else PMu(x, subst_proc(body, var, q))
        case PVar(x):
            return q if x == var else p
        case If(c, a, b):
            return If(c, subst_proc(a, var, q), subst_proc(b, var, q))
        case Inaction():
            return p
    raise TypeError(f"not a process: {p!r}")


def unfold_proc(p: PMu) -> Process:
    return subst_proc(p.body, p.var, p)


def subst_expr(e: Expr, x: str, v: Value) -> Expr:
    match e:
        case EVar(y):
            return v if y == x else e
        case Lt(a, b):
            return Lt(subst_expr(a, x, v), subst_expr(b, x, v))
        case Eq(a, b):
            return Eq(subst_expr(a, x, v), subst_expr(b, x, v))
        case Not(a):
            return Not(subst_expr(a, x, v))
        case And(a, b):
            return And(subst_expr(a, x, v), subst_expr(b, x, v))
        case Or(a, b):
            return Or(subst_expr(a, x, v), subst_expr(b, x, v))
        case _:
            return e


def subst_value(p: Process, x: str, v: Value) -> Process:
    """p{v/x} for expression variables; an input binding ``x`` shadows it."""
    match p:
        case Send(r, l, e, k):
            return Send(r, l, subst_expr(e, x, v), subst_value(k, x, v))
        case Recv(r, l, y, k):
            return p if y == x else Recv(r, l, y, subst_value(k, x, v))
        case PSum(a, b):
            return PSum(subst_value(a, x, v), subst_value(b, x, v))
        case PMu(y, body):
            return PMu(y, subst_value(body, x, v))
        case If(c, a, b):
            return If(subst_expr(c, x, v), subst_value(a, x, v), subst_value(b, x, v))
        case PVar() | Inaction():
            return p
    raise TypeError(f"not a process: {p!r}")
