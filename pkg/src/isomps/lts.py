"""Transitions of session environments.

Two relations are provided.  :func:`env_transitions` is the
non-deterministic relation: a recursive type may unfold, and two
participants facing each other may exchange a label they both offer.
:func:`det_step` is the deterministic relation driven by an oracle, which
also returns the *sum continuation*: the environment made of the branches
that were discarded by the synchronisation, to be explored separately.

Remnants and sum continuations use ``None`` for the empty placeholder.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Union

from .errors import CapExceeded, MismatchDetected, OracleNotFair
from .semantics import Sync
from .syntax import (
    In,
    Mu,
    Out,
    SessionType,
    Sort,
    Sum,
    TypeEnv,
    is_end,
    polarity,
    tagged_labels,
    top,
    unfold,
)


@dataclass(frozen=True)
class TauAt:
    participant: str

    def __str__(self) -> str:
        return f"tau_{self.participant}"


EnvAction = Union[TauAt, Sync]
Remnant = Optional[SessionType]
LabelOrder = Literal["lex", "syntactic"]


@dataclass(frozen=True)
class TypeAction:
    direction: str  # '!' or '?'
    peer: str
    label: str
    sort: Sort


def remnant_sum(a: Remnant, b: Remnant) -> Remnant:
    """The remnant operator: the hole is a unit on both sides."""
    if a is None:
        return b
    if b is None:
        return a
    return Sum(a, b)


def prefix_transitions(t: SessionType) -> list[tuple[TypeAction, SessionType, Remnant]]:
    """Communication steps of a type, with the remnant of discarded branches.

    Sum branches are listed left to right.
    """
    match t:
        case Out(p, l, s, k):
            return [(TypeAction("!", p, l, s), k, None)]
        case In(p, l, s, k):
            return [(TypeAction("?", p, l, s), k, None)]
        case Sum(a, b):
            left = [(act, k, remnant_sum(r, b)) for act, k, r in prefix_transitions(a)]
            right = [(act, k, remnant_sum(a, r)) for act, k, r in prefix_transitions(b)]
            return left + right
        case _:
            return []


def type_transitions(t: SessionType) -> list[tuple[Union[TypeAction, str], SessionType, Remnant]]:
    """All steps of a single type; a recursive binder makes a ``"tau"`` step."""
    if isinstance(t, Mu):
        return [("tau", unfold(t), None)]
    return prefix_transitions(t)


def match_sync(receiver: SessionType, sender: SessionType, p: str, q: str, label: str):
    """Steps of receiver ``p`` and sender ``q`` on ``label``, or None."""
    rin = [(a, k, r) for a, k, r in prefix_transitions(receiver) if a.direction == "?" and a.peer == q and a.label == label]
    sout = [(a, k, r) for a, k, r in prefix_transitions(sender) if a.direction == "!" and a.peer == p and a.label == label]
    for ra, rk, rr in rin:
        for sa, sk, sr in sout:
            if ra.sort == sa.sort:
                return (rk, rr), (sk, sr)
    return None


def env_transitions(d: TypeEnv) -> list[tuple[EnvAction, TypeEnv]]:
    """Non-deterministic steps: unfoldings in participant order, then
    synchronisations by receiver, input branches left to right."""
    out: list[tuple[EnvAction, TypeEnv]] = []
    for p, t in d.pairs():
        if isinstance(t, Mu):
            out.append((TauAt(p), d.set({p: unfold(t)})))
    for p, t in d.pairs():
        for act, k, _ in prefix_transitions(t):
            q = act.peer
            if act.direction != "?" or q == p or q not in d:
                continue
            for oact, ok, _ in prefix_transitions(d[q]):
                if oact.direction == "!" and oact.peer == p and oact.label == act.label and oact.sort == act.sort:
                    out.append((Sync(act.label, p, q), d.set({p: k, q: ok})))
    return out


def is_consumed(d: TypeEnv) -> bool:
    return all(is_end(t) for _, t in d.pairs())


# ----------------------------------------------------------- oracles


@dataclass(frozen=True)
class Ret2:
    first: str
    second: str


@dataclass(frozen=True)
class Ret1:
    participant: str


@dataclass(frozen=True)
class Ret0:
    pass


OracleReply = Union[Ret2, Ret1, Ret0]
Oracle = Callable[[TypeEnv], OracleReply]


def mutual_pairs(d: TypeEnv) -> list[tuple[str, str]]:
    """Pairs (p, q), p < q, whose top participants point at each other."""
    out = []
    for p, t in d.pairs():
        q = top(t)
        if q is not None and p < q and q in d and top(d[q]) == p:
            out.append((p, q))
    return out


class LexOracle:
    """Fair oracle that prefers unfoldings, then communicating pairs.

    Participants are scanned in ascending order, or descending order when
    ``reverse`` is set.
    """

    def __init__(self, reverse: bool = False):
        self.reverse = reverse
        self.name = "revlex" if reverse else "lex"

    def __call__(self, d: TypeEnv) -> OracleReply:
        names = sorted(d, reverse=self.reverse)
        for p in names:
            if isinstance(d[p], Mu):
                return Ret1(p)
        for p in names:
            q = top(d[p])
            if q is not None and q in d and q != p and top(d[q]) == p:
                return Ret2(p, q)
        return Ret0()

    def __repr__(self) -> str:
        return f"LexOracle(reverse={self.reverse})"


def default_oracle() -> Oracle:
    return LexOracle()


def alt_oracle() -> Oracle:
    return LexOracle(reverse=True)


def oracle_by_name(name: str) -> Oracle:
    if name == "lex":
        return default_oracle()
    if name == "revlex":
        return alt_oracle()
    raise ValueError(f"unknown oracle {name!r}")


def is_fair_reply(d: TypeEnv, reply: OracleReply) -> bool:
    match reply:
        case Ret2(p, q):
            return p in d and q in d and p != q and top(d[p]) == q and top(d[q]) == p
        case Ret1(p):
            return p in d and isinstance(d[p], Mu)
        case Ret0():
            return not any(isinstance(t, Mu) for _, t in d.pairs()) and not mutual_pairs(d)
    return False


# ------------------------------------------------------ deterministic step


def _labels_in_order(t: SessionType, order: LabelOrder) -> list[tuple[str, Sort]]:
    if order == "lex":
        return sorted(tagged_labels(t), key=lambda ls: (ls[0], ls[1].value))
    return [(a.label, a.sort) for a, _, _ in prefix_transitions(t)]


@dataclass(frozen=True)
class DetStep:
    action: EnvAction
    env: TypeEnv
    continuation: Optional[TypeEnv]


def det_step(omega: Oracle, d: TypeEnv, label_order: LabelOrder = "lex") -> Optional[DetStep]:
    """One oracle-driven step, or None when the oracle reports no redex.

    For a communication the first common tagged label is chosen, by name
    (``lex``) or by position in the first participant's type
    (``syntactic``).  The continuation holds both remnants when each
    participant discarded at least one branch, and is None otherwise.
    """
    reply = omega(d)
    if not is_fair_reply(d, reply):
        raise OracleNotFair(f"oracle reply {reply} is not fair for this environment")
    match reply:
        case Ret0():
            return None
        case Ret1(p):
            return DetStep(TauAt(p), d.set({p: unfold(d[p])}), None)
        case Ret2(p, q):
            tp, tq = d[p], d[q]
            pp, pq = polarity(tp), polarity(tq)
            if pp is None or pq is None:
                raise MismatchDetected((p, q), "a facing type is not a uniform sum")
            if pp == pq:
                kind = "selecting" if pp == "!" else "branching"
                raise MismatchDetected((p, q), f"both are {kind}")
            common = tagged_labels(tp) & tagged_labels(tq)
            if not common:
                raise MismatchDetected((p, q), "no common tagged label")
            label = next(ls for ls in _labels_in_order(tp, label_order) if ls in common)[0]
            recv, send = (p, q) if pp == "?" else (q, p)
            matched = match_sync(d[recv], d[send], recv, send, label)
            assert matched is not None
            (rk, rr), (sk, sr) = matched
            d1 = d.set({recv: rk, send: sk})
            d2 = d.set({recv: rr, send: sr}) if rr is not None and sr is not None else None
            return DetStep(Sync(label, recv, send), d1, d2)
    raise OracleNotFair(f"unknown oracle reply {reply!r}")


# ------------------------------------------------------- error predicates


def mismatch_between(t1: SessionType, t2: SessionType) -> bool:
    """Two facing types that cannot synchronise with each other."""
    p1, p2 = polarity(t1), polarity(t2)
    if p1 is None or p2 is None:
        return False
    if p1 == p2:
        return True
    return not (tagged_labels(t1) & tagged_labels(t2))


def find_mismatch(d: TypeEnv) -> Optional[tuple[str, str]]:
    for p, q in mutual_pairs(d):
        if mismatch_between(d[p], d[q]):
            return (p, q)
    return None


def is_mismatch(d: TypeEnv) -> bool:
    return find_mismatch(d) is not None


def is_deadlock(d: TypeEnv) -> bool:
    return not env_transitions(d) and not is_consumed(d)


def is_error(d: TypeEnv) -> bool:
    return is_mismatch(d) or is_deadlock(d)


# ---------------------------------------------------------- graph export


@dataclass(frozen=True)
class TransitionGraph:
    nodes: tuple[TypeEnv, ...]
    edges: tuple[tuple[int, EnvAction, int], ...]


def transition_graph(d: TypeEnv, cap: int = 50_000) -> TransitionGraph:
    """Breadth-first reachable part of the non-deterministic relation."""
    index = {d: 0}
    nodes = [d]
    edges = []
    queue = deque([d])
    while queue:
        cur = queue.popleft()
        for act, nxt in env_transitions(cur):
            if nxt not in index:
                if len(nodes) >= cap:
                    raise CapExceeded(f"more than {cap} reachable environments")
                index[nxt] = len(nodes)
                nodes.append(nxt)
                queue.append(nxt)
            edges.append((index[cur], act, index[nxt]))
    return TransitionGraph(tuple(nodes), tuple(edges))


def to_dot(graph: TransitionGraph) -> str:
    """Graphviz rendering; node labels are the printed environments."""
    from .surface import print_env

    def quote(s: str) -> str:
        return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\l") + '"'

    lines = ["digraph env {", "  node [shape=box, fontname=monospace];"]
    for i, env in enumerate(graph.nodes):
        attrs = [f"label={quote(print_env(env) + chr(10))}"]
        if i == 0:
            attrs.append("penwidth=2")
        if is_consumed(env):
            attrs.append("style=filled, fillcolor=palegreen")
        elif is_error(env):
            attrs.append("style=filled, fillcolor=lightpink")
        lines.append(f"  n{i} [{', '.join(attrs)}];")
    for src, act, dst in graph.edges:
        lines.append(f"  n{src} -> n{dst} [label={quote(str(act))}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
