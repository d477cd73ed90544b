"""Minimal partitions, the finite universe of reachable types, the closure
of an environment under the deterministic relation, and compliance.

The closure explores every environment reachable by oracle-driven steps
*and* every sum continuation, stopping a branch at a consumed or stuck
environment, at a communication mismatch, at a non-minimal environment, or
when it revisits an environment already on the current path.  Termination
follows from the finiteness of the universe computed by
:func:`redex_universe`; every visited environment is checked to lie in it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .errors import CapExceeded, EmptyEnvironment, MismatchDetected, OracleNotFair, UniverseCapExceeded
from .lts import (
    LabelOrder,
    Oracle,
    Ret0,
    Ret1,
    Ret2,
    match_sync,
    det_step,
    find_mismatch,
    is_consumed,
    is_fair_reply,
    is_mismatch,
    mismatch_between,
    prefix_transitions,
    type_transitions,
)
from .surface import print_env, print_type
from .syntax import Mu, SessionType, Sum, TypeEnv, is_end, parties, polarity, unfold

# ---------------------------------------------------------- minimality


def minimal_partition(d: TypeEnv) -> list[TypeEnv]:
    """Finest split of ``d`` into blocks whose parties are disjoint.

    Non-ended participants are grouped by the connected components of the
    "shares a party" relation.  An ended participant joins the block that
    mentions it, or the first block if none does; an environment of ended
    participants only is a single block.
    """
    if len(d) == 0:
        raise EmptyEnvironment("cannot partition an empty environment")
    live = [p for p, t in d.pairs() if not is_end(t)]
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for p in live:
        find(p)
        for x in parties(d[p]):
            union(p, x)
    groups: dict[str, list[str]] = {}
    for p in live:
        groups.setdefault(find(p), []).append(p)
    blocks = sorted(groups.values(), key=lambda g: g[0])
    if not blocks:
        return [d]
    for p, t in d.pairs():
        if is_end(t):
            home = next((b for b in blocks if p in parent and find(p) == find(b[0])), blocks[0])
            home.append(p)
    return [d.restrict(b) for b in blocks]


def is_minimal(d: TypeEnv) -> bool:
    if len(d) == 0:
        raise EmptyEnvironment("cannot partition an empty environment")
    return len(minimal_partition(d)) == 1


# ------------------------------------------------------------ universe


def redex_universe(d: TypeEnv, cap: int = 10_000) -> dict[str, frozenset[SessionType]]:
    """Per participant, every type reachable by unfolding, continuing past a
    prefix, or keeping the remnant of a sum.  The product of these sets
    contains every environment the closure can visit."""
    universe: dict[str, frozenset[SessionType]] = {}
    total = 0
    for p, t in d.pairs():
        seen = {t}
        work = [t]
        while work:
            cur = work.pop()
            for _, k, rem in type_transitions(cur):
                for nxt in (k, rem):
                    if nxt is not None and nxt not in seen:
                        seen.add(nxt)
                        total += 1
                        if total > cap:
                            raise UniverseCapExceeded(f"type universe exceeds {cap} elements")
                        work.append(nxt)
        universe[p] = frozenset(seen)
    return universe


# ------------------------------------------------------------- closure

CONSUMED = "Consumed"
STUCK = "StuckDeadlock"
MISMATCH = "Mismatch"
LOOP = "FixpointLoop"
NOT_MINIMAL = "NotMinimal"
ERROR_KINDS = (STUCK, MISMATCH, NOT_MINIMAL)


@dataclass(frozen=True)
class Leaf:
    kind: str
    env: TypeEnv
    path: tuple[str, ...]
    pair: Optional[tuple[str, str]] = None
    sound: Optional[bool] = None
    reason: str = ""

    @property
    def is_error(self) -> bool:
        return self.kind in ERROR_KINDS or (self.kind == LOOP and not self.sound)

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "env": {p: print_type(t) for p, t in self.env.pairs()},
            "path": list(self.path),
        }
        if self.pair is not None:
            out["pair"] = list(self.pair)
        if self.sound is not None:
            out["sound"] = self.sound
        if self.reason:
            out["reason"] = self.reason
        return out


@dataclass(frozen=True)
class ClosureReport:
    root: TypeEnv
    leaves: tuple[Leaf, ...]
    explored: int
    oracle: str = "lex"
    label_order: str = "lex"

    @property
    def verdict(self) -> bool:
        return not any(leaf.is_error for leaf in self.leaves)

    @property
    def witness(self) -> Optional[Leaf]:
        return next((leaf for leaf in self.leaves if leaf.is_error), None)

    def leaves_of(self, kind: str) -> list[Leaf]:
        return [leaf for leaf in self.leaves if leaf.kind == kind]

    def to_json(self) -> dict:
        w = self.witness
        return {
            "env": {p: print_type(t) for p, t in self.root.pairs()},
            "oracle": self.oracle,
            "label_order": self.label_order,
            "verdict": self.verdict,
            "explored": self.explored,
            "leaves": [leaf.to_json() for leaf in self.leaves],
            "witness": None if w is None else w.to_json(),
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _oracle_name(omega: Oracle) -> str:
    return getattr(omega, "name", type(omega).__name__)


def is_sound(omega: Oracle, d: TypeEnv) -> bool:
    """A revisited environment is harmless when it still has a redex and
    holds no facing pair that cannot synchronise."""
    return isinstance(omega(d), (Ret1, Ret2)) and not is_mismatch(d)


def closure(
    omega: Oracle,
    d: TypeEnv,
    label_order: LabelOrder = "lex",
    universe_cap: int = 10_000,
    node_cap: int = 1_000_000,
) -> ClosureReport:
    """Depth-first closure; leaves are listed in exploration order with the
    step taken to the reduct explored before the sum continuation."""
    if len(d) == 0:
        raise EmptyEnvironment("cannot compute the closure of an empty environment")
    universe = redex_universe(d, universe_cap)
    leaves: list[Leaf] = []
    explored = 0
    # (environment, environments on the path, actions on the path)
    stack: list[tuple[TypeEnv, tuple[TypeEnv, ...], tuple[str, ...]]] = [(d, (), ())]
    while stack:
        env, path, acts = stack.pop()
        explored += 1
        if explored > node_cap:
            raise CapExceeded(f"closure explored more than {node_cap} environments")
        for p, t in env.pairs():
            # unreachable by construction; guards the termination argument
            assert t in universe[p], f"type of {p} escaped the universe"
        if not is_minimal(env):
            leaves.append(Leaf(NOT_MINIMAL, env, acts, reason="environment splits into independent blocks"))
            continue
        if env in path:
            leaves.append(Leaf(LOOP, env, acts, sound=is_sound(omega, env)))
            continue
        try:
            step = det_step(omega, env, label_order)
        except MismatchDetected as exc:
            leaves.append(Leaf(MISMATCH, env, acts, pair=exc.pair, reason=exc.reason))
            continue
        if step is None:
            kind = CONSUMED if is_consumed(env) else STUCK
            leaves.append(Leaf(kind, env, acts))
            continue
        below = path + (env,)
        if step.continuation is not None:
            stack.append((step.continuation, below, acts + (f"alt:{step.action}",)))
        stack.append((step.env, below, acts + (str(step.action),)))
    return ClosureReport(d, tuple(leaves), explored, _oracle_name(omega), label_order)


def compliance(omega: Oracle, d: TypeEnv, label_order: LabelOrder = "lex", universe_cap: int = 10_000) -> bool:
    return closure(omega, d, label_order, universe_cap).verdict


@dataclass(frozen=True)
class EnvVerdict:
    """Compliance of every minimal block of an environment."""

    env: TypeEnv
    blocks: tuple[ClosureReport, ...]

    @property
    def verdict(self) -> bool:
        return all(b.verdict for b in self.blocks)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "blocks": [
                {
                    "participants": list(b.root),
                    "verdict": b.verdict,
                    "explored": b.explored,
                    "witness": None if b.witness is None else b.witness.to_json(),
                    "errors": [leaf.to_json() for leaf in b.leaves if leaf.is_error],
                }
                for b in self.blocks
            ],
        }


def check_env(omega: Oracle, d: TypeEnv, label_order: LabelOrder = "lex", universe_cap: int = 10_000) -> EnvVerdict:
    blocks = minimal_partition(d)
    return EnvVerdict(d, tuple(closure(omega, b, label_order, universe_cap) for b in blocks))


def describe_leaf(leaf: Leaf) -> str:
    head = leaf.kind
    if leaf.pair:
        head += f" between {leaf.pair[0]} and {leaf.pair[1]}"
    if leaf.reason:
        head += f": {leaf.reason}"
    if leaf.kind == LOOP:
        head += " (sound)" if leaf.sound else " (unsound)"
    trail = " ; ".join(leaf.path) if leaf.path else "(initial environment)"
    body = "\n".join("    " + line for line in print_env(leaf.env).splitlines())
    return f"{head}\n  after: {trail}\n{body}"


# ----------------------------------------------- exception-driven variant


class _WrongBranch(Exception):
    pass


class _Fixpoint(Exception):
    def __init__(self, env: TypeEnv):
        self.env = env


class _Reject(Exception):
    def __init__(self, kind: str, env: TypeEnv):
        self.kind = kind
        self.env = env


def _split_sum(t: SessionType) -> Optional[tuple[SessionType, SessionType]]:
    return (t.left, t.right) if isinstance(t, Sum) else None


def exception_driven_compliance(omega: Oracle, d: TypeEnv, node_cap: int = 1_000_000) -> tuple[bool, str]:
    """Exception-driven single-path procedure, kept for comparison only.

    Labels are matched syntactically.  At a sum the left part is explored
    and the right part is tried only if the left one fails with a wrong
    branch or reaches a fixed point, so a consumed left branch hides the
    right one.  Returns the verdict and the name of the exit taken.
    """
    counter = [0]

    def cstep(env: TypeEnv, history: tuple[TypeEnv, ...]) -> TypeEnv:
        counter[0] += 1
        if counter[0] > node_cap:
            raise CapExceeded(f"explored more than {node_cap} environments")
        if not is_minimal(env):
            raise _Reject(NOT_MINIMAL, env)
        if env in history:
            raise _Fixpoint(env)
        reply = omega(env)
        if not is_fair_reply(env, reply):
            raise OracleNotFair(f"oracle reply {reply} is not fair")
        here = history + (env,)
        match reply:
            case Ret0():
                if is_consumed(env):
                    return env
                raise _Reject(STUCK, env)
            case Ret1(p):
                return cstep(env.set({p: unfold(env[p])}), here)
            case Ret2(p, q):
                tp, tq = env[p], env[q]
                if not isinstance(tp, Sum) and not isinstance(tq, Sum):
                    if polarity(tp) == polarity(tq):
                        raise _Reject(MISMATCH, env)
                    recv, send = (p, q) if polarity(tp) == "?" else (q, p)
                    [(ract, _, _)] = prefix_transitions(env[recv])
                    matched = match_sync(env[recv], env[send], recv, send, ract.label)
                    if matched is None:
                        raise _WrongBranch()
                    (rk, _), (sk, _) = matched
                    return cstep(env.set({recv: rk, send: sk}), here)
                if mismatch_between(tp, tq):
                    raise _WrongBranch()
                who = p if isinstance(tp, Sum) else q
                left, right = _split_sum(env[who])
                try:
                    return cstep(env.set({who: left}), here)
                except (_WrongBranch, _Fixpoint):
                    return cstep(env.set({who: right}), here)
        raise OracleNotFair(f"unknown reply {reply!r}")

    try:
        final = cstep(d, ())
        return is_consumed(final), CONSUMED
    except _Fixpoint as fx:
        return is_sound(omega, fx.env), LOOP
    except _WrongBranch:
        return False, "WrongBranch"
    except _Reject as rj:
        return False, rj.kind
