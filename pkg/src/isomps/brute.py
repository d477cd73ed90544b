"""Independent reference procedures used to cross-check the closure.

Nothing here uses the oracle-driven relation: verdicts come from
exhaustive breadth-first search over the non-deterministic environment
relation, and session exploration uses the session semantics directly.
The module also holds the random environment generator used by the
property tests.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

from .compliance import is_minimal
from .errors import CapExceeded
from .lts import EnvAction, env_transitions, is_consumed, mutual_pairs
from .semantics import is_ended, session_transitions
from .syntax import (
    END,
    In,
    Mu,
    Out,
    Session,
    SessionType,
    Sort,
    Sum,
    TVar,
    TypeEnv,
    is_well_formed_type,
    make_sum,
    polarity,
    tagged_labels,
)


@dataclass(frozen=True)
class ReachSet:
    visited: tuple[TypeEnv, ...]
    stuck: tuple[TypeEnv, ...]
    edges: tuple[tuple[TypeEnv, EnvAction, TypeEnv], ...]


def reachable_envs(d: TypeEnv, cap: int = 50_000) -> ReachSet:
    seen = {d}
    order = [d]
    stuck = []
    edges = []
    queue = deque([d])
    while queue:
        cur = queue.popleft()
        steps = env_transitions(cur)
        if not steps:
            stuck.append(cur)
        for act, nxt in steps:
            edges.append((cur, act, nxt))
            if nxt not in seen:
                if len(seen) >= cap:
                    raise CapExceeded(f"more than {cap} reachable environments")
                seen.add(nxt)
                order.append(nxt)
                queue.append(nxt)
    return ReachSet(tuple(order), tuple(stuck), tuple(edges))


def facing_defects(d: TypeEnv, strict_branches: bool = True) -> list[tuple[str, str]]:
    """Facing pairs that cannot be trusted to synchronise.

    A pair is defective when both select, both branch, or they offer no
    common tagged label.  With ``strict_branches`` a pair of opposite
    polarity is also defective when neither label set contains the other:
    after the common labels are consumed, each side keeps a branch the
    other one cannot answer.
    """
    out = []
    for p, q in mutual_pairs(d):
        tp, tq = d[p], d[q]
        pp, pq = polarity(tp), polarity(tq)
        if pp is None or pq is None:
            continue
        lp, lq = tagged_labels(tp), tagged_labels(tq)
        if pp == pq or not (lp & lq):
            out.append((p, q))
        elif strict_branches and not (lp <= lq or lq <= lp):
            out.append((p, q))
    return out


def reference_verdict(
    d: TypeEnv, cap: int = 50_000, strict_branches: bool = True, require_minimal: bool = True
) -> bool:
    """True iff no reachable environment has a defective facing pair and
    every reachable environment without successors is all ``end``.

    With ``require_minimal`` every reachable environment must also be
    minimal: the closure is only defined on minimal environments, so an
    environment that later falls apart into independent blocks is rejected.
    """


    reach = reachable_envs(d, cap)
    if any(facing_defects(e, strict_branches) for e in reach.visited):
        return False
    if require_minimal and not all(is_minimal(e) for e in reach.visited):
        return False
    return all(is_consumed(e) for e in reach.stuck)


ENDED = "ended"
STUCK = "stuck"
LIVE = "live"


def explore_session(m: Session, depth: int, cap: int = 100_000) -> dict[Session, str]:
    """Every session reachable in at most ``depth`` steps, tagged as
    ended, stuck (no step and not ended) or live."""
    tags: dict[Session, str] = {}
    frontier = [m]
    seen = {m}
    for level in range(depth + 1):
        nxt_frontier = []
        for s in frontier:
            steps = session_transitions(s)
            if not steps:
                tags[s] = ENDED if is_ended(s) else STUCK
                continue
            tags[s] = LIVE
            if level == depth:
                continue
            for _, nxt in steps:
                if nxt not in seen:
                    if len(seen) >= cap:
                        raise CapExceeded(f"more than {cap} session states")
                    seen.add(nxt)
                    nxt_frontier.append(nxt)
        frontier = nxt_frontier
    return tags


# ------------------------------------------------------- random generator

PARTICIPANTS = ("p", "q", "r")
LABELS = ("a", "b", "c")
SORTS = (Sort.NAT, Sort.BOOL)


def type_depth(t: SessionType) -> int:
    """Nesting depth counting prefixes and binders; sums add no depth."""
    match t:
        case Out(_, _, _, k) | In(_, _, _, k):
            return 1 + type_depth(k)
        case Mu(_, body):
            return 1 + type_depth(body)
        case Sum(a, b):
            return max(type_depth(a), type_depth(b))
        case _:
            return 0


def _random_type(rng: random.Random, me: str, depth: int, bound: list[str], p_rec: float, n_labels: int) -> SessionType:
    if depth <= 0:
        return TVar(rng.choice(bound)) if bound and rng.random() < 0.6 else END
    roll = rng.random()
    if roll < p_rec and depth >= 2:
        var = f"X{len(bound)}"
        return Mu(var, _random_prefixes(rng, me, depth - 1, bound + [var], p_rec, n_labels))
    if roll < p_rec + 0.1:
        return TVar(rng.choice(bound)) if bound else END
    return _random_prefixes(rng, me, depth, bound, p_rec, n_labels)


def _random_prefixes(rng: random.Random, me: str, depth: int, bound: list[str], p_rec: float, n_labels: int) -> SessionType:
    peer = rng.choice([x for x in PARTICIPANTS if x != me])
    ctor = rng.choice((Out, In))
    k = rng.randint(1, n_labels)
    chosen = sorted(rng.sample(LABELS[:n_labels], k))
    parts = [
        ctor(peer, l, rng.choice(SORTS), _random_type(rng, me, depth - 1, bound, p_rec, n_labels))
        for l in chosen
    ]
    return make_sum(parts)


def random_env(rng: random.Random, max_depth: int = 6, p_rec: float = 0.4) -> TypeEnv:
    """A well-formed minimal environment over three participants.

    Half of the samples are built from a random choreography projected onto
    each participant, so that many of them are compliant; the other half
    are independent random types.  Samples that are not well-formed, not
    minimal or too deep are rejected and redrawn.
    """


    while True:
        n_labels = rng.randint(2, 3)
        if rng.random() < 0.5:
            env = _projected_env(rng, max_depth, p_rec, n_labels)
        else:
            env = TypeEnv(
                (p, _random_type(rng, p, rng.randint(1, max_depth), [], p_rec, n_labels)) for p in PARTICIPANTS
            )
        if env is None:
            continue
        if not all(is_well_formed_type(t) and type_depth(t) <= max_depth for _, t in env.pairs()):
            continue
        if all(t == END for _, t in env.pairs()) and rng.random() < 0.9:
            continue
        if is_minimal(env):
            return env


# A small global-protocol language: ("msg", sender, receiver, [(label, sort, G)]),
# ("rec", var, G), ("var", var), ("end",).


def _random_global(rng: random.Random, depth: int, bound: list[str], p_rec: float, n_labels: int):
    if depth <= 0:
        return ("var", rng.choice(bound)) if bound and rng.random() < 0.7 else ("end",)
    if bound and rng.random() < 0.15:
        return ("var", rng.choice(bound))
    if rng.random() < p_rec and not bound:
        var = f"X{len(bound)}"
        return ("rec", var, _random_msg(rng, depth - 1, bound + [var], p_rec, n_labels))
    return _random_msg(rng, depth, bound, p_rec, n_labels)


def _random_msg(rng: random.Random, depth: int, bound: list[str], p_rec: float, n_labels: int):
    snd, rcv = rng.sample(PARTICIPANTS, 2)
    k = rng.randint(1, n_labels)
    chosen = sorted(rng.sample(LABELS[:n_labels], k))
    branches = [(l, rng.choice(SORTS), _random_global(rng, depth - 1, bound, p_rec, n_labels)) for l in chosen]
    return ("msg", snd, rcv, branches)


def _project(g, me: str, rng: random.Random):
    match g:
        case ("end",):
            return END
        case ("var", x):
            return TVar(x)
        case ("rec", x, body):
            inner = _project(body, me, rng)
            if inner is None or isinstance(inner, TVar) or inner == END:
                return END if inner is not None else None
            return Mu(x, inner)
        case ("msg", snd, rcv, branches):
            conts = [(l, s, _project(c, me, rng)) for l, s, c in branches]
            if any(c is None for _, _, c in conts):
                return None
            if me == snd:
                return make_sum([Out(rcv, l, s, c) for l, s, c in conts])
            if me == rcv:
                return make_sum([In(snd, l, s, c) for l, s, c in conts])
            # an uninvolved participant follows one branch; if the
            # branches disagree this deliberately yields faulty samples
            options = [c for _, _, c in conts]
            return options[0] if len(set(options)) == 1 else rng.choice(options)
    return None


def _projected_env(rng: random.Random, max_depth: int, p_rec: float, n_labels: int):
    g = _random_global(rng, rng.randint(2, max_depth), [], p_rec, n_labels)
    env = {}
    for p in PARTICIPANTS:
        t = _project(g, p, rng)
        if t is None:
            return None
        env[p] = t
    return TypeEnv(env)
