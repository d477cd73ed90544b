from pathlib import Path

import pytest
from hypothesis import given, settings

from isomps.compliance import (
    CONSUMED,
    LOOP,
    MISMATCH,
    NOT_MINIMAL,
    STUCK,
    check_env,
    closure,
    compliance,
    describe_leaf,
    is_minimal,
    minimal_partition,
    exception_driven_compliance,
    redex_universe,
)
from isomps.errors import EmptyEnvironment, MismatchDetected, UniverseCapExceeded
from isomps.lts import (
    alt_oracle,
    default_oracle,
    det_step,
    env_transitions,
    is_consumed,
    is_deadlock,
    is_mismatch,
    type_transitions,
)
from isomps.surface import load_env
from isomps.syntax import END, In, Mu, Out, Sort, TVar, TypeEnv
from worked_examples import DELTA, DELTA_END, DELTA_LOCK, DELTA_PP, Ta, Ta_star
from strategies import envs

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
ORACLES = [default_oracle(), alt_oracle()]


def corpus_env(name):
    return load_env((CORPUS / name).read_text())


# ---------------------------------------------------------- minimality


def test_connected_environment_with_ended_participant_is_minimal():
    d = corpus_env("chain.env")
    assert is_minimal(d)
    assert minimal_partition(d) == [d]


def test_two_independent_conversations_split():
    d = corpus_env("two_blocks.env")
    assert not is_minimal(d)
    b1, b2 = minimal_partition(d)
    assert list(b1) == ["p", "q", "t", "u"] and list(b2) == ["r", "s"]
    assert b1.restrict(["p", "q"]) == TypeEnv({"p": d["p"], "q": d["q"]})
    assert b2 == TypeEnv({"r": d["r"], "s": d["s"]})


def test_ended_participant_joins_the_block_mentioning_it():
    d = TypeEnv(
        {
            "p": Out("q", "a", Sort.NAT, END),
            "q": In("p", "a", Sort.NAT, END),
            "r": Out("z", "b", Sort.NAT, END),
            "s": In("r", "b", Sort.NAT, END),
            "z": END,
        }
    )
    blocks = minimal_partition(d)
    assert [list(b) for b in blocks] == [["p", "q"], ["r", "s", "z"]]


def test_all_end_environment_is_one_block():
    assert minimal_partition(DELTA_END) == [DELTA_END]


def test_empty_environment_is_rejected():
    with pytest.raises(EmptyEnvironment):
        minimal_partition(TypeEnv({}))
    with pytest.raises(EmptyEnvironment):
        closure(default_oracle(), TypeEnv({}))


# ----------------------------------------------------------- universe


def test_universe_of_simple_loop():
    t = Mu("X", Out("q", "l", Sort.NAT, TVar("X")))
    assert redex_universe(TypeEnv({"p": t}))["p"] == {t, Out("q", "l", Sort.NAT, t)}


def test_universe_of_end():
    assert redex_universe(TypeEnv({"p": END}))["p"] == {END}


def test_universe_of_server():
    u = redex_universe(DELTA)["a"]
    assert {Ta, Ta_star, Out("s", "auth", Sort.BOOL, Ta), END} <= u


def test_universe_cap():
    with pytest.raises(UniverseCapExceeded):
        redex_universe(DELTA, cap=3)


def test_universe_is_closed_under_type_steps():
    for members in redex_universe(DELTA_PP).values():
        for t in members:
            for _, k, rem in type_transitions(t):
                assert k in members and (rem is None or rem in members)


# ------------------------------------------------------------ closure


@pytest.mark.parametrize("omega", ORACLES, ids=lambda o: o.name)
def test_closure_of_oauth(omega):
    report = closure(omega, DELTA)
    consumed = report.leaves_of(CONSUMED)
    assert [leaf.env for leaf in consumed] == [DELTA_END]
    others = [leaf for leaf in report.leaves if leaf.kind != CONSUMED]
    assert others and all(leaf.kind == LOOP and leaf.sound for leaf in others)
    assert report.verdict and report.witness is None


@pytest.mark.parametrize("omega", ORACLES, ids=lambda o: o.name)
def test_closure_of_two_attempts_finds_the_lock(omega):
    report = closure(omega, DELTA_PP)
    assert not report.verdict
    stuck = [leaf.env for leaf in report.leaves_of(STUCK)]
    assert DELTA_LOCK in stuck
    assert report.witness.kind == STUCK
    assert "StuckDeadlock" in describe_leaf(report.witness)


def test_closure_of_ended_environment():
    report = closure(default_oracle(), DELTA_END)
    assert [(leaf.kind, leaf.env) for leaf in report.leaves] == [(CONSUMED, DELTA_END)]
    assert compliance(default_oracle(), TypeEnv({"p": END}))


def test_mismatch_leaf():
    report = closure(default_oracle(), corpus_env("wrong_polarity.env"))
    assert [leaf.kind for leaf in report.leaves] == [MISMATCH]
    assert report.leaves[0].pair == ("p", "q")


def test_sort_clash_is_a_mismatch():
    d = TypeEnv({"p": Out("q", "l", Sort.NAT, END), "q": In("p", "l", Sort.INT, END)})
    assert is_mismatch(d)
    assert not compliance(default_oracle(), d)
    ok = TypeEnv({"p": In("q", "l", Sort.NAT, END), "q": Out("p", "l", Sort.NAT, END)})
    assert not is_mismatch(ok) and compliance(default_oracle(), ok)


def test_circular_wait_is_stuck():
    report = closure(default_oracle(), corpus_env("circular_wait.env"))
    assert [leaf.kind for leaf in report.leaves] == [STUCK]


def test_unanswered_branch_is_rejected_through_the_continuation():
    report = closure(default_oracle(), corpus_env("extra_branch.env"))
    assert not report.verdict
    assert any(leaf.path and leaf.path[0].startswith("alt:") for leaf in report.leaves if leaf.is_error)


def test_chain_splits_after_first_step():
    report = closure(default_oracle(), corpus_env("chain.env"))
    assert [leaf.kind for leaf in report.leaves] == [NOT_MINIMAL]


def test_check_env_checks_every_block():
    v = check_env(default_oracle(), corpus_env("two_blocks.env"))
    assert len(v.blocks) == 2 and v.verdict
    assert v.to_json()["verdict"] is True


def test_report_json():
    data = closure(default_oracle(), DELTA_PP).to_json()
    assert data["verdict"] is False
    assert data["witness"]["kind"] == STUCK
    assert {leaf["kind"] for leaf in data["leaves"]} >= {STUCK, CONSUMED}


def test_exception_driven_variant_hides_the_lock():
    # a consumed left branch ends the search before the sum continuation
    # that leads to the lock is tried, so this mode accepts a faulty input
    assert exception_driven_compliance(default_oracle(), DELTA) == (True, CONSUMED)
    assert exception_driven_compliance(default_oracle(), DELTA_PP) == (True, CONSUMED)
    assert not compliance(default_oracle(), DELTA_PP)


# ---------------------------------------------------------- properties


@settings(max_examples=80, deadline=None)
@given(envs)
def test_leaves_are_classified_correctly(d):
    for omega in ORACLES:
        report = closure(omega, d)
        for leaf in report.leaves:
            if leaf.kind == CONSUMED:
                assert is_consumed(leaf.env)
            elif leaf.kind == STUCK:
                assert not is_consumed(leaf.env)
            elif leaf.kind == LOOP and leaf.sound:
                assert not is_mismatch(leaf.env)


@settings(max_examples=80, deadline=None)
@given(envs)
def test_det_step_is_simulated_by_the_nondeterministic_relation(d):
    try:
        step = det_step(default_oracle(), d)
    except MismatchDetected:
        return
    if step is not None:
        assert (step.action, step.env) in env_transitions(d)


@settings(max_examples=80, deadline=None)
@given(envs)
def test_stuck_leaves_reached_by_steps_are_deadlocks(d):
    # a stuck leaf reached without taking any sum continuation is an
    # environment of the non-deterministic relation, so it is a deadlock there
    for leaf in closure(default_oracle(), d).leaves_of(STUCK):
        if not any(a.startswith("alt:") for a in leaf.path) and not is_mismatch(leaf.env):
            assert is_deadlock(leaf.env)


@settings(max_examples=40, deadline=None)
@given(envs)
def test_compliance_is_preserved_by_steps(d):
    if not compliance(default_oracle(), d):
        return
    for _, nxt in env_transitions(d):
        assert check_env(default_oracle(), nxt).verdict
