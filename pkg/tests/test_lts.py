import pytest
from hypothesis import given, settings

from isomps.errors import CapExceeded, MismatchDetected, OracleNotFair
from isomps.lts import (
    LexOracle,
    Ret0,
    Ret1,
    Ret2,
    TauAt,
    TypeAction,
    alt_oracle,
    default_oracle,
    det_step,
    env_transitions,
    find_mismatch,
    is_consumed,
    is_deadlock,
    is_error,
    is_fair_reply,
    mutual_pairs,
    oracle_by_name,
    prefix_transitions,
    remnant_sum,
    to_dot,
    transition_graph,
)
from isomps.semantics import Sync
from isomps.syntax import END, In, Out, Sort, Sum, TypeEnv, make_sum, summands
from worked_examples import DELTA, DELTA_2, DELTA_CANCEL, DELTA_END, DELTA_LOCK, DELTA_PRIME, Tc_star, Ts, Ts_star
from strategies import envs, types

A = Out("p", "a", Sort.NAT, END)
B = Out("p", "b", Sort.NAT, END)
C = Out("p", "c", Sort.NAT, END)


def test_remnant_hole_is_a_unit():
    assert remnant_sum(None, A) == A
    assert remnant_sum(A, None) == A
    assert remnant_sum(None, None) is None
    assert remnant_sum(A, B) == Sum(A, B)


@given(types, types, types)
def test_remnant_is_associative_up_to_flattening(x, y, z):
    left = remnant_sum(remnant_sum(x, y), z)
    right = remnant_sum(x, remnant_sum(y, z))
    assert summands(left) == summands(right)


def test_prefix_transitions_keep_discarded_branches():
    t = make_sum([A, B, C])
    steps = prefix_transitions(t)
    assert [act.label for act, _, _ in steps] == ["a", "b", "c"]
    assert steps[0][2] == Sum(B, C)
    assert steps[1][2] == Sum(A, C)
    assert steps[2][2] == Sum(A, B)
    assert prefix_transitions(A) == [(TypeAction("!", "p", "a", Sort.NAT), END, None)]


def test_env_transitions_of_initial_environment():
    steps = env_transitions(DELTA)
    assert [str(a) for a, _ in steps] == ["tau_c", "tau_s"]
    steps = env_transitions(DELTA_2)
    assert {str(a) for a, _ in steps} == {"login@c<>s", "cancel@c<>s"}


def test_det_step_picks_cancel_and_keeps_login_as_continuation():
    step = det_step(default_oracle(), DELTA_2)
    assert step.action == Sync("cancel", "c", "s")
    assert step.env == DELTA_CANCEL
    assert step.continuation == DELTA_PRIME


def test_det_step_syntactic_label_order_picks_first_branch():
    step = det_step(default_oracle(), DELTA_2, label_order="syntactic")
    assert step.action == Sync("login", "c", "s")


def test_det_step_unfolds_first():
    step = det_step(default_oracle(), DELTA)
    assert step.action == TauAt("c") and step.continuation is None
    step = det_step(alt_oracle(), DELTA)
    assert step.action == TauAt("s") and step.env["s"] == Ts_star


def test_det_step_stops_on_ended_environment():
    assert det_step(default_oracle(), DELTA_END) is None


def test_det_step_reports_mismatches():
    both_send = TypeEnv({"p": Out("q", "a", Sort.NAT, END), "q": Out("p", "a", Sort.NAT, END)})
    with pytest.raises(MismatchDetected, match="selecting"):
        det_step(default_oracle(), both_send)
    wrong_sort = TypeEnv({"p": Out("q", "a", Sort.NAT, END), "q": In("p", "a", Sort.BOOL, END)})
    with pytest.raises(MismatchDetected, match="no common tagged label"):
        det_step(default_oracle(), wrong_sort)
    assert find_mismatch(both_send) == ("p", "q")


def test_unfair_oracle_is_caught():
    with pytest.raises(OracleNotFair):
        det_step(lambda d: Ret1("s"), DELTA_2)
    with pytest.raises(OracleNotFair):
        det_step(lambda d: Ret0(), DELTA)


def test_fairness_audit():
    assert is_fair_reply(DELTA, Ret1("s"))
    assert not is_fair_reply(DELTA, Ret1("a"))
    assert is_fair_reply(DELTA_2, Ret2("c", "s"))
    assert not is_fair_reply(DELTA_2, Ret2("a", "c"))
    assert is_fair_reply(DELTA_LOCK, Ret0())
    assert mutual_pairs(DELTA_2) == [("c", "s")]


@settings(max_examples=60, deadline=None)
@given(envs)
def test_builtin_oracles_are_fair(d):
    for omega in (default_oracle(), alt_oracle()):
        assert is_fair_reply(d, omega(d))


def test_oracle_names():
    assert oracle_by_name("lex").name == "lex"
    assert oracle_by_name("revlex").name == "revlex"
    assert repr(LexOracle(True)) == "LexOracle(reverse=True)"
    with pytest.raises(ValueError):
        oracle_by_name("random")


def test_error_predicates():
    assert is_deadlock(DELTA_LOCK) and is_error(DELTA_LOCK)
    assert is_consumed(DELTA_END) and not is_error(DELTA_END)
    assert not is_error(DELTA)


def test_transition_graph_and_dot():
    g = transition_graph(DELTA)
    assert g.nodes[0] == DELTA
    assert DELTA_END in g.nodes
    dot = to_dot(g)
    assert dot.startswith("digraph env {") and dot.rstrip().endswith("}")
    assert dot.count("->") == len(g.edges)
    assert "palegreen" in dot
    with pytest.raises(CapExceeded):
        transition_graph(DELTA, cap=3)


def test_sum_type_stays_unchanged_by_unrelated_unfolding():
    d = DELTA.set({"s": Ts})
    for act, nxt in env_transitions(d):
        if act == TauAt("c"):
            assert nxt["c"] == Tc_star and nxt["s"] == Ts
