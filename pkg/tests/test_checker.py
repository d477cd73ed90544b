from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isomps.checker import EMPTY, check_process, check_session, sort_expr
from isomps.errors import ParticipantMismatch, SortError
from isomps.lts import alt_oracle
from isomps.surface import load_source, parse_process, parse_type
from isomps.syntax import (
    END,
    NIL,
    UNIT,
    And,
    BoolLit,
    Eq,
    EVar,
    If,
    IntLit,
    Lt,
    Mu,
    NatLit,
    Not,
    Out,
    PVar,
    Send,
    Session,
    Sort,
    StrLit,
    Sum,
    Thread,
    TypeEnv,
)
from worked_examples import (
    DELTA,
    DELTA_PP,
    M,
    M_PP,
    Pa_star,
    Pa_variant,
    Pc,
    Ps,
    T_variant,
    Ta,
    Ta_star,
    Tc,
    Ts,
    VARIANT_RULES,
)

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def test_sorting():
    ctx = EMPTY.with_sort("x", Sort.STR)
    assert sort_expr(ctx, Eq(EVar("x"), StrLit("miau"))) == Sort.BOOL
    assert sort_expr(EMPTY, Lt(IntLit(-1), IntLit(2))) == Sort.BOOL
    assert sort_expr(EMPTY, And(Not(BoolLit(True)), BoolLit(False))) == Sort.BOOL
    for bad, rule in [
        (EVar("y"), "S-Var"),
        (Lt(NatLit(1), IntLit(1)), "S-Lt"),
        (Lt(StrLit("a"), StrLit("b")), "S-Lt"),
        (Eq(NatLit(1), BoolLit(True)), "S-Eq"),
        (Not(NatLit(1)), "S-Not"),
    ]:
        with pytest.raises(SortError, match=rule):
            sort_expr(EMPTY, bad)


def test_thread_typing_of_oauth():
    for p, t in [(Ps, Ts), (Pc, Tc), (Pa_star, Ta_star)]:
        r = check_process(EMPTY, p, t)
        assert r.ok, r.failure


def test_variant_server_derivation():
    r = check_process(EMPTY, Pa_variant, T_variant)
    assert r.ok
    assert r.derivation.rules() == VARIANT_RULES
    rendered = r.derivation.render()
    assert rendered.splitlines()[0].startswith("T-Rec: rec X . ")


def test_variant_server_derivation_without_fast_path():
    r = check_process(EMPTY, Pa_variant, T_variant, fast_path=False)
    assert r.ok and r.derivation.rules() == VARIANT_RULES


def test_recursive_process_needs_recursive_type():
    r = check_process(EMPTY, Pa_variant, Ta_star)
    assert not r.ok and r.failure.rule == "T-Rec"


def test_iso_recursion_does_not_unfold_implicitly():
    # the unfolded process against the folded type only types after the
    # recursive binder, never by silently unfolding the type
    assert not check_process(EMPTY, Pa_star, Ta).ok
    assert check_process(EMPTY, Pa_star, Ta_star).ok


def test_variable_at_non_recursive_type():
    t = parse_type("rec X . q!a(nat). q!b(nat). X")
    p = parse_process("rec X . q!a<1>. X")
    r = check_process(EMPTY, p, t)
    assert not r.ok
    assert r.failure.rule == "T-Var"
    assert "process variable X used at non-recursive type" in r.failure.message


def test_unbound_and_mismatched_variables():
    assert check_process(EMPTY, PVar("X"), Mu("X", Out("p", "a", Sort.NAT, END))).failure.rule == "T-Var"
    t1 = Mu("X", Out("p", "a", Sort.NAT, END))
    t2 = Mu("Y", Out("p", "b", Sort.NAT, END))
    assert not check_process(EMPTY.with_proc("X", t1), PVar("X"), t2).ok


def test_payload_sort_is_checked():
    r = check_process(EMPTY, Send("p", "a", StrLit("1"), NIL), Out("p", "a", Sort.NAT, END))
    assert not r.ok and r.failure.rule == "T-Out"


def test_inaction_needs_end():
    assert check_process(EMPTY, NIL, END).ok
    assert check_process(EMPTY, NIL, Out("p", "a", Sort.NAT, END)).failure.rule == "T-End"


def test_conditional_needs_boolean():
    p = If(NatLit(1), NIL, NIL)
    assert check_process(EMPTY, p, END).failure.rule == "T-If"


def test_output_may_select_a_single_summand():
    t = Sum(Out("p", "a", Sort.UNIT, END), Sum(Out("p", "b", Sort.UNIT, END), Out("p", "c", Sort.UNIT, END)))
    r = check_process(EMPTY, Send("p", "c", UNIT, NIL), t)
    assert r.ok and r.derivation.rules() == ["T-Sum-R", "T-Sum-R", "T-Out", "T-End"]


def test_session_typing():
    v = check_session(M, DELTA)
    assert v.ok and all(t.ok for t in v.threads)
    assert [b.verdict for b in v.blocks] == [True]


def test_session_typing_rejects_two_attempt_server():
    v = check_session(M_PP, DELTA_PP)
    assert not v.ok
    assert [f.rule for f in v.failures] == ["T-Ses"]
    assert "StuckDeadlock" in v.failures[0].message


def test_session_typing_under_alternate_oracle():
    assert check_session(M, DELTA, omega=alt_oracle()).ok


def test_participants_must_agree():
    with pytest.raises(ParticipantMismatch):
        check_session(M, TypeEnv({"s": Ts, "c": Tc}))


def test_ill_formed_declaration_is_reported():
    m = Session((Thread("p", NIL),))
    v = check_session(m, TypeEnv({"p": Sum(Out("q", "a", Sort.NAT, END), Out("r", "b", Sort.NAT, END))}))
    assert not v.ok and v.failures[0].rule == "T-Thr"


def test_corpus_bad_variable_file():
    sf = load_source((CORPUS / "bad_var.mps").read_text())
    v = check_session(sf.session(), sf.env())
    assert not v.ok and v.failures[0].rule == "T-Var"


@settings(max_examples=20, deadline=None)
@given(st.permutations(range(3)))
def test_thread_order_does_not_matter(order):
    threads = tuple(M.threads[i] for i in order)
    v = check_session(Session(threads), DELTA)
    assert v.ok


@pytest.mark.parametrize("name", ["oauth.mps", "variant.mps", "stream.mps", "end.mps", "bad_var.mps", "oauth_two_attempts.mps"])
def test_fast_path_agrees_with_backtracking(name):
    sf = load_source((CORPUS / name).read_text())
    for decl in sf.decls:
        a = check_process(EMPTY, decl.body, decl.declared_type, fast_path=True)
        b = check_process(EMPTY, decl.body, decl.declared_type, fast_path=False)
        assert a.ok == b.ok
        if a.ok:
            assert a.derivation.rules() == b.derivation.rules()
