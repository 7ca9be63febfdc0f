import os
import random
from dataclasses import replace

import pytest

from hybridlogic import formulas as F
from hybridlogic import generators as G
from hybridlogic import hoare as H
from hybridlogic import smc as M
from hybridlogic import smc_logic as L
from hybridlogic.arith import ArithmeticOracle, FactRejected, nat_value
from hybridlogic.kernel import check_proof

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def cs(stmt):
    return L.app("cS", L.stmt_formula(stmt), sort=L.CTRL)


def concrete_state(mem):
    return H.SymState(writes=tuple((n, L.nat(v)) for n, v in mem))


# ------------------------------------------------------- sum program

@pytest.fixture(scope="module")
def sum_proof():
    return H.verify_sum_program()


def test_sum_proof_checks(sum_proof):
    script, report = sum_proof
    assert report.ok, report.first_failure()
    assert script.conclusion == F.implies(H.sum_goal().pre,
                                          L.after(cs(H.sum_goal().program), H.sum_goal().post))
    assert {"AInd", "Dwhile", "I1"} <= set(report.extensions_used)


@pytest.mark.parametrize("label", ["AInd", "Dwhile"])
def test_sum_proof_needs_the_loop_axioms(sum_proof, label):
    script, _ = sum_proof
    report = check_proof(replace(script, extensions=script.extensions.without(label)))
    d = report.first_failure()
    assert d.kind == "UnknownExtension" and label in d.detail
    used_at = next(i for i, s in enumerate(script.steps, 1) if s.rule == "Ext" and s.args == (label,))
    assert d.step == used_at


def test_arithmetic_facts_are_recorded_in_the_script(sum_proof):
    script, _ = sum_proof
    labels = [e.label for e in script.inline_axioms]
    assert labels and all(lbl.startswith("Arith") for lbl in labels)


# ----------------------------------------------------------- goal files

@pytest.mark.parametrize("name", ["count.goal", "refuted_branch.goal", "max.goal"])
def test_goal_files_verify(name):
    goal = H.load_goal(os.path.join(FIXTURES, name))
    prover, report = H.verify_goal(goal)
    assert report.ok, report.first_failure()
    if goal.post is not None:
        assert H.triple_parts(prover.pb.script.conclusion)[2] == goal.post


def test_conditional_with_different_outcomes_keeps_both_branches():
    goal = H.load_goal(os.path.join(FIXTURES, "max.goal"))
    prover, _ = H.verify_goal(goal)
    post = H.triple_parts(prover.pb.script.conclusion)[2]
    assert F.as_or(post) is not None


def test_goal_needs_pre_and_program():
    with pytest.raises(H.HoareError):
        H.parse_goal("post: (op cfg vs mem)")


def test_loop_fields_must_be_complete():
    text = open(os.path.join(FIXTURES, "count.goal")).read()
    text = "\n".join(line for line in text.splitlines() if not line.startswith("witness"))
    with pytest.raises(H.HoareError):
        H.parse_goal(text)


def test_loop_without_invariant_is_unsupported():
    goal = H.parse_goal("pre: (op cfg vs (op set mem n vn))\nprogram: while n <= 3 do skip")
    with pytest.raises(H.UnsupportedProgram):
        H.verify_goal(goal)


def test_wrong_postcondition_is_rejected():
    goal = H.parse_goal("pre: (op cfg vs mem)\nprogram: x := 1\n"
                        "post: (op cfg vs (op set mem x 2))")
    with pytest.raises((H.HoareError, FactRejected)):
        H.verify_goal(goal)


def test_wrong_invariant_is_rejected():
    text = open(os.path.join(FIXTURES, "count.goal")).read()
    text = text.replace("x_init: 1", "x_init: 0")
    with pytest.raises((H.HoareError, FactRejected)):
        H.verify_goal(H.parse_goal(text))


# ------------------------------------------------------- triple rules

def test_straight_line_proofs_agree_with_the_interpreter():
    rng = random.Random(51)
    done = 0
    while done < 15:
        stmt = G.random_statement(rng, 3)
        if H.contains_control(stmt):
            continue
        mem = G.random_memory(rng)
        expected = M.run(stmt, mem).mem
        prover = H.HoareProver(G.PROGRAM_VARS)
        step, post = prover.execute(concrete_state(mem), cs(stmt))
        got = M.canonicalize_mem((n, nat_value(v, {})) for n, v in post.writes)
        assert got == expected, str(stmt)
        assert check_proof(prover.pb.script).ok
        done += 1


def test_compose_refuses_mismatched_chain():
    prover = H.HoareProver(["x"])
    p1, _ = prover.execute(concrete_state([("x", 1)]), cs(M.parse_program("x := 2")))
    p2, _ = prover.execute(concrete_state([("x", 5)]), cs(M.parse_program("x := 3")))
    with pytest.raises(H.ChainMismatch):
        prover.compose(p1, p2)
    with pytest.raises(H.ChainMismatch):
        prover.meet(p1, p2)


def test_composition_of_matching_triples_checks():
    prover = H.HoareProver(["x"])
    p1, mid = prover.execute(concrete_state([("x", 1)]), cs(M.parse_program("x := 2")))
    p2, _ = prover.execute(mid, cs(M.parse_program("x := x + 1")))
    p = prover.rule_composition([p1, p2])
    assert H.triple_parts(prover.formula(p))[1].op == "seq"
    assert check_proof(prover.pb.script).ok


def test_frame_conditions_must_be_at_formulas():
    prover = H.HoareProver(["x"])
    p, _ = prover.execute(concrete_state([("x", 1)]), cs(M.parse_program("skip")))
    with pytest.raises(H.HypothesisShapeMismatch):
        prover.frame(p, [F.prop("vs", L.STACK)])
    fact = F.At(L.TRUE, L.app("leN", L.nat(1), L.nat(2), sort=L.BOOL), L.CONFIG)
    framed = prover.frame(p, [fact])
    assert H.triple_parts(prover.formula(framed))[2] == F.land(
        H.triple_parts(prover.formula(p))[2], fact)


def test_consequence_needs_a_meeting_implication():
    prover = H.HoareProver(["x"])
    p, _ = prover.execute(concrete_state([("x", 1)]), cs(M.parse_program("skip")))
    stray = prover.pb.taut(F.implies(F.prop("vs", L.STACK), F.prop("vs", L.STACK)))
    with pytest.raises(H.UncheckedInput):
        prover.rule_consequence(p, stray)


def test_reading_states_rejects_other_shapes():
    with pytest.raises(H.HypothesisShapeMismatch):
        H.read_state(F.prop("vs", L.STACK))
    with pytest.raises(H.UncheckedInput):
        H.triple_parts(F.prop("vs", L.STACK))


def test_symbolic_state_round_trip():
    st = H.SymState(stack=(L.nat(3),), writes=(("x", L.nat(1)), ("y", F.svar("vn", L.NAT))),
                    facts=(F.At(L.TRUE, L.app("leN", L.nat(1), L.nat(2), sort=L.BOOL),
                                L.CONFIG),))
    assert H.read_state(st.formula()) == st


def test_memory_collapse_uses_last_write():
    prover = H.HoareProver(["x"])
    st = H.SymState(writes=(("x", L.nat(1)), ("x", L.nat(4))))
    step, after = prover.collapse(st, "x")
    assert after.writes == (("x", L.nat(4)),)
    assert check_proof(prover.pb.script).ok


# ------------------------------------------------------------- oracle

def test_oracle_accepts_true_facts_and_numbers_them():
    oracle = ArithmeticOracle()
    vn = F.svar("vn", L.NAT)
    fact = F.At(L.TRUE, L.app("leN", L.nat(1), L.plus_n(vn, L.nat(1)), sort=L.BOOL), L.NAT)
    e = oracle.accept(fact)
    assert e.label == "Arith1"
    assert oracle.accept(fact) is e


def test_oracle_rejects_false_facts():
    vn = F.svar("vn", L.NAT)
    bad = F.At(L.TRUE, L.app("leN", L.plus_n(vn, L.nat(1)), vn, sort=L.BOOL), L.NAT)
    with pytest.raises(FactRejected):
        ArithmeticOracle().accept(bad)
