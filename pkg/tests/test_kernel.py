import random

import pytest

from hybridlogic import formulas as F
from hybridlogic import generators as G
from hybridlogic import lemmas
from hybridlogic.kernel import (DATA_DIR, SCHEMAS, Extensions, check_file, check_proof, check_text,
                                is_tautology, match_axiom, matching_schemas, render_script)
from hybridlogic.sexpr import parse_formula
from hybridlogic.signature import load_signature

LEMMA_SIG = load_signature(f"{DATA_DIR}/lemma.sig")


def fm(text):
    return parse_formula(text, LEMMA_SIG)


def script(body, logic="H@A", header=""):
    return f"logic {logic}\nsig lemma.sig\n{header}{body}"


def first_failure(text):
    _, report = check_text(text)
    assert not report.ok
    return report.first_failure()


# ------------------------------------------------------------- schemas

def test_tautology_recognition():
    assert is_tautology(fm("(implies q (implies q2 q))"))
    assert is_tautology(fm("(or (op f (nom j) q) (not (op f (nom j) q)))"))
    assert not is_tautology(fm("(implies q q2)"))


@pytest.mark.parametrize("text, schema", [
    ("(implies (box f (implies p p2) q) (implies (box f p q) (box f p2 q)))", "K"),
    ("(iff (op g q) (not (box g (not q))))", "Dual"),
    ("(implies (at j s (implies p p2)) (implies (at j s p) (at j s p2)))", "K@"),
    ("(iff (at k s (at j t p)) (at j s p))", "Agree"),
    ("(iff (at j s p) (not (at j s (not p))))", "SelfDual"),
    ("(implies (nom j) (iff p (at j t p)))", "Intro"),
    ("(implies (op f (at j t p) q) (at j s p))", "Back"),
    ("(at j s (nom j))", "Ref"),
])
def test_hybrid_schemas_match(text, schema):
    f = fm(text)
    assert match_axiom(schema, f)
    assert schema in matching_schemas(f)


@pytest.mark.parametrize("text, schema", [
    ("(implies (box f (implies p p2) q) (implies (box f p q) (box f p q)))", "K"),
    ("(iff (at k s (at j t p)) (at k s p))", "Agree"),
    ("(implies (op f (at j t p) q) (at k s p))", "Back"),
    ("(at j s (nom k))", "Ref"),
    ("(implies (nom j) (iff p (at k t p)))", "Intro"),
])
def test_near_misses_do_not_match(text, schema):
    assert not match_axiom(schema, fm(text))


def test_every_schema_instance_is_recognised():
    rng = random.Random(31)
    for schema in SCHEMAS:
        made = 0
        while made < 30:
            sig = G.random_signature(rng)
            f = G.schema_instance(rng, sig, schema, depth=4)
            if f is None:
                continue
            assert match_axiom(schema, f), (schema, f)
            made += 1


def test_q1_side_condition():
    x, p = F.svar("x", "s"), F.prop("p", "s")
    good = F.implies(F.Forall(x, F.implies(p, x)), F.implies(p, F.Forall(x, x)))
    bad = F.implies(F.Forall(x, F.implies(x, x)), F.implies(x, F.Forall(x, x)))
    assert match_axiom("Q1", good)
    assert not match_axiom("Q1", bad)


def test_q2_refuses_captured_witness():
    x, y = F.svar("x", "s"), F.svar("y", "s")
    body = F.Forall(y, F.Or(x, y))
    ok = F.implies(F.Forall(x, body), F.substitute(body, x, F.nom("j", "s")))
    captured = F.implies(F.Forall(x, body), F.Forall(y, F.Or(y, y)))
    assert match_axiom("Q2", ok)
    assert not match_axiom("Q2", captured)


def test_barcan_needs_x_out_of_other_arguments():
    x, p = F.svar("x", "s"), F.prop("p", "s")
    good = F.implies(F.Forall(x, F.box("h", [x, p], "s")),
                     F.box("h", [F.Forall(x, x), p], "s"))
    bad = F.implies(F.Forall(x, F.box("h", [x, x], "s")),
                    F.box("h", [F.Forall(x, x), x], "s"))
    assert match_axiom("Barcan", good)
    assert not match_axiom("Barcan", bad)


# ------------------------------------------------------------- checking

GOOD = """1. (implies q (implies q2 q)) ; Ax Taut
2. (at i s (implies q (implies q2 q))) ; Gen@ i 1
"""


def test_a_small_proof_checks():
    s, report = check_text(script(GOOD))
    assert report.ok, report.diagnostics
    assert report.steps == 2
    assert s.conclusion == fm("(at i s (implies q (implies q2 q)))")


def test_render_and_reparse_is_stable():
    s, _ = check_text(script(GOOD))
    again, report = check_text(render_script(s, "round trip"))
    assert report.ok
    assert [st.formula for st in again.steps] == [st.formula for st in s.steps]


def test_modus_ponens_needs_matching_antecedent():
    text = script("""hyp q
1. q ; Hyp 1
2. (implies q2 (implies q q2)) ; Ax Taut
3. (implies q q2) ; MP 1 2
""")
    d = first_failure(text)
    assert (d.step, d.kind) == (3, "SchemaMismatch")
    assert "antecedent" in d.detail


def test_bad_step_is_reported_with_kind():
    d = first_failure(script("1. (implies q q2) ; Ax Taut\n"))
    assert (d.step, d.kind) == (1, "SchemaMismatch")


def test_profile_k_rejects_satisfaction_operators():
    d = first_failure(script("1. (at i s (nom i)) ; Ax Ref\n", logic="K"))
    assert d.kind == "ProfileViolation"


def test_generalisation_cannot_use_local_hypotheses():
    d = first_failure(script("hyp q\n1. q ; Hyp 1\n2. (at i s q) ; Gen@ i 1\n"))
    assert d.kind == "SideConditionViolated"


def test_premises_can_be_generalised():
    _, report = check_text(script("1. q ; Premise 1\n2. (at i s q) ; Gen@ i 1\n",
                                  header="premise q\n"))
    assert report.ok


def test_citing_a_later_step_fails():
    d = first_failure(script("1. q ; MP 2 3\n2. q ; Ax Taut\n"))
    assert d.step == 1


def test_universal_generalisation_over_a_box():
    text = script("""1. (implies q q) ; Ax Taut
2. (box g (implies q q)) ; UG g 1 1
""")
    _, report = check_text(text)
    assert report.ok, report.diagnostics


def test_name_at_side_condition():
    ok = script("1. (implies q q) ; Ax Taut\n2. (at i s (implies q q)) ; Gen@ i 1\n"
                "3. (implies q q) ; Name@ 2\n")
    assert check_text(ok)[1].ok
    clash = script("1. (implies (nom i) (nom i)) ; Ax Taut\n"
                   "2. (at i s (implies (nom i) (nom i))) ; Gen@ i 1\n"
                   "3. (implies (nom i) (nom i)) ; Name@ 2\n")
    assert first_failure(clash).kind == "SideConditionViolated"


def test_goal_directive_must_match_conclusion():
    d = first_failure(script(GOOD, header="goal q\n"))
    assert d.kind == "ConclusionMismatch"


def test_script_errors_are_reported_not_raised():
    _, report = check_text("logic H@\n1. q ; Ax Taut\n")
    assert report.first_failure().kind == "ScriptError"
    _, report = check_text(script("1. (implies q (implies q2 q)) ; Frobnicate 1\n"))
    assert report.first_failure().kind == "ScriptError"
    _, report = check_text(script("2. (implies q (implies q2 q)) ; Ax Taut\n"))
    assert report.first_failure().kind == "ScriptError"


def test_inline_extension_axioms():
    text = script("1. (implies (prop q) (prop q2)) ; Ext Mine\n",
                  header="axiom Mine : (implies q q2)\n")
    _, report = check_text(text)
    assert report.ok and report.extensions_used == ["Mine"]
    d = first_failure(script("1. (implies (prop q) (prop q2)) ; Ext Theirs\n"))
    assert d.kind == "UnknownExtension"


def test_extension_patterns_are_schematic():
    ext = Extensions()
    ext.register(fm("(implies q (op f (nom j) q))"), "Grow")
    inst = fm("(implies (not q2) (op f (nom k) (not q2)))")
    assert ext.match("Grow", inst) is not None
    assert ext.match("Grow", fm("(implies q (op f (nom k) q2))")) is None
    assert "Grow" not in ext.without("Grow")


# ------------------------------------------------------------- lemmas

@pytest.mark.parametrize("name", sorted(lemmas.LEMMA_FILES))
def test_shipped_lemma_scripts_check(name):
    _, report = check_file(f"{DATA_DIR}/{name}")
    assert report.ok, report.diagnostics


@pytest.mark.parametrize("name", sorted(lemmas.LEMMA_FILES))
def test_shipped_lemmas_match_their_builders(name):
    build, _ = lemmas.LEMMA_FILES[name]
    fresh = build()
    shipped = lemmas.load_lemma(name)
    assert shipped.conclusion == fresh.conclusion
    assert check_proof(fresh).ok


def test_sym_lemma_fails_without_its_import():
    text = open(f"{DATA_DIR}/lemma_sym.prf").read().replace("use lemma_nom.prf\n", "")
    d = first_failure(text)
    assert d.kind == "UnknownExtension"
