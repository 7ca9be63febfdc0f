import random

import pytest

import batteries as B
from hybridlogic import formulas as F
from hybridlogic import generators as G
from hybridlogic import smc as M
from hybridlogic import smc_logic as L
from hybridlogic.signature import SymbolKindClash


def run(text, **mem):
    return dict(M.run(M.parse_program(text), list(mem.items())).mem)


# ------------------------------------------------------------- parsing

def test_parse_and_print_round_trip():
    text = "s := 0; i := 0; while ++i <= n do { s := s + i; if s <= 3 then skip else t := (1 + 2) + s }"
    prog = M.parse_program(text)
    assert M.parse_program(str(prog)) == prog
    assert M.program_variables(prog) == ["s", "i", "n", "t"]


def test_addition_associates_left():
    assert M.parse_aexp("1 + 2 + 3") == M.Add(M.Add(M.Num(1), M.Num(2)), M.Num(3))


@pytest.mark.parametrize("text", ["x :=", "if x then skip else skip", "while x <= 1 skip",
                                  "x := 1 +", "x := 1 $ 2", "skip skip"])
def test_syntax_errors(text):
    with pytest.raises(M.SmcSyntaxError):
        M.parse_program(text)


# ------------------------------------------------------------ execution

def test_assignment_and_addition():
    assert run("x := 2 + 3; y := x + x") == {"x": 5, "y": 10}


def test_increment_writes_back():
    assert run("y := ++x + x", x=1) == {"x": 2, "y": 4}


def test_conditional_takes_the_right_arm():
    assert run("if x <= 2 then y := 1 else y := 0", x=2)["y"] == 1
    assert run("if x <= 2 then y := 1 else y := 0", x=3)["y"] == 0


def test_comparison_pushes_right_operand_first():
    rules = []
    M.run(M.parse_program("if 1 <= 2 then skip else skip"), (),
          on_step=lambda n, r, a, b: rules.append((r, a.values)))
    stacks = [vs for r, vs in rules if r == "Aleq"]
    assert stacks == [[1, 2]]


def test_unbound_variable_is_stuck():
    with pytest.raises(M.Stuck) as exc:
        run("x := y + 1")
    assert exc.value.reason == "UnboundVariable"


def test_fuel_bounds_divergence(monkeypatch):
    with pytest.raises(M.OutOfFuel):
        M.run(M.parse_program("while 0 <= 1 do skip"), (), fuel=500)
    monkeypatch.setenv(M.FUEL_ENV, "50")
    with pytest.raises(M.OutOfFuel) as exc:
        M.run(M.parse_program("while 0 <= 1 do skip"))
    assert exc.value.steps == 50


def test_skip_takes_one_step():
    final = M.run(M.Skip(), (), fuel=1)
    assert final.steps == 1


def test_sum_program_matches_closed_form():
    assert B.sum_runs(limit=12) == []


def test_trace_records_every_step():
    prog = M.parse_program("x := 1 + 2")
    records = M.trace(prog)
    final = M.run(prog)
    assert len(records) == final.steps
    assert records[-1][2].halted


# ------------------------------------------------------------- memory

def test_memory_laws_small():
    assert B.memory_laws(trials=200, seed=41)["violations"] == []


def test_canonical_memory_is_sorted_and_deduplicated():
    assert M.canonicalize_mem([("b", 1), ("a", 2), ("b", 3)]) == (("a", 2), ("b", 3))
    assert M.parse_memory("n=5, s=0") == (("n", 5), ("s", 0))
    with pytest.raises(ValueError):
        M.parse_memory("n=five")


# ------------------------------------------------------- axiom emission

def test_machine_fidelity_small():
    r = B.machine_fidelity(states=150, seed=42)
    assert r["violations"] == []
    assert {"Aint", "Aid", "A++", "Aplus", "Aleq", "Aasgn", "Askip"} <= set(r["labels"])


def test_tampered_instances_do_not_match():
    # pre and post share every numeral, so changing one occurrence breaks the instance
    axioms = L.machine_axioms(L.machine_signature(G.PROGRAM_VARS))
    tampered = 0
    for st in G.reachable_states(random.Random(43), 300):
        try:
            label, inst = L.emit_axiom_instance(st)
        except L.DerivedItemStep:
            continue
        wrong = _bump_first_numeral(inst)
        if wrong != inst:
            tampered += 1
            assert axioms.match(label, wrong) is None, label
    assert tampered > 50


def _bump_first_numeral(f):
    done = []

    def go(g):
        if isinstance(g, F.CNomAtom) and g.name.isdigit() and not done:
            done.append(g)
            return L.nat(int(g.name) + 1000)
        return F.map_children(g, go)
    return go(f)


def test_derived_items_carry_a_certificate():
    prog = M.parse_program("if 1 <= 2 then skip else skip")
    certs = []
    for rule, before, _ in M.trace(prog):
        try:
            L.emit_axiom_instance(before)
        except L.DerivedItemStep as exc:
            certs.append(exc.certificate)
    assert certs and "Dif" in certs[0]


def test_emit_rejects_a_non_successor():
    prog = M.parse_program("x := 1")
    (_, a, b), *_ = M.trace(prog)
    with pytest.raises(ValueError):
        L.emit_axiom_instance(a, a)
    assert L.emit_axiom_instance(a, b)[0] == "Dasgn"


def test_program_variable_may_not_clash_with_language_symbols():
    with pytest.raises(SymbolKindClash):
        L.machine_signature(["vs"])
