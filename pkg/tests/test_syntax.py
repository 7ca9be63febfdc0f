import pytest

from hybridlogic import formulas as F
from hybridlogic.sexpr import ParseError, format_formula, parse_formula, read_sexpr
from hybridlogic.signature import (DuplicateSort, EmptyPropSet, OverloadClash, SignatureError,
                                   SymbolKindClash, UnknownSort, parse_signature)

TWO_SORTS = """
sort s t
op f : t s -> s
op g : s -> t
prop p : s
prop q : t
nom j : s
nom k : t
cnom c : t
svar x : s
svar y : t
"""


@pytest.fixture
def sig():
    return parse_signature(TWO_SORTS)


# ------------------------------------------------------------ signatures

def test_signature_lookup_and_render_round_trip(sig):
    assert sig.lookup("j") == ("nom", "s")
    assert sig.lookup("c") == ("cnom", "t")
    assert sig.lookup("nope") is None
    assert [d.name for d in sig.operators_with_result("s")] == ["f"]
    assert parse_signature(sig.render()) == sig


@pytest.mark.parametrize("text, error", [
    ("sort s s\nprop p : s", DuplicateSort),
    ("sort s\nprop p : s\nop f : u -> s", UnknownSort),
    ("sort s\nprop p : s\nnom p : s", SymbolKindClash),
    ("sort s t\nprop p : s", EmptyPropSet),
    ("sort s\nprop p : s\nop f : s -> s\nop f : s s -> s", OverloadClash),
    ("sort s\nprop p : s\nfrobnicate", SignatureError),
    ("sort s\nprop p : s\nop f s -> s", SignatureError),
])
def test_signature_errors(text, error):
    with pytest.raises(error):
        parse_signature(text)


def test_numerals_are_constant_nominals():
    sig = parse_signature("sort Nat\nnumerals Nat\nprop p : Nat")
    assert sig.lookup("42") == ("cnom", "Nat")
    with pytest.raises(SymbolKindClash):
        parse_signature("sort Nat\nnumerals Nat\nprop p : Nat\nnom 7 : Nat")


def test_extend_adds_symbols_and_rejects_clashes(sig):
    bigger = sig.extend(cnom={"d": "s"})
    assert bigger.lookup("d") == ("cnom", "s")
    assert sig.lookup("d") is None
    with pytest.raises(SymbolKindClash):
        sig.extend(nom={"j": "t"})


# ------------------------------------------------------------- builders

def test_at_requires_a_nominal_of_the_body_sort(sig):
    j, k, p = F.nom("j", "s"), F.nom("k", "t"), F.prop("p", "s")
    assert F.at(j, p, "t").sort == "t"
    with pytest.raises(F.SortMismatch):
        F.At(k, p, "s")
    with pytest.raises(F.FormulaError):
        F.At(F.prop("p", "s"), p, "s")


def test_or_rejects_mixed_sorts():
    with pytest.raises(F.SortMismatch):
        F.Or(F.prop("p", "s"), F.prop("q", "t"))


def test_box_is_dual_of_diamond():
    p = F.prop("p", "s")
    b = F.box("f", [F.prop("q", "t"), p], "s")
    assert isinstance(b, F.Neg) and isinstance(b.body, F.ModalApp)
    assert [a.body for a in b.body.args] == [F.prop("q", "t"), p]
    assert F.as_box(b) == ("f", (F.prop("q", "t"), p), "s")


def test_derived_connective_views():
    a, b = F.prop("p", "s"), F.prop("r", "s")
    assert F.as_implies(F.implies(a, b)) == (a, b)
    assert F.as_and(F.land(a, b)) == (a, b)
    assert F.as_iff(F.iff(a, b)) == (a, b)
    x = F.svar("x", "s")
    assert F.as_exists(F.exists(x, x)) == (x, x)
    assert F.as_implies(F.lor(a, b)) is None


def test_free_state_vars_respects_binders():
    x, y = F.svar("x", "s"), F.svar("y", "s")
    f = F.Or(F.Forall(x, F.Or(x, y)), x)
    assert F.free_state_vars(f) == {x, y}
    assert F.free_state_vars(F.Forall(x, F.Or(x, y))) == {y}


# ---------------------------------------------------------- substitution

def test_substitution_replaces_only_free_occurrences():
    x, y = F.svar("x", "s"), F.svar("y", "s")
    j = F.nom("j", "s")
    f = F.Or(x, F.Forall(x, x))
    assert F.substitute(f, x, j) == F.Or(j, F.Forall(x, x))
    assert F.substitute(f, x, y) == F.Or(y, F.Forall(x, x))


def test_capturing_substitution_is_refused():
    x, y = F.svar("x", "s"), F.svar("y", "s")
    f = F.Forall(y, F.Or(x, y))
    assert not F.substitutable(y, x, f)
    with pytest.raises(F.IllegalSubstitution):
        F.substitute(f, x, y)
    # nominals cannot be captured
    assert F.substitutable(F.nom("j", "s"), x, f)


def test_vacuous_binder_does_not_block_substitution():
    x, y, z = F.svar("x", "s"), F.svar("y", "s"), F.svar("z", "s")
    assert F.substitutable(y, x, F.Forall(y, z))
    assert F.substitute(F.Forall(y, z), x, y) == F.Forall(y, z)


def test_substitution_checks_sorts():
    with pytest.raises(F.SortMismatch):
        F.substitute(F.svar("x", "s"), F.svar("x", "s"), F.nom("k", "t"))


def test_replace_free_refuses_capture():
    x, y = F.svar("x", "s"), F.svar("y", "s")
    term = F.Or(y, F.prop("p", "s"))
    with pytest.raises(F.IllegalSubstitution):
        F.replace_free(F.Forall(y, F.Or(x, y)), x, term)
    assert F.replace_free(F.Or(x, x), x, term) == F.Or(term, term)


def test_pure_instances_rename_nominals_uniformly():
    j, k = F.nom("j", "s"), F.nom("k", "s")
    f = F.Or(j, F.Neg(j))
    out = list(F.pure_instances(f, {"s": [j, k]}))
    assert out == [f, F.Or(k, F.Neg(k))]
    with pytest.raises(F.NotPure):
        list(F.pure_instances(F.prop("p", "s"), {"s": [j]}))


# ---------------------------------------------------------- s-expressions

def test_read_sexpr_nests_and_skips_comments():
    assert read_sexpr("(a (b c) ;; note\n d)") == ("a", ("b", "c"), "d")


@pytest.mark.parametrize("text", ["(a (b)", "a)", ""])
def test_read_sexpr_rejects_unbalanced(text):
    with pytest.raises(ParseError):
        read_sexpr(text)


def test_parse_and_format_round_trip(sig):
    text = "(implies (at j t (op f q p)) (forall x (at j t (or x (nom j)))))"
    f = parse_formula(text, sig)
    assert f.sort == "t"
    assert parse_formula(format_formula(f), sig) == f
    assert parse_formula(format_formula(f, sugar=False), sig) == f


def test_parse_reports_unknown_and_missorted_symbols(sig):
    with pytest.raises(ParseError):
        parse_formula("(prop nope)", sig)
    with pytest.raises((ParseError, F.FormulaError)):
        parse_formula("(or p q)", sig)
    with pytest.raises(ParseError):
        parse_formula("(prop j)", sig)


def test_parse_box_matches_builder(sig):
    f = parse_formula("(box g p)", sig)
    assert f == F.box("g", [F.prop("p", "s")], "t")
