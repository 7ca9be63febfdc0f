import random

import pytest

import batteries as B
from hybridlogic import formulas as F
from hybridlogic import generators as G
from hybridlogic import semantics as S
from hybridlogic.sexpr import parse_formula
from hybridlogic.signature import parse_signature

SIG = parse_signature("""
sort s t
op f : t -> s
prop p : s
prop q : t
nom i i2 : s
nom j k : t
cnom c : t
svar x : t
""")

MODEL = """
world w0 w1 : s
world v0 v1 : t
rel f w0 v0
rel f w1 v1
val p = {w0}
val q = {v1}
val i = {w1}
val i2 = {w0}
val j = {v0}
val k = {v1}
desig c = v0
"""


@pytest.fixture
def model():
    return S.parse_model(MODEL, SIG)


def fm(text):
    return parse_formula(text, SIG)


def test_diamond_follows_the_relation(model):
    assert S.satisfies(model, {}, "w1", fm("(op f q)"))
    assert not S.satisfies(model, {}, "w0", fm("(op f q)"))


def test_at_is_global_and_jumps_sorts(model):
    f = fm("(at k s q)")
    assert all(S.satisfies(model, {}, w, f) for w in ("w0", "w1"))
    assert not S.satisfies(model, {}, "w0", fm("(at j s q)"))


def test_constant_nominal_uses_its_designation(model):
    assert S.satisfies(model, {}, "v0", fm("(cnom c)"))
    assert not S.satisfies(model, {}, "v1", fm("(cnom c)"))


def test_state_variables_follow_the_assignment(model):
    f = fm("(op f x)")
    assert S.satisfies(model, {"x": "v0"}, "w0", f)
    assert not S.satisfies(model, {"x": "v1"}, "w0", f)
    with pytest.raises(S.UnboundStateVariable):
        S.satisfies(model, {}, "w0", f)


def test_forall_equals_conjunction_over_worlds(model):
    body = fm("(or (op f x) (prop p))")
    whole = F.Forall(F.svar("x", "t"), body)
    for w in ("w0", "w1"):
        each = all(S.satisfies(model, {"x": v}, w, body) for v in ("v0", "v1"))
        assert S.satisfies(model, {}, w, whole) == each


def test_duality_of_box_and_diamond():
    rng = random.Random(11)
    for _ in range(200):
        sig = G.random_signature(rng)
        d = rng.choice([d for d in sig.ops])
        args = [G.random_formula(rng, sig, s, 3, quantifiers=False, svars=False)
                for s in d.arg_sorts]
        m = G.random_model(rng, sig)
        box = F.box(d.name, args, d.result_sort)
        dia = F.ModalApp(d.name, [F.Neg(a) for a in args], d.result_sort)
        full = m.frame.full(d.result_sort)
        assert S.extension(m, box) == full ^ S.extension(m, dia)


def test_model_render_round_trip(model):
    again = S.parse_model(S.render_model(model), SIG)
    assert again.to_dict() == model.to_dict()


@pytest.mark.parametrize("text", [
    "world w0 : s\nval i = {w0, w9}",
    "world w0 : s\nrel f w0 w0",
    "world w0 : s\nbogus line",
    "world w0 : s\nworld v0 : t\nval j = {}",
])
def test_model_format_errors(text):
    with pytest.raises(S.ModelFormatError):
        S.parse_model(text, SIG)


def test_frame_validity_varies_only_symbols_in_the_formula(model):
    assert S.valid_in_frame(model.frame, fm("(or p (not p))"))
    assert not S.valid_in_frame(model.frame, fm("p"))
    # true in this model, but another valuation of j refutes it
    assert S.valid_in_model(model, fm("(at j s (not q))"))
    assert not S.valid_in_frame(model.frame, fm("(at j s (not q))"))


def test_bounded_countermodel_finds_and_exhausts():
    p = fm("p")
    found = S.bounded_countermodel(SIG, [], p)
    assert found is not None
    m, w, _ = found
    assert not S.satisfies(m, {}, w, p)
    assert S.bounded_countermodel(SIG, [p], p) is None
    k_instance = fm("(implies (box f (implies q q)) (implies (box f q) (box f q)))")
    assert S.bounded_countermodel(SIG, [], k_instance, max_worlds=2) is None


def test_named_model_check_refuses_unnamed(model):
    unnamed = S.parse_model(MODEL.replace("val i2 = {w0}", "val i2 = {w1}"), SIG)
    assert not S.is_named(unnamed)
    with pytest.raises(S.NotNamed):
        S.check_pure_named_equivalence(unnamed, fm("(nom i)"))
    with pytest.raises(F.NotPure):
        S.check_pure_named_equivalence(model, fm("p"))


# ------------------------------------------------- randomized lemmas

def test_agreement_lemma_small():
    r = B.agreement(trials=200, seed=21)
    assert r["violations"] == []
    assert r["differing"] > 100


@pytest.mark.parametrize("kind", ["variable", "nominal"])
def test_substitution_lemma_small(kind):
    r = B.substitution(trials=200, seed=22, kind=kind)
    assert r["violations"] == []
    assert r["changed"] > 20


def test_capturing_substitution_breaks_the_lemma():
    # without the guard the lemma fails, so the guard is doing real work
    r = B.substitution(trials=40, seed=23, kind="variable", guard=False)
    assert r["violations"]


def test_pure_formula_criterion_needs_named_models():
    assert B.pure_named(trials=60, seed=24)["violations"] == []
    assert B.pure_named(trials=200, seed=24, named=False)["violations"]


def test_quantified_pure_criterion_needs_named_models():
    r = B.quantified_pure_named(trials=60, seed=25)
    assert r["violations"] == [] and r["max_quantifiers"] == 2
    assert B.quantified_pure_named(trials=100, seed=25, named=False)["violations"]


@pytest.mark.parametrize("item", ["i1", "i2", "i3"])
def test_nominal_conjunction_small(item):
    assert B.nominal_conjunction(item, trials=60, seed=26)["violations"] == []


def test_i3_needs_x_to_avoid_other_arguments():
    # exists x [f](bot, x) -> [f](exists x bot, x) fails: x also sits in the other argument
    sig = parse_signature("sort s\nop f : s s -> s\nprop p : s\nnom j : s\nsvar x : s")
    x, bot = F.svar("x", "s"), F.bottom(F.prop("p", "s"))
    bad = F.implies(F.exists(x, F.box("f", [bot, x], "s")),
                    F.box("f", [F.exists(x, bot), x], "s"))
    found = S.bounded_countermodel(sig, [], bad, max_worlds=2)
    assert found is not None


def test_at_persists_through_any_modality():
    rng = random.Random(27)
    checked = 0
    while checked < 200:
        sig = G.random_signature(rng)
        ops = [d for d in sig.ops if d.arg_sorts]
        if not ops:
            continue
        d = rng.choice(ops)
        i = rng.randrange(len(d.arg_sorts))
        t = rng.choice(sig.sorts)
        k = G.nominal(rng, sig, t)
        phi = G.random_formula(rng, sig, t, 3)
        args = [G.random_formula(rng, sig, s, 2) for s in d.arg_sorts]
        args[i] = F.At(k, phi, d.arg_sorts[i])
        f = F.implies(F.At(k, phi, d.result_sort), F.box(d.name, args, d.result_sort))
        assert S.valid_in_model(G.random_model(rng, sig), f)
        checked += 1
