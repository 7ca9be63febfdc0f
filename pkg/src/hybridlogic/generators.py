"""Random signatures, formulas, models and axiom-schema instances for property tests.

Everything takes an explicit ``random.Random`` so runs are reproducible.
"""

import random

from . import formulas as F
from . import smc as M
from .semantics import Frame, Model
from .signature import parse_signature

LETTERS = "stuv"


def random_signature(rng, sorts=None, max_ops=3):
    """A small signature with three nominals, two props, one constant nominal
    and two state variables per sort, plus up to ``max_ops`` operators of
    arity 1 or 2 (at least one)."""
    n = sorts if sorts is not None else rng.randint(1, 3)
    names = list(LETTERS[:n])
    lines = [f"sort {' '.join(names)}"]
    for i in range(rng.randint(1, max_ops)):
        res = rng.choice(names)
        args = [rng.choice(names) for _ in range(rng.choice((1, 1, 2)))]
        lines.append(f"op f{i} : {' '.join(args)} -> {res}")
    for s in names:
        lines.append(f"prop p{s} q{s} : {s}")
        lines.append(f"nom i{s} j{s} k{s} : {s}")
        lines.append(f"cnom c{s} : {s}")
        lines.append(f"svar x{s} y{s} : {s}")
    return parse_signature("\n".join(lines))


def _pick(rng, sig, kind, sort):
    names = sig.symbols_of(kind, sort)
    return F.ATOM_CLASSES[kind](rng.choice(names), sort) if names else None


def nominal(rng, sig, sort):
    kind = "cnom" if rng.random() < 0.25 and sig.symbols_of("cnom", sort) else "nom"
    return _pick(rng, sig, kind, sort)


def random_formula(rng, sig, sort, depth=3, pure=False, quantifiers=True, svars=True):
    """A formula of ``sort`` with at most ``depth`` nested constructors.

    ``pure`` leaves out propositional variables; ``quantifiers`` allows
    binders and ``svars`` state variables at all.
    """
    quantifiers = quantifiers and svars
    if depth <= 1 or rng.random() < 0.25:
        return random_atom(rng, sig, sort, pure, svars)
    ops = [d for d in sig.ops if d.result_sort == sort]
    choices = ["neg", "or", "at"] + (["op"] * 2 if ops else [])
    if quantifiers:
        choices.append("forall")
    kind = rng.choice(choices)
    sub = lambda s: random_formula(rng, sig, s, depth - 1, pure, quantifiers, svars)
    if kind == "neg":
        return F.Neg(sub(sort))
    if kind == "or":
        return F.Or(sub(sort), sub(sort))
    if kind == "op":
        d = rng.choice(ops)
        return F.ModalApp(d.name, [sub(s) for s in d.arg_sorts], sort)
    if kind == "at":
        inner = rng.choice(sig.sorts)
        return F.At(nominal(rng, sig, inner), sub(inner), sort)
    inner = rng.choice(sig.sorts)
    x = _pick(rng, sig, "svar", inner)
    return F.Forall(x, sub(sort))


def random_atom(rng, sig, sort, pure=False, svars=True):
    kinds = ["nom", "cnom"] + (["svar"] if svars else []) + ([] if pure else ["prop", "prop"])
    while True:
        a = _pick(rng, sig, rng.choice(kinds), sort)
        if a is not None:
            return a


def random_model(rng, sig, max_worlds=3, named=False, density=0.35):
    """A model with 1..max_worlds worlds per sort and random relations.

    With ``named`` every world is the denotation of some nominal, so the
    signature needs at least ``max_worlds`` nominals per sort.
    """
    worlds = {s: [f"{s}{i}" for i in range(rng.randint(1, max_worlds))] for s in sig.sorts}
    relations = {}
    for d in sig.ops:
        pools = [worlds[s] for s in (d.result_sort,) + d.arg_sorts]
        tuples = set()
        for _ in range(rng.randint(0, 2 * max(len(p) for p in pools) ** 2)):
            if rng.random() < density * 2:
                tuples.add(tuple(rng.choice(p) for p in pools))
        relations[(d.name, d.result_sort)] = tuples
    desig = {c: rng.choice(worlds[s]) for c, s in sig.symbols["cnom"].items()}
    valuation = {}
    for p, s in sig.symbols["prop"].items():
        valuation[p] = {w for w in worlds[s] if rng.random() < 0.5}
    for s in sig.sorts:
        noms = sig.symbols_of("nom", s)
        targets = [rng.choice(worlds[s]) for _ in noms]
        if named:
            missing = [w for w in worlds[s] if w not in targets and w not in
                       {desig[c] for c in sig.symbols_of("cnom", s)}]
            if len(missing) > len(noms):
                raise ValueError(f"not enough nominals of sort {s} to name every world")
            for i, w in enumerate(missing):
                targets[i] = w
            rng.shuffle(targets)
            covered = set(targets) | {desig[c] for c in sig.symbols_of("cnom", s)}
            if not set(worlds[s]) <= covered:
                return random_model(rng, sig, max_worlds, named, density)
        for j, w in zip(noms, targets):
            valuation[j] = {w}
    return Model(Frame(sig, worlds, relations, desig), valuation)


def random_assignment(rng, frame, variables):
    """World indices for the given state-variable atoms."""
    return {x: rng.randrange(frame.world_count(x.sort)) for x in variables}


def all_svars(sig):
    return [F.svar(n, s) for n, s in sig.symbols["svar"].items()]


# ------------------------------------------------------ schema instances

_TAUT_TEMPLATES = (
    lambda a, b, c: F.implies(a, F.implies(b, a)),
    lambda a, b, c: F.implies(F.implies(a, F.implies(b, c)), F.implies(F.implies(a, b), F.implies(a, c))),
    lambda a, b, c: F.implies(F.implies(F.Neg(a), F.Neg(b)), F.implies(b, a)),
    lambda a, b, c: F.Or(a, F.Neg(a)),
    lambda a, b, c: F.iff(F.Neg(F.land(a, b)), F.Or(F.Neg(a), F.Neg(b))),
    lambda a, b, c: F.implies(F.land(a, F.implies(a, b)), b),
    lambda a, b, c: F.iff(F.Or(a, F.land(b, c)), F.land(F.Or(a, b), F.Or(a, c))),
)


def schema_instance(rng, sig, schema, depth=3):
    """A random instance of one of the fifteen axiom schemas.

    Schemas with side conditions (Q1, Q2, Barcan) are instantiated so the
    condition holds.  Returns None when the signature has no operator the
    schema needs.
    """
    sort = rng.choice(sig.sorts)
    g = lambda s=sort, d=depth - 1: random_formula(rng, sig, s, max(d, 1))
    if schema == "Taut":
        return rng.choice(_TAUT_TEMPLATES)(g(), g(), g())
    if schema in ("K", "Dual", "Back", "Barcan"):
        ops = [d for d in sig.ops if d.arg_sorts]
        if not ops:
            return None
        d = rng.choice(ops)
        args = [g(s) for s in d.arg_sorts]
        i = rng.randrange(len(args))
        si = d.arg_sorts[i]
        if schema == "K":
            a, b = g(si), g(si)
            with_ = lambda v: args[:i] + [v] + args[i + 1:]
            return F.implies(F.box(d.name, with_(F.implies(a, b)), d.result_sort),
                             F.implies(F.box(d.name, with_(a), d.result_sort),
                                       F.box(d.name, with_(b), d.result_sort)))
        if schema == "Dual":
            return F.iff(F.ModalApp(d.name, args, d.result_sort),
                         F.Neg(F.box(d.name, [F.Neg(a) for a in args], d.result_sort)))
        if schema == "Back":
            j = nominal(rng, sig, si)
            phi = g(si)
            args[i] = F.At(j, phi, si)
            return F.implies(F.ModalApp(d.name, args, d.result_sort), F.At(j, phi, d.result_sort))
        x = _pick(rng, sig, "svar", rng.choice(sig.sorts))
        args = [a if k == i else _without_free(a, x) for k, a in enumerate(args)]
        return F.implies(F.Forall(x, F.box(d.name, args, d.result_sort)),
                         F.box(d.name, args[:i] + [F.Forall(x, args[i])] + args[i + 1:],
                               d.result_sort))
    if schema == "K@":
        inner = rng.choice(sig.sorts)
        j = nominal(rng, sig, inner)
        a, b = g(inner), g(inner)
        return F.implies(F.At(j, F.implies(a, b), sort),
                         F.implies(F.At(j, a, sort), F.At(j, b, sort)))
    if schema == "Agree":
        t1, t2 = rng.choice(sig.sorts), rng.choice(sig.sorts)
        k, j = nominal(rng, sig, t1), nominal(rng, sig, t2)
        phi = g(t2)
        return F.iff(F.At(k, F.At(j, phi, t1), sort), F.At(j, phi, sort))
    if schema == "SelfDual":
        inner = rng.choice(sig.sorts)
        j, phi = nominal(rng, sig, inner), g(inner)
        return F.iff(F.At(j, phi, sort), F.Neg(F.At(j, F.Neg(phi), sort)))
    if schema == "Intro":
        j, phi = nominal(rng, sig, sort), g()
        return F.implies(j, F.iff(phi, F.At(j, phi, sort)))
    if schema == "Ref":
        inner = rng.choice(sig.sorts)
        j = nominal(rng, sig, inner)
        return F.At(j, j, sort)
    if schema == "Q1":
        x = _pick(rng, sig, "svar", rng.choice(sig.sorts))
        phi, psi = _without_free(g(), x), g()
        return F.implies(F.Forall(x, F.implies(phi, psi)), F.implies(phi, F.Forall(x, psi)))
    if schema == "Q2":
        x = _pick(rng, sig, "svar", rng.choice(sig.sorts))
        phi = g()
        for _ in range(20):
            y = rng.choice([s for s in (_pick(rng, sig, "svar", x.sort), nominal(rng, sig, x.sort))
                            if s is not None])
            if F.substitutable(y, x, phi):
                return F.implies(F.Forall(x, phi), F.substitute(phi, x, y))
        return F.implies(F.Forall(x, phi), phi)
    if schema == "Name":
        x = _pick(rng, sig, "svar", sort)
        return F.exists(x, x)
    if schema == "Barcan@":
        inner = rng.choice(sig.sorts)
        x = _pick(rng, sig, "svar", rng.choice(sig.sorts))
        j, phi = nominal(rng, sig, inner), g(inner)
        return F.implies(F.Forall(x, F.At(j, phi, sort)), F.At(j, F.Forall(x, phi), sort))
    if schema == "NomX":
        inner = rng.choice(sig.sorts)
        x = _pick(rng, sig, "svar", inner)
        k, j = nominal(rng, sig, inner), nominal(rng, sig, inner)
        return F.implies(F.land(F.At(k, x, sort), F.At(j, x, sort)), F.At(k, j, sort))
    raise KeyError(schema)


def _without_free(f, x):
    """``f`` with free ``x`` closed off by a universal binder if needed."""
    return F.Forall(x, f) if x in F.free_state_vars(f) else f


def random_pure_quantified(rng, sig, sort, depth=3, max_quantifiers=2):
    """``forall x... exists y... psi`` whose matrix mentions no propositional
    variables and no state symbols other than the bound ones."""
    xs = [_pick(rng, sig, "svar", sort)]
    for _ in range(rng.randint(0, max_quantifiers - 1)):
        xs.append(_pick(rng, sig, "svar", rng.choice(sig.sorts)))
    xs = list(dict.fromkeys(xs))
    rng.shuffle(xs)
    have = {x.sort for x in xs}
    ops = [op for op in sig.ops if set(op.arg_sorts) <= have]

    def matrix(s, d):
        here = [op for op in ops if op.result_sort == s]
        if d <= 1 or rng.random() < 0.3:
            return rng.choice([x for x in xs if x.sort == s])
        kind = rng.choice(["neg", "or"] + (["op", "op"] if here else []))
        if kind == "neg":
            return F.Neg(matrix(s, d - 1))
        if kind == "or":
            return F.Or(matrix(s, d - 1), matrix(s, d - 1))
        op = rng.choice(here)
        return F.ModalApp(op.name, [matrix(a, d - 1) for a in op.arg_sorts], s)

    body = matrix(sort, depth)
    n_forall = rng.randint(0, len(xs))
    for x in reversed(xs[n_forall:]):
        body = F.exists(x, body)
    for x in reversed(xs[:n_forall]):
        body = F.Forall(x, body)
    return body


# ---------------------------------------------------------- programs

PROGRAM_VARS = ("a", "b", "c")


def random_aexp(rng, depth=2, names=PROGRAM_VARS):
    roll = rng.random()
    if depth <= 1 or roll < 0.4:
        return rng.choice([M.Num(rng.randint(0, 5)), M.Var(rng.choice(names)),
                           M.Incr(rng.choice(names))])
    return M.Add(random_aexp(rng, depth - 1, names), random_aexp(rng, depth - 1, names))


def random_statement(rng, depth=3, names=PROGRAM_VARS):
    """A statement over ``names``; loops may diverge, so run it with bounded fuel."""
    leq = lambda: M.Leq(random_aexp(rng, 2, names), random_aexp(rng, 2, names))
    if depth <= 1:
        return rng.choice([M.Skip(), M.Assign(rng.choice(names), random_aexp(rng, 2, names))])
    kind = rng.choice(["assign", "assign", "seq", "seq", "if", "while", "skip"])
    sub = lambda: random_statement(rng, depth - 1, names)
    if kind == "assign":
        return M.Assign(rng.choice(names), random_aexp(rng, 3, names))
    if kind == "seq":
        return M.Seq(sub(), sub())
    if kind == "if":
        return M.If(leq(), sub(), sub())
    if kind == "while":
        return M.While(leq(), sub())
    return M.Skip()


def random_memory(rng, names=PROGRAM_VARS, high=6):
    return M.canonicalize_mem((n, rng.randint(0, high)) for n in names)


def reachable_states(rng, count, fuel=200):
    """``count`` machine states met while running random programs from random memories."""
    states = []
    while len(states) < count:
        seen = []
        try:
            M.run(random_statement(rng, rng.randint(2, 4)), random_memory(rng), fuel,
                  lambda n, rule, before, after: seen.append(before))
        except (M.OutOfFuel, M.Stuck):
            pass
        if seen:
            states.extend(rng.sample(seen, min(len(seen), rng.randint(1, 8))))
    return states[:count]


def seeded(seed):
    return random.Random(seed)
