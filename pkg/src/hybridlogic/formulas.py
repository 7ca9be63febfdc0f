"""Sorted formulas of the hybrid language with @ and the universal binder.

Only the core constructors exist as classes.  Conjunction, implication,
equivalence, boxes, the existential binder, top and bottom are built by
helper functions that produce core trees, so equality is plain structural
equality on the core syntax.
"""

import itertools


class FormulaError(Exception):
    pass


class SortMismatch(FormulaError):
    pass


class UnknownSymbol(FormulaError):
    pass


class ArityMismatch(FormulaError):
    pass


class IllegalSubstitution(FormulaError):
    pass


class NotPure(FormulaError):
    pass


class Formula:
    __slots__ = ("sort", "_hash")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        return (type(self) is type(other) and self._hash == other._hash
                and self._key() == other._key())

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        from .sexpr import format_formula
        return f"<{format_formula(self)}>"

    def __str__(self):
        from .sexpr import format_formula
        return format_formula(self)

    def children(self):
        return ()


class Atom(Formula):
    __slots__ = ("name",)
    kind = None

    def __init__(self, name, sort):
        self.name = name
        self.sort = sort
        self._hash = hash((self.kind, name, sort))

    def _key(self):
        return (self.name, self.sort)


class PropAtom(Atom):
    __slots__ = ()
    kind = "prop"


class NomAtom(Atom):
    __slots__ = ()
    kind = "nom"


class CNomAtom(Atom):
    __slots__ = ()
    kind = "cnom"


class SVarAtom(Atom):
    __slots__ = ()
    kind = "svar"


ATOM_CLASSES = {"prop": PropAtom, "nom": NomAtom, "cnom": CNomAtom, "svar": SVarAtom}


class Neg(Formula):
    __slots__ = ("body",)

    def __init__(self, body):
        self.body = body
        self.sort = body.sort
        self._hash = hash(("not", body._hash))

    def _key(self):
        return (self.body,)

    def children(self):
        return (self.body,)


class Or(Formula):
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        if left.sort != right.sort:
            raise SortMismatch(f"disjuncts of sorts {left.sort} and {right.sort}")
        self.left = left
        self.right = right
        self.sort = left.sort
        self._hash = hash(("or", left._hash, right._hash))

    def _key(self):
        return (self.left, self.right)

    def children(self):
        return (self.left, self.right)


class ModalApp(Formula):
    """sigma(phi_1, ..., phi_n); ``sort`` is the operator's result sort."""
    __slots__ = ("op", "args")

    def __init__(self, op, args, sort):
        self.op = op
        self.args = tuple(args)
        self.sort = sort
        self._hash = hash(("app", op, sort, tuple(a._hash for a in self.args)))

    def _key(self):
        return (self.op, self.sort, self.args)

    def children(self):
        return self.args


class At(Formula):
    """@_k^host phi where phi and k have sort ``inner_sort``."""
    __slots__ = ("nominal", "body")

    def __init__(self, nominal, body, host):
        if not isinstance(nominal, (NomAtom, CNomAtom)):
            raise FormulaError("@ takes a nominal or constant nominal, not "
                               f"{type(nominal).__name__}")
        if nominal.sort != body.sort:
            raise SortMismatch(f"@ of {nominal.name}:{nominal.sort} over a formula of sort {body.sort}")
        self.nominal = nominal
        self.body = body
        self.sort = host
        self._hash = hash(("at", nominal._hash, body._hash, host))

    @property
    def inner_sort(self):
        return self.nominal.sort

    def _key(self):
        return (self.nominal, self.body, self.sort)

    def children(self):
        return (self.body,)


class Forall(Formula):
    __slots__ = ("var", "body")

    def __init__(self, var, body):
        if not isinstance(var, SVarAtom):
            raise FormulaError("only state variables can be bound")
        self.var = var
        self.body = body
        self.sort = body.sort
        self._hash = hash(("forall", var._hash, body._hash))

    def _key(self):
        return (self.var, self.body)

    def children(self):
        return (self.body,)


# ---------------------------------------------------------------- builders

def prop(name, sort):
    return PropAtom(name, sort)


def nom(name, sort):
    return NomAtom(name, sort)


def cnom(name, sort):
    return CNomAtom(name, sort)


def svar(name, sort):
    return SVarAtom(name, sort)


def neg(f):
    return Neg(f)


def lor(a, b):
    return Or(a, b)


def implies(a, b):
    return Or(Neg(a), b)


def land(a, b):
    return Neg(Or(Neg(a), Neg(b)))


def iff(a, b):
    return land(implies(a, b), implies(b, a))


def conj(*fs):
    """Right-nested conjunction of one or more formulas."""
    if not fs:
        raise ValueError("empty conjunction")
    out = fs[-1]
    for f in reversed(fs[:-1]):
        out = land(f, out)
    return out


def disj(*fs):
    out = fs[-1]
    for f in reversed(fs[:-1]):
        out = Or(f, out)
    return out


def app(op, args, sort):
    return ModalApp(op, args, sort)


def box(op, args, sort):
    return Neg(ModalApp(op, [Neg(a) for a in args], sort))


def at(k, body, host):
    return At(k, body, host)


def forall(x, body):
    return Forall(x, body)


def exists(x, body):
    return Neg(Forall(x, Neg(body)))


def bottom(p0):
    """A formula true nowhere, built from the canonical variable ``p0``."""
    return Neg(Or(p0, Neg(p0)))


def top(p0):
    return Neg(bottom(p0))


# ------------------------------------------------------------------- views

def as_neg(f):
    return f.body if isinstance(f, Neg) else None


def as_or(f):
    return (f.left, f.right) if isinstance(f, Or) else None


def as_implies(f):
    if isinstance(f, Or) and isinstance(f.left, Neg):
        return f.left.body, f.right
    return None


def as_and(f):
    if (isinstance(f, Neg) and isinstance(f.body, Or)
            and isinstance(f.body.left, Neg) and isinstance(f.body.right, Neg)):
        return f.body.left.body, f.body.right.body
    return None


def as_iff(f):
    parts = as_and(f)
    if parts is None:
        return None
    first, second = as_implies(parts[0]), as_implies(parts[1])
    if first is None or second is None:
        return None
    if first[0] == second[1] and first[1] == second[0]:
        return first
    return None


def as_box(f):
    """Return ``(op, args, sort)`` when ``f`` is ``op``-box of ``args``."""
    if isinstance(f, Neg) and isinstance(f.body, ModalApp):
        inner = f.body
        if all(isinstance(a, Neg) for a in inner.args):
            return inner.op, tuple(a.body for a in inner.args), inner.sort
    return None


def as_exists(f):
    if isinstance(f, Neg) and isinstance(f.body, Forall) and isinstance(f.body.body, Neg):
        return f.body.var, f.body.body.body
    return None


def as_bottom(f):
    if isinstance(f, Neg) and isinstance(f.body, Or):
        a, b = f.body.left, f.body.right
        if isinstance(a, PropAtom) and isinstance(b, Neg) and b.body == a:
            return a
    return None


# ------------------------------------------------------------ sort checking

def sort_of(sig, f):
    """Check ``f`` against ``sig`` and return its sort."""
    if isinstance(f, Atom):
        declared = sig.symbol_sort(f.kind, f.name)
        if declared is None:
            raise UnknownSymbol(f"{f.kind} {f.name}")
        if declared != f.sort:
            raise SortMismatch(f"{f.kind} {f.name} has sort {declared}, not {f.sort}")
        return f.sort
    if isinstance(f, Neg):
        return sort_of(sig, f.body)
    if isinstance(f, Or):
        a, b = sort_of(sig, f.left), sort_of(sig, f.right)
        if a != b:
            raise SortMismatch(f"disjuncts of sorts {a} and {b}")
        return a
    if isinstance(f, ModalApp):
        decls = [d for d in sig.operators_named(f.op) if d.result_sort == f.sort]
        if not decls:
            raise UnknownSymbol(f"operator {f.op} with result sort {f.sort}")
        decl = decls[0]
        if len(decl.arg_sorts) != len(f.args):
            raise ArityMismatch(f"{f.op} takes {len(decl.arg_sorts)} arguments, got {len(f.args)}")
        for i, (want, arg) in enumerate(zip(decl.arg_sorts, f.args)):
            got = sort_of(sig, arg)
            if got != want:
                raise SortMismatch(f"argument {i + 1} of {f.op} has sort {got}, expected {want}")
        return f.sort
    if isinstance(f, At):
        sort_of(sig, f.nominal)
        sort_of(sig, f.body)
        sig.require_sort(f.sort)
        return f.sort
    if isinstance(f, Forall):
        sort_of(sig, f.var)
        return sort_of(sig, f.body)
    raise FormulaError(f"not a formula: {f!r}")


# ------------------------------------------------------- variables & symbols

def free_state_vars(f):
    """The set of state variables (as atoms) with a free occurrence in ``f``."""
    out = set()
    _free(f, frozenset(), out)
    return out


def _free(f, bound, out):
    if isinstance(f, SVarAtom):
        if f not in bound:
            out.add(f)
    elif isinstance(f, Forall):
        _free(f.body, bound | {f.var}, out)
    else:
        for c in f.children():
            _free(c, bound, out)


def free_vars_by_sort(f):
    out = {}
    for x in free_state_vars(f):
        out.setdefault(x.sort, set()).add(x.name)
    return out


def subformulas(f):
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        if isinstance(g, At):
            stack.append(g.nominal)
        elif isinstance(g, Forall):
            stack.append(g.var)
        stack.extend(g.children())


def atoms_of(f, kind=None):
    out = set()
    for g in subformulas(f):
        if isinstance(g, Atom) and (kind is None or g.kind == kind):
            out.add(g)
    return out


def occurs(symbol, f):
    """True when the atom ``symbol`` occurs anywhere in ``f`` (bound or free)."""
    return any(g == symbol for g in subformulas(f))


def nominals_of(f):
    return atoms_of(f, "nom")


def is_pure(f):
    return not any(isinstance(g, PropAtom) for g in subformulas(f))


def quantifier_prefix(f):
    """Split ``f`` into a leading block of universals, then existentials.

    Returns ``(universals, existentials, matrix)``.
    """
    universals, existentials = [], []
    while isinstance(f, Forall):
        universals.append(f.var)
        f = f.body
    while True:
        ex = as_exists(f)
        if ex is None:
            break
        existentials.append(ex[0])
        f = ex[1]
    return universals, existentials, f


def is_forall_exists_pure(f):
    if is_pure(f):
        return True
    return is_quantified_pure_shape(f)


def is_quantified_pure_shape(f):
    """``forall x... exists y... psi`` with psi free of propositional variables
    and with no state symbols other than the bound ones."""
    universals, existentials, matrix = quantifier_prefix(f)
    if not is_pure(matrix):
        return False
    allowed = set(universals) | set(existentials)
    for g in subformulas(matrix):
        if isinstance(g, (NomAtom, CNomAtom)):
            return False
        if isinstance(g, SVarAtom) and g not in allowed:
            return False
    return True


# ------------------------------------------------------------ substitution

def _check_state_symbol(z, x):
    if not isinstance(x, SVarAtom):
        raise FormulaError(f"{x!r} is not a state variable")
    if not isinstance(z, (SVarAtom, NomAtom, CNomAtom)):
        raise FormulaError(f"{z!r} is not a state symbol")
    if z.sort != x.sort:
        raise SortMismatch(f"cannot substitute {z.name}:{z.sort} for {x.name}:{x.sort}")


def substitutable(z, x, f):
    """Whether the state symbol ``z`` may replace free ``x`` in ``f``."""
    _check_state_symbol(z, x)
    if not isinstance(z, SVarAtom):
        return True
    return _substitutable(z, x, f)


def _substitutable(z, x, f):
    if isinstance(f, Atom):
        return True
    if isinstance(f, Forall):
        if x not in free_state_vars(f.body) or f.var == x:
            return True
        return f.var != z and _substitutable(z, x, f.body)
    return all(_substitutable(z, x, c) for c in f.children())


def substitute(f, x, z):
    """``f[z/x]``: replace every free occurrence of ``x`` by ``z``."""
    if not substitutable(z, x, f):
        raise IllegalSubstitution(f"{z.name} is not substitutable for {x.name}")
    return _subst(f, x, z)


def _subst(f, x, z):
    if isinstance(f, Atom):
        return z if f == x else f
    if isinstance(f, Forall):
        if f.var == x:
            return f
        body = _subst(f.body, x, z)
        return f if body is f.body else Forall(f.var, body)
    return map_children(f, lambda c: _subst(c, x, z))


def map_children(f, fn):
    """Rebuild ``f`` with ``fn`` applied to each immediate subformula."""
    if isinstance(f, Atom):
        return f
    if isinstance(f, Neg):
        b = fn(f.body)
        return f if b is f.body else Neg(b)
    if isinstance(f, Or):
        a, b = fn(f.left), fn(f.right)
        return f if (a is f.left and b is f.right) else Or(a, b)
    if isinstance(f, ModalApp):
        args = tuple(fn(a) for a in f.args)
        if all(a is b for a, b in zip(args, f.args)):
            return f
        return ModalApp(f.op, args, f.sort)
    if isinstance(f, At):
        b = fn(f.body)
        return f if b is f.body else At(f.nominal, b, f.sort)
    if isinstance(f, Forall):
        b = fn(f.body)
        return f if b is f.body else Forall(f.var, b)
    raise FormulaError(f"not a formula: {f!r}")


def replace_free(f, x, term):
    """Replace free occurrences of the state variable ``x`` by an arbitrary
    formula ``term`` of the same sort.  Refuses to capture free variables of
    ``term``.  This is a builder utility, not a logical substitution."""
    if term.sort != x.sort:
        raise SortMismatch(f"term of sort {term.sort} for {x.name}:{x.sort}")
    term_free = free_state_vars(term)

    def go(g, bound):
        if isinstance(g, SVarAtom):
            return term if (g == x and g not in bound) else g
        if isinstance(g, Atom):
            return g
        if isinstance(g, Forall):
            if g.var == x:
                return g
            if g.var in term_free and x in free_state_vars(g.body):
                raise IllegalSubstitution(f"{g.var.name} would capture a variable of the term")
            return map_children(g, lambda c: go(c, bound | {g.var}))
        return map_children(g, lambda c: go(c, bound))

    return go(f, frozenset())


def rename_atoms(f, mapping):
    """Uniformly replace atoms (props, nominals, state variables) by formulas."""
    def go(g):
        if isinstance(g, Atom):
            return mapping.get(g, g)
        if isinstance(g, At):
            k = mapping.get(g.nominal, g.nominal)
            body = go(g.body)
            if k is g.nominal and body is g.body:
                return g
            return At(k, body, g.sort)
        if isinstance(g, Forall):
            v = mapping.get(g.var, g.var)
            body = go(g.body)
            if v is g.var and body is g.body:
                return g
            return Forall(v, body)
        return map_children(g, go)
    return go(f)


def pure_instances(f, pool):
    """All uniform replacements of the nominals of ``f`` by pool members.

    ``pool`` maps a sort to a list of nominal or constant-nominal atoms.
    """
    if not is_pure(f):
        raise NotPure("pure instances are defined for pure formulas only")
    noms = sorted(nominals_of(f), key=lambda a: (a.sort, a.name))
    choices = [list(pool.get(j.sort, [])) for j in noms]
    for combo in itertools.product(*choices):
        yield rename_atoms(f, dict(zip(noms, combo)))


def depth(f):
    kids = f.children()
    return 1 + max((depth(c) for c in kids), default=0)


def size(f):
    return sum(1 for _ in subformulas(f))
