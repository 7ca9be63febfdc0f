"""Ground and grid evaluation of arithmetic side facts over the naturals.

Nat-sorted formulas built from numerals, state variables and the operators
``plusN minusN timesN divN`` denote single numbers; ``eqN`` and ``leN`` build
Bool formulas, which denote subsets of ``{true, false}``; ``@_true B`` and
``@_false B`` at any host sort are then plain truth values.  A fact is
accepted when it holds for every assignment of its free state variables on a
grid of small naturals.
"""

import itertools

from . import formulas as F
from .kernel import Extension

GRID = 24
SEARCH = 64


class OracleError(Exception):
    pass


class UnsupportedFact(OracleError):
    pass


class FactRejected(OracleError):
    pass


_NAT_OPS = {
    "plusN": lambda a, b: a + b,
    "minusN": lambda a, b: max(a - b, 0),
    "timesN": lambda a, b: a * b,
}


def nat_value(f, env):
    if isinstance(f, F.CNomAtom) and f.name.isdigit():
        return int(f.name)
    if isinstance(f, F.SVarAtom):
        if f not in env:
            raise UnsupportedFact(f"unbound state variable {f.name}")
        return env[f]
    if isinstance(f, F.ModalApp) and len(f.args) == 2:
        a, b = (nat_value(x, env) for x in f.args)
        if f.op in _NAT_OPS:
            return _NAT_OPS[f.op](a, b)
        if f.op == "divN":
            if b == 0:
                raise UnsupportedFact("division by zero")
            return a // b
    raise UnsupportedFact(f"not an arithmetic term: {f}")


def bool_value(f, env):
    if isinstance(f, F.CNomAtom) and f.name in ("true", "false"):
        return frozenset({f.name == "true"})
    if isinstance(f, F.ModalApp) and f.op in ("eqN", "leN"):
        a, b = (nat_value(x, env) for x in f.args)
        return frozenset({a == b if f.op == "eqN" else a <= b})
    if isinstance(f, F.Neg):
        return frozenset({True, False}) - bool_value(f.body, env)
    if isinstance(f, F.Or):
        return bool_value(f.left, env) | bool_value(f.right, env)
    raise UnsupportedFact(f"not a comparison: {f}")


def _witnesses(f, env):
    found = set(range(SEARCH))
    for g in F.subformulas(f):
        if g.sort == "Nat":
            try:
                found.add(nat_value(g, env))
            except UnsupportedFact:
                pass
    return sorted(found)


def holds(f, env):
    """Truth of a host-level fact under ``env`` (state variable -> int)."""
    if isinstance(f, F.At):
        k = f.nominal
        if isinstance(k, F.CNomAtom) and k.name in ("true", "false"):
            return (k.name == "true") in bool_value(f.body, env)
        raise UnsupportedFact(f"@ at {k.name}")
    if isinstance(f, F.Neg):
        ex = F.as_exists(f)
        if ex is not None and ex[0].sort == "Nat":
            x, body = ex
            return any(holds(body, {**env, x: w}) for w in _witnesses(body, env))
        return not holds(f.body, env)
    if isinstance(f, F.Or):
        return holds(f.left, env) or holds(f.right, env)
    raise UnsupportedFact(f"cannot evaluate {f}")


def counterexample(f, grid=GRID):
    """An assignment on the grid falsifying ``f``, or None."""
    xs = sorted(F.free_state_vars(f), key=lambda v: v.name)
    size = grid if len(xs) <= 2 else max(4, int(grid ** (2 / len(xs))))
    for values in itertools.product(range(size), repeat=len(xs)):
        env = dict(zip(xs, values))
        if not holds(f, env):
            return env
    return None


class ArithmeticOracle:
    """Accepts facts as labelled extensions, numbering them ``Arith1``, ``Arith2``, ..."""

    def __init__(self, grid=GRID, prefix="Arith"):
        self.grid = grid
        self.prefix = prefix
        self.accepted = []

    def accept(self, f, note=None):
        for ext in self.accepted:
            if ext.formula == f:
                return ext
        bad = counterexample(f, self.grid)
        if bad is not None:
            shown = ", ".join(f"{k.name}={v}" for k, v in bad.items())
            raise FactRejected(f"fails at {shown or 'the empty assignment'}: {f}")
        ext = Extension(f"{self.prefix}{len(self.accepted) + 1}", f,
                        provenance=f"arith{': ' + note if note else ''}")
        self.accepted.append(ext)
        return ext
