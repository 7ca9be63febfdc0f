"""Formulas for programs, stacks and memories, and axiom instances for machine steps."""

import os

from . import formulas as F
from . import smc as M
from .kernel import DATA_DIR, load_axiomset
from .signature import SymbolKindClash, load_signature

SIG_FILE = "machine.sig"
AXIOM_FILE = "machine.ax"

NAT, BOOL, VAR, VAL, STACK, MEM, CTRL, CONFIG = (
    "Nat", "Bool", "Var", "Val", "ValStack", "Mem", "CtrlStack", "Config")

TRUE = F.cnom("true", BOOL)
FALSE = F.cnom("false", BOOL)
VS = F.prop("vs", STACK)
MEMP = F.prop("mem", MEM)
NIL = F.ModalApp("nil", [], STACK)
EMPTY = F.ModalApp("empty", [], MEM)


class DerivedItemStep(Exception):
    """A branch or loop step; carries the axioms that justify it together."""

    def __init__(self, rule, certificate):
        super().__init__(f"{rule} step is certified by {', '.join(certificate)}")
        self.rule = rule
        self.certificate = certificate


def machine_signature(variables=()):
    sig = load_signature(os.path.join(DATA_DIR, SIG_FILE))
    missing = {}
    for v in variables:
        found = sig.lookup(v)
        if found is None:
            missing[v] = VAR
        elif found != ("cnom", VAR):
            raise SymbolKindClash(f"program variable {v} clashes with {found[0]} {v} : {found[1]}")
    return sig.extend(cnom=missing) if missing else sig


def machine_axioms(sig=None):
    sig = sig or machine_signature()
    return load_axiomset(os.path.join(DATA_DIR, AXIOM_FILE), sig)


def app(op, *args, sort):
    return F.ModalApp(op, list(args), sort)


def nat(n):
    return F.cnom(str(n), NAT)


def var(name):
    return F.cnom(name, VAR)


def plus_n(a, b):
    return app("plusN", a, b, sort=NAT)


def after(program, post):
    """``[program] post``."""
    return F.box("dyn", [program, post], CONFIG)


def seq(*items):
    out = items[-1]
    for it in reversed(items[:-1]):
        out = app("seq", it, out, sort=CTRL)
    return out


# ------------------------------------------------------------- encoders

def aexp_formula(a):
    if isinstance(a, M.Num):
        return app("nat2AExp", nat(a.value), sort="AExp")
    if isinstance(a, M.Var):
        return app("var2AExp", var(a.name), sort="AExp")
    if isinstance(a, M.Incr):
        return app("incr", var(a.name), sort="AExp")
    if isinstance(a, M.Add):
        return app("plusA", aexp_formula(a.left), aexp_formula(a.right), sort="AExp")
    raise TypeError(a)


def bexp_formula(b):
    return app("leqB", aexp_formula(b.left), aexp_formula(b.right), sort="BExp")


def stmt_formula(s):
    if isinstance(s, M.Skip):
        return app("skip", sort="Stmt")
    if isinstance(s, M.Assign):
        return app("asgnS", var(s.name), aexp_formula(s.expr), sort="Stmt")
    if isinstance(s, M.Seq):
        return app("seqS", stmt_formula(s.first), stmt_formula(s.second), sort="Stmt")
    if isinstance(s, M.If):
        return app("ifS", bexp_formula(s.cond), stmt_formula(s.then), stmt_formula(s.orelse),
                   sort="Stmt")
    if isinstance(s, M.While):
        return app("whileS", bexp_formula(s.cond), stmt_formula(s.body), sort="Stmt")
    raise TypeError(s)


def value_formula(v):
    if M.is_bool(v):
        return app("bool2Val", TRUE if v else FALSE, sort=VAL)
    if isinstance(v, F.Formula):
        return app("bool2Val", v, sort=VAL) if v.sort == BOOL else app("nat2Val", v, sort=VAL)
    return app("nat2Val", nat(v), sort=VAL)


def stack_formula(values, base=NIL):
    out = base
    for v in reversed(list(values)):
        out = app("cons", value_formula(v), out, sort=STACK)
    return out


def mem_formula(writes, base=EMPTY):
    """``writes`` innermost first; values may be ints or Nat formulas."""
    out = base
    for name, value in writes:
        out = app("set", out, var(name), value if isinstance(value, F.Formula) else nat(value),
                  sort=MEM)
    return out


def config(stack, memory):
    return app("cfg", stack, memory, sort=CONFIG)


def item_formula(item):
    if isinstance(item, M.CA):
        return app("cA", aexp_formula(item.expr), sort=CTRL)
    if isinstance(item, M.CB):
        return app("cB", bexp_formula(item.expr), sort=CTRL)
    if isinstance(item, M.CS):
        return app("cS", stmt_formula(item.stmt), sort=CTRL)
    if isinstance(item, M.AsgnItem):
        return app("asgn", var(item.name), sort=CTRL)
    if isinstance(item, M.PlusItem):
        return app("plus", sort=CTRL)
    if isinstance(item, M.LeqItem):
        return app("leq", sort=CTRL)
    if isinstance(item, M.TestItem):
        return app("test", value_formula(item.value), sort=CTRL)
    raise TypeError(f"{item} has no direct control-stack formula")


def state_config(st):
    return config(stack_formula(st.values), mem_formula(st.mem))


def definition(item):
    """Right-hand side of the defining equivalence for a composite ``c(...)`` item."""
    node = item.expr if isinstance(item, (M.CA, M.CB)) else item.stmt
    if isinstance(node, M.If):
        yes = seq(app("test", value_formula(True), sort=CTRL), item_formula(M.CS(node.then)))
        no = seq(app("test", value_formula(False), sort=CTRL), item_formula(M.CS(node.orelse)))
        return seq(item_formula(M.CB(node.cond)), app("union", yes, no, sort=CTRL))
    if isinstance(node, M.While):
        cond = item_formula(M.CB(node.cond))
        body = seq(app("test", value_formula(True), sort=CTRL), item_formula(M.CS(node.body)), cond)
        return seq(cond, app("star", body, sort=CTRL), app("test", value_formula(False), sort=CTRL))
    return seq(*[item_formula(i) for i in M.compile_node(node)])


# ------------------------------------------------------------- emission

def emit_axiom_instance(before, after_state=None):
    """The axiom instance certifying ``before -> after_state``.

    Returns ``(label, formula)``.  Transition steps give ``cfg -> [item] cfg'``;
    expansions of composite items give the defining equivalence.
    """
    t = M.transition(before)
    if t is None:
        raise ValueError("halted state has no step")
    rule, nxt = t
    if after_state is not None and after_state != nxt:
        raise ValueError("after-state is not the successor of before-state")
    item = before.ctrl[0]
    values = before.values
    stack = stack_formula(values)
    memory = mem_formula(before.mem)
    if isinstance(item, M.Branch):
        raise DerivedItemStep(rule, ["Dif", "AUnion", "ASeq", "ATest", "ANotTestBool"])
    if isinstance(item, M.Loop):
        raise DerivedItemStep(rule, ["Dwhile", "ASeq", "AStar", "ATest", "ANotTestBool"])
    if rule in ("Aid", "A++"):
        x = item.expr.name
        n = nat(M.mem_lookup(before.mem, x))
        rest = mem_formula(M.mem_without(before.mem, x))
        pre_mem = app("set", rest, var(x), n, sort=MEM)
        new = plus_n(n, nat(1)) if rule == "A++" else n
        post = config(app("cons", value_formula(new), stack, sort=STACK),
                      app("set", rest, var(x), new, sort=MEM))
        return rule, F.implies(config(stack, pre_mem), after(item_formula(item), post))
    if rule == "Aint":
        post = config(app("cons", value_formula(item.expr.value), stack, sort=STACK), memory)
    elif rule == "Aplus":
        n2, n1, rest = values[0], values[1], stack_formula(values[2:])
        stack = app("cons", value_formula(n2), app("cons", value_formula(n1), rest, sort=STACK),
                    sort=STACK)
        post = config(app("cons", value_formula(plus_n(nat(n1), nat(n2))), rest, sort=STACK),
                      memory)
    elif rule == "Aleq":
        n1, n2, rest = values[0], values[1], stack_formula(values[2:])
        le = app("leN", nat(n1), nat(n2), sort=BOOL)
        post = config(app("cons", value_formula(le), rest, sort=STACK), memory)
    elif rule == "Askip":
        post = config(stack, memory)
    elif rule == "Aasgn":
        rest = stack_formula(values[1:])
        post = config(rest, app("set", memory, var(item.name), nat(values[0]), sort=MEM))
    elif rule == "A?":
        post = config(stack_formula(values[1:]), memory)
        rule = "ATest"
    else:
        return rule, F.iff(item_formula(item), definition(item))
    return rule, F.implies(config(stack, memory), after(item_formula(item), post))
