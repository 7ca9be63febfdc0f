"""Hoare-style rules for the stack/memory/control language, as proof-script builders.

A triple is a proof step whose formula is ``pre -> [program] post`` at sort
Config, where ``[program] post`` is the box of the ``dyn`` operator.  Every
rule below only appends kernel steps, so whatever it returns is checked by
the same kernel that checks hand-written scripts.
"""

from dataclasses import dataclass, field, replace
import os

from . import formulas as F
from . import smc as M
from . import smc_logic as L
from .arith import ArithmeticOracle, OracleError, counterexample
from .kernel import Extensions, check_proof, is_tautology, render_script
from .sexpr import format_formula, parse_formula
from .tactics import ProofBuilder, subformula_at

CONFIG, NAT, BOOL = L.CONFIG, L.NAT, L.BOOL
TRUE, FALSE = L.TRUE, L.FALSE
app = L.app


class HoareError(Exception):
    pass


class ChainMismatch(HoareError):
    pass


class HypothesisShapeMismatch(HoareError):
    pass


class UncheckedInput(HoareError):
    pass


class UnsupportedProgram(HoareError):
    pass


# ----------------------------------------------------------- symbolic states

@dataclass(frozen=True)
class SymState:
    """``cfg(stack, memory)`` conjoined with @-facts.

    ``stack`` holds the Nat or Bool formulas under ``nat2Val``/``bool2Val``,
    top first; ``writes`` lists ``(variable, Nat formula)`` innermost first.
    """
    stack: tuple = ()
    writes: tuple = ()
    facts: tuple = ()
    stack_base: F.Formula = L.VS
    mem_base: F.Formula = L.MEMP

    def config(self):
        return L.config(L.stack_formula(self.stack, self.stack_base),
                        L.mem_formula(self.writes, self.mem_base))

    def formula(self):
        return F.conj(self.config(), *self.facts)

    def names(self):
        return [n for n, _ in self.writes]

    def bare(self):
        return replace(self, facts=())


def conjuncts(f):
    out = []
    while True:
        parts = F.as_and(f)
        if parts is None:
            out.append(f)
            return out
        out.append(parts[0])
        f = parts[1]


def read_state(f):
    """Inverse of :meth:`SymState.formula` for formulas of that shape."""
    parts = conjuncts(f)
    c, facts = parts[0], tuple(parts[1:])
    if not (isinstance(c, F.ModalApp) and c.op == "cfg"):
        raise HypothesisShapeMismatch(f"expected cfg(...), got {format_formula(c)}")
    for h in facts:
        if not isinstance(h, F.At):
            raise HypothesisShapeMismatch(f"side condition is not an @-formula: {format_formula(h)}")
    stack, g = [], c.args[0]
    while isinstance(g, F.ModalApp) and g.op == "cons":
        v = g.args[0]
        if not (isinstance(v, F.ModalApp) and v.op in ("nat2Val", "bool2Val")):
            raise HypothesisShapeMismatch(f"stack value {format_formula(v)}")
        stack.append(v.args[0])
        g = g.args[1]
    stack_base = g
    writes, g = [], c.args[1]
    while isinstance(g, F.ModalApp) and g.op == "set":
        writes.append((g.args[1].name, g.args[2]))
        g = g.args[0]
    return SymState(tuple(stack), tuple(reversed(writes)), facts, stack_base, g)


def triple_parts(f):
    """``(pre, program, post)`` of ``pre -> [program] post``."""
    imp = F.as_implies(f)
    bx = F.as_box(imp[1]) if imp else None
    if bx is None or bx[0] != "dyn":
        raise UncheckedInput(f"not a triple: {format_formula(f)}")
    return imp[0], bx[1][0], bx[1][1]


def nat_differences(a, b, path=()):
    """Positions where two formulas differ, each inside a Nat-sorted subterm."""
    if a == b:
        return []
    if a.sort == NAT and b.sort == NAT:
        return [(path, a, b)]
    same = type(a) is type(b)
    if same and isinstance(a, F.ModalApp):
        same = a.op == b.op and a.sort == b.sort and len(a.args) == len(b.args)
    elif same and isinstance(a, F.At):
        same = a.nominal == b.nominal and a.sort == b.sort
    elif same and isinstance(a, (F.Atom, F.Forall)):
        same = False
    if not same:
        raise HoareError(f"shapes differ: {format_formula(a)} vs {format_formula(b)}")
    out = []
    for i, (x, y) in enumerate(zip(a.children(), b.children())):
        out += nat_differences(x, y, path + (i,))
    return out


# ------------------------------------------------------------------ prover

class HoareProver:
    """Builds one proof script over the language signature and its axioms."""

    def __init__(self, variables=(), extensions=None, check=True, oracle=None):
        self.sig = L.machine_signature(variables)
        base = extensions if extensions is not None else L.machine_axioms(self.sig)
        self.pb = ProofBuilder(self.sig, Extensions(list(base)), profile="H@A", check=check)
        self.pb.script.sig_path = L.SIG_FILE
        self.pb.script.axiomsets = [L.AXIOM_FILE]
        self.oracle = oracle or ArithmeticOracle()

    # ---------------------------------------------------------- basics

    def formula(self, n):
        return self.pb.formula(n)

    def ext(self, label, f):
        return self.pb.ext(label, f)

    def fact(self, f, note=None):
        """Cite an arithmetic fact, validated by the oracle and recorded in the script."""
        e = self.oracle.accept(f, note)
        if e.label not in self.pb.script.extensions:
            self.pb.script.extensions.add(e)
            self.pb.script.inline_axioms.append(e)
        return self.ext(e.label, f)

    def nat_eq(self, a, b):
        """A step proving ``a <-> b`` for Nat terms of equal value."""
        eq = F.At(TRUE, app("eqN", a, b, sort=BOOL), NAT)
        i1 = self.ext("I1", F.implies(eq, F.iff(a, b)))
        return self.pb.mp(self.fact(eq, "equal values"), i1)

    def _imp(self, s):
        """Turn an equivalence step into its left-to-right implication."""
        a, b = F.as_iff(self.formula(s))
        return self.pb.pl([s], F.implies(a, b))

    def _chain(self, imps, start):
        imps = [s for s in imps if s is not None]
        if not imps:
            return None
        end = F.as_implies(self.formula(imps[-1]))[1]
        return self.pb.pl(imps, F.implies(start, end))

    # ------------------------------------------------------- triple rules

    def compose(self, p1, p2):
        """``A -> [p]B`` and ``B -> [q]C`` give ``A -> [p;q]C``."""
        a, pi1, b = triple_parts(self.formula(p1))
        b2, pi2, c = triple_parts(self.formula(p2))
        if b != b2:
            raise ChainMismatch(f"post {format_formula(b)} does not meet pre {format_formula(b2)}")
        bm = self.pb.box_mono("dyn", [pi1, b], CONFIG, 1, p2)
        aseq = self.ext("ASeq", F.iff(L.after(L.seq(pi1, pi2), c),
                                      L.after(pi1, L.after(pi2, c))))
        return self.pb.pl([p1, bm, aseq], F.implies(a, L.after(L.seq(pi1, pi2), c)))

    def strengthen(self, imp, p):
        """``A' -> A`` and ``A -> [p]B`` give ``A' -> [p]B``."""
        if imp is None:
            return p
        a2, a = F.as_implies(self.formula(imp))
        pre, pi, post = triple_parts(self.formula(p))
        if pre != a:
            raise UncheckedInput("strengthening does not meet the precondition")
        return self.pb.pl([imp, p], F.implies(a2, L.after(pi, post)))

    def weaken(self, p, imp):
        """``A -> [p]B`` and ``B -> B'`` give ``A -> [p]B'``."""
        if imp is None:
            return p
        pre, pi, post = triple_parts(self.formula(p))
        b, b2 = F.as_implies(self.formula(imp))
        if b != post:
            raise UncheckedInput("weakening does not meet the postcondition")
        bm = self.pb.box_mono("dyn", [pi, post], CONFIG, 1, imp)
        return self.pb.pl([p, bm], F.implies(pre, L.after(pi, b2)))

    def retarget(self, p, program, definition):
        """Replace the program of a triple using ``program <-> unfolded``."""
        f = self.formula(p)
        lhs, rhs = F.as_iff(self.formula(definition))
        flip = self.pb.pl([definition], F.iff(rhs, lhs))
        r = self.pb.rewrite(f, (1, 0, 0, 0), flip)
        g = F.as_iff(self.formula(r))[1]
        return self.pb.pl([p, r], g)

    def persist(self, hyp, program):
        """``@_k phi -> [program] @_k phi``."""
        return self.pb.persist(hyp, "dyn", [program, hyp], CONFIG, 1)

    def frame(self, p, facts):
        """``C -> [p]C'`` gives ``C & facts -> [p](C' & facts)`` for @-facts."""
        if not facts:
            return p
        for h in facts:
            if not isinstance(h, F.At):
                raise HypothesisShapeMismatch(
                    f"frame conditions must be @-formulas, got {format_formula(h)}")
        pre, pi, post = triple_parts(self.formula(p))
        steps = [p] + [self.persist(h, pi) for h in facts]
        acc = facts[-1]
        for h in reversed(facts[:-1]):
            steps.append(self.pb.box_conj("dyn", [pi, h], CONFIG, 1, h, acc))
            acc = F.land(h, acc)
        steps.append(self.pb.box_conj("dyn", [pi, post], CONFIG, 1, post, acc))
        goal = F.implies(F.conj(pre, *facts), L.after(pi, F.conj(post, *facts)))
        return self.pb.pl(steps, goal)

    def add_post_facts(self, p, theorems):
        """``A -> [p]B`` and theorems ``@_k phi`` give ``A -> [p](B & phi_1 & ...)``."""
        if not theorems:
            return p
        hs = [self.formula(t) for t in theorems]
        pre, pi, post = triple_parts(self.formula(p))
        steps = [p] + [self.pb.mp(t, self.persist(h, pi)) for t, h in zip(theorems, hs)]
        acc = hs[-1]
        for h in reversed(hs[:-1]):
            steps.append(self.pb.box_conj("dyn", [pi, h], CONFIG, 1, h, acc))
            acc = F.land(h, acc)
        steps.append(self.pb.box_conj("dyn", [pi, post], CONFIG, 1, post, acc))
        return self.pb.pl(steps, F.implies(pre, L.after(pi, F.conj(post, *hs))))

    def meet(self, p1, p2):
        """Compose, first re-associating ``p1``'s post when only conjunct order differs."""
        post = triple_parts(self.formula(p1))[2]
        pre = triple_parts(self.formula(p2))[0]
        if post != pre:
            if set(conjuncts(post)) != set(conjuncts(pre)):
                raise ChainMismatch(f"post {format_formula(post)} does not meet "
                                    f"pre {format_formula(pre)}")
            p1 = self.weaken(p1, self.pb.taut(F.implies(post, pre)))
        return self.compose(p1, p2)

    # --------------------------------------------------------- memory

    def swap(self, state, k):
        """Exchange writes ``k`` and ``k+1``; returns ``(cfg <-> cfg', state')``."""
        w = list(state.writes)
        (x, a), (y, b) = w[k], w[k + 1]
        if x == y:
            raise HoareError(f"cannot reorder two writes of {x}")
        inner = L.mem_formula(w[:k], state.mem_base)
        lhs = app("set", app("set", inner, L.var(x), a, sort=L.MEM), L.var(y), b, sort=L.MEM)
        rhs = app("set", app("set", inner, L.var(y), b, sort=L.MEM), L.var(x), a, sort=L.MEM)
        inst = self.ext("AMem1", F.iff(lhs, rhs))
        path = (1,) + (0,) * (len(w) - k - 2)
        step = self.pb.rewrite(state.config(), path, inst)
        w[k], w[k + 1] = w[k + 1], w[k]
        return step, replace(state, writes=tuple(w))

    def reorder(self, state, order):
        """Permute writes into ``order`` (innermost first); ``(imp or None, state')``."""
        if sorted(order) != sorted(state.names()):
            raise HoareError(f"memory holds {state.names()}, target order is {list(order)}")
        start, steps = state.config(), []
        for idx, name in enumerate(order):
            p = state.names().index(name, idx)
            while p > idx:
                s, state = self.swap(state, p - 1)
                steps.append(self._imp(s))
                p -= 1
        return self._chain(steps, start), state

    def bring_to_top(self, state, name):
        if name not in state.names():
            raise HoareError(f"variable {name} is not bound in {format_formula(state.config())}")
        order = [n for n in state.names() if n != name] + [name]
        return self.reorder(state, order)

    def collapse(self, state, name):
        """Drop an older write of ``name`` shadowed by the top write."""
        start = state.config()
        older = [i for i, (n, _) in enumerate(state.writes[:-1]) if n == name]
        if not older:
            return None, state
        steps = []
        p = older[0]
        while p < len(state.writes) - 2:
            s, state = self.swap(state, p)
            steps.append(self._imp(s))
            p += 1
        w = list(state.writes)
        inner = L.mem_formula(w[:-2], state.mem_base)
        (_, old), (_, new) = w[-2], w[-1]
        lhs = app("set", app("set", inner, L.var(name), old, sort=L.MEM), L.var(name), new,
                  sort=L.MEM)
        rhs = app("set", inner, L.var(name), new, sort=L.MEM)
        inst = self.ext("AMem2", F.implies(lhs, rhs))
        steps.append(self.pb.replace_imp(state.config(), (1,), inst))
        return self._chain(steps, start), replace(state, writes=tuple(w[:-2] + [w[-1]]))

    def conform(self, f, target):
        """``f -> target`` when they differ only in Nat terms of equal value."""
        if f == target:
            return None
        cur, steps = f, []
        for path, old, new in nat_differences(f, target):
            s = self.pb.rewrite(cur, path, self.nat_eq(old, new))
            steps.append(self._imp(s))
            cur = F.as_iff(self.formula(s))[1]
        return self._chain(steps, f)

    def settle(self, state, target):
        """Implication from ``state``'s cfg to the cfg of ``target`` (a SymState)."""
        start = state.config()
        imp1, state = self.reorder(state, target.names())
        imp2 = self.conform(state.config(), target.config())
        return self._chain([imp1, imp2], start)

    # ------------------------------------------------------- execution

    def execute(self, state, program):
        """Symbolically run ``program`` from the cfg of ``state``.

        Returns ``(step, post)`` with the step proving
        ``state.config() -> [program] post.config()``.
        """
        if state.facts:
            p, post = self.execute(state.bare(), program)
            return self.frame(p, list(state.facts)), replace(post, facts=state.facts)
        op, args = program.op, program.args
        if op == "seq":
            p1, mid = self.execute(state, args[0])
            p2, post = self.execute(mid, args[1])
            return self.compose(p1, p2), post
        if op in ("cA", "cB", "cS"):
            node = args[0]
            if op == "cA" and node.op == "nat2AExp":
                return self._push(state, program, node.args[0])
            if op == "cA" and node.op in ("var2AExp", "incr"):
                return self._read(state, program, node.args[0].name,
                                  "Aid" if node.op == "var2AExp" else "A++")
            if op == "cS" and node.op == "skip":
                return self.ext("Askip", F.implies(state.config(),
                                                   L.after(program, state.config()))), state
            label = {"plusA": "Dplus", "leqB": "Dleq", "asgnS": "Dasgn", "seqS": "CStmt"}.get(node.op)
            if label is None:
                raise UnsupportedProgram(f"no straight-line rule for {node.op}")
            rhs = unfold(program)
            d = self.ext(label, F.iff(program, rhs))
            p, post = self.execute(state, rhs)
            return self.retarget(p, program, d), post
        if op == "plus":
            n2, n1, *rest = self._need_stack(state, 2, op)
            post = replace(state, stack=(L.plus_n(n1, n2), *rest))
            return self._axiom("Aplus", state, program, post), post
        if op == "leq":
            n1, n2, *rest = self._need_stack(state, 2, op)
            post = replace(state, stack=(app("leN", n1, n2, sort=BOOL), *rest))
            return self._axiom("Aleq", state, program, post), post
        if op == "asgn":
            name = args[0].name
            n, *rest = self._need_stack(state, 1, op)
            post = replace(state, stack=tuple(rest), writes=state.writes + ((name, n),))
            p = self._axiom("Aasgn", state, program, post)
            imp, post = self.collapse(post, name)
            return self.weaken(p, imp), post
        if op == "test":
            v, *rest = self._need_stack(state, 1, op)
            if L.value_formula(v) != args[0]:
                raise HoareError(f"test {format_formula(args[0])} on {format_formula(v)}")
            post = replace(state, stack=tuple(rest))
            return self._axiom("ATest", state, program, post), post
        raise UnsupportedProgram(f"cannot execute {op}")

    def _need_stack(self, state, n, op):
        if len(state.stack) < n:
            raise HoareError(f"{op} needs {n} stack values")
        return state.stack

    def _axiom(self, label, state, program, post):
        return self.ext(label, F.implies(state.config(), L.after(program, post.config())))

    def _push(self, state, program, n):
        post = replace(state, stack=(n,) + state.stack)
        return self._axiom("Aint", state, program, post), post

    def _read(self, state, program, name, rule):
        imp, top = self.bring_to_top(state, name)
        x, v = top.writes[-1]
        writes = top.writes
        if rule == "A++":
            v = L.plus_n(v, L.nat(1))
            writes = writes[:-1] + ((x, v),)
        post = replace(top, stack=(v,) + top.stack, writes=writes)
        return self.strengthen(imp, self._axiom(rule, top, program, post)), post

    # --------------------------------------------------- Boolean cases

    def bool_split(self, b):
        """``B <-> (true & @_true B) | (false & @_false B)`` at sort Bool."""
        at_t, at_f = F.At(TRUE, b, BOOL), F.At(FALSE, b, BOOL)
        it = self.pb.ax("Intro", F.implies(TRUE, F.iff(b, at_t)))
        i_f = self.pb.ax("Intro", F.implies(FALSE, F.iff(b, at_f)))
        b1 = self.ext("B1", F.iff(TRUE, F.Neg(FALSE)))
        return self.pb.pl([it, i_f, b1], F.iff(b, F.Or(F.land(TRUE, at_t), F.land(FALSE, at_f))))

    def bool_cases(self, c):
        """Case split on the Boolean on top of the stack of ``cfg`` formula ``c``.

        Returns ``(step, (c_true, h_true), (c_false, h_false))`` with the step
        proving ``c -> (c_true & h_true) | (c_false & h_false)``.
        """
        path = (0, 0, 0)
        b = subformula_at(c, path)
        split = self.bool_split(b)
        r = self.pb.rewrite(c, path, split)
        c2 = F.as_iff(self.formula(r))[1]
        d = self.pb.dia_or_deep(c2, path)
        left, right = F.as_or(F.as_implies(self.formula(d))[1])
        e_t = self.pb.extract_at(left, path)
        e_f = self.pb.extract_at(right, path)
        t_case = F.as_implies(self.formula(e_t))[1]
        f_case = F.as_implies(self.formula(e_f))[1]
        step = self.pb.pl([r, d, e_t, e_f], F.implies(c, F.Or(t_case, f_case)))
        return step, F.as_and(t_case), F.as_and(f_case)

    def distinct_bools(self, j, k):
        """``@^Config_j (not k)`` for the two distinct Boolean constants."""
        b1 = self.ext("B1", F.iff(TRUE, F.Neg(FALSE)))
        local = self.pb.pl([b1], F.implies(j, F.Neg(k)))
        moved = self.pb.at_mono(j, CONFIG, local)
        ref = self.pb.ax("Ref", F.At(j, j, CONFIG))
        return self.pb.mp(ref, moved)

    def refuted_test(self, pre, c_j, j, k, rest, post):
        """``pre -> [k?; rest] post`` when ``c_j``, the first conjunct of ``pre``,
        has the Boolean constant ``j != k`` on top of its stack.

        ``rest`` may be None for a bare test.
        """
        test = app("test", L.value_formula(k == TRUE), sort=L.CTRL)
        bot = F.bottom(F.prop(self.sig.canonical_prop(CONFIG), CONFIG))
        inst = self.ext("ANotTestBool", F.implies(F.land(c_j, F.At(j, F.Neg(k), CONFIG)),
                                                  L.after(test, bot)))
        dist = self.distinct_bools(j, k)
        target = L.after(rest, post) if rest is not None else post
        bm = self.pb.box_mono("dyn", [test, bot], CONFIG, 1, self.pb.taut(F.implies(bot, target)))
        if rest is None:
            return self.pb.pl([inst, dist, bm], F.implies(pre, L.after(test, target)))
        aseq = self.ext("ASeq", F.iff(L.after(L.seq(test, rest), post), L.after(test, target)))
        return self.pb.pl([inst, dist, bm, aseq], F.implies(pre, L.after(L.seq(test, rest), post)))

    def passed_test(self, c_j, j, facts):
        """``c_j & facts -> [j?] (cfg(S, M) & facts)`` where ``c_j`` has ``j`` on top."""
        state = read_state(c_j)
        test = app("test", L.value_formula(j == TRUE), sort=L.CTRL)
        post = replace(state, stack=state.stack[1:])
        p = self._axiom("ATest", state, test, post)
        return self.frame(p, list(facts)), replace(post, facts=tuple(facts))

    # --------------------------------------------------- quantifiers

    def fresh_nat_var(self, *avoid):
        for name in self.sig.symbols_of("svar", NAT):
            v = F.svar(name, NAT)
            if not any(F.occurs(v, f) for f in avoid):
                return v
        raise HoareError("no unused Nat state variable in the signature")

    def exists_intro_term(self, theta, x, t):
        """``theta[t/x] -> exists x theta`` for a state symbol or a Nat term ``t``."""
        if isinstance(t, (F.NomAtom, F.CNomAtom, F.SVarAtom)):
            return self.pb.exists_intro(x, theta, t)
        inst = F.replace_free(theta, x, t)
        y = self.fresh_nat_var(theta, t)
        target = F.substitute(theta, x, y)
        hyp = F.At(TRUE, app("eqN", y, t, sort=BOOL), CONFIG)
        nat_hyp = F.At(TRUE, app("eqN", y, t, sort=BOOL), NAT)
        i1 = self.ext("I1", F.implies(nat_hyp, F.iff(y, t)))
        leaf = self.pb.pl([i1], F.implies(nat_hyp, F.iff(t, y)))
        rw, got = self.pb.cond_rewrite_all(inst, t, y, hyp, leaf)
        if got != target:
            raise HoareError("the substituted term also occurs outside the variable's positions")
        intro = self.pb.exists_intro(x, theta, y)
        under = self.pb.pl([rw, intro], F.implies(hyp, F.implies(inst, F.exists(x, theta))))
        elim = self.pb.exists_elim(y, under)
        witness = self.fact(F.exists(y, hyp), "every term has a value")
        return self.pb.mp(witness, elim)

    # ------------------------------------------------------- Hoare rules

    def rule_consequence(self, p, imp):
        """Weaken the post with ``psi -> chi`` or strengthen the pre with ``chi -> phi``."""
        pre, _, post = triple_parts(self.formula(p))
        parts = F.as_implies(self.formula(imp))
        if parts is None:
            raise UncheckedInput("consequence needs an implication")
        if parts[0] == post:
            return self.weaken(p, imp)
        if parts[1] == pre:
            return self.strengthen(imp, p)
        raise UncheckedInput("the implication meets neither end of the triple")

    def rule_composition(self, proofs):
        out = proofs[0]
        for p in proofs[1:]:
            out = self.compose(out, p)
        return out

    def rule_conditional(self, h1, h2, h3, program):
        """``phi -> [c(if b then s1 else s2)] chi`` from

        h1: ``phi -> [c(b)] (cfg(B . S, M) & P)``,
        h2: ``cfg(S, M) & P & @_true B -> [c(s1)] chi``,
        h3: ``cfg(S, M) & P & @_false B -> [c(s2)] chi``.
        """
        node = program.args[0]
        if node.op != "ifS":
            raise HypothesisShapeMismatch("not a conditional")
        cond, s1, s2 = node.args
        phi, c_b, theta = triple_parts(self.formula(h1))
        parts = conjuncts(theta)
        c, facts = parts[0], parts[1:]
        for h in facts:
            if not isinstance(h, F.At):
                raise HypothesisShapeMismatch("side conditions must be @-formulas")
        chi = triple_parts(self.formula(h2))[2]
        if triple_parts(self.formula(h3))[2] != chi:
            raise HypothesisShapeMismatch("the branches prove different postconditions")
        split, (c_t, h_t), (c_f, h_f) = self.bool_cases(c)
        cs1 = app("cS", s1, sort=L.CTRL)
        cs2 = app("cS", s2, sort=L.CTRL)
        arm1 = L.seq(app("test", L.value_formula(True), sort=L.CTRL), cs1)
        arm2 = L.seq(app("test", L.value_formula(False), sort=L.CTRL), cs2)
        union = app("union", arm1, arm2, sort=L.CTRL)
        pre_t = F.conj(c_t, *facts, h_t)
        pre_f = F.conj(c_f, *facts, h_f)
        t_pass, _ = self.passed_test(c_t, TRUE, facts + [h_t])
        t1 = self.meet(t_pass, h2)
        t2 = self.refuted_test(pre_t, c_t, TRUE, FALSE, cs2, chi)
        f_pass, _ = self.passed_test(c_f, FALSE, facts + [h_f])
        f2 = self.meet(f_pass, h3)
        f1 = self.refuted_test(pre_f, c_f, FALSE, TRUE, cs1, chi)
        aunion = self.ext("AUnion", F.iff(L.after(union, chi),
                                          F.land(L.after(arm1, chi), L.after(arm2, chi))))
        body = self.pb.pl([split, t1, t2, f1, f2, aunion],
                          F.implies(F.conj(c, *facts), L.after(union, chi)))
        whole = self.compose(h1, body)
        d = self.ext("Dif", F.iff(program, unfold(program)))
        return self.retarget(whole, program, d)

    def rule_iteration(self, h1, h2, program, theta, x, x_init, x_body):
        """``phi -> [c(while b do s)] exists x (cfg(S, M) & P & @_false B)`` from

        h1: ``phi -> [c(b)] theta[x_init/x]``,
        h2: ``cfg(S, M) & P & @_true B -> [c(s); c(b)] theta[x_body/x]``,
        where ``theta = cfg(B . S, M) & P`` and ``P`` is a conjunction of @-formulas.
        """
        node = program.args[0]
        if node.op != "whileS":
            raise HypothesisShapeMismatch("not a loop")
        cond, body = node.args
        c_b = app("cB", cond, sort=L.CTRL)
        parts = conjuncts(theta)
        c, facts = parts[0], list(parts[1:])
        for h in facts:
            if not isinstance(h, F.At):
                raise HypothesisShapeMismatch(
                    f"loop side conditions must be @-formulas, got {format_formula(h)}")
        phi, prog1, post1 = triple_parts(self.formula(h1))
        if prog1 != c_b or post1 != F.replace_free(theta, x, x_init):
            raise HypothesisShapeMismatch("h1 does not establish the invariant at x_init")
        pre2, prog2, post2 = triple_parts(self.formula(h2))
        alpha_rest = L.seq(app("cS", body, sort=L.CTRL), c_b)
        if prog2 != alpha_rest or post2 != F.replace_free(theta, x, x_body):
            raise HypothesisShapeMismatch("h2 does not re-establish the invariant at x_body")
        inv = F.exists(x, theta)
        test_t = app("test", L.value_formula(True), sort=L.CTRL)
        test_f = app("test", L.value_formula(False), sort=L.CTRL)
        alpha = L.seq(test_t, alpha_rest)

        c1 = self.weaken(h1, self.exists_intro_term(theta, x, x_init))

        split, (c_t, h_t), (c_f, h_f) = self.bool_cases(c)
        pre_t = F.conj(c_t, *facts, h_t)
        pre_f = F.conj(c_f, *facts, h_f)
        t_pass, _ = self.passed_test(c_t, TRUE, facts + [h_t])
        again = self.meet(t_pass, h2)
        again = self.weaken(again, self.exists_intro_term(theta, x, x_body))
        stop = self.refuted_test(pre_f, c_f, FALSE, TRUE, alpha_rest, inv)
        step = self.pb.pl([split, again, stop], F.implies(theta, L.after(alpha, inv)))
        c2 = self.pb.exists_elim(x, step)

        star = app("star", alpha, sort=L.CTRL)
        ug = self.pb.add(F.box("dyn", [star, self.formula(c2)], CONFIG), "UG", "dyn", 2, c2)
        ind = self.ext("AInd", F.implies(F.land(inv, self.formula(ug)), L.after(star, inv)))
        loop = self.pb.pl([c2, ug, ind], F.implies(inv, L.after(star, inv)))

        exit_body = F.conj(L.config(c.args[0].args[1], c.args[1]), *facts, h_f)
        f_pass, _ = self.passed_test(c_f, FALSE, facts + [h_f])
        done = self.weaken(f_pass, self.pb.exists_intro(x, exit_body, x))
        out = F.exists(x, exit_body)
        t_stop = self.refuted_test(pre_t, c_t, TRUE, FALSE, None, out)
        leave = self.pb.pl([split, done, t_stop], F.implies(theta, L.after(test_f, out)))
        leave = self.pb.exists_elim(x, leave)

        whole = self.compose(c1, self.compose(loop, leave))
        d = self.ext("Dwhile", F.iff(program, unfold(program)))
        return self.retarget(whole, program, d)

    def eliminate_loop_existential(self, p, x, witness):
        """Turn ``phi -> [pi] exists x (cfg & P & @_false B)`` into ``phi -> [pi] cfg[witness/x]``.

        The arithmetic fact ``P & @_false B -> @_true(x = witness)`` is
        validated by the oracle; (I1) then rewrites ``x`` to ``witness``.
        """
        pre, pi, post = triple_parts(self.formula(p))
        ex = F.as_exists(post)
        if ex is None or ex[0] != x:
            raise HypothesisShapeMismatch("postcondition is not an existential over the variable")
        body = ex[1]
        parts = conjuncts(body)
        c, facts = parts[0], parts[1:]
        hyp = F.At(TRUE, app("eqN", x, witness, sort=BOOL), CONFIG)
        eq = self.fact(F.implies(F.conj(*facts), hyp), "loop exit pins the variable")
        nat_hyp = F.At(TRUE, app("eqN", x, witness, sort=BOOL), NAT)
        leaf = self.ext("I1", F.implies(nat_hyp, F.iff(x, witness)))
        rw, c2 = self.pb.cond_rewrite_all(c, x, witness, hyp, leaf)
        if x in F.free_state_vars(c2):
            raise HoareError("variable still free after rewriting")
        local = self.pb.pl([eq, rw], F.implies(body, c2))
        return self.weaken(p, self.pb.exists_elim(x, local))

    # ----------------------------------------------------- statements

    def prove_statement(self, state, stmt, loops):
        """``state -> [c(stmt)] post`` for a statement AST; returns ``(step, post)``.

        ``loops`` is an iterator of :class:`LoopSpec` consumed by while loops
        in program order.
        """
        program = app("cS", L.stmt_formula(stmt), sort=L.CTRL)
        if not contains_control(stmt):
            return self.execute(state, program)
        if isinstance(stmt, M.Seq):
            p1, mid = self.prove_statement(state, stmt.first, loops)
            if mid is None:
                raise UnsupportedProgram("only the last statement may be a conditional whose "
                                         "branches end in different states")
            p2, post = self.prove_statement(mid, stmt.second, loops)
            d = self.ext("CStmt", F.iff(program, unfold(program)))
            return self.retarget(self.compose(p1, p2), program, d), post
        if isinstance(stmt, M.If):
            return self._prove_if(state, stmt, program, loops)
        if isinstance(stmt, M.While):
            annot = next(loops, None)
            if annot is None:
                raise UnsupportedProgram("a while loop needs an invariant")
            return self._prove_while(state, stmt, program, annot)
        raise UnsupportedProgram(type(stmt).__name__)

    def _prove_if(self, state, stmt, program, loops):
        c_b = app("cB", L.bexp_formula(stmt.cond), sort=L.CTRL)
        h1, after_b = self.execute(state, c_b)
        b = after_b.stack[0]
        inner = replace(after_b, stack=after_b.stack[1:])
        posts, hyps = [], []
        for flag, arm in ((TRUE, stmt.then), (FALSE, stmt.orelse)):
            guard = F.At(flag, b, CONFIG)
            start = replace(inner, facts=inner.facts + (guard,))
            if self.oracle_refutes(guard):
                hyps.append((start, arm, None))
                continue
            p, post = self.prove_statement(start, arm, loops)
            posts.append(post)
            hyps.append((start, arm, p))
        if not posts:
            raise HoareError("both branches are unreachable")
        try:
            chi, proofs = posts[0].bare(), []
            for start, arm, p in hyps:
                if p is not None:
                    got = read_state(triple_parts(self.formula(p))[2])
                    drop = self.pb.taut(F.implies(got.formula(), got.config())) if got.facts else None
                    p = self.weaken(self.weaken(p, drop), self.settle(got.bare(), chi))
                proofs.append(p)
            chi_f = chi.formula()
        except (HoareError, OracleError):
            # the branches end in different states: keep both outcomes
            chi, proofs = None, [p for _, _, p in hyps]
            chi_f = F.disj(*[triple_parts(self.formula(p))[2] for p in proofs if p is not None])
            proofs = [p if p is None else self.weaken(p, self.pb.taut(
                F.implies(triple_parts(self.formula(p))[2], chi_f))) for p in proofs]
        for i, (start, arm, _) in enumerate(hyps):
            if proofs[i] is None:
                cs = app("cS", L.stmt_formula(arm), sort=L.CTRL)
                proofs[i] = self.vacuous(start.formula(), cs, chi_f)
        return self.rule_conditional(h1, proofs[0], proofs[1], program), chi

    def oracle_refutes(self, guard):
        try:
            return counterexample(F.Neg(guard)) is None
        except OracleError:
            return False

    def vacuous(self, pre, program, post):
        """``pre -> [program] post`` when a conjunct of ``pre`` is arithmetically false."""
        guard = conjuncts(pre)[-1]
        no = self.fact(F.Neg(guard), "branch guard is false")
        return self.pb.pl([no], F.implies(pre, L.after(program, post)))

    def _prove_while(self, state, stmt, program, annot):
        if state.facts:
            raise UnsupportedProgram("side conditions before a loop must be part of its invariant")
        x, theta = annot.variable, annot.invariant
        c_b = app("cB", L.bexp_formula(stmt.cond), sort=L.CTRL)
        inv_c, *inv_facts = conjuncts(theta)
        inv_state = read_state(inv_c)

        p, post = self.execute(state, c_b)
        init = F.replace_free(theta, x, annot.x_init)
        init_c, *init_facts = conjuncts(init)
        p = self.weaken(p, self.settle(post, read_state(init_c)))
        h1 = self.add_post_facts(p, [self.fact(h, "invariant side condition at entry")
                                     for h in init_facts])

        guard = F.At(TRUE, inv_state.stack[0], CONFIG)
        start = replace(inv_state, stack=inv_state.stack[1:], facts=tuple(inv_facts) + (guard,))
        rest = L.seq(app("cS", L.stmt_formula(stmt.body), sort=L.CTRL), c_b)
        p, post = self.execute(start, rest)
        nxt = F.replace_free(theta, x, annot.x_body)
        nxt_c, *nxt_facts = conjuncts(nxt)
        settle = self.settle(post.bare(), read_state(nxt_c))
        have = list(start.facts)
        got = post.formula()
        steps = [settle] if settle is not None else []
        for h in nxt_facts:
            if h not in have:
                steps.append(self.fact(F.implies(F.conj(*have), h), "invariant side condition"))
        goal = F.implies(got, nxt)
        h2 = self.weaken(p, self.pb.pl(steps, goal))

        p = self.rule_iteration(h1, h2, program, theta, x, annot.x_init, annot.x_body)
        p = self.eliminate_loop_existential(p, x, annot.witness)
        return p, read_state(triple_parts(self.formula(p))[2])

    # ------------------------------------------------------------ goals

    def prove_goal(self, goal):
        """A kernel-checked triple for a :class:`Goal`; returns the final step."""
        p, post = self.prove_statement(read_state(goal.pre), goal.program, iter(goal.loops))
        if goal.post is None:
            return p
        got = triple_parts(self.formula(p))[2]
        if post is None:
            if got != goal.post and not is_tautology(F.implies(got, goal.post)):
                raise HoareError("the branches' outcomes do not give the postcondition")
            return self.weaken(p, self.pb.taut(F.implies(got, goal.post)) if got != goal.post else None)
        target = read_state(goal.post)
        steps = [s for s in [self.settle(post.bare(), target.bare())] if s is not None]
        for h in target.facts:
            if h not in post.facts:
                need = F.implies(F.conj(*post.facts), h) if post.facts else h
                steps.append(self.fact(need, "postcondition side condition"))
        return self.weaken(p, self.pb.pl(steps, F.implies(got, goal.post)))

    def render(self, comment=None):
        return render_script(self.pb.script, comment)


def contains_control(stmt):
    if isinstance(stmt, (M.If, M.While)):
        return True
    if isinstance(stmt, M.Seq):
        return contains_control(stmt.first) or contains_control(stmt.second)
    return False


def unfold(program):
    """The defining right-hand side for a composite control item formula."""
    op, node = program.op, program.args[0]
    c = lambda o, a: app(o, a, sort=L.CTRL)
    if op == "cA" and node.op == "plusA":
        a1, a2 = node.args
        return L.seq(c("cA", a1), c("cA", a2), app("plus", sort=L.CTRL))
    if op == "cB" and node.op == "leqB":
        a1, a2 = node.args
        return L.seq(c("cA", a2), c("cA", a1), app("leq", sort=L.CTRL))
    if op == "cS" and node.op == "asgnS":
        x, a = node.args
        return L.seq(c("cA", a), c("asgn", x))
    if op == "cS" and node.op == "seqS":
        return L.seq(c("cS", node.args[0]), c("cS", node.args[1]))
    if op == "cS" and node.op == "ifS":
        b, s1, s2 = node.args
        yes = L.seq(c("test", L.value_formula(True)), c("cS", s1))
        no = L.seq(c("test", L.value_formula(False)), c("cS", s2))
        return L.seq(c("cB", b), app("union", yes, no, sort=L.CTRL))
    if op == "cS" and node.op == "whileS":
        b, s = node.args
        body = L.seq(c("test", L.value_formula(True)), c("cS", s), c("cB", b))
        return L.seq(c("cB", b), c("star", body), c("test", L.value_formula(False)))
    raise UnsupportedProgram(f"{op}({node.op}) has no definition")


# ------------------------------------------------------------ goal files

@dataclass
class LoopSpec:
    variable: F.SVarAtom
    invariant: F.Formula
    x_init: F.Formula
    x_body: F.Formula
    witness: F.Formula


@dataclass
class Goal:
    pre: F.Formula
    program: object
    post: F.Formula = None
    loops: list = field(default_factory=list)
    program_path: str = None


def parse_goal(text, base_dir=None):
    """Read ``key: value`` lines: pre, program, post, and per loop
    invariant, variable, x_init, x_body, witness (in that loop's order)."""
    fields, order = {}, []
    key = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        head, sep, rest = line.partition(":")
        if sep and not raw[:1].isspace() and head.strip().replace("_", "").isalnum():
            key = head.strip()
            fields.setdefault(key, []).append(rest.strip())
            order.append(key)
        elif key is not None:
            fields[key][-1] += "\n" + line.strip()
        else:
            raise HoareError(f"goal line outside a field: {raw!r}")
    prog_field = fields.get("program", [None])[0]
    if prog_field is None or "pre" not in fields:
        raise HoareError("a goal needs 'pre:' and 'program:'")
    path = prog_field
    if base_dir and not os.path.isabs(path):
        cand = os.path.join(base_dir, path)
        if os.path.exists(cand):
            path = cand
    if not os.path.exists(path):
        from .kernel import DATA_DIR
        cand = os.path.join(DATA_DIR, prog_field)
        path = cand if os.path.exists(cand) else None
    program = M.load_program(path) if path else M.parse_program(prog_field)
    sig = L.machine_signature(M.program_variables(program))
    read = lambda s, sort=None: parse_formula(s, sig, sort)
    loops = []
    for i, inv in enumerate(fields.get("invariant", [])):
        def nth(k):
            vals = fields.get(k, [])
            if i >= len(vals):
                raise HoareError(f"loop {i + 1} is missing '{k}:'")
            return vals[i]
        x = read(nth("variable"), NAT)
        loops.append(LoopSpec(x, read(inv, CONFIG), read(nth("x_init"), NAT),
                              read(nth("x_body"), NAT), read(nth("witness"), NAT)))
    post = read(fields["post"][0], CONFIG) if "post" in fields else None
    return Goal(read(fields["pre"][0], CONFIG), program, post, loops, path)


def load_goal(path):
    with open(path) as fh:
        return parse_goal(fh.read(), os.path.dirname(os.path.abspath(path)))


def verify_goal(goal, extensions=None, check=True):
    """Build and check a script for ``goal``; returns ``(prover, report)``."""
    prover = HoareProver(M.program_variables(goal.program), extensions=extensions, check=check)
    prover.prove_goal(goal)
    return prover, check_proof(prover.pb.script)


# --------------------------------------------------------- the sum program

SUM_PROGRAM = "s := 0; i := 0; while ++ i <= n do s := s + i"


def sum_goal():
    """Correctness of the summation loop: from ``n = vn`` to ``s = vn(vn+1)/2, i = vn+1``."""
    program = M.parse_program(SUM_PROGRAM)
    vn, vi = F.svar("vn", NAT), F.svar("vi", NAT)
    one = L.nat(1)

    def tri(v):
        return app("divN", app("timesN", app("minusN", v, one, sort=NAT), v, sort=NAT),
                   L.nat(2), sort=NAT)

    def memory(s_val, i_val):
        return L.mem_formula([("n", vn), ("s", s_val), ("i", i_val)], L.MEMP)

    le = lambda a, b: app("leN", a, b, sort=BOOL)
    pre = L.config(L.VS, L.mem_formula([("n", vn)], L.MEMP))
    post = L.config(L.VS, memory(app("divN", app("timesN", vn, L.plus_n(vn, one), sort=NAT),
                                          L.nat(2), sort=NAT), L.plus_n(vn, one)))
    invariant = F.land(
        L.config(L.stack_formula([le(vi, vn)], L.VS), memory(tri(vi), vi)),
        F.At(TRUE, le(vi, L.plus_n(vn, one)), CONFIG))
    loop = LoopSpec(vi, invariant, one, L.plus_n(vi, one), L.plus_n(vn, one))
    return Goal(pre, program, post, [loop])


def verify_sum_program(extensions=None, check=False):
    """Script and report for the summation program's correctness triple."""
    prover, report = verify_goal(sum_goal(), extensions=extensions, check=check)
    return prover.pb.script, report


SUM_HEADER = ("cfg(vs, set(mem, n, vn)) -> [c(s := 0; i := 0; while ++ i <= n do s := s + i)]\n"
              "  cfg(vs, set(set(set(mem, n, vn), s, vn*(vn+1)/2), i, vn+1))")
