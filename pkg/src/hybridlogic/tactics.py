"""Derived inference steps that expand into ordinary kernel steps.

Every tactic appends steps to a :class:`ProofBuilder`; with ``check=True`` each
step is run through the kernel as it is emitted, so a broken tactic fails at
the offending step rather than at the end.
"""

from . import formulas as F
from .kernel import Extensions, ProofScript, Step, _Checker, _Fail, check_proof, is_tautology


class TacticError(Exception):
    pass


def children_of(f):
    if isinstance(f, F.Neg):
        return [f.body]
    if isinstance(f, F.Or):
        return [f.left, f.right]
    if isinstance(f, F.ModalApp):
        return list(f.args)
    if isinstance(f, (F.At, F.Forall)):
        return [f.body]
    return []


def rebuild(f, pos, child):
    if isinstance(f, F.Neg):
        return F.Neg(child)
    if isinstance(f, F.Or):
        return F.Or(child, f.right) if pos == 0 else F.Or(f.left, child)
    if isinstance(f, F.ModalApp):
        args = list(f.args)
        args[pos] = child
        return F.ModalApp(f.op, args, f.sort)
    if isinstance(f, F.At):
        return F.At(f.nominal, child, f.sort)
    if isinstance(f, F.Forall):
        return F.Forall(f.var, child)
    raise TacticError(f"no subformula position {pos} in an atom")


def subformula_at(f, path):
    for p in path:
        f = children_of(f)[p]
    return f


def replace_at(f, path, new):
    if not path:
        return new
    kids = children_of(f)
    return rebuild(f, path[0], replace_at(kids[path[0]], path[1:], new))


def polarity(f, path):
    """0 for a positive occurrence, 1 for a negative one."""
    neg = 0
    for p in path:
        if isinstance(f, F.Neg):
            neg ^= 1
        f = children_of(f)[p]
    return neg


def find_paths(f, target):
    """Every path at which ``target`` occurs in ``f``, outermost first."""
    out = []

    def go(g, path):
        if g == target:
            out.append(tuple(path))
            return
        for i, c in enumerate(children_of(g)):
            go(c, path + [i])

    go(f, [])
    return out


def _with(args, pos, value):
    args = list(args)
    args[pos] = value
    return args


class ProofBuilder:
    """Accumulates a proof script, reusing steps for formulas already proved."""

    def __init__(self, sig, extensions=None, profile="H@A", hyps=(), premises=(),
                 global_hyps=(), check=True):
        self.script = ProofScript(sig=sig, profile=profile,
                                  extensions=extensions if extensions is not None else Extensions(),
                                  hyps=list(hyps), premises=list(premises),
                                  global_hyps=list(global_hyps))
        self._known = {}
        self._checker = _Checker(self.script) if check else None

    # -------------------------------------------------------- basics

    @property
    def steps(self):
        return self.script.steps

    def formula(self, n):
        return self.script.steps[n - 1].formula

    def add(self, f, rule, *args):
        known = self._known.get(f)
        if known is not None:
            return known
        step = Step(f, rule, tuple(args))
        self.script.steps.append(step)
        n = len(self.script.steps)
        if self._checker is not None:
            try:
                self._checker.taint.append(self._checker.check(n, step))
            except _Fail as exc:
                self.script.steps.pop()
                raise TacticError(f"{rule} {' '.join(map(str, args))} rejected: "
                                  f"{exc.kind}: {exc.detail}\n  formula: {f}") from None
        self._known[f] = n
        return n

    def proved(self, f):
        return self._known.get(f)

    def check(self):
        return check_proof(self.script)

    def ax(self, name, f):
        return self.add(f, "Ax", name)

    def ext(self, label, f):
        return self.add(f, "Ext", label)

    def mp(self, i, j):
        imp = F.as_implies(self.formula(j))
        if imp is None or imp[0] != self.formula(i):
            raise TacticError(f"MP: step {j} is not an implication from step {i}")
        return self.add(imp[1], "MP", i, j)

    def taut(self, f):
        return self.ax("Taut", f)

    def pl(self, premises, goal):
        """Derive ``goal`` from ``premises`` by one tautology and a chain of MP."""
        known = self.proved(goal)
        if known is not None:
            return known
        chain = goal
        for p in reversed(premises):
            chain = F.implies(self.formula(p), chain)
        if not is_tautology(chain):
            raise TacticError("pl: goal does not follow propositionally:\n  "
                              + "\n  ".join(str(self.formula(p)) for p in premises)
                              + f"\n  => {goal}")
        cur = self.taut(chain)
        for p in premises:
            cur = self.mp(p, cur)
        return cur

    def chain(self, *imps):
        """From a->b, b->c, ... derive a->z."""
        first = F.as_implies(self.formula(imps[0]))[0]
        last = F.as_implies(self.formula(imps[-1]))[1]
        return self.pl(list(imps), F.implies(first, last))

    # ---------------------------------------------------- modal basics

    def box_mono(self, op, args, sort, pos, imp):
        """From ``a -> b`` derive ``op-box(.., a, ..) -> op-box(.., b, ..)``."""
        a, b = F.as_implies(self.formula(imp))
        ug_args = _with(args, pos, self.formula(imp))
        u = self.add(F.box(op, ug_args, sort), "UG", op, pos + 1, imp)
        lhs = F.box(op, _with(args, pos, a), sort)
        rhs = F.box(op, _with(args, pos, b), sort)
        k = self.ax("K", F.implies(F.box(op, ug_args, sort), F.implies(lhs, rhs)))
        return self.mp(u, k)

    def dual(self, op, args, sort):
        app = F.ModalApp(op, args, sort)
        return self.ax("Dual", F.iff(app, F.Neg(F.box(op, [F.Neg(a) for a in args], sort))))

    def dia_mono(self, op, args, sort, pos, imp):
        """From ``a -> b`` derive ``op(.., a, ..) -> op(.., b, ..)``."""
        a, b = F.as_implies(self.formula(imp))
        contra = self.pl([imp], F.implies(F.Neg(b), F.Neg(a)))
        nargs = [F.Neg(x) for x in args]
        bm = self.box_mono(op, nargs, sort, pos, contra)
        da = self.dual(op, _with(args, pos, a), sort)
        db = self.dual(op, _with(args, pos, b), sort)
        goal = F.implies(F.ModalApp(op, _with(args, pos, a), sort),
                         F.ModalApp(op, _with(args, pos, b), sort))
        return self.pl([bm, da, db], goal)

    def box_conj(self, op, args, sort, pos, a, b):
        """``op-box(..a..) & op-box(..b..) -> op-box(.. a & b ..)``."""
        both = F.land(a, b)
        t = self.taut(F.implies(a, F.implies(b, both)))
        u = self.add(F.box(op, _with(args, pos, self.formula(t)), sort), "UG", op, pos + 1, t)
        mid = F.implies(b, both)
        k1 = self.ax("K", F.implies(self.formula(u),
                                    F.implies(F.box(op, _with(args, pos, a), sort),
                                              F.box(op, _with(args, pos, mid), sort))))
        m1 = self.mp(u, k1)
        k2 = self.ax("K", F.implies(F.box(op, _with(args, pos, mid), sort),
                                    F.implies(F.box(op, _with(args, pos, b), sort),
                                              F.box(op, _with(args, pos, both), sort))))
        goal = F.implies(F.land(F.box(op, _with(args, pos, a), sort),
                                F.box(op, _with(args, pos, b), sort)),
                         F.box(op, _with(args, pos, both), sort))
        return self.pl([m1, k2], goal)

    def dia_or(self, op, args, sort, pos):
        """``op(.., X | Y, ..) -> op(..X..) | op(..Y..)``."""
        x, y = F.as_or(args[pos])
        nargs = [F.Neg(a) for a in args]
        target = F.Neg(F.Or(x, y))
        t = self.taut(F.implies(F.Neg(x), F.implies(F.Neg(y), target)))
        u = self.add(F.box(op, _with(nargs, pos, self.formula(t)), sort), "UG", op, pos + 1, t)
        mid = F.implies(F.Neg(y), target)
        k1 = self.ax("K", F.implies(self.formula(u),
                                    F.implies(F.box(op, _with(nargs, pos, F.Neg(x)), sort),
                                              F.box(op, _with(nargs, pos, mid), sort))))
        m1 = self.mp(u, k1)
        k2 = self.ax("K", F.implies(F.box(op, _with(nargs, pos, mid), sort),
                                    F.implies(F.box(op, _with(nargs, pos, F.Neg(y)), sort),
                                              F.box(op, _with(nargs, pos, target), sort))))
        d0 = self.dual(op, list(args), sort)
        dx = self.dual(op, _with(args, pos, x), sort)
        dy = self.dual(op, _with(args, pos, y), sort)
        goal = F.implies(F.ModalApp(op, args, sort),
                         F.Or(F.ModalApp(op, _with(args, pos, x), sort),
                              F.ModalApp(op, _with(args, pos, y), sort)))
        return self.pl([m1, k2, d0, dx, dy], goal)

    def at_mono(self, k, host, imp):
        """From ``a -> b`` derive ``@_k a -> @_k b``."""
        a, b = F.as_implies(self.formula(imp))
        g = self.add(F.At(k, self.formula(imp), host), "Gen@", k.name, imp)
        kat = self.ax("K@", F.implies(self.formula(g), F.implies(F.At(k, a, host), F.At(k, b, host))))
        return self.mp(g, kat)

    def forall_mono(self, x, imp):
        """From ``a -> b`` derive ``forall x a -> forall x b``."""
        a, b = F.as_implies(self.formula(imp))
        q2 = self.ax("Q2", F.implies(F.Forall(x, a), a))
        c = self.pl([q2, imp], F.implies(F.Forall(x, a), b))
        g = self.add(F.Forall(x, self.formula(c)), "Gen", x.name, c)
        q1 = self.ax("Q1", F.implies(self.formula(g),
                                     F.implies(F.Forall(x, a), F.Forall(x, b))))
        return self.mp(g, q1)

    # ------------------------------------------------- congruence

    def lift_imp(self, f, path, new, s):
        """Propagate an implication through the context ``f``.

        ``s`` proves ``old -> new`` when the occurrence at ``path`` is positive
        and ``new -> old`` when it is negative.  The result proves
        ``f -> f[new]`` or ``f[new] -> f`` respectively.
        """
        if not path:
            return s
        head, rest = path[0], path[1:]
        child = children_of(f)[head]
        t = self.lift_imp(child, rest, new, s)
        a, b = F.as_implies(self.formula(t))
        if isinstance(f, F.Neg):
            return self.pl([t], F.implies(F.Neg(b), F.Neg(a)))
        if isinstance(f, F.Or):
            return self.pl([t], F.implies(rebuild(f, head, a), rebuild(f, head, b)))
        if isinstance(f, F.ModalApp):
            return self.dia_mono(f.op, list(f.args), f.sort, head, t)
        if isinstance(f, F.At):
            return self.at_mono(f.nominal, f.sort, t)
        if isinstance(f, F.Forall):
            return self.forall_mono(f.var, t)
        raise TacticError("cannot descend into an atom")

    def rewrite(self, f, path, s_iff):
        """From ``old <-> new`` prove ``f <-> f[new]`` (``old`` sits at ``path``)."""
        old, new = F.as_iff(self.formula(s_iff))
        if subformula_at(f, path) != old:
            raise TacticError("rewrite: the equivalence does not match the subformula")
        g = replace_at(f, path, new)
        fwd = self.pl([s_iff], F.implies(old, new))
        back = self.pl([s_iff], F.implies(new, old))
        if polarity(f, path) == 0:
            s1 = self.lift_imp(f, path, new, fwd)
            s2 = self.lift_imp(g, path, old, back)
        else:
            s1 = self.lift_imp(g, path, old, fwd)
            s2 = self.lift_imp(f, path, new, back)
        return self.pl([s1, s2], F.iff(f, g))

    def rewrite_all(self, f, old, s_iff):
        """Rewrite every occurrence of ``old``; returns ``(step f<->g, g)``."""
        paths = find_paths(f, old)
        cur, steps = f, []
        for path in paths:
            st = self.rewrite(cur, path, s_iff)
            steps.append(st)
            cur = F.as_iff(self.formula(st))[1]
        if not steps:
            return None, f
        if len(steps) == 1:
            return steps[0], cur
        return self.pl(steps, F.iff(f, cur)), cur

    def replace_imp(self, f, path, s_imp):
        """From ``old -> new`` at a positive ``path`` prove ``f -> f[new]``."""
        if polarity(f, path) != 0:
            raise TacticError("replace_imp needs a positive position")
        old, new = F.as_implies(self.formula(s_imp))
        if subformula_at(f, path) != old:
            raise TacticError("replace_imp: implication does not match the subformula")
        return self.lift_imp(f, path, new, s_imp)

    # ----------------------------------------- @-formulas in contexts

    def back(self, op, args, sort, pos):
        """Back instance ``op(.., @_k psi, ..) -> @_k^sort psi``."""
        a = args[pos]
        return self.ax("Back", F.implies(F.ModalApp(op, args, sort), F.At(a.nominal, a.body, sort)))

    def self_dual(self, k, body, host):
        return self.ax("SelfDual", F.iff(F.At(k, body, host), F.Neg(F.At(k, F.Neg(body), host))))

    def persist(self, hyp, op, args, sort, pos):
        """``@_k phi -> op-box(.., @_k phi, ..)`` for an @-formula ``hyp`` of sort ``sort``."""
        k, phi = hyp.nominal, hyp.body
        si = F.At(k, phi, self._arg_sort(op, sort, pos))
        nargs = [F.Neg(a) for a in _with(args, pos, si)]
        neg_inner = F.At(k, F.Neg(phi), si.sort)
        b = self.back(op, _with(nargs, pos, neg_inner), sort, pos)
        sd_i = self.self_dual(k, phi, si.sort)
        flip = self.pl([sd_i], F.implies(F.Neg(si), neg_inner))
        dm = self.dia_mono(op, nargs, sort, pos, flip)
        sd = self.self_dual(k, phi, sort)
        goal = F.implies(F.At(k, phi, sort), F.box(op, _with(args, pos, si), sort))
        return self.pl([b, dm, sd], goal)

    def _arg_sort(self, op, sort, pos):
        for d in self.script.sig.operators_named(op):
            if d.result_sort == sort:
                return d.arg_sorts[pos]
        raise TacticError(f"unknown operator {op}")

    def push_at(self, f, path, hyp):
        """``f & @_k^s psi -> f[c & @_k^t psi]`` where ``c`` sits at ``path``.

        The path must go through modal applications only.
        """
        k, psi = hyp.nominal, hyp.body
        if not path:
            return self.taut(F.implies(F.land(f, hyp), F.land(f, hyp)))
        if not isinstance(f, F.ModalApp):
            raise TacticError("push_at descends through modal applications only")
        pos, rest = path[0], path[1:]
        phi = f.args[pos]
        inner = F.At(k, psi, phi.sort)
        args = list(f.args)
        neg_inner = F.At(k, F.Neg(psi), phi.sort)
        b = self.back(f.op, _with(args, pos, F.At(k, F.Neg(psi), phi.sort)), f.sort, pos)
        sd = self.self_dual(k, psi, f.sort)
        sdi = self.self_dual(k, psi, phi.sort)
        x, y = F.land(phi, inner), neg_inner
        split = self.pl([sdi], F.implies(phi, F.Or(x, y)))
        dm = self.dia_mono(f.op, args, f.sort, pos, split)
        do = self.dia_or(f.op, _with(args, pos, F.Or(x, y)), f.sort, pos)
        here = F.ModalApp(f.op, _with(args, pos, x), f.sort)
        step = self.pl([b, sd, dm, do], F.implies(F.land(f, hyp), here))
        if not rest:
            return step
        deeper = self.push_at(phi, rest, inner)
        dm2 = self.dia_mono(f.op, args, f.sort, pos, deeper)
        return self.chain(step, dm2)

    def at_from(self, f, path):
        """``f -> @_k^sort psi`` where ``@_k psi`` is a conjunct at ``path``.

        ``f`` at ``path`` must be ``c & @_k psi`` (or ``@_k psi`` itself) and
        the path must go through modal applications only.
        """
        if not path:
            parts = F.as_and(f)
            hyp = parts[1] if parts and isinstance(parts[1], F.At) else f
            return self.taut(F.implies(f, F.At(hyp.nominal, hyp.body, f.sort)))
        pos, rest = path[0], path[1:]
        r = self.at_from(f.args[pos], rest)
        target = F.as_implies(self.formula(r))[1]
        dm = self.dia_mono(f.op, list(f.args), f.sort, pos, r)
        b = self.back(f.op, _with(f.args, pos, target), f.sort, pos)
        return self.chain(dm, b)

    def extract_at(self, f, path):
        """``f -> f[c] & @_k^s psi`` where ``c & @_k psi`` sits at ``path``."""
        c, hyp = F.as_and(subformula_at(f, path))
        drop = self.taut(F.implies(F.land(c, hyp), c))
        p1 = self.replace_imp(f, path, drop)
        p2 = self.at_from(f, path)
        g = replace_at(f, path, c)
        return self.pl([p1, p2], F.implies(f, F.land(g, F.At(hyp.nominal, hyp.body, f.sort))))

    def cond_rewrite_all(self, f, old, new, hyp, leaf):
        """Conditional congruence for every occurrence of ``old``.

        ``leaf`` proves ``@_k^t psi -> (old <-> new)`` where ``t`` is the sort
        of ``old``.  Returns ``(step, g)`` where the step proves
        ``@_k^s psi -> (f <-> g)`` and ``g`` is ``f`` with ``old`` replaced.
        Occurrences under a binder are not supported.
        """
        k, psi = hyp.nominal, hyp.body
        here = F.At(k, psi, f.sort)
        if f == old:
            return leaf, new
        if not F.occurs(old, f):
            return None, f
        if isinstance(f, (F.Neg, F.Or)):
            parts, kids = [], []
            for c in children_of(f):
                st, g = self.cond_rewrite_all(c, old, new, hyp, leaf)
                if st is not None:
                    parts.append(st)
                kids.append(g)
            g = F.Neg(kids[0]) if isinstance(f, F.Neg) else F.Or(kids[0], kids[1])
            return self.pl(parts, F.implies(here, F.iff(f, g))), g
        if isinstance(f, F.ModalApp):
            steps, cur = [], f
            inner = None
            for pos, c in enumerate(f.args):
                t, c2 = self.cond_rewrite_all(c, old, new, hyp, leaf)
                if t is None:
                    continue
                inner = F.At(k, psi, c.sort)
                args = list(cur.args)
                nxt = rebuild(cur, pos, c2)
                push_f = self.push_at(cur, [pos], here)
                fwd = self.dia_mono(cur.op, args, cur.sort, pos,
                                    self.pl([t], F.implies(F.land(c, inner), c2)))
                push_g = self.push_at(nxt, [pos], here)
                back = self.dia_mono(cur.op, list(nxt.args), cur.sort, pos,
                                     self.pl([t], F.implies(F.land(c2, inner), c)))
                steps.append(self.pl([push_f, fwd, push_g, back],
                                     F.implies(here, F.iff(cur, nxt))))
                cur = nxt
            return self.pl(steps, F.implies(here, F.iff(f, cur))), cur
        if isinstance(f, F.At):
            t, c2 = self.cond_rewrite_all(f.body, old, new, hyp, leaf)
            c = f.body
            j, host = f.nominal, f.sort
            g = F.At(j, c2, host)
            inner_hyp = F.At(k, psi, c.sort)
            gen = self.add(F.At(j, self.formula(t), host), "Gen@", j.name, t)
            kat = self.ax("K@", F.implies(self.formula(gen),
                                          F.implies(F.At(j, inner_hyp, host),
                                                    F.At(j, F.iff(c, c2), host))))
            m = self.mp(gen, kat)
            agree = self.ax("Agree", F.iff(F.At(j, inner_hyp, host), here))
            d1 = self.at_mono(j, host, self.taut(F.implies(F.iff(c, c2), F.implies(c, c2))))
            d2 = self.at_mono(j, host, self.taut(F.implies(F.iff(c, c2), F.implies(c2, c))))
            k1 = self.ax("K@", F.implies(F.At(j, F.implies(c, c2), host),
                                         F.implies(F.At(j, c, host), g)))
            k2 = self.ax("K@", F.implies(F.At(j, F.implies(c2, c), host),
                                         F.implies(g, F.At(j, c, host))))
            return self.pl([m, agree, d1, d2, k1, k2], F.implies(here, F.iff(f, g))), g
        raise TacticError("cond_rewrite_all does not descend through binders")

    def dia_or_deep(self, f, path):
        """``f -> f[L] | f[R]`` for a disjunction ``L | R`` at ``path`` (modal positions only)."""
        pos = path[0]
        if len(path) == 1:
            return self.dia_or(f.op, list(f.args), f.sort, pos)
        inner = self.dia_or_deep(f.args[pos], path[1:])
        lifted = self.dia_mono(f.op, list(f.args), f.sort, pos, inner)
        split = F.as_implies(self.formula(inner))[1]
        top = self.dia_or(f.op, _with(f.args, pos, split), f.sort, pos)
        return self.chain(lifted, top)

    # ------------------------------------------------- quantifiers

    def exists_intro(self, x, body, y):
        """``body[y/x] -> exists x body`` for a state symbol ``y``."""
        inst = F.substitute(body, x, y)
        q2 = self.ax("Q2", F.implies(F.Forall(x, F.Neg(body)), F.Neg(inst)))
        return self.pl([q2], F.implies(inst, F.exists(x, body)))

    def exists_elim(self, x, imp):
        """From ``A -> C`` with ``x`` not free in ``C`` derive ``exists x A -> C``."""
        a, c = F.as_implies(self.formula(imp))
        if x in F.free_state_vars(c):
            raise TacticError(f"{x.name} occurs free in the conclusion")
        contra = self.pl([imp], F.implies(F.Neg(c), F.Neg(a)))
        g = self.add(F.Forall(x, self.formula(contra)), "Gen", x.name, contra)
        q1 = self.ax("Q1", F.implies(self.formula(g),
                                     F.implies(F.Neg(c), F.Forall(x, F.Neg(a)))))
        m = self.mp(g, q1)
        return self.pl([m], F.implies(F.exists(x, a), c))
