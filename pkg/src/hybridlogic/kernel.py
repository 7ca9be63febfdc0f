"""Hilbert-style proof checking for K, H(@) and H(@,forall) with axiom extensions.

A proof is a list of formulas, each carrying a justification.  Schema
matching is done by hand-written destructuring of the core syntax tree, so a
schema matches exactly when the formula has the required shape and the
repeated metavariables agree.
"""

from dataclasses import dataclass, field
import os

from . import formulas as F
from .sexpr import FormulaReader, ParseError, build_formula, format_formula, read_sexpr, tokenize
from .signature import load_signature


class KernelError(Exception):
    pass


class TooManyAtoms(KernelError):
    pass


class DuplicateLabel(KernelError):
    pass


class ScriptError(KernelError):
    """A malformed proof script, axiom set or lemma import."""


TAUTOLOGY_ATOM_LIMIT = 20

SCHEMAS = ("Taut", "K", "Dual", "K@", "Agree", "SelfDual", "Intro", "Back", "Ref",
           "Q1", "Q2", "Name", "Barcan", "Barcan@", "NomX")

_SCHEMA_ALIASES = {"Ksigma": "K", "Dualsigma": "Dual", "BarcanAt": "Barcan@",
                   "Nomx": "NomX", "Nom_x": "NomX", "KAt": "K@"}

PROFILES = {
    "K": {
        "axioms": {"Taut", "K", "Dual"},
        "rules": {"MP", "UG"},
    },
    "H@": {
        "axioms": {"Taut", "K", "Dual", "K@", "Agree", "SelfDual", "Intro", "Back", "Ref"},
        "rules": {"MP", "UG", "BroadcastS", "Gen@", "Name@", "Paste", "GlobalHyp"},
    },
    "H@A": {
        "axioms": set(SCHEMAS),
        "rules": {"MP", "UG", "BroadcastS", "Gen@", "Name@", "Paste", "GlobalHyp", "Gen"},
    },
}
_PROFILE_ALIASES = {"H@∀": "H@A", "H(@,A)": "H@A", "H(@)": "H@", "KSigma": "K"}


def profile_name(name):
    name = _PROFILE_ALIASES.get(name, name)
    if name not in PROFILES:
        raise ScriptError(f"unknown logic {name!r}; expected one of {', '.join(PROFILES)}")
    return name


# ------------------------------------------------------------- tautologies

def skeleton_atoms(f, out=None):
    """Maximal subformulas whose head is neither negation nor disjunction."""
    if out is None:
        out = {}
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, F.Neg):
            stack.append(g.body)
        elif isinstance(g, F.Or):
            stack.append(g.right)
            stack.append(g.left)
        elif g not in out:
            out[g] = len(out)
    return out


_COLUMNS = {}


def _columns(n):
    cols = _COLUMNS.get(n)
    if cols is None:
        rows = 1 << n
        cols = []
        for i in range(n):
            width = 1 << i
            pattern = ((1 << width) - 1) << width
            period = width * 2
            while period < rows:
                pattern |= pattern << period
                period *= 2
            cols.append(pattern & ((1 << rows) - 1))
        _COLUMNS[n] = cols
    return cols


def truth_table(f, atoms):
    n = len(atoms)
    cols = _columns(n)
    full = (1 << (1 << n)) - 1
    memo = {}

    def ev(g):
        if g in atoms:
            return cols[atoms[g]]
        got = memo.get(g)
        if got is not None:
            return got
        if isinstance(g, F.Neg):
            got = full ^ ev(g.body)
        else:
            got = ev(g.left) | ev(g.right)
        memo[g] = got
        return got

    return ev(f), full


def is_tautology(f):
    atoms = skeleton_atoms(f)
    if len(atoms) > TAUTOLOGY_ATOM_LIMIT:
        raise TooManyAtoms(f"propositional skeleton has {len(atoms)} atoms "
                           f"(limit {TAUTOLOGY_ATOM_LIMIT})")
    value, full = truth_table(f, atoms)
    return value == full


# ---------------------------------------------------------- axiom schemas

def _is_nominal(k):
    return isinstance(k, (F.NomAtom, F.CNomAtom))


def _match_k(f):
    outer = F.as_implies(f)
    if not outer:
        return False
    inner = F.as_implies(outer[1])
    if not inner:
        return False
    boxes = [F.as_box(outer[0]), F.as_box(inner[0]), F.as_box(inner[1])]
    if not all(boxes):
        return False
    (op, a, s), (op2, b, s2), (op3, c, s3) = boxes
    if not (op == op2 == op3 and s == s2 == s3 and len(a) == len(b) == len(c) > 0):
        return False
    for i in range(len(a)):
        if a[i] != F.implies(b[i], c[i]):
            continue
        if all(a[j] == b[j] == c[j] for j in range(len(a)) if j != i):
            return True
    return False


def _match_dual(f):
    pair = F.as_iff(f)
    if not pair or not isinstance(pair[0], F.ModalApp):
        return False
    lhs = pair[0]
    return pair[1] == F.Neg(F.box(lhs.op, [F.Neg(a) for a in lhs.args], lhs.sort))


def _match_k_at(f):
    outer = F.as_implies(f)
    if not outer or not isinstance(outer[0], F.At):
        return False
    first = outer[0]
    imp = F.as_implies(first.body)
    inner = F.as_implies(outer[1])
    if not imp or not inner:
        return False
    j, host = first.nominal, first.sort
    return inner[0] == F.At(j, imp[0], host) and inner[1] == F.At(j, imp[1], host)


def _match_agree(f):
    pair = F.as_iff(f)
    if not pair:
        return False
    lhs, rhs = pair
    if not (isinstance(lhs, F.At) and isinstance(lhs.body, F.At) and isinstance(rhs, F.At)):
        return False
    inner = lhs.body
    return rhs.nominal == inner.nominal and rhs.body == inner.body and rhs.sort == lhs.sort


def _match_self_dual(f):
    pair = F.as_iff(f)
    if not pair or not isinstance(pair[0], F.At):
        return False
    a = pair[0]
    return pair[1] == F.Neg(F.At(a.nominal, F.Neg(a.body), a.sort))


def _match_intro(f):
    outer = F.as_implies(f)
    if not outer or not _is_nominal(outer[0]):
        return False
    j = outer[0]
    pair = F.as_iff(outer[1])
    if not pair:
        return False
    phi = pair[0]
    return phi.sort == j.sort and pair[1] == F.At(j, phi, j.sort)


def _match_back(f):
    outer = F.as_implies(f)
    if not outer or not isinstance(outer[0], F.ModalApp) or not isinstance(outer[1], F.At):
        return False
    app, target = outer
    if target.sort != app.sort:
        return False
    return any(isinstance(a, F.At) and a.nominal == target.nominal and a.body == target.body
               for a in app.args)


def _match_ref(f):
    return isinstance(f, F.At) and f.body == f.nominal


def _match_q1(f):
    outer = F.as_implies(f)
    if not outer or not isinstance(outer[0], F.Forall):
        return False
    x = outer[0].var
    imp = F.as_implies(outer[0].body)
    inner = F.as_implies(outer[1])
    if not imp or not inner:
        return False
    phi, psi = imp
    return (inner[0] == phi and inner[1] == F.Forall(x, psi)
            and x not in F.free_state_vars(phi))


def _witness(phi, chi, x, bound=frozenset()):
    """Find what the free occurrences of ``x`` in ``phi`` became in ``chi``."""
    if isinstance(phi, F.SVarAtom) and phi == x and x not in bound:
        return chi
    if type(phi) is not type(chi):
        return None
    if isinstance(phi, F.Forall):
        return _witness(phi.body, chi.body, x, bound | {phi.var})
    kids, other = phi.children(), chi.children()
    if len(kids) != len(other):
        return None
    for a, b in zip(kids, other):
        w = _witness(a, b, x, bound)
        if w is not None:
            return w
    return None


def _match_q2(f):
    outer = F.as_implies(f)
    if not outer or not isinstance(outer[0], F.Forall):
        return False
    x, phi = outer[0].var, outer[0].body
    chi = outer[1]
    if chi == phi:
        return True
    y = _witness(phi, chi, x)
    if not isinstance(y, (F.SVarAtom, F.NomAtom, F.CNomAtom)) or y.sort != x.sort:
        return False
    if not F.substitutable(y, x, phi):
        return False
    return F.substitute(phi, x, y) == chi


def _match_name(f):
    ex = F.as_exists(f)
    return bool(ex) and ex[1] == ex[0]


def _match_barcan(f):
    outer = F.as_implies(f)
    if not outer or not isinstance(outer[0], F.Forall):
        return False
    x = outer[0].var
    lhs, rhs = F.as_box(outer[0].body), F.as_box(outer[1])
    if not lhs or not rhs:
        return False
    (op, a, s), (op2, b, s2) = lhs, rhs
    if op != op2 or s != s2 or len(a) != len(b):
        return False
    for i in range(len(a)):
        if b[i] != F.Forall(x, a[i]):
            continue
        others = [j for j in range(len(a)) if j != i]
        if all(a[j] == b[j] and x not in F.free_state_vars(a[j]) for j in others):
            return True
    return False


def _match_barcan_at(f):
    outer = F.as_implies(f)
    if not outer or not isinstance(outer[0], F.Forall):
        return False
    x, body = outer[0].var, outer[0].body
    if not isinstance(body, F.At):
        return False
    return outer[1] == F.At(body.nominal, F.Forall(x, body.body), body.sort)


def _match_nom_x(f):
    outer = F.as_implies(f)
    if not outer:
        return False
    parts = F.as_and(outer[0])
    if not parts:
        return False
    a, b = parts
    c = outer[1]
    if not (isinstance(a, F.At) and isinstance(b, F.At) and isinstance(c, F.At)):
        return False
    x = a.body
    return (isinstance(x, F.SVarAtom) and b.body == x
            and a.sort == b.sort == c.sort
            and c.nominal == a.nominal and c.body == b.nominal)


_MATCHERS = {
    "Taut": is_tautology,
    "K": _match_k,
    "Dual": _match_dual,
    "K@": _match_k_at,
    "Agree": _match_agree,
    "SelfDual": _match_self_dual,
    "Intro": _match_intro,
    "Back": _match_back,
    "Ref": _match_ref,
    "Q1": _match_q1,
    "Q2": _match_q2,
    "Name": _match_name,
    "Barcan": _match_barcan,
    "Barcan@": _match_barcan_at,
    "NomX": _match_nom_x,
}


def schema_id(name):
    name = _SCHEMA_ALIASES.get(name, name)
    if name not in _MATCHERS:
        raise KeyError(name)
    return name


def match_axiom(schema, f):
    return _MATCHERS[schema_id(schema)](f)


def matching_schemas(f):
    out = []
    for name in SCHEMAS:
        try:
            if _MATCHERS[name](f):
                out.append(name)
        except TooManyAtoms:
            pass
    return out


# ------------------------------------------------------------- extensions

@dataclass
class Extension:
    label: str
    formula: F.Formula
    distinct: list = field(default_factory=list)
    fresh: list = field(default_factory=list)
    provenance: str = "axiom"

    @property
    def pure(self):
        return F.is_forall_exists_pure(self.formula)


class Extensions:
    """Labelled axiom schemes instantiated by uniform sorted substitution.

    Propositional variables stand for arbitrary formulas of their sort,
    nominals for nominals or constant nominals of their sort, and state
    variables for state variables (injectively).  Constant nominals are fixed.
    """

    def __init__(self, members=()):
        self._members = {}
        for m in members:
            self.add(m)

    def add(self, ext):
        if ext.label in self._members:
            raise DuplicateLabel(ext.label)
        self._members[ext.label] = ext
        return self

    def register(self, formula, label, distinct=(), fresh=(), provenance="axiom"):
        return self.add(Extension(label, formula, list(distinct), list(fresh), provenance))

    def without(self, *labels):
        return Extensions(m for m in self._members.values() if m.label not in labels)

    def merged(self, other):
        out = Extensions(self._members.values())
        for m in other:
            out.add(m)
        return out

    def __contains__(self, label):
        return label in self._members

    def __getitem__(self, label):
        return self._members[label]

    def __iter__(self):
        return iter(self._members.values())

    def __len__(self):
        return len(self._members)

    def labels(self):
        return list(self._members)

    @property
    def all_pure(self):
        return all(m.pure for m in self._members.values())

    def match(self, label, f):
        """Return the binding instantiating extension ``label`` to ``f`` or None."""
        ext = self._members.get(label)
        if ext is None:
            return None
        return match_extension(ext, f)


def match_extension(ext, f):
    binding = {}
    if not _match_pattern(ext.formula, f, binding):
        return None
    svar_images = [v for k, v in binding.items() if isinstance(k, F.SVarAtom)]
    if len(set(svar_images)) != len(svar_images):
        return None
    if not _capture_free(ext.formula, binding, frozenset()):
        return None
    for a, b in ext.distinct:
        if a in binding and b in binding and binding[a] == binding[b]:
            return None
    for x, others in ext.fresh:
        image = binding.get(x, x)
        for p in others:
            target = binding.get(p, p)
            if isinstance(image, F.SVarAtom):
                if image in F.free_state_vars(target):
                    return None
            elif F.occurs(image, target):
                return None
    return binding


def _bind(binding, pat, f):
    got = binding.get(pat)
    if got is None:
        binding[pat] = f
        return True
    return got == f


def _match_pattern(pat, f, binding):
    if isinstance(pat, F.PropAtom):
        return f.sort == pat.sort and _bind(binding, pat, f)
    if isinstance(pat, F.NomAtom):
        return _is_nominal(f) and f.sort == pat.sort and _bind(binding, pat, f)
    if isinstance(pat, F.SVarAtom):
        return isinstance(f, F.SVarAtom) and f.sort == pat.sort and _bind(binding, pat, f)
    if isinstance(pat, F.CNomAtom):
        return pat == f
    if type(pat) is not type(f) or pat.sort != f.sort:
        return False
    if isinstance(pat, F.ModalApp):
        if pat.op != f.op or len(pat.args) != len(f.args):
            return False
        return all(_match_pattern(a, b, binding) for a, b in zip(pat.args, f.args))
    if isinstance(pat, F.At):
        return (_match_pattern(pat.nominal, f.nominal, binding)
                and _match_pattern(pat.body, f.body, binding))
    if isinstance(pat, F.Forall):
        return (_match_pattern(pat.var, f.var, binding)
                and _match_pattern(pat.body, f.body, binding))
    if isinstance(pat, F.Neg):
        return _match_pattern(pat.body, f.body, binding)
    if isinstance(pat, F.Or):
        return (_match_pattern(pat.left, f.left, binding)
                and _match_pattern(pat.right, f.right, binding))
    return False


def _capture_free(pat, binding, bound):
    """No instance of a propositional metavariable is captured by a binder."""
    if isinstance(pat, F.PropAtom):
        return not (F.free_state_vars(binding[pat]) & bound)
    if isinstance(pat, F.Atom):
        return True
    if isinstance(pat, F.Forall):
        return _capture_free(pat.body, binding, bound | {binding[pat.var]})
    return all(_capture_free(c, binding, bound) for c in pat.children())


# --------------------------------------------------------------- scripts

@dataclass
class Step:
    formula: F.Formula
    rule: str
    args: tuple = ()
    line: int = 0

    def justification(self):
        return " ".join([self.rule] + [str(a) for a in self.args])


@dataclass
class ProofScript:
    sig: object
    profile: str = "H@A"
    extensions: Extensions = field(default_factory=Extensions)
    hyps: list = field(default_factory=list)
    global_hyps: list = field(default_factory=list)
    premises: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    goal: F.Formula = None
    sig_path: str = None
    axiomsets: list = field(default_factory=list)
    uses: list = field(default_factory=list)
    inline_axioms: list = field(default_factory=list)

    @property
    def conclusion(self):
        return self.steps[-1].formula if self.steps else None


@dataclass
class Diagnostic:
    step: int
    kind: str
    detail: str

    def to_dict(self):
        return {"step": self.step, "kind": self.kind, "detail": self.detail}

    def __str__(self):
        where = f"step {self.step}" if self.step else "script"
        return f"{where}: {self.kind}: {self.detail}"


@dataclass
class CheckReport:
    diagnostics: list
    steps: int
    conclusion: object = None
    profile: str = None
    pure_extensions: bool = True
    extensions_used: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.diagnostics

    def first_failure(self):
        return self.diagnostics[0] if self.diagnostics else None

    def to_dict(self):
        return {
            "ok": self.ok,
            "steps": self.steps,
            "profile": self.profile,
            "conclusion": format_formula(self.conclusion) if self.conclusion is not None else None,
            "pure_extensions": self.pure_extensions,
            "extensions_used": self.extensions_used,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }


class _Fail(Exception):
    def __init__(self, kind, detail):
        super().__init__(detail)
        self.kind = kind
        self.detail = detail


def _need(cond, kind, detail):
    if not cond:
        raise _Fail(kind, detail)


# taint levels of a derived formula
_THEOREM, _PREMISE, _GLOBAL, _LOCAL = 0, 1, 2, 3


def _profile_admits_formula(profile, f):
    if profile == "H@A":
        return None
    for g in F.subformulas(f):
        if profile != "H@A" and isinstance(g, (F.Forall, F.SVarAtom)):
            return "binders and state variables need the H@A logic"
        if profile == "K" and isinstance(g, (F.At, F.NomAtom, F.CNomAtom)):
            return "nominals and @ need the H@ or H@A logic"
    return None


class _Checker:
    def __init__(self, script):
        self.script = script
        self.profile = PROFILES[script.profile]
        self.taint = []
        self.used = set()

    def cite(self, n, current):
        _need(isinstance(n, int) and 1 <= n < current, "BadIndex",
              f"step {n} is not an earlier step")
        return self.script.steps[n - 1].formula, self.taint[n - 1]

    def rule_allowed(self, rule):
        _need(rule in self.profile["rules"], "ProfileViolation",
              f"rule {rule} is not part of logic {self.script.profile}")

    def check(self, idx, step):
        """Check step ``idx`` (1-based); return its taint level."""
        f, rule, args = step.formula, step.rule, step.args
        bad = _profile_admits_formula(self.script.profile, f)
        _need(bad is None, "ProfileViolation", bad or "")
        if rule == "Ax":
            (name,) = args
            try:
                name = schema_id(name)
            except KeyError:
                raise _Fail("SchemaMismatch", f"unknown axiom schema {name}")
            _need(name in self.profile["axioms"], "ProfileViolation",
                  f"axiom {name} is not part of logic {self.script.profile}")
            try:
                ok = match_axiom(name, f)
            except TooManyAtoms as exc:
                raise _Fail("SchemaMismatch", str(exc))
            _need(ok, "SchemaMismatch", f"not an instance of {name}")
            return _THEOREM
        if rule == "Ext":
            (label,) = args
            _need(label in self.script.extensions, "UnknownExtension",
                  f"no extension labelled {label}")
            _need(self.script.extensions.match(label, f) is not None, "SchemaMismatch",
                  f"not an instance of extension {label}")
            self.used.add(label)
            return _THEOREM
        if rule == "Hyp":
            (n,) = args
            _need(1 <= n <= len(self.script.hyps), "BadIndex", f"no hypothesis {n}")
            _need(f == self.script.hyps[n - 1], "SchemaMismatch", f"formula is not hypothesis {n}")
            return _LOCAL
        if rule == "Premise":
            (n,) = args
            _need(1 <= n <= len(self.script.premises), "BadIndex", f"no premise {n}")
            _need(f == self.script.premises[n - 1], "SchemaMismatch", f"formula is not premise {n}")
            return _PREMISE
        if rule == "GlobalHyp":
            self.rule_allowed(rule)
            sort, j, n = args
            _need(1 <= n <= len(self.script.global_hyps), "BadIndex", f"no global hypothesis {n}")
            gsort, gamma = self.script.global_hyps[n - 1]
            _need(gsort == sort, "SideConditionViolated",
                  f"global hypothesis {n} has sort {gsort}, not {sort}")
            _need(isinstance(f, F.At) and f.nominal.name == j and f.body == gamma,
                  "SchemaMismatch", f"formula is not @_{j} of global hypothesis {n}")
            return _GLOBAL
        if rule == "MP":
            self.rule_allowed(rule)
            i, j = args
            a, ta = self.cite(i, idx)
            b, tb = self.cite(j, idx)
            imp = F.as_implies(b)
            _need(imp is not None, "SchemaMismatch", f"step {j} is not an implication")
            _need(imp[0] == a, "SchemaMismatch", f"antecedent of step {j} is not step {i}")
            _need(imp[1] == f, "SchemaMismatch", f"consequent of step {j} is not this formula")
            return max(ta, tb)
        # every remaining rule is a single-premise rule on theorems
        self.rule_allowed(rule)
        *params, i = args
        prem, t = self.cite(i, idx)
        _need(t != _LOCAL, "SideConditionViolated",
              f"{rule} cannot be applied to a formula depending on a local hypothesis")
        if rule == "UG":
            op, pos = params
            bx = F.as_box(f)
            _need(bx is not None and bx[0] == op, "SchemaMismatch", f"formula is not a {op}-box")
            _need(1 <= pos <= len(bx[1]), "BadIndex", f"{op} has no argument {pos}")
            _need(bx[1][pos - 1] == prem, "SchemaMismatch",
                  f"argument {pos} of the box is not step {i}")
        elif rule == "Gen@":
            (j,) = params
            _need(isinstance(f, F.At) and f.nominal.name == j and f.body == prem,
                  "SchemaMismatch", f"formula is not @_{j} of step {i}")
        elif rule == "BroadcastS":
            (target,) = params
            _need(isinstance(prem, F.At), "SchemaMismatch", f"step {i} is not an @-formula")
            _need(f == F.At(prem.nominal, prem.body, target), "SchemaMismatch",
                  f"formula is not step {i} re-hosted at sort {target}")
        elif rule == "Name@":
            _need(t != _GLOBAL, "SideConditionViolated",
                  "Name@ cannot discharge a formula depending on a global hypothesis")
            _need(isinstance(prem, F.At) and prem.body == f, "SchemaMismatch",
                  f"step {i} is not @_j of this formula")
            j = prem.nominal
            _need(isinstance(j, F.NomAtom), "SideConditionViolated",
                  f"{j.name} is a constant nominal; Name@ needs an ordinary nominal")
            _need(not F.occurs(j, f), "SideConditionViolated", f"{j.name} occurs in the formula")
        elif rule == "Paste":
            _need(t != _GLOBAL, "SideConditionViolated",
                  "Paste cannot discharge a formula depending on a global hypothesis")
            self._paste(prem, f, i)
        elif rule == "Gen":
            (x,) = params
            _need(isinstance(f, F.Forall) and f.var.name == x and f.body == prem,
                  "SchemaMismatch", f"formula is not forall {x} of step {i}")
        else:
            raise _Fail("SchemaMismatch", f"unknown rule {rule}")
        return t

    @staticmethod
    def _paste(prem, f, i):
        imp, cur = F.as_implies(prem), F.as_implies(f)
        _need(imp is not None and cur is not None, "SchemaMismatch", "Paste needs implications")
        _need(imp[1] == cur[1], "SchemaMismatch", f"consequents of step {i} and this formula differ")
        psi = cur[1]
        parts = F.as_and(imp[0])
        _need(parts is not None, "SchemaMismatch", f"antecedent of step {i} is not a conjunction")
        left, right = parts
        _need(isinstance(left, F.At) and isinstance(left.body, F.ModalApp)
              and isinstance(right, F.At), "SchemaMismatch",
              f"antecedent of step {i} is not @_j sigma(..k..) and @_k phi")
        _need(isinstance(cur[0], F.At) and isinstance(cur[0].body, F.ModalApp)
              and cur[0].nominal == left.nominal and cur[0].sort == left.sort,
              "SchemaMismatch", "antecedent is not @_j sigma(...)")
        j, k, phi = left.nominal, right.nominal, right.body
        app, new = left.body, cur[0].body
        _need(app.op == new.op and app.sort == new.sort and len(app.args) == len(new.args),
              "SchemaMismatch", "operators differ")
        _need(right.sort == left.sort, "SchemaMismatch", "@ host sorts differ")
        positions = [p for p in range(len(app.args))
                     if app.args[p] == k and new.args[p] == phi
                     and all(app.args[q] == new.args[q] for q in range(len(app.args)) if q != p)]
        _need(positions, "SchemaMismatch", f"no argument of step {i} is {k.name} replaced by phi")
        p = positions[0]
        _need(isinstance(k, F.NomAtom), "SideConditionViolated",
              f"{k.name} must be an ordinary nominal")
        _need(k != j, "SideConditionViolated", f"{k.name} coincides with {j.name}")
        _need(not F.occurs(k, phi) and not F.occurs(k, psi), "SideConditionViolated",
              f"{k.name} occurs in phi or psi")
        _need(not any(F.occurs(k, a) for q, a in enumerate(app.args) if q != p),
              "SideConditionViolated", f"{k.name} occurs in another argument")


def check_step(script, idx, taints=None):
    """Check one step in the context of the script's earlier steps."""
    chk = _Checker(script)
    if taints is None:
        for n in range(1, idx):
            try:
                chk.taint.append(chk.check(n, script.steps[n - 1]))
            except _Fail:
                chk.taint.append(_THEOREM)
    else:
        chk.taint = list(taints)
    try:
        chk.check(idx, script.steps[idx - 1])
        return None
    except _Fail as exc:
        return Diagnostic(idx, exc.kind, exc.detail)


def check_proof(script):
    chk = _Checker(script)
    diags = []
    for s, h in enumerate(script.hyps, 1):
        if script.steps and h.sort != script.steps[-1].formula.sort:
            diags.append(Diagnostic(0, "SortMismatch",
                                    f"hypothesis {s} has sort {h.sort}, the conclusion "
                                    f"{script.steps[-1].formula.sort}"))
    for idx, step in enumerate(script.steps, 1):
        try:
            chk.taint.append(chk.check(idx, step))
        except _Fail as exc:
            chk.taint.append(_THEOREM)
            diags.append(Diagnostic(idx, exc.kind, exc.detail))
        except (ValueError, TypeError) as exc:
            chk.taint.append(_THEOREM)
            diags.append(Diagnostic(idx, "BadJustification", str(exc)))
    if not script.steps:
        diags.append(Diagnostic(0, "EmptyProof", "the script has no steps"))
    elif script.goal is not None and script.goal != script.steps[-1].formula:
        diags.append(Diagnostic(len(script.steps), "ConclusionMismatch",
                                "the last step is not the stated goal"))
    return CheckReport(diags, len(script.steps), script.conclusion, script.profile,
                       script.extensions.all_pure, sorted(chk.used))


# ------------------------------------------------------- file formats

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def resolve_path(name, base_dir):
    candidates = [name] if os.path.isabs(name) else [
        os.path.join(base_dir or ".", name), os.path.join(DATA_DIR, name)]
    for c in candidates:
        if os.path.exists(c):
            return c
    raise ScriptError(f"cannot find {name}")


def _balanced(text):
    if ";;" in text:
        text = "".join(tok for tok, _ in tokenize(text))
    return text.count("(") - text.count(")")


def _parse_formula_text(text, sig, expected=None):
    return build_formula(read_sexpr(text), sig, expected)


def parse_axiomset(text, sig, provenance="axiom"):
    """Read ``axiom LABEL : FORMULA`` entries with optional indented
    ``distinct a b`` and ``fresh x in p q`` lines."""
    entries = []
    pending = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if pending is not None and pending["depth"] > 0:
            pending["text"] += "\n" + line
            pending["depth"] = _balanced(pending["text"])
            continue
        words = stripped.split()
        if words[0] == "axiom":
            if ":" not in stripped:
                raise ScriptError(f"line {lineno}: expected 'axiom LABEL : FORMULA'")
            head, body = stripped.split(":", 1)
            label = head.split()[1]
            pending = {"label": label, "text": body, "depth": _balanced(body),
                       "distinct": [], "fresh": [], "line": lineno}
            entries.append(pending)
        elif words[0] == "distinct" and pending is not None:
            pending["distinct"].append(tuple(words[1:3]))
        elif words[0] == "fresh" and pending is not None:
            if len(words) < 4 or words[2] != "in":
                raise ScriptError(f"line {lineno}: expected 'fresh x in p ...'")
            pending["fresh"].append((words[1], words[3:]))
        else:
            raise ScriptError(f"line {lineno}: unexpected {words[0]!r}")
    out = Extensions()
    for e in entries:
        if e["depth"] != 0:
            raise ScriptError(f"line {e['line']}: unbalanced parentheses in axiom {e['label']}")
        try:
            f = _parse_formula_text(e["text"], sig)
        except (ParseError, F.FormulaError) as exc:
            raise ScriptError(f"axiom {e['label']}: {exc}") from exc
        syms = {a.name: a for a in F.atoms_of(f)}

        def sym(name):
            if name not in syms:
                raise ScriptError(f"axiom {e['label']}: side condition names unknown {name}")
            return syms[name]

        distinct = [(sym(a), sym(b)) for a, b in e["distinct"]]
        fresh = [(sym(x), [sym(p) for p in ps]) for x, ps in e["fresh"]]
        out.register(f, e["label"], distinct, fresh, provenance)
    return out


def load_axiomset(path, sig):
    with open(path) as fh:
        return parse_axiomset(fh.read(), sig, provenance=os.path.basename(path))


def parse_justification(text):
    words = text.split()
    if not words:
        raise ScriptError("missing justification")
    rule, rest = words[0], words[1:]

    def ints(ws):
        try:
            return tuple(int(w) for w in ws)
        except ValueError:
            raise ScriptError(f"expected step numbers in {text!r}")

    arity = {"Ax": 1, "Ext": 1, "Hyp": 1, "Premise": 1, "MP": 2, "UG": 3, "Gen@": 2,
             "BroadcastS": 2, "Name@": 1, "Paste": 1, "Gen": 2, "GlobalHyp": 3}
    if rule not in arity:
        raise ScriptError(f"unknown rule {rule!r}")
    if len(rest) != arity[rule]:
        raise ScriptError(f"{rule} takes {arity[rule]} argument(s)")
    if rule in ("Ax", "Ext"):
        return rule, (rest[0],)
    if rule in ("Hyp", "Premise", "MP", "Name@", "Paste"):
        return rule, ints(rest)
    if rule == "UG":
        return rule, (rest[0],) + ints(rest[1:])
    if rule == "GlobalHyp":
        return rule, (rest[0], rest[1]) + ints(rest[2:])
    return rule, (rest[0],) + ints(rest[1:])


def _split_step(text):
    """Split ``<formula> ; <justification>`` at the first top-level ';'."""
    if ";;" not in text:
        i = text.find(";")
        while i >= 0:
            if text.count("(", 0, i) == text.count(")", 0, i):
                return text[:i], text[i + 1:].strip()
            i = text.find(";", i + 1)
        raise ScriptError("step has no '; justification'")
    depth = 0
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == ";":
            if i + 1 < len(text) and text[i + 1] == ";":
                j = text.find("\n", i)
                i = len(text) if j < 0 else j
                continue
            if depth == 0:
                return text[:i], text[i + 1:].strip()
        i += 1
    raise ScriptError("step has no '; justification'")


class _Loader:
    def __init__(self):
        self.cache = {}
        self.active = set()

    def load(self, path):
        path = os.path.abspath(path)
        if path in self.cache:
            return self.cache[path]
        if path in self.active:
            raise ScriptError(f"circular lemma import through {path}")
        self.active.add(path)
        try:
            with open(path) as fh:
                text = fh.read()
            script = self.parse(text, os.path.dirname(path))
        finally:
            self.active.discard(path)
        self.cache[path] = script
        return script

    def parse(self, text, base_dir):
        header, steps_text = [], []
        in_steps = False
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].rstrip()
            if not line.strip():
                continue
            stripped = line.strip()
            head = stripped.split(".", 1)[0]
            if head.isdigit() and stripped[len(head):len(head) + 1] == ".":
                in_steps = True
                steps_text.append([int(head), stripped[len(head) + 1:], lineno])
            elif in_steps and steps_text and (raw[:1].isspace() or _balanced(steps_text[-1][1]) > 0):
                steps_text[-1][1] += "\n" + stripped
            elif in_steps:
                raise ScriptError(f"line {lineno}: header directive after the first step")
            elif header and _balanced(header[-1][1]) > 0:
                header[-1][1] += "\n" + stripped
            else:
                header.append([lineno, stripped])
        sig = None
        script = ProofScript(sig=None)
        ext = Extensions()
        inline = []
        for lineno, line in header:
            words = line.split(None, 1)
            key, rest = words[0], (words[1] if len(words) > 1 else "")
            try:
                if key == "logic":
                    script.profile = profile_name(rest.strip())
                elif key == "sig":
                    script.sig_path = rest.strip()
                    sig = load_signature(resolve_path(rest.strip(), base_dir))
                    script.sig = sig
                elif key == "axiomset":
                    self._need_sig(sig, lineno)
                    path = resolve_path(rest.strip(), base_dir)
                    script.axiomsets.append(rest.strip())
                    ext = ext.merged(load_axiomset(path, sig))
                elif key == "use":
                    self._need_sig(sig, lineno)
                    parts = rest.split()
                    label = None
                    if len(parts) == 3 and parts[1] == "as":
                        label = parts[2]
                    elif len(parts) != 1:
                        raise ScriptError("expected 'use FILE [as LABEL]'")
                    path = resolve_path(parts[0], base_dir)
                    ext = ext.merged(Extensions([self.lemma(path, sig, label)]))
                    script.uses.append(rest.strip())
                elif key in ("hyp", "premise", "goal"):
                    self._need_sig(sig, lineno)
                    f = _parse_formula_text(rest, sig)
                    if key == "hyp":
                        script.hyps.append(f)
                    elif key == "premise":
                        script.premises.append(f)
                    else:
                        script.goal = f
                elif key in ("axiom", "distinct", "fresh"):
                    self._need_sig(sig, lineno)
                    inline.append(line)
                elif key == "globalhyp":
                    self._need_sig(sig, lineno)
                    sort, body = rest.split(None, 1)
                    script.global_hyps.append((sort, _parse_formula_text(body, sig, sort)))
                else:
                    raise ScriptError(f"unknown directive {key!r}")
            except (ParseError, F.FormulaError) as exc:
                raise ScriptError(f"line {lineno}: {exc}") from exc
            except DuplicateLabel as exc:
                raise ScriptError(f"line {lineno}: duplicate extension label {exc}") from exc
            except ScriptError as exc:
                if str(exc).startswith("line "):
                    raise
                raise ScriptError(f"line {lineno}: {exc}") from exc
        self._need_sig(sig, 0)
        if inline:
            own = parse_axiomset("\n".join(inline), sig, provenance="inline")
            script.inline_axioms = list(own)
            try:
                ext = ext.merged(own)
            except DuplicateLabel as exc:
                raise ScriptError(f"duplicate extension label {exc}") from exc
        script.extensions = ext
        reader = FormulaReader(sig)
        for expected, (number, body, lineno) in enumerate(steps_text, 1):
            if number != expected:
                raise ScriptError(f"line {lineno}: step numbered {number}, expected {expected}")
            try:
                ftext, jtext = _split_step(body)
                f = reader.build(read_sexpr(ftext))
                rule, args = parse_justification(jtext)
            except (ParseError, F.FormulaError, ScriptError) as exc:
                raise ScriptError(f"line {lineno}: {exc}") from exc
            script.steps.append(Step(f, rule, args, lineno))
        return script

    @staticmethod
    def _need_sig(sig, lineno):
        if sig is None:
            raise ScriptError(f"line {lineno}: a 'sig' directive must come first")

    def lemma(self, path, sig, label):
        lemma = self.load(path)
        report = check_proof(lemma)
        if not report.ok:
            raise ScriptError(f"lemma {path} does not check: {report.first_failure()}")
        if lemma.hyps or lemma.premises or lemma.global_hyps:
            raise ScriptError(f"lemma {path} has hypotheses and cannot be imported as a theorem")
        conclusion = lemma.conclusion
        try:
            F.sort_of(sig, conclusion)
        except (F.FormulaError, Exception) as exc:
            raise ScriptError(f"lemma {path} uses symbols outside this signature: {exc}")
        label = label or os.path.splitext(os.path.basename(path))[0]
        return Extension(label, conclusion, provenance=f"lemma {os.path.basename(path)}")


def parse_script(text, base_dir=None):
    return _Loader().parse(text, base_dir)


def load_script(path):
    return _Loader().load(path)


def render_script(script, header_comment=None):
    lines = []
    if header_comment:
        lines += [f"# {c}" for c in header_comment.splitlines()]
    lines.append(f"logic {script.profile}")
    lines.append(f"sig {script.sig_path}")
    for a in script.axiomsets:
        lines.append(f"axiomset {a}")
    for u in script.uses:
        lines.append(f"use {u}")
    for e in script.inline_axioms:
        lines.append(f"axiom {e.label} : {format_formula(e.formula)}")
        lines += [f"  distinct {a.name} {b.name}" for a, b in e.distinct]
        lines += [f"  fresh {x.name} in {' '.join(p.name for p in ps)}" for x, ps in e.fresh]
    for h in script.hyps:
        lines.append(f"hyp {format_formula(h)}")
    for s, g in script.global_hyps:
        lines.append(f"globalhyp {s} {format_formula(g)}")
    for p in script.premises:
        lines.append(f"premise {format_formula(p)}")
    if script.goal is not None:
        lines.append(f"goal {format_formula(script.goal)}")
    for n, st in enumerate(script.steps, 1):
        lines.append(f"{n}. {format_formula(st.formula)} ; {st.justification()}")
    return "\n".join(lines) + "\n"


def check_text(text, base_dir=None):
    """Parse and check; script-format problems become a failed report."""
    try:
        script = parse_script(text, base_dir)
    except (ScriptError, OSError) as exc:
        return None, CheckReport([Diagnostic(0, "ScriptError", str(exc))], 0)
    return script, check_proof(script)


def check_file(path):
    try:
        script = load_script(path)
    except (ScriptError, OSError) as exc:
        return None, CheckReport([Diagnostic(0, "ScriptError", str(exc))], 0)
    return script, check_proof(script)
