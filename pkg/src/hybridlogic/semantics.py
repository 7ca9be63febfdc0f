"""Finite many-sorted Kripke frames and models, satisfaction and validity.

Satisfaction is computed extension-wise: ``extension`` returns the set of
worlds (as a bitmask over the worlds of the formula's sort) where a formula
holds under an assignment.  Pointwise ``satisfies`` is read off that set.
"""

import itertools
import json

from . import formulas as F
from .signature import SignatureError


class SemanticsError(Exception):
    pass


class UnknownWorld(SemanticsError):
    pass


class UnboundStateVariable(SemanticsError):
    pass


class UnboundSymbol(SemanticsError):
    pass


class NotNamed(SemanticsError):
    pass


class ModelFormatError(SemanticsError):
    pass


class Frame:
    """Worlds per sort, one relation per operator, constant-nominal designations.

    ``worlds`` maps a sort to an ordered list of world names (names are unique
    across sorts).  ``relations`` maps ``(op, result_sort)`` to a set of tuples
    of world names ``(w, w1, ..., wn)``.  ``designations`` maps a constant
    nominal to its world.
    """

    def __init__(self, sig, worlds, relations=None, designations=None):
        self.sig = sig
        self.worlds = {s: list(ws) for s, ws in worlds.items()}
        self.relations = {k: set(map(tuple, v)) for k, v in (relations or {}).items()}
        self.designations = dict(designations or {})
        self._index = {}
        self.sort_of_world = {}
        for s, ws in self.worlds.items():
            if s not in sig.sorts:
                raise SemanticsError(f"unknown sort {s}")
            if not ws:
                raise SemanticsError(f"sort {s} has no worlds")
            for i, w in enumerate(ws):
                if w in self.sort_of_world:
                    raise SemanticsError(f"world {w} declared twice")
                self.sort_of_world[w] = s
                self._index[w] = i
        self._rel_idx = {}
        for (op, res), tuples in self.relations.items():
            decl = self._decl(op, res)
            sorts = (decl.result_sort,) + decl.arg_sorts
            idx = []
            for t in tuples:
                if len(t) != len(sorts):
                    raise SemanticsError(f"relation {op} expects {len(sorts)}-tuples")
                for w, s in zip(t, sorts):
                    if self.sort_of_world.get(w) != s:
                        raise SemanticsError(f"world {w} in relation {op} is not of sort {s}")
                idx.append(tuple(self._index[w] for w in t))
            self._rel_idx[(op, res)] = idx
        for c, w in self.designations.items():
            found = sig.lookup(c)
            if found is None or found[0] != "cnom":
                raise SemanticsError(f"{c} is not a constant nominal")
            if self.sort_of_world.get(w) != found[1]:
                raise SemanticsError(f"designation of {c} is not a world of sort {found[1]}")

    def _decl(self, op, res):
        for d in self.sig.operators_named(op):
            if d.result_sort == res:
                return d
        raise SemanticsError(f"unknown operator {op} with result sort {res}")

    def world_count(self, sort):
        if sort not in self.worlds:
            raise SemanticsError(f"frame has no worlds of sort {sort}")
        return len(self.worlds[sort])

    def full(self, sort):
        return (1 << self.world_count(sort)) - 1

    def index(self, w, sort=None):
        if w not in self._index or (sort is not None and self.sort_of_world[w] != sort):
            raise UnknownWorld(w)
        return self._index[w]

    def world(self, sort, i):
        return self.worlds[sort][i]

    def tuples(self, op, res):
        return self._rel_idx.get((op, res), ())

    def to_dict(self):
        return {
            "worlds": self.worlds,
            "relations": {f"{op}:{res}": sorted(map(list, ts)) for (op, res), ts in self.relations.items()},
            "designations": self.designations,
        }


class Model:
    """A frame plus a valuation of propositional variables and nominals."""

    def __init__(self, frame, valuation):
        self.frame = frame
        self.sig = frame.sig
        self.valuation = {}
        for name, ws in valuation.items():
            found = self.sig.lookup(name)
            if found is None or found[0] not in ("prop", "nom"):
                raise SemanticsError(f"{name} is not a propositional variable or nominal")
            kind, sort = found
            ws = set(ws)
            for w in ws:
                frame.index(w, sort)
            if kind == "nom" and len(ws) != 1:
                raise SemanticsError(f"nominal {name} must denote exactly one world")
            self.valuation[name] = ws
        self._mask = {}
        for name, ws in self.valuation.items():
            sort = self.sig.lookup(name)[1]
            m = 0
            for w in ws:
                m |= 1 << frame.index(w)
            self._mask[name] = m

    def atom_mask(self, atom):
        if isinstance(atom, F.CNomAtom):
            w = self.frame.designations.get(atom.name)
            if w is None:
                raise UnboundSymbol(f"constant nominal {atom.name} is not designated")
            return 1 << self.frame.index(w)
        m = self._mask.get(atom.name)
        if m is None:
            if isinstance(atom, F.PropAtom):
                return 0
            raise UnboundSymbol(f"{atom.kind} {atom.name} has no value in the model")
        return m

    def nominal_world(self, k):
        """Index of the unique world named by a nominal or constant nominal."""
        return self.atom_mask(k).bit_length() - 1

    def nominal_pool(self):
        """Nominals and constant nominals with a value, grouped by sort."""
        pool = {}
        for name in self.valuation:
            kind, sort = self.sig.lookup(name)
            if kind == "nom":
                pool.setdefault(sort, []).append(F.NomAtom(name, sort))
        for c in self.frame.designations:
            sort = self.sig.lookup(c)[1]
            pool.setdefault(sort, []).append(F.CNomAtom(c, sort))
        return pool

    def to_dict(self):
        d = self.frame.to_dict()
        d["valuation"] = {k: sorted(v) for k, v in self.valuation.items()}
        return d


# ------------------------------------------------------------ satisfaction

def extension(model, f, g=None):
    """Bitmask of the worlds of sort ``f.sort`` where ``f`` holds under ``g``.

    ``g`` maps state-variable atoms to world indices of their sort.
    """
    return _ext(model, f, g or {})


def _ext(M, f, g):
    fr = M.frame
    if isinstance(f, F.SVarAtom):
        if f not in g:
            raise UnboundStateVariable(f.name)
        return 1 << g[f]
    if isinstance(f, F.Atom):
        return M.atom_mask(f)
    if isinstance(f, F.Neg):
        return fr.full(f.sort) ^ _ext(M, f.body, g)
    if isinstance(f, F.Or):
        return _ext(M, f.left, g) | _ext(M, f.right, g)
    if isinstance(f, F.ModalApp):
        masks = [_ext(M, a, g) for a in f.args]
        out = 0
        for t in fr.tuples(f.op, f.sort):
            if all((masks[i] >> t[i + 1]) & 1 for i in range(len(masks))):
                out |= 1 << t[0]
        return out
    if isinstance(f, F.At):
        inner = _ext(M, f.body, g)
        return fr.full(f.sort) if (inner >> M.nominal_world(f.nominal)) & 1 else 0
    if isinstance(f, F.Forall):
        out = fr.full(f.sort)
        g2 = dict(g)
        for i in range(fr.world_count(f.var.sort)):
            g2[f.var] = i
            out &= _ext(M, f.body, g2)
            if not out:
                break
        return out
    raise F.FormulaError(f"not a formula: {f!r}")


def _assignment_indices(M, g):
    out = {}
    for x, w in (g or {}).items():
        atom = x
        if isinstance(x, str):
            found = M.sig.lookup(x)
            if found is None or found[0] != "svar":
                raise UnboundStateVariable(x)
            atom = F.SVarAtom(x, found[1])
        out[atom] = M.frame.index(w, atom.sort) if isinstance(w, str) else w
    return out


def satisfies(model, g, w, f):
    """``M, g, w |= f`` with ``w`` a world name and ``g`` mapping state
    variables (names or atoms) to world names."""
    gi = _assignment_indices(model, g)
    i = model.frame.index(w, f.sort) if isinstance(w, str) else w
    for x in F.free_state_vars(f):
        if x not in gi:
            raise UnboundStateVariable(x.name)
    return bool((_ext(model, f, gi) >> i) & 1)


def assignments(frame, variables):
    """Every assignment of the given state-variable atoms (as index maps)."""
    variables = sorted(variables, key=lambda v: (v.sort, v.name))
    ranges = [range(frame.world_count(v.sort)) for v in variables]
    for combo in itertools.product(*ranges):
        yield dict(zip(variables, combo))


def valid_in_model(model, f):
    full = model.frame.full(f.sort)
    for g in assignments(model.frame, F.free_state_vars(f)):
        if _ext(model, f, g) != full:
            return False
    return True


def valuations(frame, props, noms):
    """Every valuation of the listed symbols: subsets for props, singletons for noms."""
    props = sorted(props, key=lambda a: (a.sort, a.name))
    noms = sorted(noms, key=lambda a: (a.sort, a.name))
    prop_ranges = [range(1 << frame.world_count(p.sort)) for p in props]
    nom_ranges = [range(frame.world_count(j.sort)) for j in noms]
    for pv in itertools.product(*prop_ranges):
        for nv in itertools.product(*nom_ranges):
            val = {}
            for p, bits in zip(props, pv):
                ws = frame.worlds[p.sort]
                val[p.name] = {ws[i] for i in range(len(ws)) if (bits >> i) & 1}
            for j, i in zip(noms, nv):
                val[j.name] = {frame.worlds[j.sort][i]}
            yield val


def valid_in_frame(frame, f, base_valuation=None):
    """Valid in every model on ``frame``; only symbols occurring in ``f`` vary."""
    props = F.atoms_of(f, "prop")
    noms = F.atoms_of(f, "nom")
    base = dict(base_valuation or {})
    for val in valuations(frame, props, noms):
        merged = dict(base)
        merged.update(val)
        if not valid_in_model(Model(frame, merged), f):
            return False
    return True


def is_named(model):
    fr = model.frame
    named = {}
    for name, ws in model.valuation.items():
        kind, sort = model.sig.lookup(name)
        if kind == "nom":
            named.setdefault(sort, set()).update(ws)
    for c, w in fr.designations.items():
        named.setdefault(fr.sort_of_world[w], set()).add(w)
    return all(set(ws) <= named.get(s, set()) for s, ws in fr.worlds.items())


def check_pure_named_equivalence(model, f, pool=None):
    """Compare frame validity with the model-side criterion for named models.

    For ``forall x... exists y... psi`` with only bound state symbols the
    model side asks that at every world, for every choice of pool nominals
    for the ``x``s, some choice for the ``y``s makes the instance of ``psi``
    true.  Other pure formulas are compared with the validity of all their
    pure instances over the pool.
    """
    if not is_named(model):
        raise NotNamed("the model has an unnamed world")
    if not F.is_pure(f):
        raise F.NotPure("formula contains propositional variables")
    frame_side = valid_in_frame(model.frame, f, model.valuation)
    pool = pool if pool is not None else model.nominal_pool()
    if F.is_quantified_pure_shape(f):
        mode = "witnesses"
        model_side, instances = nominal_witnesses(model, f, pool)
    else:
        mode = "instances"
        model_side = True
        instances = 0
        for inst in F.pure_instances(f, pool):
            instances += 1
            if not valid_in_model(model, inst):
                model_side = False
                break
    return {"frame_valid": frame_side, "model_side": model_side,
            "agree": frame_side == model_side, "mode": mode, "instances": instances}


def nominal_witnesses(model, f, pool):
    """Whether every world passes the nominal-witness test for a quantified
    pure formula; returns ``(holds, instances_tried)``."""
    universals, existentials, matrix = F.quantifier_prefix(f)
    choices = lambda xs: itertools.product(*[pool.get(x.sort, []) for x in xs])

    def instance(names):
        g = matrix
        for x, k in reversed(list(zip(universals + existentials, names))):
            g = F.substitute(g, x, k)
        return g

    full = model.frame.full(f.sort)
    holds, count = full, 0
    for ks in choices(universals):
        some = 0
        for js in choices(existentials):
            count += 1
            some |= _ext(model, instance(ks + js), {})
        holds &= some
    return holds == full, count


# --------------------------------------------------- bounded countermodels

def _relevant(formulas):
    sorts, ops, props, noms, cnoms, svars = set(), set(), set(), set(), set(), set()
    for f in formulas:
        for g in F.subformulas(f):
            sorts.add(g.sort)
            if isinstance(g, F.ModalApp):
                ops.add((g.op, g.sort))
            elif isinstance(g, F.PropAtom):
                props.add(g)
            elif isinstance(g, F.NomAtom):
                noms.add(g)
            elif isinstance(g, F.CNomAtom):
                cnoms.add(g)
            if isinstance(g, F.SVarAtom) and g in F.free_state_vars(f):
                svars.add(g)
    return sorts, ops, props, noms, cnoms, svars


def bounded_countermodel(sig, gamma, f, max_worlds=2):
    """Search for a model, world and assignment satisfying ``gamma`` and not ``f``.

    Enumeration is deterministic: world counts per sort in lexicographic
    order, then relations by bitmask, then designations, valuations,
    assignments and worlds.  Returns ``(model, world, assignment)`` or None.
    """
    gamma = list(gamma)
    for h in gamma:
        if h.sort != f.sort:
            raise F.SortMismatch("hypotheses and conclusion must share a sort")
    sorts, ops, props, noms, cnoms, _ = _relevant(gamma + [f])
    for d in sig.ops:
        if (d.name, d.result_sort) in ops:
            sorts.update(d.arg_sorts)
    sorts = sorted(sorts)
    ops = sorted(ops)
    decls = {}
    for op, res in ops:
        decls[(op, res)] = next(d for d in sig.operators_named(op) if d.result_sort == res)
    cnoms = sorted(cnoms, key=lambda a: a.name)
    free = set()
    for h in gamma + [f]:
        free |= F.free_state_vars(h)
    target = F.conj(*gamma, F.Neg(f)) if gamma else F.Neg(f)
    for counts in itertools.product(range(1, max_worlds + 1), repeat=len(sorts)):
        worlds = {s: [f"{s}{i}" for i in range(n)] for s, n in zip(sorts, counts)}
        spaces = []
        for key in ops:
            d = decls[key]
            space = list(itertools.product(*(worlds[s] for s in (d.result_sort,) + d.arg_sorts)))
            spaces.append(space)
        for bits in itertools.product(*(range(1 << len(sp)) for sp in spaces)):
            relations = {}
            for key, sp, b in zip(ops, spaces, bits):
                relations[key] = {sp[i] for i in range(len(sp)) if (b >> i) & 1}
            for desig in itertools.product(*(worlds[c.sort] for c in cnoms)):
                frame = Frame(sig, worlds, relations, dict(zip((c.name for c in cnoms), desig)))
                for val in valuations(frame, props, noms):
                    model = Model(frame, val)
                    for g in assignments(frame, free):
                        m = _ext(model, target, g)
                        if m:
                            i = (m & -m).bit_length() - 1
                            named_g = {x.name: frame.world(x.sort, j) for x, j in g.items()}
                            return model, frame.world(f.sort, i), named_g
    return None


# ---------------------------------------------------------- model files

def parse_model(text, sig):
    """Read the model format: ``world w : S``, ``rel op w w1 ... wn``,
    ``val p = {w, ...}``, ``desig c = w``."""
    worlds = {}
    rels, val, desig = [], {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        head = words[0]
        try:
            if head == "world":
                names, sort = line[5:].split(":")
                for w in names.replace(",", " ").split():
                    worlds.setdefault(sort.strip(), []).append(w)
            elif head == "rel":
                rels.append((lineno, words[1], words[2:]))
            elif head == "val":
                name, rhs = line[3:].split("=", 1)
                rhs = rhs.strip()
                if not (rhs.startswith("{") and rhs.endswith("}")):
                    raise ModelFormatError(f"line {lineno}: expected {{...}}")
                val[name.strip()] = {w for w in rhs[1:-1].replace(",", " ").split()}
            elif head == "desig":
                name, w = line[5:].split("=", 1)
                desig[name.strip()] = w.strip()
            elif head == "sig":
                continue
            else:
                raise ModelFormatError(f"line {lineno}: unknown directive {head!r}")
        except ValueError as exc:
            raise ModelFormatError(f"line {lineno}: malformed {head} line") from exc
    sort_of = {w: s for s, ws in worlds.items() for w in ws}
    relations = {}
    for lineno, op, ws in rels:
        if not ws or any(w not in sort_of for w in ws):
            raise ModelFormatError(f"line {lineno}: unknown world in rel")
        res = sort_of[ws[0]]
        arg_sorts = tuple(sort_of[w] for w in ws[1:])
        match = [d for d in sig.operators_named(op)
                 if d.result_sort == res and d.arg_sorts == arg_sorts]
        if not match:
            raise ModelFormatError(f"line {lineno}: no operator {op} : {' '.join(arg_sorts)} -> {res}")
        relations.setdefault((op, res), set()).add(tuple(ws))
    try:
        frame = Frame(sig, worlds, relations, desig)
        return Model(frame, val)
    except (SemanticsError, SignatureError) as exc:
        raise ModelFormatError(str(exc)) from exc


def model_signature_path(text):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line.startswith("sig "):
            return line[4:].strip()
    return None


def render_model(model):
    fr = model.frame
    lines = []
    for s, ws in fr.worlds.items():
        lines.append(f"world {' '.join(ws)} : {s}")
    for (op, _), ts in sorted(fr.relations.items()):
        for t in sorted(ts):
            lines.append(f"rel {op} {' '.join(t)}")
    for name, ws in sorted(model.valuation.items()):
        lines.append(f"val {name} = {{{', '.join(sorted(ws))}}}")
    for c, w in sorted(fr.designations.items()):
        lines.append(f"desig {c} = {w}")
    return "\n".join(lines) + "\n"


def report_json(report):
    return json.dumps(report, sort_keys=True)
