"""S-expression text format for formulas.

Core forms: ``(prop p)``, ``(nom j)``, ``(cnom c)``, ``(svar x)``, ``(not f)``,
``(or f g)``, ``(op f a1 ... an)``, ``(at j S f)``, ``(forall x f)``.
Sugar accepted on input: ``(and ...)``, ``(implies f g)``, ``(iff f g)``,
``(box f a1 ... an)``, ``(exists x f)``, ``(top S)``, ``(bot S)``.  The host
sort of ``(at j f)`` may be omitted when the context fixes it, and a bare
symbol name stands for the atom the signature declares under that name.
"""

import re

from . import formulas as F


class ParseError(Exception):
    pass


_TOKEN = re.compile(r";;[^\n]*|[()]|[^\s()]+")
_FAST_TOKEN = re.compile(r"[()]|[^\s()]+")


def tokenize(text):
    """Tokens with their offsets; ``;;`` starts a comment running to end of line."""
    return [(m.group(), m.start()) for m in _TOKEN.finditer(text) if not m.group().startswith(";;")]


def _strings(text):
    if ";;" in text:
        return [t for t, _ in tokenize(text)]
    return _FAST_TOKEN.findall(text)


def read_sexpr(text):
    """Parse a single S-expression into nested tuples of strings."""
    tokens = _strings(text)
    if not tokens:
        raise ParseError("empty input")
    try:
        value, pos = _read(tokens, 0)
        if pos != len(tokens):
            raise _At(pos, "trailing input")
    except _At as exc:
        offsets = [off for _, off in tokenize(text)]
        raise ParseError(f"{exc.message} at offset {offsets[exc.index]}") from None
    return value


class _At(Exception):
    def __init__(self, index, message):
        self.index, self.message = index, message


def _read(tokens, pos):
    stack = []
    items = None
    n = len(tokens)
    while True:
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            stack.append((items, pos - 1))
            items = []
            if pos >= n:
                raise _At(pos - 1, "unbalanced parenthesis opened")
            continue
        if tok == ")":
            if not stack:
                raise _At(pos - 1, "unexpected ')'")
            value = tuple(items)
            items, _ = stack.pop()
        else:
            value = tok
        if items is None:
            return value, pos
        items.append(value)
        if pos >= n:
            raise _At(stack[-1][1], "unbalanced parenthesis opened")


ATOM_HEADS = ("prop", "nom", "cnom", "svar")


class FormulaReader:
    """Builds formulas over one signature, sharing repeated subterms."""

    def __init__(self, sig):
        self.sig = sig
        self._memo = {}

    def atom(self, head, name):
        if not isinstance(name, str):
            raise ParseError(f"({head} ...) expects a symbol name")
        sort = self.sig.symbol_sort(head, name)
        if sort is None:
            found = self.sig.lookup(name)
            if found:
                raise ParseError(f"{name} is a {found[0]}, not a {head}")
            raise ParseError(f"unknown {head} {name}")
        return F.ATOM_CLASSES[head](name, sort)

    def infer(self, node):
        """The sort of ``node`` if it can be read off without context."""
        if isinstance(node, str):
            found = self.sig.lookup(node)
            return found[1] if found else None
        if not node:
            return None
        head, args = node[0], node[1:]
        if head in ATOM_HEADS and len(args) == 1:
            kind_sort = self.sig.symbol_sort(head, args[0]) if isinstance(args[0], str) else None
            return kind_sort
        if head == "not" and len(args) == 1:
            return self.infer(args[0])
        if head in ("or", "and", "implies", "iff"):
            for a in args:
                s = self.infer(a)
                if s is not None:
                    return s
            return None
        if head in ("op", "box") and args:
            decls = self._candidates(args[0], args[1:])
            if len(decls) == 1:
                return decls[0].result_sort
            return None
        if head == "at":
            return args[1] if len(args) == 3 else None
        if head in ("forall", "exists") and len(args) == 2:
            return self.infer(args[1])
        if head in ("top", "bot") and len(args) == 1:
            return args[0]
        return None

    def _candidates(self, name, args):
        decls = [d for d in self.sig.operators_named(name) if len(d.arg_sorts) == len(args)]
        if len(decls) > 1:
            narrowed = []
            for d in decls:
                ok = True
                for want, a in zip(d.arg_sorts, args):
                    got = self.infer(a)
                    if got is not None and got != want:
                        ok = False
                if ok:
                    narrowed.append(d)
            decls = narrowed
        return decls

    def build(self, node, expected=None):
        key = (node, expected)
        f = self._memo.get(key)
        if f is None:
            f = self._build(node, expected)
            self._memo[key] = f
        if expected is not None and f.sort != expected:
            raise ParseError(f"expected a formula of sort {expected}, got {f.sort}: {format_formula(f)}")
        return f

    def _build(self, node, expected):
        if isinstance(node, str):
            found = self.sig.lookup(node)
            if found is None:
                raise ParseError(f"unknown symbol {node!r}")
            return self.atom(found[0], node)
        if not node:
            raise ParseError("empty list")
        head, args = node[0], node[1:]
        if not isinstance(head, str):
            raise ParseError("list head must be a keyword")
        if head in ATOM_HEADS:
            if len(args) != 1:
                raise ParseError(f"({head} name) takes one argument")
            return self.atom(head, args[0])
        if head == "not":
            self._arity(head, args, 1)
            return F.Neg(self.build(args[0], expected))
        if head in ("or", "and", "implies", "iff"):
            if head in ("implies", "iff"):
                self._arity(head, args, 2)
            elif len(args) < 2:
                raise ParseError(f"({head} ...) needs at least two arguments")
            sort = expected
            if sort is None:
                for a in args:
                    sort = self.infer(a)
                    if sort is not None:
                        break
            parts = [self.build(a, sort) for a in args]
            try:
                if head == "or":
                    return F.disj(*parts)
                if head == "and":
                    return F.conj(*parts)
                if head == "implies":
                    return F.implies(*parts)
                return F.iff(*parts)
            except F.SortMismatch as exc:
                raise ParseError(str(exc)) from exc
        if head in ("op", "box"):
            if not args or not isinstance(args[0], str):
                raise ParseError(f"({head} name args...) needs an operator name")
            name, rest = args[0], args[1:]
            decls = self._candidates(name, rest)
            if expected is not None:
                decls = [d for d in decls if d.result_sort == expected] or decls
            if not decls:
                raise ParseError(f"no operator {name} with {len(rest)} arguments")
            if len(decls) > 1:
                raise ParseError(f"operator {name} is ambiguous here")
            decl = decls[0]
            built = [self.build(a, s) for a, s in zip(rest, decl.arg_sorts)]
            if head == "op":
                return F.ModalApp(name, built, decl.result_sort)
            return F.box(name, built, decl.result_sort)
        if head == "at":
            if len(args) == 3:
                k, host, body = args
            elif len(args) == 2:
                k, body = args
                host = expected
                if host is None:
                    raise ParseError("cannot infer the host sort of (at ...); write (at j SORT f)")
            else:
                raise ParseError("(at j [SORT] f) takes two or three arguments")
            if not isinstance(k, str):
                raise ParseError("(at ...) expects a nominal name")
            found = self.sig.lookup(k)
            if found is None or found[0] not in ("nom", "cnom"):
                raise ParseError(f"@ needs a nominal or constant nominal, got {k}")
            katom = F.ATOM_CLASSES[found[0]](k, found[1])
            if not self.sig.has_sort(host):
                raise ParseError(f"unknown sort {host}")
            return F.At(katom, self.build(body, katom.sort), host)
        if head in ("forall", "exists"):
            self._arity(head, args, 2)
            x = self.atom("svar", args[0])
            body = self.build(args[1], expected)
            return F.Forall(x, body) if head == "forall" else F.exists(x, body)
        if head in ("top", "bot"):
            self._arity(head, args, 1)
            sort = args[0]
            if not isinstance(sort, str) or not self.sig.has_sort(sort):
                raise ParseError(f"unknown sort {sort}")
            p0 = F.PropAtom(self.sig.canonical_prop(sort), sort)
            return F.bottom(p0) if head == "bot" else F.top(p0)
        raise ParseError(f"unknown form ({head} ...)")

    @staticmethod
    def _arity(head, args, n):
        if len(args) != n:
            raise ParseError(f"({head} ...) takes {n} argument(s), got {len(args)}")


def parse_formula(text, sig, expected=None):
    node = read_sexpr(text)
    return FormulaReader(sig).build(node, expected)


def build_formula(node, sig, expected=None):
    return FormulaReader(sig).build(node, expected)


def format_formula(f, sugar=True):
    return _fmt(f, sugar)


def _fmt(f, sugar):
    if isinstance(f, F.Atom):
        return f"({f.kind} {f.name})"
    if sugar:
        s = _sugar(f)
        if s is not None:
            return s
    if isinstance(f, F.Neg):
        return f"(not {_fmt(f.body, sugar)})"
    if isinstance(f, F.Or):
        return f"(or {_fmt(f.left, sugar)} {_fmt(f.right, sugar)})"
    if isinstance(f, F.ModalApp):
        inner = "".join(" " + _fmt(a, sugar) for a in f.args)
        return f"(op {f.op}{inner})"
    if isinstance(f, F.At):
        return f"(at {f.nominal.name} {f.sort} {_fmt(f.body, sugar)})"
    if isinstance(f, F.Forall):
        return f"(forall {f.var.name} {_fmt(f.body, sugar)})"
    raise TypeError(f)


def _sugar(f):
    pair = F.as_iff(f)
    if pair is not None:
        return f"(iff {_fmt(pair[0], True)} {_fmt(pair[1], True)})"
    parts = F.as_and(f)
    if parts is not None:
        items = [parts[0]]
        rest = parts[1]
        while True:
            nxt = F.as_and(rest)
            if nxt is None or F.as_iff(rest) is not None:
                break
            items.append(nxt[0])
            rest = nxt[1]
        items.append(rest)
        return "(and " + " ".join(_fmt(i, True) for i in items) + ")"
    ex = F.as_exists(f)
    if ex is not None:
        return f"(exists {ex[0].name} {_fmt(ex[1], True)})"
    bx = F.as_box(f)
    if bx is not None and bx[1]:
        op, args, _ = bx
        return f"(box {op}" + "".join(" " + _fmt(a, True) for a in args) + ")"
    imp = F.as_implies(f)
    if imp is not None:
        return f"(implies {_fmt(imp[0], True)} {_fmt(imp[1], True)})"
    return None
