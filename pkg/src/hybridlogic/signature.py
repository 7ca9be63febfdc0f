"""Many-sorted signatures with constant nominals and per-sort symbol inventories."""

from dataclasses import dataclass
import re

KINDS = ("prop", "nom", "cnom", "svar")

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_'+*<=>!?.-]*$")
_NUMERAL = re.compile(r"^[0-9]+$")


class SignatureError(Exception):
    pass


class DuplicateSort(SignatureError):
    pass


class UnknownSort(SignatureError):
    pass


class SymbolKindClash(SignatureError):
    pass


class EmptyPropSet(SignatureError):
    pass


class OverloadClash(SignatureError):
    pass


@dataclass(frozen=True)
class OperatorDecl:
    name: str
    arg_sorts: tuple
    result_sort: str

    def __str__(self):
        args = " ".join(self.arg_sorts)
        return f"op {self.name} : {args}{' ' if args else ''}-> {self.result_sort}"


class Signature:
    """A validated signature.

    ``symbols`` maps each of the four kinds to a dict from symbol name to sort.
    When ``numeral_sort`` is set, every decimal numeral is a constant nominal
    of that sort, so ground arithmetic terms name fixed worlds.
    """

    def __init__(self, sorts, ops, symbols, numeral_sort=None):
        self.sorts = tuple(sorts)
        self.ops = tuple(ops)
        self.symbols = {k: dict(symbols.get(k, {})) for k in KINDS}
        self.numeral_sort = numeral_sort
        self._validate()
        self._by_name = {}
        for decl in self.ops:
            self._by_name.setdefault(decl.name, []).append(decl)

    def _validate(self):
        if not self.sorts:
            raise SignatureError("signature declares no sorts")
        seen = set()
        for s in self.sorts:
            if s in seen:
                raise DuplicateSort(s)
            seen.add(s)
        for decl in self.ops:
            for s in decl.arg_sorts + (decl.result_sort,):
                if s not in seen:
                    raise UnknownSort(f"{s} (in operator {decl.name})")
        results = {}
        for decl in self.ops:
            key = (decl.name, decl.result_sort)
            if key in results:
                raise OverloadClash(
                    f"operator {decl.name} declared twice with result sort {decl.result_sort}")
            results[key] = decl
        if self.numeral_sort is not None and self.numeral_sort not in seen:
            raise UnknownSort(self.numeral_sort)
        owner = {}
        for kind in KINDS:
            for name, sort in self.symbols[kind].items():
                if sort not in seen:
                    raise UnknownSort(f"{sort} (for {kind} {name})")
                if self.numeral_sort is not None and _NUMERAL.match(name):
                    raise SymbolKindClash(f"{name} is a built-in numeral")
                if name in owner:
                    raise SymbolKindClash(
                        f"{name} declared as {owner[name][0]} of {owner[name][1]}"
                        f" and as {kind} of {sort}")
                owner[name] = (kind, sort)
        for s in self.sorts:
            if not any(v == s for v in self.symbols["prop"].values()):
                raise EmptyPropSet(s)

    def __eq__(self, other):
        return (isinstance(other, Signature)
                and self.sorts == other.sorts
                and self.ops == other.ops
                and self.symbols == other.symbols
                and self.numeral_sort == other.numeral_sort)

    def __hash__(self):
        return hash((self.sorts, self.ops))

    def has_sort(self, s):
        return s in self.sorts

    def require_sort(self, s):
        if s not in self.sorts:
            raise UnknownSort(s)

    def lookup(self, name):
        """Return ``(kind, sort)`` for a symbol name, or None."""
        for kind in KINDS:
            if name in self.symbols[kind]:
                return kind, self.symbols[kind][name]
        if self.numeral_sort is not None and _NUMERAL.match(name):
            return "cnom", self.numeral_sort
        return None

    def symbol_sort(self, kind, name):
        if kind == "cnom" and self.numeral_sort is not None and _NUMERAL.match(name):
            return self.numeral_sort
        return self.symbols[kind].get(name)

    def symbols_of(self, kind, sort):
        return [n for n, s in self.symbols[kind].items() if s == sort]

    def canonical_prop(self, sort):
        """The fixed propositional variable used to build bottom and top at ``sort``."""
        self.require_sort(sort)
        return self.symbols_of("prop", sort)[0]

    def operators_named(self, name):
        return list(self._by_name.get(name, ()))

    def operators_with_result(self, sort):
        self.require_sort(sort)
        return [d for d in self.ops if d.result_sort == sort]

    def extend(self, sorts=(), ops=(), **symbols):
        """Return a new signature with extra declarations (inventories grow on demand)."""
        merged = {k: dict(self.symbols[k]) for k in KINDS}
        for kind, entries in symbols.items():
            if kind not in KINDS:
                raise SignatureError(f"unknown symbol kind {kind}")
            for name, sort in dict(entries).items():
                if merged[kind].get(name) == sort:
                    continue
                if name in merged[kind]:
                    raise SymbolKindClash(f"{name} already declared at {merged[kind][name]}")
                merged[kind][name] = sort
        new_sorts = list(self.sorts) + [s for s in sorts if s not in self.sorts]
        new_ops = list(self.ops) + [d for d in ops if d not in self.ops]
        return Signature(new_sorts, new_ops, merged, self.numeral_sort)

    def fresh(self, kind, sort, stem):
        """A symbol name of ``kind`` not yet used by any declaration."""
        i = 0
        while True:
            name = f"{stem}{i}"
            if self.lookup(name) is None:
                return name
            i += 1

    def render(self):
        lines = [f"sort {s}" for s in self.sorts]
        if self.numeral_sort is not None:
            lines.append(f"numerals {self.numeral_sort}")
        lines += [str(d) for d in self.ops]
        for kind in KINDS:
            for name, sort in self.symbols[kind].items():
                lines.append(f"{kind} {name} : {sort}")
        return "\n".join(lines) + "\n"


def parse_signature(text):
    """Parse the line-oriented signature format.

    Directives: ``sort S``, ``op f : S1 ... Sn -> S``, ``prop p : S``,
    ``nom j : S``, ``cnom c : S``, ``svar x : S`` and ``numerals S``.
    ``#`` starts a comment.
    """
    sorts, ops = [], []
    symbols = {k: {} for k in KINDS}
    numeral_sort = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        head = words[0]
        try:
            if head == "sort":
                for s in words[1:]:
                    if s in sorts:
                        raise DuplicateSort(s)
                    sorts.append(s)
            elif head == "numerals":
                (numeral_sort,) = words[1:]
            elif head == "op":
                name, rest = line[2:].split(":", 1)
                name = name.strip()
                lhs, rhs = rest.split("->")
                ops.append(OperatorDecl(name, tuple(lhs.split()), rhs.strip()))
            elif head in KINDS:
                names, sort = line[len(head):].split(":")
                sort = sort.strip()
                for name in names.replace(",", " ").split():
                    if not _IDENT.match(name) and not _NUMERAL.match(name):
                        raise SignatureError(f"bad symbol name {name!r}")
                    if name in symbols[head] and symbols[head][name] != sort:
                        raise SymbolKindClash(
                            f"{head} {name} declared at {symbols[head][name]} and {sort}")
                    symbols[head][name] = sort
            else:
                raise SignatureError(f"unknown directive {head!r}")
        except ValueError as exc:
            raise SignatureError(f"line {lineno}: malformed {head} directive") from exc
    return Signature(sorts, ops, symbols, numeral_sort)


def load_signature(path):
    with open(path) as fh:
        return parse_signature(fh.read())


def operators_with_result(sig, sort):
    return sig.operators_with_result(sort)
