"""A small imperative language and the stack/memory/control machine that runs it.

Programs use ``x := a``, ``skip``, ``if b then s1 else s2``, ``while b do s``
and ``;`` (right-associated).  Arithmetic has numerals, variables, ``+`` and
``++x``; the only test is ``a1 <= a2``.  Parentheses or braces group
statements.
"""

from dataclasses import dataclass
import os
import re

DEFAULT_FUEL = 10 ** 6
FUEL_ENV = "HYBRIDLOGIC_FUEL"


def default_fuel():
    raw = os.environ.get(FUEL_ENV)
    return int(raw) if raw else DEFAULT_FUEL


# ------------------------------------------------------------------ syntax

@dataclass(frozen=True)
class Num:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Add:
    left: object
    right: object

    def __str__(self):
        return f"{self.left} + {_paren_add(self.right)}"


@dataclass(frozen=True)
class Incr:
    name: str

    def __str__(self):
        return f"++{self.name}"


@dataclass(frozen=True)
class Leq:
    left: object
    right: object

    def __str__(self):
        return f"{self.left} <= {self.right}"


@dataclass(frozen=True)
class Assign:
    name: str
    expr: object

    def __str__(self):
        return f"{self.name} := {self.expr}"


@dataclass(frozen=True)
class If:
    cond: Leq
    then: object
    orelse: object

    def __str__(self):
        return f"if {self.cond} then {_block(self.then)} else {_block(self.orelse)}"


@dataclass(frozen=True)
class While:
    cond: Leq
    body: object

    def __str__(self):
        return f"while {self.cond} do {_block(self.body)}"


@dataclass(frozen=True)
class Skip:
    def __str__(self):
        return "skip"


@dataclass(frozen=True)
class Seq:
    first: object
    second: object

    def __str__(self):
        return f"{_block(self.first) if isinstance(self.first, Seq) else self.first}; {self.second}"


def _paren_add(a):
    return f"({a})" if isinstance(a, Add) else str(a)


def _block(s):
    return f"{{{s}}}" if isinstance(s, (Seq, If, While)) else str(s)


def program_variables(node):
    """Variable names in order of first occurrence."""
    out = []

    def go(n):
        if isinstance(n, (Var, Incr)):
            name = n.name
        elif isinstance(n, Assign):
            name = n.name
        else:
            name = None
        if name is not None and name not in out:
            out.append(name)
        for child in getattr(n, "__dataclass_fields__", {}):
            v = getattr(n, child)
            if not isinstance(v, (str, int)):
                go(v)

    go(node)
    return out


# ------------------------------------------------------------------ parser

class SmcSyntaxError(SyntaxError):
    def __init__(self, message, pos):
        super().__init__(f"{message} at offset {pos}")
        self.pos = pos


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(:=|<=|\+\+|[+;(){}]))")
KEYWORDS = {"if", "then", "else", "while", "do", "skip"}


def _tokenize(text):
    tokens = []
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if not m:
            rest = text[pos:]
            if rest.strip():
                bad = pos + len(rest) - len(rest.lstrip())
                raise SmcSyntaxError(f"unexpected character {text[bad]!r}", bad)
            break
        start = m.start(m.lastindex)
        if m.group(1):
            tokens.append(("num", int(m.group(1)), start))
        elif m.group(2):
            word = m.group(2)
            tokens.append(("kw" if word in KEYWORDS else "id", word, start))
        else:
            tokens.append(("sym", m.group(3), start))
        pos = m.end()
    tokens.append(("eof", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None, value=None):
        tok = self.tokens[self.i]
        if (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            got = "end of input" if tok[0] == "eof" else repr(tok[1])
            raise SmcSyntaxError(f"expected {want}, found {got}", tok[2])
        self.i += 1
        return tok

    def at(self, kind, value=None):
        tok = self.peek()
        return tok[0] == kind and (value is None or tok[1] == value)

    def program(self):
        s = self.sequence()
        self.take("eof")
        return s

    def sequence(self):
        first = self.statement()
        if self.at("sym", ";"):
            self.take()
            return Seq(first, self.sequence())
        return first

    def statement(self):
        tok = self.peek()
        if tok == ("kw", "skip", tok[2]):
            self.take()
            return Skip()
        if tok[0] == "kw" and tok[1] == "if":
            self.take()
            cond = self.bexp()
            self.take("kw", "then")
            then = self.statement()
            self.take("kw", "else")
            return If(cond, then, self.statement())
        if tok[0] == "kw" and tok[1] == "while":
            self.take()
            cond = self.bexp()
            self.take("kw", "do")
            return While(cond, self.statement())
        if tok[0] == "sym" and tok[1] in "({":
            close = ")" if tok[1] == "(" else "}"
            self.take()
            body = self.sequence()
            self.take("sym", close)
            return body
        if tok[0] == "id":
            self.take()
            self.take("sym", ":=")
            return Assign(tok[1], self.aexp())
        raise SmcSyntaxError("expected a statement", tok[2])

    def bexp(self):
        left = self.aexp()
        self.take("sym", "<=")
        return Leq(left, self.aexp())

    def aexp(self):
        left = self.term()
        while self.at("sym", "+"):
            self.take()
            left = Add(left, self.term())
        return left

    def term(self):
        tok = self.peek()
        if tok[0] == "num":
            self.take()
            return Num(tok[1])
        if tok[0] == "id":
            self.take()
            return Var(tok[1])
        if tok[0] == "sym" and tok[1] == "++":
            self.take()
            return Incr(self.take("id")[1])
        if tok[0] == "sym" and tok[1] == "(":
            self.take()
            inner = self.aexp()
            self.take("sym", ")")
            return inner
        raise SmcSyntaxError("expected an arithmetic expression", tok[2])


def parse_program(text):
    return _Parser(text).program()


def parse_aexp(text):
    p = _Parser(text)
    a = p.aexp()
    p.take("eof")
    return a


def parse_bexp(text):
    p = _Parser(text)
    b = p.bexp()
    p.take("eof")
    return b


def load_program(path):
    with open(path) as fh:
        return parse_program(fh.read())


# ------------------------------------------------------------ control items

@dataclass(frozen=True)
class CA:
    expr: object

    def __str__(self):
        return f"c({self.expr})"


@dataclass(frozen=True)
class CB:
    expr: Leq

    def __str__(self):
        return f"c({self.expr})"


@dataclass(frozen=True)
class CS:
    stmt: object

    def __str__(self):
        return f"c({self.stmt})"


@dataclass(frozen=True)
class AsgnItem:
    name: str

    def __str__(self):
        return f"asgn({self.name})"


@dataclass(frozen=True)
class PlusItem:
    def __str__(self):
        return "plus"


@dataclass(frozen=True)
class LeqItem:
    def __str__(self):
        return "leq"


@dataclass(frozen=True)
class TestItem:
    value: object

    def __str__(self):
        return f"{show_value(self.value)}?"


@dataclass(frozen=True)
class Branch:
    then: object
    orelse: object

    def __str__(self):
        return f"branch({self.then}, {self.orelse})"


@dataclass(frozen=True)
class Loop:
    cond: Leq
    body: object

    def __str__(self):
        return f"loop({self.cond}, {self.body})"


PRIMITIVE_ITEMS = (PlusItem, LeqItem, AsgnItem, TestItem)
DERIVED_ITEMS = (Branch, Loop)


def compile_node(node):
    """One expansion of a composite ``c(...)`` item, left to right."""
    if isinstance(node, Add):
        return [CA(node.left), CA(node.right), PlusItem()]
    if isinstance(node, Leq):
        return [CA(node.right), CA(node.left), LeqItem()]
    if isinstance(node, Seq):
        return [CS(node.first), CS(node.second)]
    if isinstance(node, Assign):
        return [CA(node.expr), AsgnItem(node.name)]
    if isinstance(node, If):
        return [CB(node.cond), Branch(node.then, node.orelse)]
    if isinstance(node, While):
        return [CB(node.cond), Loop(node.cond, node.body)]
    raise TypeError(f"{node!r} has no expansion")


def compile(node):
    """The full control stack for a statement or expression, top first."""
    if isinstance(node, (Num, Var, Incr)):
        return [CA(node)]
    if isinstance(node, Skip):
        return [CS(node)]
    out = []
    for item in compile_node(node):
        inner = item.expr if isinstance(item, (CA, CB)) else item.stmt if isinstance(item, CS) else None
        out.extend(compile(inner) if inner is not None and not isinstance(inner, Skip) else [item])
    return out


# ------------------------------------------------------------------ values

def is_bool(v):
    return isinstance(v, bool)


def is_nat(v):
    return isinstance(v, int) and not isinstance(v, bool) and v >= 0


def show_value(v):
    if is_bool(v):
        return "true" if v else "false"
    return str(v)


# ------------------------------------------------------------------ memory

def canonicalize_mem(writes):
    """Replay writes innermost first, last write wins, sorted by variable name."""
    final = {}
    for name, value in writes:
        final[name] = value
    return tuple(sorted(final.items()))


def mem_lookup(mem, name):
    for n, v in reversed(mem):
        if n == name:
            return v
    raise KeyError(name)


def mem_write(mem, name, value):
    return canonicalize_mem(tuple(mem) + ((name, value),))


def mem_without(mem, name):
    return tuple((n, v) for n, v in mem if n != name)


def parse_memory(text):
    """``x=3,n=5`` -> canonical memory."""
    writes = []
    for part in filter(None, (p.strip() for p in (text or "").split(","))):
        name, _, value = part.partition("=")
        name, value = name.strip(), value.strip()
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name) or not value.isdigit():
            raise ValueError(f"bad memory binding {part!r}; expected name=number")
        writes.append((name, int(value)))
    return canonicalize_mem(writes)


def show_memory(mem, order=None):
    """Render as ``n=5, s=15, i=6``; ``order`` lists names to print first."""
    names = [n for n, _ in mem]
    if order:
        names = [n for n in order if n in names] + [n for n in names if n not in order]
    d = dict(mem)
    return ", ".join(f"{n}={show_value(d[n])}" for n in names)


# ------------------------------------------------------------------ machine

class Stuck(Exception):
    def __init__(self, reason, detail=""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


class OutOfFuel(Exception):
    def __init__(self, state, steps):
        super().__init__(f"out of fuel after {steps} steps")
        self.state = state
        self.steps = steps


def _cons_from(items, rest=None):
    for item in reversed(list(items)):
        rest = (item, rest)
    return rest


def _cons_list(cell):
    out = []
    while cell is not None:
        out.append(cell[0])
        cell = cell[1]
    return out


@dataclass(frozen=True)
class MachineState:
    """Control stack and value stack are cons cells ``(head, tail)``, top first."""
    ctrl: object
    vs: object
    mem: tuple

    @classmethod
    def make(cls, ctrl=(), vs=(), mem=()):
        return cls(_cons_from(ctrl), _cons_from(vs), canonicalize_mem(mem))

    @property
    def ctrl_items(self):
        return _cons_list(self.ctrl)

    @property
    def values(self):
        return _cons_list(self.vs)

    @property
    def halted(self):
        return self.ctrl is None

    def to_dict(self):
        return {"ctrl": [str(c) for c in self.ctrl_items],
                "vs": [show_value(v) for v in self.values],
                "mem": {n: show_value(v) for n, v in self.mem}}


@dataclass(frozen=True)
class FinalState:
    mem: tuple
    vs: tuple
    steps: int


def _pop(vs, want, item):
    if vs is None:
        raise Stuck("StackUnderflow", f"{item} needs a value")
    v, rest = vs
    if want == "nat" and not is_nat(v):
        raise Stuck("TypeClash", f"{item} expects a number, found {show_value(v)}")
    if want == "bool" and not is_bool(v):
        raise Stuck("TypeClash", f"{item} expects a boolean, found {show_value(v)}")
    return v, rest


def _read(mem, name):
    try:
        return mem_lookup(mem, name)
    except KeyError:
        raise Stuck("UnboundVariable", name) from None


def transition(st):
    """One deterministic step: ``(rule, next_state)``, or None when halted."""
    if st.ctrl is None:
        return None
    item, rest = st.ctrl
    vs, mem = st.vs, st.mem
    if isinstance(item, CA):
        e = item.expr
        if isinstance(e, Num):
            return "Aint", MachineState(rest, (e.value, vs), mem)
        if isinstance(e, Var):
            return "Aid", MachineState(rest, (_read(mem, e.name), vs), mem)
        if isinstance(e, Incr):
            n = _read(mem, e.name)
            if not is_nat(n):
                raise Stuck("TypeClash", f"++{e.name} on {show_value(n)}")
            return "A++", MachineState(rest, (n + 1, vs), mem_write(mem, e.name, n + 1))
        return "Dplus", MachineState(_cons_from(compile_node(e), rest), vs, mem)
    if isinstance(item, CB):
        return "Dleq", MachineState(_cons_from(compile_node(item.expr), rest), vs, mem)
    if isinstance(item, CS):
        s = item.stmt
        if isinstance(s, Skip):
            return "Askip", MachineState(rest, vs, mem)
        rule = {Seq: "CStmt", Assign: "Dasgn", If: "Dif", While: "Dwhile"}[type(s)]
        return rule, MachineState(_cons_from(compile_node(s), rest), vs, mem)
    if isinstance(item, PlusItem):
        n2, vs = _pop(vs, "nat", item)
        n1, vs = _pop(vs, "nat", item)
        return "Aplus", MachineState(rest, (n1 + n2, vs), mem)
    if isinstance(item, LeqItem):
        n1, vs = _pop(vs, "nat", item)
        n2, vs = _pop(vs, "nat", item)
        return "Aleq", MachineState(rest, (n1 <= n2, vs), mem)
    if isinstance(item, AsgnItem):
        n, vs = _pop(vs, "nat", item)
        return "Aasgn", MachineState(rest, vs, mem_write(mem, item.name, n))
    if isinstance(item, TestItem):
        v, vs = _pop(vs, None, item)
        if v != item.value or is_bool(v) != is_bool(item.value):
            raise Stuck("TestFailed", f"{item} saw {show_value(v)}")
        return "A?", MachineState(rest, vs, mem)
    if isinstance(item, Branch):
        v, vs = _pop(vs, "bool", item)
        arm = item.then if v else item.orelse
        return "Dif", MachineState(_cons_from([CS(arm)], rest), vs, mem)
    if isinstance(item, Loop):
        v, vs = _pop(vs, "bool", item)
        if v:
            again = [CS(item.body), CB(item.cond), item]
            return "Dwhile", MachineState(_cons_from(again, rest), vs, mem)
        return "Dwhile", MachineState(rest, vs, mem)
    raise Stuck("TypeClash", f"unknown control item {item!r}")


def step(st):
    """The successor state, or None when the control stack is empty."""
    t = transition(st)
    return None if t is None else t[1]


def initial_state(program, mem0=()):
    return MachineState(_cons_from([CS(program)]), None, canonicalize_mem(mem0))


def run(program, mem0=(), fuel=None, on_step=None):
    """Run to completion; raises Stuck or OutOfFuel."""
    fuel = default_fuel() if fuel is None else fuel
    if fuel < 0:
        raise ValueError("fuel must be non-negative")
    st = initial_state(program, mem0)
    for n in range(fuel + 1):
        t = transition(st)
        if t is None:
            return FinalState(st.mem, tuple(st.values), n)
        if n == fuel:
            break
        if on_step is not None:
            on_step(n + 1, t[0], st, t[1])
        st = t[1]
    raise OutOfFuel(st, fuel)


def trace(program, mem0=(), fuel=None):
    """List of ``(rule, before, after)`` records for a run that halts."""
    records = []
    run(program, mem0, fuel, lambda n, rule, a, b: records.append((rule, a, b)))
    return records
