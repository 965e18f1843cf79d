"""Infix formula language used in spec files.

Grammar (whitespace insignificant)::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | atom ("^" uint)?
    atom   := number | var | func "(" expr ")" | "(" expr ")"

Variables are x1..xm (base) and u1..uk (fibre); functions are sin, cos,
exp, log, sqrt, tanh. Unary minus applies to a whole factor, so ``-x1^2``
is ``-(x1^2)``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Union

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh")


class ExprError(ValueError):
    def __init__(self, message: str, offset: int):
        self.message = message
        self.offset = offset
        super().__init__(f"{message} (at offset {offset})")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "x" or "u"
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Pow, Call]

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def tokenize(src: str):
    pos = 0
    out = []
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExprError(f"unexpected character {src[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src, m, k, allow_fibre):
        self.tokens = tokenize(src)
        self.i = 0
        self.m, self.k, self.allow_fibre = m, k, allow_fibre

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, pos = self.tok
        if val != text or kind not in ("op",):
            found = "end of input" if kind == "end" else repr(val)
            raise ExprError(f"expected {text!r}, found {found}", pos)
        return self.advance()

    def parse(self):
        if self.tok[0] == "end":
            raise ExprError("empty expression", 0)
        node = self.expr()
        kind, val, pos = self.tok
        if kind != "end":
            raise ExprError(f"unexpected trailing input {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.tok[1] in ("+", "-") and self.tok[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.tok[1] in ("*", "/") and self.tok[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        if self.tok[:2] == ("op", "-"):
            self.advance()
            return Neg(self.factor())
        node = self.atom()
        if self.tok[:2] == ("op", "^"):
            self.advance()
            kind, val, pos = self.tok
            if kind != "num" or not val.isdigit():
                raise ExprError("exponent must be an unsigned integer literal", pos)
            self.advance()
            node = Pow(node, int(val))
        return node

    def atom(self):
        kind, val, pos = self.tok
        if kind == "num":
            self.advance()
            value = float(val)
            if not math.isfinite(value):
                raise ExprError(f"numeric literal {val} overflows", pos)
            return Num(value)
        if kind == "ident":
            self.advance()
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                if self.tok[:2] == ("op", ","):
                    raise ExprError(f"function {val} takes exactly 1 argument", self.tok[2])
                self.expect(")")
                return Call(val, arg)
            return self.variable(val, pos)
        if (kind, val) == ("op", "("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprError(f"unexpected {found}", pos)

    def variable(self, name, pos):
        m = re.fullmatch(r"([xu])([1-9]\d*)", name)
        if m is None:
            raise ExprError(f"unknown identifier {name!r}", pos)
        kind, index = m.group(1), int(m.group(2))
        if kind == "u" and not self.allow_fibre:
            raise ExprError(f"fibre variable {name} not allowed here", pos)
        bound = self.m if kind == "x" else self.k
        if index > bound:
            what = "base" if kind == "x" else "fibre"
            raise ExprError(f"variable {name} exceeds {what} dimension {bound}", pos)
        if self.tok[:2] == ("op", "("):
            raise ExprError(f"{name} is not a function", self.tok[2])
        return Var(kind, index)


def parse_expression(src: str, m: int, k: int = 0, allow_fibre: bool = False) -> Expr:
    return _Parser(src, m, k, allow_fibre).parse()


def to_source(node: Expr) -> str:
    """Print an expression so that it reparses to the identical tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"{node.kind}{node.index}"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        if isinstance(node.operand, BinOp):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Pow):
        base = to_source(node.base)
        if not isinstance(node.base, (Num, Var, Call)):
            base = f"({base})"
        return f"{base}^{node.exponent}"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    raise TypeError(f"not an expression node: {node!r}")


def _py(node: Expr) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"{node.kind}[{node.index - 1}]"
    if isinstance(node, Call):
        return f"_{node.func}({_py(node.arg)})"
    if isinstance(node, Neg):
        return f"(-{_py(node.operand)})"
    if isinstance(node, Pow):
        return f"({_py(node.base)})**{node.exponent}"
    return f"({_py(node.left)} {node.op} {_py(node.right)})"


_NAMESPACE = {f"_{name}": getattr(math, name) for name in FUNCTIONS}


def compile_expr(node: Expr) -> Callable:
    """Compile to f(x, u) -> float; domain errors and overflow evaluate to nan."""
    code = compile(f"lambda x, u: {_py(node)}", "<expr>", "eval")
    fn = eval(code, dict(_NAMESPACE))

    def evaluate(x, u=()):
        # plain floats so that 1/0 and overflow raise instead of warning
        x = x.tolist() if hasattr(x, "tolist") else x
        u = u.tolist() if hasattr(u, "tolist") else u
        try:
            return float(fn(x, u))
        except (ArithmeticError, ValueError):
            return math.nan

    return evaluate


def evaluate(node: Expr, x=(), u=()) -> float:
    return compile_expr(node)(x, u)


def variables(node: Expr) -> set:
    if isinstance(node, Var):
        return {(node.kind, node.index)}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return variables(node.operand if isinstance(node, Neg) else node.arg)
    if isinstance(node, Pow):
        return variables(node.base)
    return variables(node.left) | variables(node.right)
