"""Scalar expression language for metric components and weight functions.

Grammar (whitespace-insensitive, standard precedence, ``^`` binds tightest
and requires a constant exponent):

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := NUMBER | 'x' INDEX | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := sin | cos | sinh | cosh | exp | log | sqrt

Expressions are immutable trees; evaluation broadcasts over numpy arrays of
points, so one tree walk serves both scalar queries and batched grids.
Differentiation is exact and symbolic; the only rewrites applied are constant
folding and the x+0 / x*0 / x*1 family, which keeps derivative trees auditable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationDomainError, ExpressionError

FUNCTIONS = ("sin", "cos", "sinh", "cosh", "exp", "log", "sqrt")

_FN_EVAL = {
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based coordinate index


@dataclass(frozen=True)
class Neg:
    child: "ExprAst"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "ExprAst"
    right: "ExprAst"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "ExprAst"


ExprAst = Const | Var | Neg | BinOp | Call


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos


def _tokenize(src: str):
    tokens = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            while j < n and (src[j].isdigit() or src[j] == "."):
                j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    j = k
                    while j < n and src[j].isdigit():
                        j += 1
            text = src[i:j]
            try:
                float(text)
            except ValueError:
                raise ExpressionError(f"malformed number '{text}'", i)
            tokens.append(_Token("num", text, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(_Token("ident", src[i:j], i))
            i = j
            continue
        if c in "+-*/^()":
            tokens.append(_Token(c, c, i))
            i += 1
            continue
        raise ExpressionError(f"unexpected character {c!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, src: str, dim: int):
        self.src = src
        self.dim = dim
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.advance()
        if tok.kind != kind:
            raise ExpressionError(f"expected '{kind}', found '{tok.text or 'end of input'}'", tok.pos)
        return tok

    def parse(self) -> ExprAst:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(f"unexpected trailing input '{tok.text}'", tok.pos)
        return node

    def expr(self) -> ExprAst:
        node = self.term()
        while self.peek().kind in ("+", "-"):
            op = self.advance().kind
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> ExprAst:
        node = self.factor()
        while self.peek().kind in ("*", "/"):
            op = self.advance().kind
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> ExprAst:
        if self.peek().kind == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> ExprAst:
        base = self.atom()
        if self.peek().kind == "^":
            tok = self.advance()
            exponent = self.factor()
            folded = _fold(exponent)
            if not isinstance(folded, Const):
                # Constant exponents only; avoids branch cuts of general pow.
                raise ExpressionError("exponent must fold to a constant", tok.pos)
            return BinOp("^", base, folded)
        return base

    def atom(self) -> ExprAst:
        tok = self.advance()
        if tok.kind == "num":
            return Const(float(tok.text))
        if tok.kind == "(":
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            name = tok.text
            if name in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(name, arg)
            if name.startswith("x") and name[1:].isdigit():
                index = int(name[1:])
                if not 1 <= index <= self.dim:
                    raise ExpressionError(
                        f"variable x{index} out of range for dimension {self.dim}", tok.pos
                    )
                return Var(index)
            raise ExpressionError(f"unknown identifier '{name}'", tok.pos)
        raise ExpressionError(f"expected a value, found '{tok.text or 'end of input'}'", tok.pos)


def parse_expression(src: str, dim: int) -> ExprAst:
    """Parse ``src`` into an expression tree over coordinates x1..x<dim>."""
    if dim < 1:
        raise ExpressionError("dimension must be positive")
    return _Parser(src, dim).parse()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate(ast: ExprAst, coords):
    """Evaluate at one point (shape ``(n,)``) or a batch (shape ``(m, n)``).

    Returns a float for a single point, a ``(m,)`` array for a batch.
    Domain violations raise :class:`EvaluationDomainError` naming the node.
    """
    coords = np.asarray(coords, dtype=float)
    single = coords.ndim == 1
    pts = coords[None, :] if single else coords
    out = _eval(ast, pts)
    out = np.broadcast_to(out, (pts.shape[0],))
    return float(out[0]) if single else np.array(out, dtype=float)


def _eval(node: ExprAst, pts: np.ndarray):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return pts[:, node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.child, pts)
    if isinstance(node, BinOp):
        left = _eval(node.left, pts)
        if node.op == "^":
            expo = node.right.value
            if expo != round(expo) and np.any(np.asarray(left) < 0.0):
                raise EvaluationDomainError(
                    "negative base with non-integer exponent", to_text(node)
                )
            return np.power(left, expo)
        right = _eval(node.right, pts)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if np.any(np.asarray(right) == 0.0):
            raise EvaluationDomainError("division by zero", to_text(node))
        return left / right
    arg = _eval(node.arg, pts)
    if node.fn == "log" and np.any(np.asarray(arg) <= 0.0):
        raise EvaluationDomainError("log of non-positive value", to_text(node))
    if node.fn == "sqrt" and np.any(np.asarray(arg) < 0.0):
        raise EvaluationDomainError("sqrt of negative value", to_text(node))
    return _FN_EVAL[node.fn](arg)


# ---------------------------------------------------------------------------
# Differentiation and simplification
# ---------------------------------------------------------------------------

def _is_const(node, value=None):
    return isinstance(node, Const) and (value is None or node.value == value)


def _fold(node: ExprAst) -> ExprAst:
    """Constant folding plus the x+0 / x*0 / x*1 / x^0 / x^1 rules."""
    if isinstance(node, (Const, Var)):
        return node
    if isinstance(node, Neg):
        child = _fold(node.child)
        if isinstance(child, Const):
            return Const(-child.value)
        if isinstance(child, Neg):
            return child.child
        return Neg(child)
    if isinstance(node, Call):
        arg = _fold(node.arg)
        if isinstance(arg, Const):
            value = float(_FN_EVAL[node.fn](arg.value))
            if math.isfinite(value):
                return Const(value)
        return Call(node.fn, arg)
    left, right = _fold(node.left), _fold(node.right)
    op = node.op
    if isinstance(left, Const) and isinstance(right, Const):
        try:
            if op == "+":
                value = left.value + right.value
            elif op == "-":
                value = left.value - right.value
            elif op == "*":
                value = left.value * right.value
            elif op == "/":
                value = left.value / right.value
            else:
                value = left.value ** right.value
        except (ZeroDivisionError, OverflowError):
            return BinOp(op, left, right)
        if math.isfinite(value):
            return Const(value)
        return BinOp(op, left, right)
    if op == "+":
        if _is_const(left, 0.0):
            return right
        if _is_const(right, 0.0):
            return left
    elif op == "-":
        if _is_const(right, 0.0):
            return left
        if _is_const(left, 0.0):
            return Neg(right)
    elif op == "*":
        if _is_const(left, 0.0) or _is_const(right, 0.0):
            return Const(0.0)
        if _is_const(left, 1.0):
            return right
        if _is_const(right, 1.0):
            return left
    elif op == "/":
        if _is_const(left, 0.0):
            return Const(0.0)
        if _is_const(right, 1.0):
            return left
    elif op == "^":
        if _is_const(right, 0.0):
            return Const(1.0)
        if _is_const(right, 1.0):
            return left
    return BinOp(op, left, right)


def simplify(node: ExprAst) -> ExprAst:
    return _fold(node)


def differentiate(ast: ExprAst, var: int) -> ExprAst:
    """Exact symbolic partial derivative with respect to x<var> (1-based)."""
    if var < 1:
        raise ExpressionError("variable index must be positive")
    return _fold(_diff(ast, var))


def _diff(node: ExprAst, var: int) -> ExprAst:
    if isinstance(node, Const):
        return Const(0.0)
    if isinstance(node, Var):
        return Const(1.0 if node.index == var else 0.0)
    if isinstance(node, Neg):
        return Neg(_diff(node.child, var))
    if isinstance(node, BinOp):
        u, v = node.left, node.right
        du, dv = _diff(u, var), _diff(v, var)
        if node.op == "+":
            return BinOp("+", du, dv)
        if node.op == "-":
            return BinOp("-", du, dv)
        if node.op == "*":
            return BinOp("+", BinOp("*", du, v), BinOp("*", u, dv))
        if node.op == "/":
            num = BinOp("-", BinOp("*", du, v), BinOp("*", u, dv))
            return BinOp("/", num, BinOp("^", v, Const(2.0)))
        # d(u^c) = c * u^(c-1) * u'
        c = node.right.value
        return BinOp("*", BinOp("*", Const(c), BinOp("^", u, Const(c - 1.0))), du)
    deriv = {
        "sin": lambda a: Call("cos", a),
        "cos": lambda a: Neg(Call("sin", a)),
        "sinh": lambda a: Call("cosh", a),
        "cosh": lambda a: Call("sinh", a),
        "exp": lambda a: Call("exp", a),
        "log": lambda a: BinOp("/", Const(1.0), a),
        "sqrt": lambda a: BinOp("/", Const(0.5), Call("sqrt", a)),
    }[node.fn](node.arg)
    return BinOp("*", deriv, _diff(node.arg, var))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def to_text(node: ExprAst) -> str:
    """Serialize with minimal parentheses; ``parse_expression`` inverts it."""
    text, _ = _render(node)
    return text


def _render(node: ExprAst):
    if isinstance(node, Const):
        value = node.value
        if value < 0 or (value == 0 and math.copysign(1.0, value) < 0):
            return f"-{_fmt(-value)}", _PREC["neg"]
        return _fmt(value), _PREC["atom"]
    if isinstance(node, Var):
        return f"x{node.index}", _PREC["atom"]
    if isinstance(node, Neg):
        text, prec = _render(node.child)
        if prec < _PREC["neg"]:
            text = f"({text})"
        return f"-{text}", _PREC["neg"]
    if isinstance(node, Call):
        return f"{node.fn}({to_text(node.arg)})", _PREC["atom"]
    lt, lp = _render(node.left)
    rt, rp = _render(node.right)
    prec = _PREC[node.op]
    if node.op in ("+", "*"):
        if lp < prec:
            lt = f"({lt})"
        if rp < prec or (node.op == "+" and rt.startswith("-")):
            rt = f"({rt})"
    elif node.op in ("-", "/"):
        if lp < prec:
            lt = f"({lt})"
        if rp <= prec:
            rt = f"({rt})"
    else:  # '^' is right-grouping and binds tighter than unary minus
        if lp <= prec:
            lt = f"({lt})"
        if rp < prec:
            rt = f"({rt})"
    return f"{lt}{node.op}{rt}", prec


def _fmt(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)
