"""Small expression language for potentials, energies and initial data.

Grammar (``^`` is right-associative and binds tighter than unary minus)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | VAR | 'pi' | NAME '(' expr (',' expr)* ')' | '(' expr ')'

``VAR`` is ``x`` by default; energy densities are written in ``s``.
Evaluation is vectorised over numpy arrays.  Derivatives of parsed
expressions are taken by fourth-order central differences unless a
derivative expression is supplied.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = {
    "exp": (1, np.exp),
    "log": (1, np.log),
    "cos": (1, np.cos),
    "sin": (1, np.sin),
    "abs": (1, np.abs),
    "sqrt": (1, np.sqrt),
    "pow": (2, np.power),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
}
CONSTANTS = {"pi": math.pi}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


class ExpressionError(ValueError):
    """Syntax or semantic error in an expression, with a 1-based column."""

    def __init__(self, message: str, column: int, source: str = ""):
        self.message = message
        self.column = column
        self.source = source
        super().__init__(f"{message} at column {column}" + (f" in {source!r}" if source else ""))


# AST nodes: ("num", value) | ("var",) | ("const", name) | ("neg", a)
#            | ("bin", op, a, b) | ("call", name, args)


def _tokenize(src: str):
    pos = 0
    tokens = []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            col = pos + 1 + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ExpressionError(f"unexpected character {src[col - 1]!r}", col, src)
        kind = m.lastgroup
        text = m.group(kind)
        tokens.append((kind, text, m.start(kind) + 1))
        pos = m.end()
    tokens.append(("end", "", len(src) + 1))
    return tokens


class _Parser:
    def __init__(self, src: str, variable: str = "x"):
        self.src = src
        self.variable = variable
        self.tokens = _tokenize(src)
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def take(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, text: str):
        kind, t, col = self.take()
        if t != text:
            found = "end of input" if kind == "end" else repr(t)
            raise ExpressionError(f"expected {text!r}, found {found}", col, self.src)

    def parse(self):
        if self.peek()[0] == "end":
            raise ExpressionError("empty expression", 1, self.src)
        node = self.expr()
        kind, t, col = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {t!r}", col, self.src)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = ("bin", op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return ("neg", self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return ("bin", "^", base, self.unary())
        return base

    def atom(self):
        kind, text, col = self.take()
        if kind == "num":
            return ("num", float(text))
        if kind == "name":
            if self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {text!r}", col, self.src)
                self.take()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[text][0]
                if len(args) != arity:
                    raise ExpressionError(
                        f"{text} takes {arity} argument{'s' if arity > 1 else ''}, got {len(args)}",
                        col,
                        self.src,
                    )
                return ("call", text, tuple(args))
            if text == self.variable:
                return ("var",)
            if text in CONSTANTS:
                return ("const", text)
            if text in FUNCTIONS:
                raise ExpressionError(f"function {text!r} needs arguments", col, self.src)
            raise ExpressionError(f"unknown identifier {text!r}", col, self.src)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExpressionError(f"unexpected {found}", col, self.src)


def _eval(node, x):
    tag = node[0]
    if tag == "num":
        return np.full_like(x, node[1])
    if tag == "var":
        return x
    if tag == "const":
        return np.full_like(x, CONSTANTS[node[1]])
    if tag == "neg":
        return -_eval(node[1], x)
    if tag == "bin":
        a, b = _eval(node[2], x), _eval(node[3], x)
        op = node[1]
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return a / b
        return np.power(a, b)
    _, fn = FUNCTIONS[node[1]]
    return fn(*(_eval(arg, x) for arg in node[2]))


def _show(node, var: str = "x") -> str:
    tag = node[0]
    if tag == "num":
        return repr(node[1])
    if tag == "var":
        return var
    if tag == "const":
        return node[1]
    if tag == "neg":
        return f"(-{_show(node[1], var)})"
    if tag == "bin":
        return f"({_show(node[2], var)} {node[1]} {_show(node[3], var)})"
    return f"{node[1]}({', '.join(_show(a, var) for a in node[2])})"


@dataclass(frozen=True)
class Expression:
    """A parsed expression in ``x``; call it with a float or an array."""

    source: str
    tree: tuple
    variable: str = "x"

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = _eval(self.tree, arr)
        out = np.asarray(out, dtype=float)
        if np.ndim(x) == 0:
            return float(out)
        return out

    def pretty(self) -> str:
        return _show(self.tree, self.variable)

    def __str__(self):
        return self.source


def parse_expression(src: str, variable: str = "x") -> Expression:
    """Parse ``src`` into a vectorised evaluator of ``variable``."""
    if not isinstance(src, str):
        raise ExpressionError(f"expression must be text, got {type(src).__name__}", 1)
    return Expression(src, _Parser(src, variable).parse(), variable)


def _step(x):
    return np.maximum(1e-5, 1e-5 * np.abs(x))


def central_derivative(f, x, order: int = 1, relative: bool = False):
    """Fourth-order central difference of ``f`` at ``x``.

    Step ``h = max(1e-5, 1e-5 |x|)``, or ``1e-3 |x|`` with ``relative`` (for
    functions of a positive argument that may be singular at 0).
    """
    x = np.asarray(x, dtype=float)
    h = 1e-3 * np.abs(x) if relative else _step(x)
    fp1, fm1 = f(x + h), f(x - h)
    fp2, fm2 = f(x + 2 * h), f(x - 2 * h)
    if order == 1:
        out = (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * h)
    elif order == 2:
        out = (-fp2 + 16 * fp1 - 30 * f(x) + 16 * fm1 - fm2) / (12 * h * h)
    else:
        raise ValueError("only first and second derivatives are supported")
    return float(out) if out.ndim == 0 else out
