"""Tokenizer and recursive-descent parser for the sequence DSL.

The grammar is small::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := postfix ('^' unary)?
    postfix := atom '!'*
    atom    := NUMBER | 'n' | 'k' | 'e' | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Nodes are plain tuples: ``("num", v)``, ``("var",)``, ``("add", a, b)``,
``("sub", a, b)``, ``("mul", a, b)``, ``("div", a, b)``, ``("neg", a)``,
``("pow", a, b)``, ``("fact", a)``, ``("call", name, (args...))``.
Both ``n`` and ``k`` denote the running index so that grade maps such as
``k^2`` read naturally.
"""

from __future__ import annotations

import math
import re

from .errors import ParseError

FUNCTIONS = {"ln": 1, "log": 1, "exp": 1, "sqrt": 1, "merge": 2}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^!(),]))"
)


def tokenize(text):
    tokens = []
    pos = 0
    stripped = text.rstrip()
    while pos < len(stripped):
        m = _TOKEN.match(stripped, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {stripped[pos]!r}", text, pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(stripped)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            raise ParseError(f"expected {value!r}, found {tok[1] or 'end of input'!r}",
                             self.text, tok[2])
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", self.text, tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = ("add" if op == "+" else "sub", node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = ("mul" if op == "*" else "div", node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return ("neg", self.unary())
        return self.power()

    def power(self):
        base = self.postfix()
        if self.peek()[1] == "^":
            self.take()
            return ("pow", base, self.unary())
        return base

    def postfix(self):
        node = self.atom()
        while self.peek()[1] == "!":
            self.take()
            node = ("fact", node)
        return node

    def atom(self):
        kind, value, pos = self.peek()
        if kind == "num":
            self.take()
            return ("num", float(value))
        if kind == "name":
            self.take()
            if value in ("n", "k"):
                return ("var",)
            if value == "e":
                return ("num", math.e)
            if value not in FUNCTIONS:
                raise ParseError(f"unknown name {value!r}", self.text, pos)
            self.take("(")
            args = [self.expr()]
            while self.peek()[1] == ",":
                self.take()
                args.append(self.expr())
            self.take(")")
            if len(args) != FUNCTIONS[value]:
                raise ParseError(f"{value} takes {FUNCTIONS[value]} argument(s)", self.text, pos)
            name = "ln" if value == "log" else value
            return ("call", name, tuple(args))
        if value == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        raise ParseError(f"unexpected token {value or 'end of input'!r}", self.text, pos)


def parse_expression(text):
    """Parse a DSL expression into a tuple AST."""
    if not text or not text.strip():
        raise ParseError("empty expression", text, 0)
    return _Parser(text).parse()


def constant_value(node):
    """Return the numeric value of a variable-free node, or None."""
    tag = node[0]
    if tag == "num":
        return node[1]
    if tag == "var":
        return None
    if tag == "neg":
        v = constant_value(node[1])
        return None if v is None else -v
    if tag == "fact":
        v = constant_value(node[1])
        return None if v is None else math.gamma(v + 1)
    if tag == "call":
        if node[1] == "merge":
            return None
        v = constant_value(node[2][0])
        if v is None:
            return None
        return {"ln": math.log, "exp": math.exp, "sqrt": math.sqrt}[node[1]](v)
    a, b = constant_value(node[1]), constant_value(node[2])
    if a is None or b is None:
        return None
    return {"add": a + b, "sub": a - b, "mul": a * b,
            "div": a / b if b else math.inf, "pow": a ** b}[tag]


def format_node(node):
    """Render an AST back to DSL text (fully parenthesized where needed)."""
    tag = node[0]
    if tag == "num":
        v = node[1]
        if v == math.e:
            return "e"
        return str(int(v)) if float(v).is_integer() else repr(v)
    if tag == "var":
        return "n"
    if tag == "neg":
        return f"-({format_node(node[1])})"
    if tag == "fact":
        inner = format_node(node[1])
        return f"{inner}!" if node[1][0] in ("var", "num") else f"({inner})!"
    if tag == "call":
        return f"{node[1]}({', '.join(format_node(a) for a in node[2])})"
    sym = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}[tag]
    return f"({format_node(node[1])}{sym}{format_node(node[2])})"
