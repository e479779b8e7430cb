"""A small arithmetic expression language for user-defined scalar fields.

Grammar (highest precedence first):
    power   := atom ['^' factor]        right associative
    factor  := '-' factor | power
    term    := factor (('*' | '/') factor)*
    expr    := term (('+' | '-') term)*
    atom    := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

Functions: sin cos exp sqrt log, all unary.  Identifiers are free
variables; their admissible names are checked when the expression is
bound to an evaluation context, not at parse time.  Parse errors carry
line and column.
"""
import math
from dataclasses import dataclass

from .errors import EvaluationError, ExpressionError

FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "sqrt": math.sqrt,
    "log": math.log,
}

_OPS = set("+-*/^(),")


@dataclass(frozen=True)
class Token:
    kind: str        # "num", "ident", "op", "end"
    text: str
    line: int
    column: int


def _tokenize(src):
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(src)
    while i < n:
        ch = src[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        start_col = col
        if ch.isdigit() or (ch == "." and i + 1 < n and src[i + 1].isdigit()):
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
                raise ExpressionError(f"malformed number {text!r}", line,
                                      start_col)
            tokens.append(Token("num", text, line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(Token("ident", src[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch in _OPS:
            tokens.append(Token("op", ch, line, start_col))
            i += 1
            col += 1
            continue
        raise ExpressionError(f"unexpected character {ch!r}", line, start_col)
    tokens.append(Token("end", "", line, col))
    return tokens


# -- syntax tree ---------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    line: int = 1
    column: int = 0


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, text):
        tok = self.peek()
        if tok.kind == "op" and tok.text == text:
            return self.advance()
        found = tok.text or "end of input"
        raise ExpressionError(f"expected {text!r}, found {found!r}",
                              tok.line, tok.column)

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(f"unexpected token {tok.text!r}",
                                  tok.line, tok.column)
        return node

    def expr(self):
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            return BinOp("^", base, self.factor())
        return base

    def atom(self):
        tok = self.advance()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "ident":
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "(":
                if tok.text not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {tok.text!r}",
                                          tok.line, tok.column)
                self.advance()
                arg = self.expr()
                sep = self.peek()
                if sep.kind == "op" and sep.text == ",":
                    raise ExpressionError(
                        f"function {tok.text!r} takes exactly one argument",
                        sep.line, sep.column)
                self.expect_op(")")
                return Call(tok.text, arg)
            if tok.text in FUNCTIONS:
                raise ExpressionError(
                    f"expected '(' after function {tok.text!r}",
                    tok.line, tok.column)
            return Var(tok.text, tok.line, tok.column)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        found = tok.text or "end of input"
        raise ExpressionError(f"expected expression, found {found!r}",
                              tok.line, tok.column)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _node_prec(node):
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return 9


def to_string(node):
    """Canonical rendering with minimal parentheses.

    parse(to_string(ast)) reproduces the tree, and to_string is a fixed
    point on its own output.
    """
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = to_string(node.operand)
        if _node_prec(node.operand) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Call):
        return f"{node.fn}({to_string(node.arg)})"
    if isinstance(node, BinOp):
        prec = _PREC[node.op]
        left = to_string(node.left)
        right = to_string(node.right)
        if node.op == "^":
            # left-associated or low-precedence bases need parentheses;
            # the exponent slot admits prefix minus without them
            if _node_prec(node.left) <= prec:
                left = f"({left})"
            if isinstance(node.right, BinOp):
                right = f"({right})"
        else:
            if _node_prec(node.left) < prec:
                left = f"({left})"
            rp = _node_prec(node.right)
            if rp < prec or (rp == prec and node.op in "-/"):
                right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


def _variables(node, acc):
    if isinstance(node, Var):
        acc.append(node)
    elif isinstance(node, Neg):
        _variables(node.operand, acc)
    elif isinstance(node, BinOp):
        _variables(node.left, acc)
        _variables(node.right, acc)
    elif isinstance(node, Call):
        _variables(node.arg, acc)


def _evaluate(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise ExpressionError(f"unknown identifier {node.name!r}",
                                  node.line, node.column) from None
    if isinstance(node, Neg):
        return -_evaluate(node.operand, env)
    if isinstance(node, Call):
        arg = _evaluate(node.arg, env)
        try:
            return FUNCTIONS[node.fn](arg)
        except ValueError as exc:
            raise EvaluationError(f"{node.fn}({arg}): {exc}") from None
    a = _evaluate(node.left, env)
    b = _evaluate(node.right, env)
    try:
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return a ** b
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        raise EvaluationError(f"{a} {node.op} {b}: {exc}") from None


class Expression:
    """Parsed expression with evaluation and canonical printing."""

    def __init__(self, ast, source=""):
        self.ast = ast
        self.source = source

    def __repr__(self):
        return f"Expression({self.pretty()!r})"

    def pretty(self):
        return to_string(self.ast)

    def variables(self):
        acc = []
        _variables(self.ast, acc)
        return sorted({v.name for v in acc})

    def check_variables(self, allowed):
        acc = []
        _variables(self.ast, acc)
        for var in acc:
            if var.name not in allowed:
                raise ExpressionError(
                    f"unknown identifier {var.name!r} (allowed: "
                    f"{', '.join(sorted(allowed))})", var.line, var.column)

    def evaluate(self, env):
        return float(_evaluate(self.ast, env))

    def bind(self, names):
        """Fast positional evaluator f(*values) for the given name order."""
        names = list(names)
        self.check_variables(set(names))

        def fn(*vals):
            return float(_evaluate(self.ast, dict(zip(names, vals))))
        return fn


def parse_expression(src):
    """Parse source text into an Expression; errors carry line/column."""
    tokens = _tokenize(src)
    if tokens[0].kind == "end":
        raise ExpressionError("expected expression, found end of input",
                              tokens[0].line, tokens[0].column)
    ast = _Parser(tokens).parse()
    return Expression(ast, source=src)
