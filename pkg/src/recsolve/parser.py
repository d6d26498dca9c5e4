"""Parser for the recurrence DSL and its expression/constraint syntax.

Grammar (one definition per `.rec` file, `#` comments):

    recdef    := "def" name "(" args ")" ";" "pre" constraint ";" case+
    case      := name "(" args ")" "=" expr "if" constraint ";"

Expressions use infix `+ - * /`, `^` for powers, `floor(e)`, `ceil(e)`,
`log2ceil(e)`, `max(e,e)`, `min(e,e)`, `ite(c,e,e)`, function application
`f(e,...)` and rational literals `p/q`.  Constraints combine comparisons
(`= != < <= > >=`) with `and`, `or`, `not`, `true`, `false`.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .expr import (
    Add, And, BoolLit, Call, Ceil, Cmp, Const, Constraint, Div, Expr, Floor,
    Ite, Log2Ceil, Max, Min, Mul, Not, Or, Pow, Sub, Var,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass
class Token:
    kind: str  # NAME INT OP EOF
    text: str
    line: int
    col: int


_TWO_CHAR = ("<=", ">=", "!=")
_ONE_CHAR = "+-*/^(),;=<>"
_KEYWORDS = {"def", "pre", "if", "and", "or", "not", "true", "false"}
_BUILTINS = {"floor", "ceil", "log2ceil", "max", "min", "ite"}


def tokenize(text: str) -> list:
    toks = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text[i:i + 2] in _TWO_CHAR:
            toks.append(Token("OP", text[i:i + 2], line, col))
            i += 2
            col += 2
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("INT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(Token("NAME", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch in _ONE_CHAR:
            toks.append(Token("OP", ch, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(Token("EOF", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, message: str):
        t = self.peek()
        raise ParseError(message, t.line, t.col)

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.text != text:
            self.fail(f"expected {text!r}, found {t.text or 'end of input'!r}")
        return self.next()

    def expect_name(self) -> Token:
        t = self.peek()
        if t.kind != "NAME" or t.text in _KEYWORDS:
            self.fail(f"expected a name, found {t.text or 'end of input'!r}")
        return self.next()

    def at(self, text: str) -> bool:
        return self.peek().text == text

    # -- expressions -------------------------------------------------------

    def expression(self) -> Expr:
        e = self.term()
        while self.at("+") or self.at("-"):
            op = self.next().text
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.at("*") or self.at("/"):
            op = self.next().text
            rhs = self.unary()
            if op == "/":
                if isinstance(e, Const) and isinstance(rhs, Const):
                    if rhs.value == 0:
                        self.fail("division by the literal constant zero")
                    e = Const(e.value / rhs.value)  # rational literal p/q
                else:
                    e = Div(e, rhs)
            else:
                e = Mul(e, rhs)
        return e

    def unary(self) -> Expr:
        if self.at("-"):
            self.next()
            inner = self.unary()
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Sub(Const(Fraction(0)), inner)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.at("^"):
            tok = self.next()
            exp = self.unary()
            try:
                return Pow(base, exp)
            except ValueError as err:
                raise ParseError(str(err), tok.line, tok.col) from None
        return base

    def atom(self) -> Expr:
        t = self.peek()
        if t.kind == "INT":
            self.next()
            return Const(Fraction(int(t.text)))
        if t.text == "(":
            self.next()
            e = self.expression()
            self.expect(")")
            return e
        if t.kind == "NAME" and t.text not in _KEYWORDS:
            name = self.next().text
            if not self.at("("):
                return Var(name)
            self.next()
            if name == "ite":
                cond = self.constraint()
                self.expect(",")
                then = self.expression()
                self.expect(",")
                other = self.expression()
                self.expect(")")
                return Ite(cond, then, other)
            args = [self.expression()]
            while self.at(","):
                self.next()
                args.append(self.expression())
            self.expect(")")
            if name in _BUILTINS:
                return self._builtin(name, args, t)
            return Call(name, tuple(args))
        self.fail(f"expected an expression, found {t.text or 'end of input'!r}")

    def _builtin(self, name: str, args: list, t: Token) -> Expr:
        unary = {"floor": Floor, "ceil": Ceil, "log2ceil": Log2Ceil}
        binary = {"max": Max, "min": Min}
        if name in unary:
            if len(args) != 1:
                raise ParseError(f"{name} takes one argument", t.line, t.col)
            return unary[name](args[0])
        if len(args) != 2:
            raise ParseError(f"{name} takes two arguments", t.line, t.col)
        return binary[name](args[0], args[1])

    # -- constraints ---------------------------------------------------------

    def constraint(self) -> Constraint:
        c = self.conjunction()
        while self.at("or"):
            self.next()
            c = Or(c, self.conjunction())
        return c

    def conjunction(self) -> Constraint:
        c = self.negation()
        while self.at("and"):
            self.next()
            c = And(c, self.negation())
        return c

    def negation(self) -> Constraint:
        if self.at("not"):
            self.next()
            return Not(self.negation())
        return self.constraint_atom()

    def constraint_atom(self) -> Constraint:
        t = self.peek()
        if t.text == "true":
            self.next()
            return BoolLit(True)
        if t.text == "false":
            self.next()
            return BoolLit(False)
        if t.text == "(":
            # either a parenthesised constraint or a parenthesised expression
            # starting a comparison; try the constraint reading first
            saved = self.pos
            try:
                self.next()
                c = self.constraint()
                self.expect(")")
                if self.peek().text in ("=", "!=", "<", "<=", ">", ">="):
                    raise ParseError("comparison of constraints", t.line, t.col)
                return c
            except ParseError:
                self.pos = saved
        return self.comparison()

    def comparison(self) -> Constraint:
        lhs = self.expression()
        t = self.peek()
        if t.text not in ("=", "!=", "<", "<=", ">", ">="):
            self.fail(f"expected a comparison operator, found {t.text or 'end of input'!r}")
        op = self.next().text
        rhs = self.expression()
        try:
            return Cmp(op, lhs, rhs)
        except ValueError as err:
            raise ParseError(str(err), t.line, t.col) from None

    # -- recurrence definitions ----------------------------------------------

    def arg_list(self) -> tuple:
        self.expect("(")
        names = [self.expect_name().text]
        while self.at(","):
            self.next()
            names.append(self.expect_name().text)
        self.expect(")")
        return tuple(names)

    def recdef(self):
        from .recurrence import Case, RecurrenceDef

        self.expect("def")
        head = self.expect_name()
        name = head.text
        args = self.arg_list()
        if len(set(args)) != len(args):
            raise ParseError("duplicate argument name", head.line, head.col)
        self.expect(";")
        self.expect("pre")
        pre = self.constraint()
        self.expect(";")
        cases = []
        while not self.at(""):
            t = self.expect_name()
            if t.text != name:
                raise ParseError(f"case defines {t.text!r}, expected {name!r}", t.line, t.col)
            case_args = self.arg_list()
            if case_args != args:
                raise ParseError("case arguments differ from the definition header",
                                 t.line, t.col)
            self.expect("=")
            body = self.expression()
            self.expect("if")
            guard = self.constraint()
            self.expect(";")
            cases.append(Case(body, guard))
        if not cases:
            self.fail("expected at least one case")
        return RecurrenceDef(name, args, pre, tuple(cases))


def parse_expression(text: str) -> Expr:
    p = _Parser(text)
    e = p.expression()
    if p.peek().kind != "EOF":
        p.fail("trailing input after expression")
    return e


def parse_constraint(text: str) -> Constraint:
    p = _Parser(text)
    c = p.constraint()
    if p.peek().kind != "EOF":
        p.fail("trailing input after constraint")
    return c


def parse_recurrence(text: str):
    """Parse a full `.rec` definition; returns a validated RecurrenceDef."""
    return _Parser(text).recdef()
