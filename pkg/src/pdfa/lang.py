"""Labelled probabilistic While language: AST, parser, labelling, printer.

Concrete syntax::

    var x, y : 0..3;
    [x ?= {0,1}]^1;
    [y ?= {(0, 0.5), (1, 1/4), (2, 1/4)}]^2;
    if [x > 0]^3 then [skip]^4 else x := x - 1 fi;
    while y < 2 do y := y + 1 od^6

Labels are optional ``[...]^k`` annotations on elementary blocks; the test of
an ``if``/``while`` may be labelled either as ``if [b]^k`` or with a trailing
``fi^k`` / ``od^k``.  ``mod`` binds weaker than ``+``/``-`` so ``x+y mod 4``
reads as ``(x+y) mod 4``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterator, NamedTuple, Optional, Union

from .errors import LabelError, ParseError

PROB_TOL = 1e-9

# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # '+', '-', '*', 'mod'
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Var, Neg, BinOp]


@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class Compare:
    op: str  # '<', '<=', '=', '!=', '>', '>='
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pred:
    """Built-in unary predicate: ``prime(e)``, ``even(e)`` or ``odd(e)``."""

    name: str
    arg: Expr


@dataclass(frozen=True)
class Not:
    operand: "BExpr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # 'and', 'or'
    left: "BExpr"
    right: "BExpr"


BExpr = Union[BoolConst, Compare, Pred, Not, BoolOp]


@dataclass(frozen=True)
class DistLiteral:
    pairs: tuple  # ((value, probability), ...)
    uniform: bool = False

    @classmethod
    def uniform_over(cls, values):
        values = tuple(values)
        p = 1.0 / len(values)
        return cls(tuple((v, p) for v in values), uniform=True)

    @property
    def values(self):
        return tuple(v for v, _ in self.pairs)


@dataclass(frozen=True)
class Skip:
    label: Optional[int] = None


@dataclass(frozen=True)
class Assign:
    var: str
    expr: Expr
    label: Optional[int] = None


@dataclass(frozen=True)
class Random:
    var: str
    dist: DistLiteral
    label: Optional[int] = None


@dataclass(frozen=True)
class Seq:
    first: "Stmt"
    second: "Stmt"


@dataclass(frozen=True)
class If:
    cond: BExpr
    then: "Stmt"
    orelse: "Stmt"
    label: Optional[int] = None


@dataclass(frozen=True)
class While:
    cond: BExpr
    body: "Stmt"
    label: Optional[int] = None


Stmt = Union[Skip, Assign, Random, Seq, If, While]


@dataclass(frozen=True)
class VarDecl:
    name: str
    lo: int
    hi: int

    @property
    def size(self):
        return self.hi - self.lo + 1

    @property
    def values(self):
        return range(self.lo, self.hi + 1)


class Program(NamedTuple):
    decls: tuple  # of VarDecl, order fixes the tensor-factor order
    body: Stmt

    @property
    def var_names(self):
        return tuple(d.name for d in self.decls)

    def decl(self, name):
        for d in self.decls:
            if d.name == name:
                return d
        raise KeyError(name)


def seq(*stmts):
    """Right-nested sequence of one or more statements."""
    if not stmts:
        raise ValueError("seq() needs at least one statement")
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out


# --------------------------------------------------------------------------
# Syntactic helpers


def free_vars(e) -> frozenset:
    """Variables occurring in an arithmetic or boolean expression."""
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, (Num, BoolConst)):
        return frozenset()
    if isinstance(e, (Neg, Not)):
        return free_vars(e.operand)
    if isinstance(e, Pred):
        return free_vars(e.arg)
    if isinstance(e, (BinOp, Compare, BoolOp)):
        return free_vars(e.left) | free_vars(e.right)
    raise TypeError(f"not an expression: {e!r}")


def iter_blocks(stmt) -> Iterator:
    """Yield labelled nodes (blocks and if/while tests) in program-text order."""
    if isinstance(stmt, Seq):
        yield from iter_blocks(stmt.first)
        yield from iter_blocks(stmt.second)
    elif isinstance(stmt, If):
        yield stmt
        yield from iter_blocks(stmt.then)
        yield from iter_blocks(stmt.orelse)
    elif isinstance(stmt, While):
        yield stmt
        yield from iter_blocks(stmt.body)
    else:
        yield stmt


def labels_of(stmt) -> list:
    return [b.label for b in iter_blocks(stmt)]


def assign_labels(stmt):
    """Give every unlabelled block the smallest unused positive label.

    Existing labels are kept; unlabelled blocks are numbered in program-text
    order.  Raises :class:`LabelError` on duplicate existing labels.
    """
    used = set()
    for lab in labels_of(stmt):
        if lab is None:
            continue
        if not isinstance(lab, int) or lab <= 0:
            raise LabelError(f"labels must be positive integers, got {lab!r}")
        if lab in used:
            raise LabelError(f"duplicate label {lab}")
        used.add(lab)

    counter = 0

    def fresh():
        nonlocal counter
        counter += 1
        while counter in used:
            counter += 1
        used.add(counter)
        return counter

    def walk(s):
        if isinstance(s, Seq):
            first = walk(s.first)
            return Seq(first, walk(s.second))
        label = s.label if s.label is not None else fresh()
        if isinstance(s, If):
            then = walk(s.then)
            return If(s.cond, then, walk(s.orelse), label)
        if isinstance(s, While):
            return While(s.cond, walk(s.body), label)
        return replace(s, label=label)

    return walk(stmt)


# --------------------------------------------------------------------------
# Lexer

KEYWORDS = {
    "var", "skip", "if", "then", "else", "fi", "while", "do", "od",
    "and", "or", "not", "true", "false", "mod", "prime", "even", "odd",
}
PREDICATES = ("prime", "even", "odd")
RELOPS = ("<=", ">=", "!=", "<", ">", "=")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<float>\d+\.\d+)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>:=|\?=|<=|>=|!=|\.\.|[<>=+\-*/(){}\[\]^;,:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'int', 'float', 'name', 'kw', 'op', 'eof'
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tok_text = m.group()
            if kind == "name" and tok_text in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, tok_text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# --------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, text):
        self.tokens = tokenize(text)
        self.pos = 0
        self.decls = {}

    # token plumbing

    @property
    def tok(self):
        return self.tokens[self.pos]

    def peek(self, offset=1):
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def error(self, message, tok=None):
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.col)

    def at(self, *texts):
        return self.tok.kind in ("op", "kw") and self.tok.text in texts

    def expect(self, text):
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def advance(self):
        tok = self.tok
        self.pos += 1
        return tok

    def integer(self):
        negative = False
        if self.at("-"):
            self.advance()
            negative = True
        if self.tok.kind != "int":
            raise self.error("expected an integer")
        value = int(self.advance().text)
        return -value if negative else value

    def name(self):
        if self.tok.kind != "name":
            raise self.error(f"expected an identifier, found {self.tok.text!r}")
        return self.advance()

    def var_ref(self):
        tok = self.name()
        if tok.text not in self.decls:
            raise self.error(f"undeclared variable {tok.text!r}", tok)
        return tok.text

    # program

    def program(self):
        while self.at("var"):
            self.declaration()
        if not self.decls:
            raise self.error("a program needs at least one 'var' declaration")
        body = self.statements()
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        labels = [lab for lab in labels_of(body) if lab is not None]
        if len(labels) != len(set(labels)):
            dup = next(lab for lab in labels if labels.count(lab) > 1)
            raise LabelError(f"duplicate label {dup}")
        return Program(tuple(self.decls.values()), body)

    def declaration(self):
        self.expect("var")
        names = [self.name()]
        while self.at(","):
            self.advance()
            names.append(self.name())
        self.expect(":")
        lo_tok = self.tok
        lo = self.integer()
        self.expect("..")
        hi = self.integer()
        self.expect(";")
        if hi < lo:
            raise self.error(f"empty range {lo}..{hi}", lo_tok)
        for tok in names:
            if tok.text in self.decls:
                raise self.error(f"variable {tok.text!r} declared twice", tok)
            self.decls[tok.text] = VarDecl(tok.text, lo, hi)

    # statements

    def statements(self):
        stmts = [self.statement()]
        while self.at(";"):
            self.advance()
            if self.at("fi", "od", "else") or self.tok.kind == "eof":
                break  # trailing separator
            stmts.append(self.statement())
        return seq(*stmts)

    def statement(self):
        if self.at("["):
            self.advance()
            stmt = self.block()
            self.expect("]")
            return replace(stmt, label=self.label())
        if self.at("if"):
            return self.if_stmt()
        if self.at("while"):
            return self.while_stmt()
        return self.block()

    def label(self):
        self.expect("^")
        tok = self.tok
        value = self.integer()
        if value <= 0:
            raise self.error("labels must be positive integers", tok)
        return value

    def optional_label(self):
        return self.label() if self.at("^") else None

    def block(self):
        if self.at("skip"):
            self.advance()
            return Skip()
        if self.tok.kind != "name":
            raise self.error(f"expected a statement, found {self.tok.text or 'end of input'!r}")
        var = self.var_ref()
        if self.at(":="):
            self.advance()
            return Assign(var, self.expr())
        if self.at("?="):
            self.advance()
            return Random(var, self.dist(var))
        raise self.error("expected ':=' or '?='")

    def test(self):
        """A test, possibly written ``[b]^k``; returns (cond, label)."""
        if self.at("["):
            self.advance()
            cond = self.bexpr()
            self.expect("]")
            return cond, self.label()
        return self.bexpr(), None

    def merge_labels(self, head, tail):
        if head is not None and tail is not None and head != tail:
            raise self.error(f"conflicting test labels {head} and {tail}")
        return head if head is not None else tail

    def if_stmt(self):
        self.expect("if")
        cond, head = self.test()
        self.expect("then")
        then = self.statements()
        self.expect("else")
        orelse = self.statements()
        self.expect("fi")
        return If(cond, then, orelse, self.merge_labels(head, self.optional_label()))

    def while_stmt(self):
        self.expect("while")
        cond, head = self.test()
        self.expect("do")
        body = self.statements()
        self.expect("od")
        return While(cond, body, self.merge_labels(head, self.optional_label()))

    # distributions

    def probability(self):
        tok = self.tok
        if tok.kind == "float":
            self.advance()
            value = Fraction(tok.text)
        elif tok.kind == "int":
            self.advance()
            value = Fraction(int(tok.text))
            if self.at("/"):
                self.advance()
                if self.tok.kind != "int" or int(self.tok.text) == 0:
                    raise self.error("expected a nonzero denominator")
                value /= int(self.advance().text)
        else:
            raise self.error("expected a probability")
        if not 0 <= value <= 1:
            raise self.error(f"probability {float(value)} outside [0, 1]", tok)
        return float(value)

    def dist(self, var):
        open_tok = self.expect("{")
        decl = self.decls[var]
        if self.at("("):
            pairs = []
            while True:
                self.expect("(")
                vtok = self.tok
                value = self.integer()
                self.check_value(decl, value, vtok)
                self.expect(",")
                pairs.append((value, self.probability()))
                self.expect(")")
                if not self.at(","):
                    break
                self.advance()
            self.expect("}")
            total = sum(p for _, p in pairs)
            if abs(total - 1.0) > PROB_TOL:
                raise self.error(f"probabilities sum to {total}, not 1", open_tok)
            result = DistLiteral(tuple(pairs))
        else:
            values = []
            while True:
                vtok = self.tok
                lo = self.integer()
                if self.at(".."):
                    self.advance()
                    hi = self.integer()
                    values.extend(range(lo, hi + 1))
                else:
                    values.append(lo)
                for v in values:
                    self.check_value(decl, v, vtok)
                if not self.at(","):
                    break
                self.advance()
            self.expect("}")
            if not values:
                raise self.error("empty distribution", open_tok)
            result = DistLiteral.uniform_over(values)
        seen = result.values
        if len(seen) != len(set(seen)):
            raise self.error("value listed twice in distribution", open_tok)
        return result

    def check_value(self, decl, value, tok):
        if not decl.lo <= value <= decl.hi:
            raise self.error(
                f"value {value} outside the range {decl.lo}..{decl.hi} of {decl.name!r}", tok)

    # boolean expressions

    def bexpr(self):
        left = self.band()
        while self.at("or"):
            self.advance()
            left = BoolOp("or", left, self.band())
        return left

    def band(self):
        left = self.bnot()
        while self.at("and"):
            self.advance()
            left = BoolOp("and", left, self.bnot())
        return left

    def bnot(self):
        if self.at("not"):
            self.advance()
            return Not(self.bnot())
        return self.batom()

    def batom(self):
        if self.at("true", "false"):
            return BoolConst(self.advance().text == "true")
        if self.at(*PREDICATES):
            name = self.advance().text
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Pred(name, arg)
        if self.at("("):
            # Either a parenthesised test or an arithmetic operand of a comparison.
            saved = self.pos
            try:
                self.advance()
                inner = self.bexpr()
                self.expect(")")
                if not self.at(*RELOPS, "+", "-", "*", "mod"):
                    return inner
            except ParseError:
                pass
            self.pos = saved
        left = self.expr()
        if not self.at(*RELOPS):
            raise self.error("expected a comparison operator")
        op = self.advance().text
        return Compare(op, left, self.expr())

    # arithmetic expressions

    def expr(self):
        left = self.additive()
        while self.at("mod"):
            self.advance()
            left = BinOp("mod", left, self.additive())
        return left

    def additive(self):
        left = self.term()
        while self.at("+", "-"):
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.factor()
        while self.at("*"):
            self.advance()
            left = BinOp("*", left, self.factor())
        return left

    def factor(self):
        if self.at("-"):
            self.advance()
            return Neg(self.factor())
        if self.at("("):
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        if self.tok.kind == "int":
            return Num(int(self.advance().text))
        if self.tok.kind == "name":
            return Var(self.var_ref())
        raise self.error(f"expected an expression, found {self.tok.text or 'end of input'!r}")


def parse_program(text: str) -> Program:
    """Parse source text into a :class:`Program` (labels kept as written)."""
    return _Parser(text).program()


def load_program(text: str) -> Program:
    """Parse and complete the labelling."""
    prog = parse_program(text)
    return Program(prog.decls, assign_labels(prog.body))


# --------------------------------------------------------------------------
# Pretty printer

_ARITH_PREC = {"mod": 1, "+": 2, "-": 2, "*": 3}
_BOOL_PREC = {"or": 1, "and": 2}


def format_expr(e, prec=0) -> str:
    if isinstance(e, Num):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + format_expr(e.operand, 4)
    if isinstance(e, BinOp):
        p = _ARITH_PREC[e.op]
        text = f"{format_expr(e.left, p)} {e.op} {format_expr(e.right, p + 1)}"
        return f"({text})" if p < prec else text
    raise TypeError(f"not an arithmetic expression: {e!r}")


def format_bexpr(b, prec=0) -> str:
    if isinstance(b, BoolConst):
        return "true" if b.value else "false"
    if isinstance(b, Compare):
        return f"{format_expr(b.left)} {b.op} {format_expr(b.right)}"
    if isinstance(b, Pred):
        return f"{b.name}({format_expr(b.arg)})"
    if isinstance(b, Not):
        return "not " + format_bexpr(b.operand, 3)
    if isinstance(b, BoolOp):
        p = _BOOL_PREC[b.op]
        text = f"{format_bexpr(b.left, p)} {b.op} {format_bexpr(b.right, p + 1)}"
        return f"({text})" if p < prec else text
    raise TypeError(f"not a boolean expression: {b!r}")


def format_dist(d: DistLiteral) -> str:
    if d.uniform:
        return "{" + ", ".join(str(v) for v in d.values) + "}"
    return "{" + ", ".join(f"({v}, {_format_prob(p)})" for v, p in d.pairs) + "}"


def _format_prob(p: float) -> str:
    text = repr(float(p))
    if "e" in text or "n" in text:
        num, den = float(p).as_integer_ratio()
        return f"{num}/{den}"
    return text


def _labelled(text, label):
    return text if label is None else f"[{text}]^{label}"


def pretty_print(prog, indent="  ") -> str:
    """Render a program (or a bare statement) in the concrete syntax."""
    lines = []
    if isinstance(prog, Program):
        for d in prog.decls:
            lines.append(f"var {d.name} : {d.lo}..{d.hi};")
        stmt = prog.body
    else:
        stmt = prog

    def emit(s, depth):
        pad = indent * depth
        parts = []
        flatten(s, parts)
        for i, part in enumerate(parts):
            sep = ";" if i < len(parts) - 1 else ""
            if isinstance(part, If):
                lines.append(f"{pad}if {format_bexpr(part.cond)} then")
                emit(part.then, depth + 1)
                lines.append(f"{pad}else")
                emit(part.orelse, depth + 1)
                lines.append(f"{pad}fi{_suffix(part.label)}{sep}")
            elif isinstance(part, While):
                lines.append(f"{pad}while {format_bexpr(part.cond)} do")
                emit(part.body, depth + 1)
                lines.append(f"{pad}od{_suffix(part.label)}{sep}")
            else:
                lines.append(f"{pad}{format_block(part)}{sep}")

    emit(stmt, 0)
    return "\n".join(lines) + "\n"


def _suffix(label):
    return "" if label is None else f"^{label}"


def flatten(s, out):
    if isinstance(s, Seq):
        flatten(s.first, out)
        flatten(s.second, out)
    else:
        out.append(s)
    return out


def format_block(b) -> str:
    """One-line rendering of an elementary block or a test."""
    if isinstance(b, Skip):
        return _labelled("skip", b.label)
    if isinstance(b, Assign):
        return _labelled(f"{b.var} := {format_expr(b.expr)}", b.label)
    if isinstance(b, Random):
        return _labelled(f"{b.var} ?= {format_dist(b.dist)}", b.label)
    if isinstance(b, (If, While)) or hasattr(b, "cond"):
        return _labelled(format_bexpr(b.cond), b.label)
    raise TypeError(f"not a block: {b!r}")
