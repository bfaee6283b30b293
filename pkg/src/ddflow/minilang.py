"""Lexer, parser and pretty-printer for MiniLang.

MiniLang is a tiny dynamically typed language used to feed the analysis::

    extern Source.getValue();
    extern Obj.transform(v);

    fn foo() {
      u = Source.getValue();
      v = new();
      if (Config.isPrivileged()) {
        result = u.transform(v);
        bar(result, v);
      }
    }

Besides the base grammar the parser accepts index (``a[i]``) and field
(``a.f``) accesses, both as expressions and as assignment targets.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    column: int
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


class ParseError(Exception):
    def __init__(self, diagnostics: list[ParseDiagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


# -- AST ----------------------------------------------------------------------
# Positions are excluded from equality so that parse(print(ast)) == ast.

@dataclass(frozen=True)
class Name:
    name: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Literal:
    text: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class New:
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    """``f(a)`` or ``A.b(a)``; the callee is kept as dotted text."""
    callee: str
    args: tuple["Expr", ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class MethodCall:
    """``expr.m(a)`` where the receiver is not a plain dotted name."""
    receiver: "Expr"
    method: str
    args: tuple["Expr", ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Index:
    base: "Expr"
    index: "Expr"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class FieldAccess:
    base: "Expr"
    name: str
    line: int = field(default=0, compare=False)


Expr = Union[Name, Literal, New, Call, MethodCall, Binary, Index, FieldAccess]


@dataclass(frozen=True)
class Assign:
    target: Expr
    value: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ExprStmt:
    expr: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...] | None = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class While:
    cond: Expr
    body: tuple["Stmt", ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Return:
    value: Expr | None = None
    line: int = field(default=0, compare=False)


Stmt = Union[Assign, ExprStmt, If, While, Return]


@dataclass(frozen=True)
class Extern:
    full_name: str
    params: tuple[str, ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple[str, ...]
    body: tuple[Stmt, ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Program:
    items: tuple[Union[Extern, Function], ...] = ()

    @property
    def externs(self) -> list[Extern]:
        return [i for i in self.items if isinstance(i, Extern)]

    @property
    def functions(self) -> list[Function]:
        return [i for i in self.items if isinstance(i, Function)]


# -- lexer --------------------------------------------------------------------

KEYWORDS = {"extern", "fn", "if", "else", "while", "return", "new"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<int>[0-9]+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<op>==|!=|<=|>=|&&|\|\||[-+*/%<>=(){}\[\],;.])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # name, keyword, int, string, op, eof
    text: str
    line: int
    column: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError([ParseDiagnostic(line, pos - line_start + 1,
                                              f"unexpected character {source[pos]!r}")])
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            if kind == "name" and text in KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, text, line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# -- parser -------------------------------------------------------------------

BINARY_PRECEDENCE = {
    "||": 1, "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, ">": 4, "<=": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6, "%": 6,
}


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError([ParseDiagnostic(tok.line, tok.column, message)])

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "keyword")

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def advance(self) -> Token:
        tok = self.tok
        self.pos += 1
        return tok

    def expect_name(self) -> Token:
        if self.tok.kind != "name":
            found = self.tok.text or "end of input"
            raise self.error(f"expected a name, found {found!r}")
        return self.advance()

    def dotted_name(self) -> str:
        parts = [self.expect_name().text]
        while self.at(".") and self.peek().kind == "name":
            self.advance()
            parts.append(self.advance().text)
        return ".".join(parts)

    def params(self) -> tuple[str, ...]:
        self.expect("(")
        names: list[str] = []
        if not self.at(")"):
            names.append(self.expect_name().text)
            while self.at(","):
                self.advance()
                names.append(self.expect_name().text)
        self.expect(")")
        return tuple(names)

    # program ---------------------------------------------------------------

    def program(self) -> Program:
        items: list[Union[Extern, Function]] = []
        seen: dict[str, Token] = {}
        while self.tok.kind != "eof":
            start = self.tok
            if self.at("extern"):
                self.advance()
                name = self.dotted_name()
                params = self.params()
                self.expect(";")
                item: Union[Extern, Function] = Extern(name, params, line=start.line)
            elif self.at("fn"):
                self.advance()
                name = self.expect_name().text
                params = self.params()
                body = self.block()
                item = Function(name, params, body, line=start.line)
            else:
                raise self.error(f"expected 'extern' or 'fn', found {start.text!r}")
            key = item.full_name if isinstance(item, Extern) else item.name
            if key in seen:
                kind = "extern" if isinstance(item, Extern) else "function"
                raise self.error(f"duplicate {kind} name {key!r}", start)
            seen[key] = start
            items.append(item)
        return Program(tuple(items))

    def block(self) -> tuple[Stmt, ...]:
        self.expect("{")
        stmts: list[Stmt] = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated block")
            stmts.append(self.statement())
        self.expect("}")
        return tuple(stmts)

    def statement(self) -> Stmt:
        start = self.tok
        if self.at("if"):
            self.advance()
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            then = self.block()
            orelse = None
            if self.at("else"):
                self.advance()
                orelse = self.block()
            return If(cond, then, orelse, line=start.line)
        if self.at("while"):
            self.advance()
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            return While(cond, self.block(), line=start.line)
        if self.at("return"):
            self.advance()
            value = None if self.at(";") else self.expression()
            self.expect(";")
            return Return(value, line=start.line)
        expr = self.expression()
        if self.at("="):
            if not isinstance(expr, (Name, Index, FieldAccess)):
                raise self.error("invalid assignment target", start)
            self.advance()
            value = self.expression()
            self.expect(";")
            return Assign(expr, value, line=start.line)
        self.expect(";")
        return ExprStmt(expr, line=start.line)

    # expressions -------------------------------------------------------------

    def expression(self, min_prec: int = 1) -> Expr:
        left = self.postfix()
        while self.tok.kind == "op" and BINARY_PRECEDENCE.get(self.tok.text, 0) >= min_prec:
            op = self.advance()
            right = self.expression(BINARY_PRECEDENCE[op.text] + 1)
            left = Binary(op.text, left, right, line=op.line)
        return left

    def args(self) -> tuple[Expr, ...]:
        self.expect("(")
        out: list[Expr] = []
        if not self.at(")"):
            out.append(self.expression())
            while self.at(","):
                self.advance()
                out.append(self.expression())
        self.expect(")")
        return tuple(out)

    def postfix(self) -> Expr:
        tok = self.tok
        expr: Expr
        # `dotted` tracks whether expr is still a plain dotted name chain
        dotted: str | None = None
        if tok.kind == "name":
            self.advance()
            expr, dotted = Name(tok.text, line=tok.line), tok.text
        elif tok.kind in ("int", "string"):
            self.advance()
            expr = Literal(tok.text, line=tok.line)
        elif self.at("new"):
            self.advance()
            self.expect("(")
            self.expect(")")
            expr = New(line=tok.line)
        elif self.at("("):
            self.advance()
            expr = self.expression()
            self.expect(")")
        else:
            found = tok.text or "end of input"
            raise self.error(f"expected an expression, found {found!r}")

        while True:
            if self.at("(") and dotted is not None:
                expr, dotted = Call(dotted, self.args(), line=tok.line), None
            elif self.at("."):
                self.advance()
                name = self.expect_name()
                if dotted is not None:
                    if self.at("("):
                        expr, dotted = Call(f"{dotted}.{name.text}", self.args(), line=tok.line), None
                    else:
                        expr, dotted = FieldAccess(expr, name.text, line=name.line), f"{dotted}.{name.text}"
                elif self.at("("):
                    expr = MethodCall(expr, name.text, self.args(), line=name.line)
                else:
                    expr = FieldAccess(expr, name.text, line=name.line)
            elif self.at("["):
                lb = self.advance()
                index = self.expression()
                self.expect("]")
                expr, dotted = Index(expr, index, line=lb.line), None
            else:
                return expr


def parse(source: str) -> Program:
    """Parse MiniLang text; raises :class:`ParseError` with diagnostics."""
    parser = _Parser(tokenize(source))
    return parser.program()


# -- printer ------------------------------------------------------------------

def format_expr(e: Expr, parent_prec: int = 0) -> str:
    if isinstance(e, Name):
        return e.name
    if isinstance(e, Literal):
        return e.text
    if isinstance(e, New):
        return "new()"
    if isinstance(e, Call):
        return f"{e.callee}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, MethodCall):
        return f"{_postfix_base(e.receiver)}.{e.method}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, Index):
        return f"{_postfix_base(e.base)}[{format_expr(e.index)}]"
    if isinstance(e, FieldAccess):
        return f"{_postfix_base(e.base)}.{e.name}"
    if isinstance(e, Binary):
        prec = BINARY_PRECEDENCE[e.op]
        text = f"{format_expr(e.left, prec)} {e.op} {format_expr(e.right, prec + 1)}"
        return f"({text})" if prec < parent_prec else text
    raise TypeError(f"not an expression: {e!r}")


def _postfix_base(e: Expr) -> str:
    text = format_expr(e)
    return f"({text})" if isinstance(e, Binary) else text


def _format_block(stmts: tuple[Stmt, ...], indent: int) -> list[str]:
    lines: list[str] = []
    pad = "  " * indent
    for s in stmts:
        if isinstance(s, Assign):
            lines.append(f"{pad}{format_expr(s.target)} = {format_expr(s.value)};")
        elif isinstance(s, ExprStmt):
            lines.append(f"{pad}{format_expr(s.expr)};")
        elif isinstance(s, Return):
            lines.append(f"{pad}return;" if s.value is None else f"{pad}return {format_expr(s.value)};")
        elif isinstance(s, If):
            lines.append(f"{pad}if ({format_expr(s.cond)}) {{")
            lines += _format_block(s.then, indent + 1)
            if s.orelse is not None:
                lines.append(f"{pad}}} else {{")
                lines += _format_block(s.orelse, indent + 1)
            lines.append(f"{pad}}}")
        elif isinstance(s, While):
            lines.append(f"{pad}while ({format_expr(s.cond)}) {{")
            lines += _format_block(s.body, indent + 1)
            lines.append(f"{pad}}}")
    return lines


def format_program(program: Program) -> str:
    lines: list[str] = []
    for item in program.items:
        if isinstance(item, Extern):
            lines.append(f"extern {item.full_name}({', '.join(item.params)});")
        else:
            lines.append(f"fn {item.name}({', '.join(item.params)}) {{")
            lines += _format_block(item.body, 1)
            lines.append("}")
    return "\n".join(lines) + ("\n" if lines else "")
