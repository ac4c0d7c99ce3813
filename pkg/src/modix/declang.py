"""The miniature declaration language and the interpreter statement language.

Headers (`.dh`) hold struct definitions, struct forward declarations, enums,
aliases, and function declarations.  The classifier attached to every parsed
declaration records which referenced names require a full definition and which
are satisfied by a forward declaration: a named field type at pointer depth 0
needs a definition, anything reached only through `ptr<...>` does not, and
alias targets and function signatures never do.  That distinction is what the
semantic index downstream exploits.

All functions here are pure over immutable inputs and safe to call
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .errors import DuplicateDefinition, LexError, ParseError

KEYWORDS = frozenset(
    {
        "include",
        "struct",
        "enum",
        "using",
        "fn",
        "ptr",
        "i32",
        "i64",
        "f64",
        "bool",
        # statement language
        "new",
        "declare",
        "sizeof",
        "call",
    }
)

BUILTIN_SIZES = {"i32": 4, "i64": 8, "f64": 8, "bool": 1}
POINTER_SIZE = 8
ENUM_SIZE = 4

_PUNCT_TWO = ("->",)
_PUNCT_ONE = frozenset("{}();:,<>=")


class TokenKind(Enum):
    KEYWORD = "keyword"
    IDENT = "ident"
    PUNCT = "punct"
    STRING = "string"
    EOF = "eof"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    """Scan UTF-8 text into tokens; `//` comments run to end of line."""
    tokens: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(source)

    def advance(count: int = 1) -> None:
        nonlocal i, line, col
        for _ in range(count):
            if source[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            advance()
            continue
        if ch == "/" and source.startswith("//", i):
            while i < n and source[i] != "\n":
                advance()
            continue
        start_line, start_col = line, col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = TokenKind.KEYWORD if text in KEYWORDS else TokenKind.IDENT
            tokens.append(Token(kind, text, start_line, start_col))
            advance(j - i)
            continue
        if ch == '"':
            j = i + 1
            while j < n and source[j] not in '"\n':
                j += 1
            if j >= n or source[j] != '"':
                raise LexError(start_line, start_col, "unterminated string literal")
            tokens.append(Token(TokenKind.STRING, source[i + 1:j], start_line, start_col))
            advance(j + 1 - i)
            continue
        two = source[i:i + 2]
        if two in _PUNCT_TWO:
            tokens.append(Token(TokenKind.PUNCT, two, start_line, start_col))
            advance(2)
            continue
        if ch in _PUNCT_ONE:
            tokens.append(Token(TokenKind.PUNCT, ch, start_line, start_col))
            advance()
            continue
        raise LexError(start_line, start_col, f"unexpected character {ch!r}")

    tokens.append(Token(TokenKind.EOF, "", line, col))
    return tokens


# --- AST ---


class DeclKind(Enum):
    STRUCT_DEF = "struct_def"
    STRUCT_FWD = "struct_fwd"
    ENUM_DEF = "enum_def"
    ALIAS = "alias"
    FUNC_DECL = "func_decl"


class Need(Enum):
    DEFINITION = "definition"
    FORWARD_OK = "forward_ok"


@dataclass(frozen=True)
class TypeRef:
    base: str
    indirection: int = 0

    @property
    def is_builtin(self) -> bool:
        return self.base in BUILTIN_SIZES


@dataclass(frozen=True)
class StructField:
    name: str
    type: TypeRef


@dataclass(frozen=True)
class Dep:
    name: str
    need: Need


@dataclass(frozen=True)
class Decl:
    """One parsed declaration plus its classified dependency edges."""

    name: str
    kind: DeclKind
    fields: tuple[StructField, ...] = ()
    enumerators: tuple[str, ...] = ()
    alias_target: TypeRef | None = None
    params: tuple[TypeRef, ...] = ()
    returns: TypeRef | None = None
    deps: tuple[Dep, ...] = ()
    origin: tuple[str, int] = ("", 0)

    @property
    def is_forward(self) -> bool:
        return self.kind is DeclKind.STRUCT_FWD


@dataclass(frozen=True)
class HeaderAST:
    path: str
    items: tuple[Decl, ...]
    includes: tuple[str, ...]


def compute_deps(
    kind: DeclKind,
    fields: tuple[StructField, ...] = (),
    alias_target: TypeRef | None = None,
    params: tuple[TypeRef, ...] = (),
    returns: TypeRef | None = None,
) -> tuple[Dep, ...]:
    """Classify referenced names; a definition-need occurrence wins over
    forward-only ones for the same name."""
    needs: dict[str, Need] = {}

    def visit(ref: TypeRef | None, need: Need) -> None:
        if ref is None or ref.is_builtin:
            return
        prior = needs.get(ref.base)
        if prior is None or (prior is Need.FORWARD_OK and need is Need.DEFINITION):
            needs[ref.base] = need

    if kind is DeclKind.STRUCT_DEF:
        for f in fields:
            need = Need.DEFINITION if f.type.indirection == 0 else Need.FORWARD_OK
            visit(f.type, need)
    elif kind is DeclKind.ALIAS:
        visit(alias_target, Need.FORWARD_OK)
    elif kind is DeclKind.FUNC_DECL:
        for p in params:
            visit(p, Need.FORWARD_OK)
        visit(returns, Need.FORWARD_OK)
    return tuple(Dep(name, need) for name, need in needs.items())


def with_deps(decl: Decl) -> Decl:
    return replace(
        decl,
        deps=compute_deps(
            decl.kind, decl.fields, decl.alias_target, decl.params, decl.returns
        ),
    )


# --- parsing ---


class _Cursor:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind is not TokenKind.EOF:
            self.pos += 1
        return tok

    def error(self, expected: str) -> ParseError:
        tok = self.peek()
        got = tok.text if tok.kind is not TokenKind.EOF else "end of input"
        return ParseError(tok.line, tok.col, expected, got)

    def expect_punct(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind is TokenKind.PUNCT and tok.text == text:
            return self.next()
        raise self.error(f"'{text}'")

    def expect_keyword(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind is TokenKind.KEYWORD and tok.text == text:
            return self.next()
        raise self.error(f"'{text}'")

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind is TokenKind.IDENT:
            return self.next()
        raise self.error("identifier")

    def accept_punct(self, text: str) -> bool:
        tok = self.peek()
        if tok.kind is TokenKind.PUNCT and tok.text == text:
            self.next()
            return True
        return False


def _parse_type(cur: _Cursor) -> TypeRef:
    tok = cur.peek()
    if tok.kind is TokenKind.KEYWORD and tok.text == "ptr":
        cur.next()
        cur.expect_punct("<")
        inner = _parse_type(cur)
        cur.expect_punct(">")
        return TypeRef(inner.base, inner.indirection + 1)
    if tok.kind is TokenKind.KEYWORD and tok.text in BUILTIN_SIZES:
        cur.next()
        return TypeRef(tok.text)
    if tok.kind is TokenKind.IDENT:
        cur.next()
        return TypeRef(tok.text)
    raise cur.error("type")


def _parse_item(cur: _Cursor, path: str) -> Decl | str:
    """Parse one header item; include directives come back as their path."""
    tok = cur.peek()
    if tok.kind is not TokenKind.KEYWORD:
        raise cur.error("declaration")
    origin = (path, tok.line)

    if tok.text == "include":
        cur.next()
        target = cur.peek()
        if target.kind is not TokenKind.STRING:
            raise cur.error("string literal")
        cur.next()
        cur.expect_punct(";")
        return target.text

    if tok.text == "struct":
        cur.next()
        name = cur.expect_ident().text
        if cur.accept_punct(";"):
            return Decl(name, DeclKind.STRUCT_FWD, origin=origin)
        cur.expect_punct("{")
        fields: list[StructField] = []
        while not cur.accept_punct("}"):
            fname = cur.expect_ident().text
            cur.expect_punct(":")
            ftype = _parse_type(cur)
            cur.expect_punct(";")
            fields.append(StructField(fname, ftype))
        cur.expect_punct(";")
        return with_deps(Decl(name, DeclKind.STRUCT_DEF, fields=tuple(fields), origin=origin))

    if tok.text == "enum":
        cur.next()
        name = cur.expect_ident().text
        cur.expect_punct("{")
        enumerators = [cur.expect_ident().text]
        while cur.accept_punct(","):
            enumerators.append(cur.expect_ident().text)
        cur.expect_punct("}")
        cur.expect_punct(";")
        return Decl(name, DeclKind.ENUM_DEF, enumerators=tuple(enumerators), origin=origin)

    if tok.text == "using":
        cur.next()
        name = cur.expect_ident().text
        cur.expect_punct("=")
        target = _parse_type(cur)
        cur.expect_punct(";")
        return with_deps(Decl(name, DeclKind.ALIAS, alias_target=target, origin=origin))

    if tok.text == "fn":
        cur.next()
        name = cur.expect_ident().text
        cur.expect_punct("(")
        params: list[TypeRef] = []
        if not cur.accept_punct(")"):
            params.append(_parse_type(cur))
            while cur.accept_punct(","):
                params.append(_parse_type(cur))
            cur.expect_punct(")")
        cur.expect_punct("->")
        returns = _parse_type(cur)
        cur.expect_punct(";")
        return with_deps(
            Decl(name, DeclKind.FUNC_DECL, params=tuple(params), returns=returns, origin=origin)
        )

    raise cur.error("declaration")


def parse_header(source: str, path: str) -> HeaderAST:
    """Parse one header.  A name may be forward-declared and defined in the
    same header (the definition wins later); two non-forward declarations of
    one name are rejected here."""
    cur = _Cursor(tokenize(source))
    items: list[Decl] = []
    includes: list[str] = []
    declared: dict[str, DeclKind] = {}
    while cur.peek().kind is not TokenKind.EOF:
        item = _parse_item(cur, path)
        if isinstance(item, str):
            includes.append(item)
            continue
        prior = declared.get(item.name)
        if prior is not None and prior is not DeclKind.STRUCT_FWD and not item.is_forward:
            raise DuplicateDefinition(item.name)
        if prior is None or prior is DeclKind.STRUCT_FWD:
            declared[item.name] = item.kind
        items.append(item)
    return HeaderAST(path, tuple(items), tuple(includes))


# --- interpreter statements ---


@dataclass(frozen=True)
class NewStmt:
    name: str


@dataclass(frozen=True)
class DeclareStmt:
    var: str
    type: TypeRef


@dataclass(frozen=True)
class SizeOfStmt:
    name: str


@dataclass(frozen=True)
class CallStmt:
    name: str


@dataclass(frozen=True)
class DirectiveStmt:
    name: str


Statement = NewStmt | DeclareStmt | SizeOfStmt | CallStmt | DirectiveStmt

DIRECTIVES = frozenset({"stats", "loaded", "strategy", "quit"})


def parse_statement(source: str) -> Statement:
    """Parse one interpreter statement or `.directive` line."""
    stripped = source.strip()
    if stripped.startswith("."):
        name = stripped[1:].strip()
        if name not in DIRECTIVES:
            raise ParseError(1, 1, "directive (.stats .loaded .strategy .quit)", stripped)
        return DirectiveStmt(name)

    cur = _Cursor(tokenize(source))
    tok = cur.peek()
    if tok.kind is not TokenKind.KEYWORD:
        raise cur.error("statement")
    stmt: Statement
    if tok.text == "new":
        cur.next()
        stmt = NewStmt(cur.expect_ident().text)
        cur.expect_punct(";")
    elif tok.text == "declare":
        cur.next()
        var = cur.expect_ident().text
        cur.expect_punct(":")
        ref = _parse_type(cur)
        cur.expect_punct(";")
        stmt = DeclareStmt(var, ref)
    elif tok.text == "sizeof":
        cur.next()
        cur.expect_punct("(")
        name = cur.expect_ident().text
        cur.expect_punct(")")
        cur.expect_punct(";")
        stmt = SizeOfStmt(name)
    elif tok.text == "call":
        cur.next()
        stmt = CallStmt(cur.expect_ident().text)
        cur.expect_punct(";")
    else:
        raise cur.error("statement")
    if cur.peek().kind is not TokenKind.EOF:
        raise cur.error("end of statement")
    return stmt


def resolution_request(stmt: Statement) -> tuple[str, Need] | None:
    """The (identifier, need) a statement asks name lookup for, if any."""
    if isinstance(stmt, NewStmt):
        return (stmt.name, Need.DEFINITION)
    if isinstance(stmt, SizeOfStmt):
        return (stmt.name, Need.DEFINITION)
    if isinstance(stmt, CallStmt):
        return (stmt.name, Need.FORWARD_OK)
    if isinstance(stmt, DeclareStmt):
        if stmt.type.is_builtin:
            return None
        need = Need.DEFINITION if stmt.type.indirection == 0 else Need.FORWARD_OK
        return (stmt.type.base, need)
    return None


# --- canonical rendering ---


def render_type(ref: TypeRef) -> str:
    text = ref.base
    for _ in range(ref.indirection):
        text = f"ptr<{text}>"
    return text


def render_decl(decl: Decl) -> str:
    if decl.kind is DeclKind.STRUCT_FWD:
        return f"struct {decl.name};"
    if decl.kind is DeclKind.STRUCT_DEF:
        body = " ".join(f"{f.name}: {render_type(f.type)};" for f in decl.fields)
        inner = f" {body} " if body else " "
        return f"struct {decl.name} {{{inner}}};"
    if decl.kind is DeclKind.ENUM_DEF:
        return f"enum {decl.name} {{ {', '.join(decl.enumerators)} }};"
    if decl.kind is DeclKind.ALIAS:
        return f"using {decl.name} = {render_type(decl.alias_target)};"
    params = ", ".join(render_type(p) for p in decl.params)
    return f"fn {decl.name}({params}) -> {render_type(decl.returns)};"


def render_statement(stmt: Statement) -> str:
    if isinstance(stmt, NewStmt):
        return f"new {stmt.name};"
    if isinstance(stmt, DeclareStmt):
        return f"declare {stmt.var}: {render_type(stmt.type)};"
    if isinstance(stmt, SizeOfStmt):
        return f"sizeof({stmt.name});"
    if isinstance(stmt, CallStmt):
        return f"call {stmt.name};"
    return f".{stmt.name}"


def render_header(ast: HeaderAST) -> str:
    """Canonical text: includes first, then one declaration per line, LF."""
    lines = [f'include "{inc}";' for inc in ast.includes]
    lines.extend(render_decl(decl) for decl in ast.items)
    return "\n".join(lines) + ("\n" if lines else "")
