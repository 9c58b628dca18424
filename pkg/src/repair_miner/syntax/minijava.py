"""A small recursive-descent parser for a Java-like subset.

Supported: package/import headers (skipped), classes with ``extends`` /
``implements``, fields, methods and constructors, and the statements
``if``/``else``, ``while``, ``do``, ``for`` (classic and enhanced), ``return``,
``throw``, ``break``, ``continue``, ``try``/``catch``, local variable
declarations and expression statements. Anything else raises
:class:`UnsupportedConstructError`.

Statements are leaves whose value is their token text re-joined with
canonical spacing, so two statements that differ only in layout compare
equal. Nested blocks are flattened into the enclosing statement list.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from repair_miner.errors import ParseError, UnsupportedConstructError
from repair_miner.syntax.tree import SourceTree, TreeNode

KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue default do double
    else enum extends final finally float for goto if implements import instanceof int interface
    long native new package private protected public return short static strictfp super switch
    synchronized this throw throws transient try void volatile while true false null""".split()
)
PRIMITIVES = frozenset("boolean byte char short int long float double void".split())
MODIFIERS = frozenset(
    "public protected private static final abstract native synchronized transient volatile strictfp".split()
)
ASSIGN_OPS = frozenset("= += -= *= /= %= &= |= ^= <<= >>= >>>=".split())
UNSUPPORTED_STATEMENTS = frozenset("switch synchronized assert case default finally class interface enum".split())

_OPERATORS = sorted(
    """>>>= <<= >>= >>> ... -> :: ++ -- && || == != <= >= += -= *= /= %= &= |= ^= << >>
    { } ( ) [ ] ; , . @ = < > ! ~ ? : + - * / & | ^ %""".split(),
    key=len,
    reverse=True,
)
_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\n]+)
  | (?P<line_comment>//[^\n]*)
  | (?P<block_comment>/\*.*?\*/)
  | (?P<open_comment>/\*)
  | (?P<str>"(?:\\.|[^"\\\n])*")
  | (?P<open_str>")
  | (?P<chr>'(?:\\.|[^'\\\n])+')
  | (?P<num>0[xX][0-9a-fA-F_]+[lL]?|(?:\d[\d_]*(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?[fFdDlL]?)
  | (?P<id>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<op>"""
    + "|".join(re.escape(op) for op in _OPERATORS)
    + r""")
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # id | kw | num | str | chr | op | eof
    text: str
    line: int
    col: int
    end_line: int
    end_col: int

    @property
    def start(self):
        return (self.line, self.col)

    @property
    def end(self):
        return (self.end_line, self.end_col)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, col = 0, 1, 1
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "open_comment":
            raise ParseError("unterminated block comment", line, col)
        if kind == "open_str":
            raise ParseError("unterminated string literal", line, col)
        nl = text.count("\n")
        end_line = line + nl
        end_col = len(text) - text.rfind("\n") if nl else col + len(text)
        if kind not in ("ws", "line_comment", "block_comment"):
            if kind == "id" and text in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, text, line, col, end_line, end_col))
        pos = m.end()
        line, col = end_line, end_col
    tokens.append(Token("eof", "", line, col, line, col))
    return tokens


def _is_word(tok: Token) -> bool:
    return tok.kind in ("id", "kw", "num", "str", "chr")


def normalize(tokens: list[Token]) -> str:
    """Join tokens with canonical spacing."""
    out: list[str] = []
    prev: Optional[Token] = None
    for tok in tokens:
        if prev is not None and _space_between(prev, tok):
            out.append(" ")
        out.append(tok.text)
        prev = tok
    return "".join(out)


def _space_between(prev: Token, tok: Token) -> bool:
    if tok.text in (".", ",", ";", ")", "]") or prev.text in (".", "(", "[", "@"):
        return False
    callish = prev.kind == "id" or prev.text in (")", "]", "this", "super") or prev.text in PRIMITIVES
    if tok.text in ("(", "[") and callish:
        return False
    if tok.text in ("++", "--") and (prev.kind == "id" or prev.text in (")", "]")):
        return False
    if prev.text in ("++", "--", "!", "~") and (_is_word(tok) or tok.text == "("):
        return False
    return True


def _span(first: Token, last: Token) -> tuple[int, int, int, int]:
    return (first.line, first.col, last.end_line, last.end_col)


class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.pos = 0

    # -- token helpers ------------------------------------------------------
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> Token:
        tok = self.toks[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok.text == text and tok.kind not in ("str", "chr")

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if not self.at(text):
            what = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise ParseError(f"expected {text!r} but found {what}", tok.line, tok.col)
        return self.next()

    def ident(self) -> Token:
        tok = self.peek()
        if tok.kind != "id":
            what = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise ParseError(f"expected an identifier but found {what}", tok.line, tok.col)
        return self.next()

    def unsupported(self, tok: Token, what: Optional[str] = None):
        raise UnsupportedConstructError(f"unsupported construct {what or repr(tok.text)}", tok.line, tok.col)

    def balanced(self, open_: str, close: str) -> list[Token]:
        """Consume ``open_ ... close`` and return the tokens strictly inside."""
        self.expect(open_)
        depth, inner = 1, []
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                raise ParseError(f"unbalanced {open_!r}", tok.line, tok.col)
            self.next()
            if tok.kind == "op" and tok.text == open_:
                depth += 1
            elif tok.kind == "op" and tok.text == close:
                depth -= 1
                if depth == 0:
                    return inner
            inner.append(tok)

    def until_semicolon(self) -> tuple[list[Token], Token]:
        depth, out = 0, []
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                raise ParseError("expected ';' but found end of input", tok.line, tok.col)
            if tok.kind == "op":
                if tok.text in "([{":
                    depth += 1
                elif tok.text in ")]}":
                    if depth == 0:
                        raise ParseError(f"unexpected {tok.text!r}", tok.line, tok.col)
                    depth -= 1
                elif tok.text == ";" and depth == 0:
                    return out, self.next()
            out.append(self.next())

    # -- types ---------------------------------------------------------------
    def type_tokens(self) -> list[Token]:
        start = self.pos
        tok = self.peek()
        if tok.kind != "id" and tok.text not in PRIMITIVES:
            raise ParseError(f"expected a type but found {tok.text!r}", tok.line, tok.col)
        self.next()
        while self.at(".") and self.peek(1).kind == "id":
            self.next()
            self.next()
        if self.at("<"):
            self._skip_generics()
        while self.at("[") and self.at("]", 1):
            self.next()
            self.next()
        if self.at("..."):
            self.next()
        return self.toks[start:self.pos]

    def _skip_generics(self):
        depth = 0
        while True:
            tok = self.next()
            if tok.kind == "eof":
                raise ParseError("unbalanced '<'", tok.line, tok.col)
            if tok.text == "<":
                depth += 1
            elif tok.text in (">", ">>", ">>>"):
                depth -= len(tok.text)
            if depth <= 0:
                return

    def _looks_like_declaration(self) -> bool:
        """Speculatively parse ``[final] Type name`` followed by ``= ; , [``."""
        save = self.pos
        try:
            while self.at("final"):
                self.next()
            self.type_tokens()
            if self.peek().kind != "id":
                return False
            self.next()
            return self.peek().text in ("=", ";", ",", "[", ":")
        except ParseError:
            return False
        finally:
            self.pos = save

    # -- declarations --------------------------------------------------------
    def compilation_unit(self) -> TreeNode:
        first = self.peek()
        while self.at("package") or self.at("import"):
            self.until_semicolon()
        members = []
        while self.peek().kind != "eof":
            if self.at(";"):
                self.next()
                continue
            members.append(self.type_declaration())
        last = self.toks[-1]
        rng = (1, 1, last.end_line, last.end_col)
        if first.kind == "eof":
            rng = (1, 1, max(1, last.line), max(1, last.col))
        return TreeNode("compilation_unit", None, rng, tuple(members))

    def modifiers(self) -> list[Token]:
        mods = []
        while True:
            tok = self.peek()
            if tok.text == "@":
                self.unsupported(tok, "annotation")
            if tok.kind == "kw" and tok.text in MODIFIERS:
                mods.append(self.next())
            else:
                return mods

    def type_declaration(self) -> TreeNode:
        mods = self.modifiers()
        tok = self.peek()
        if tok.text == "class":
            return self.class_declaration(mods)
        if tok.text in ("interface", "enum"):
            self.unsupported(tok, tok.text)
        raise ParseError(f"expected a class declaration but found {tok.text!r}", tok.line, tok.col)

    def _modifiers_node(self, mods: list[Token]) -> list[TreeNode]:
        if not mods:
            return []
        return [TreeNode("modifiers", " ".join(t.text for t in mods), _span(mods[0], mods[-1]))]

    def class_declaration(self, mods: list[Token]) -> TreeNode:
        kw = self.expect("class")
        name = self.ident()
        if self.at("<"):
            self._skip_generics()
        children = self._modifiers_node(mods)
        if self.at("extends"):
            self.next()
            ty = self.type_tokens()
            children.append(TreeNode("parent_class", normalize(ty), _span(ty[0], ty[-1])))
        if self.at("implements"):
            self.next()
            while True:
                ty = self.type_tokens()
                children.append(TreeNode("parent_interface", normalize(ty), _span(ty[0], ty[-1])))
                if not self.at(","):
                    break
                self.next()
        self.expect("{")
        while not self.at("}"):
            if self.peek().kind == "eof":
                tok = self.peek()
                raise ParseError("unbalanced '{': class body is not closed", tok.line, tok.col)
            if self.at(";"):
                self.next()
                continue
            children.append(self.member(name.text))
        close = self.expect("}")
        return TreeNode("class", name.text, _span(mods[0] if mods else kw, close), tuple(children))

    def member(self, class_name: str) -> TreeNode:
        mods = self.modifiers()
        tok = self.peek()
        if tok.text == "class":
            return self.class_declaration(mods)
        if tok.text in ("interface", "enum", "{") or tok.text == "<":
            self.unsupported(tok, "initializer block" if tok.text == "{" else tok.text)
        if tok.kind == "id" and tok.text == class_name and self.at("(", 1):
            name = self.next()
            return self.method_rest(mods, None, name, mods[0] if mods else name)
        ty = self.type_tokens()
        name = self.ident()
        if self.at("("):
            return self.method_rest(mods, ty, name, mods[0] if mods else ty[0])
        return self.field_rest(mods, ty, name)

    def field_rest(self, mods: list[Token], ty: list[Token], name: Token) -> TreeNode:
        rest, semi = self.until_semicolon()
        toks = mods + ty + [name] + rest
        return TreeNode("attribute", normalize(toks), _span(toks[0], semi))

    def method_rest(self, mods, ret, name, first) -> TreeNode:
        children = self._modifiers_node(mods)
        if ret is not None:
            children.append(TreeNode("return_type", normalize(ret), _span(ret[0], ret[-1])))
        self.expect("(")
        while not self.at(")"):
            ptoks = []
            while self.at("final"):
                ptoks.append(self.next())
            if self.peek().text == "@":
                self.unsupported(self.peek(), "annotation")
            ptoks += self.type_tokens()
            ptoks.append(self.ident())
            while self.at("[") and self.at("]", 1):
                ptoks += [self.next(), self.next()]
            children.append(TreeNode("parameter", normalize(ptoks), _span(ptoks[0], ptoks[-1])))
            if not self.at(","):
                break
            self.next()
        last = self.expect(")")
        while self.at("[") and self.at("]", 1):
            self.next()
            last = self.next()
        if self.at("throws"):
            self.next()
            while True:
                ty = self.type_tokens()
                last = ty[-1]
                if not self.at(","):
                    break
                self.next()
        if self.at(";"):
            last = self.next()
        else:
            body, last = self.block()
            children.extend(body)
        return TreeNode("method", name.text, _span(first, last), tuple(children))

    # -- statements ----------------------------------------------------------
    def block(self) -> tuple[list[TreeNode], Token]:
        self.expect("{")
        out: list[TreeNode] = []
        while not self.at("}"):
            tok = self.peek()
            if tok.kind == "eof":
                raise ParseError("unbalanced '{': block is not closed", tok.line, tok.col)
            out.extend(self.statement())
        return out, self.next()

    def body(self) -> tuple[list[TreeNode], Token]:
        """Statement body of a control structure; returns its nodes and last token."""
        if self.at("{"):
            return self.block()
        start = self.pos
        nodes = self.statement()
        return nodes, self.toks[self.pos - 1] if self.pos > start else self.peek()

    def condition(self) -> TreeNode:
        open_ = self.peek()
        inner = self.balanced("(", ")")
        if not inner:
            raise ParseError("empty condition", open_.line, open_.col)
        return TreeNode("condition_expression", normalize(inner), _span(inner[0], inner[-1]))

    def statement(self) -> list[TreeNode]:
        tok = self.peek()
        text = tok.text
        if tok.kind == "op" and text == "{":
            nodes, _ = self.block()
            return nodes
        if tok.kind == "op" and text == ";":
            self.next()
            return []
        if tok.kind == "kw":
            if text in UNSUPPORTED_STATEMENTS:
                self.unsupported(tok, f"{text!r} statement")
            handler = getattr(self, f"_stmt_{text}", None)
            if handler is not None:
                return [handler()]
            if text == "else":
                raise ParseError("'else' without 'if'", tok.line, tok.col)
        if tok.kind == "id" and self.at(":", 1):
            self.unsupported(tok, "labeled statement")
        if tok.kind == "op" and text == "@":
            self.unsupported(tok, "annotation")
        return [self.simple_statement()]

    def _stmt_if(self) -> TreeNode:
        kw = self.next()
        cond = self.condition()
        then, last = self.body()
        children = [cond, *then]
        if self.at("else"):
            else_kw = self.next()
            alt, last = self.body()
            children.append(TreeNode("else_statement", "else", _span(else_kw, last), tuple(alt)))
        return TreeNode("if_statement", "if", _span(kw, last), tuple(children))

    def _stmt_while(self) -> TreeNode:
        kw = self.next()
        cond = self.condition()
        body, last = self.body()
        return TreeNode("while_statement", "while", _span(kw, last), (cond, *body))

    def _stmt_do(self) -> TreeNode:
        kw = self.next()
        body, _ = self.body()
        self.expect("while")
        cond = self.condition()
        last = self.expect(";")
        return TreeNode("do_statement", "do", _span(kw, last), (*body, cond))

    def _stmt_for(self) -> TreeNode:
        kw = self.next()
        open_ = self.peek()
        inner = self.balanced("(", ")")
        if not inner:
            raise ParseError("empty for header", open_.line, open_.col)
        header = TreeNode("condition_expression", normalize(inner), _span(inner[0], inner[-1]))
        body, last = self.body()
        return TreeNode("for_statement", "for", _span(kw, last), (header, *body))

    def _stmt_try(self) -> TreeNode:
        kw = self.next()
        if self.at("("):
            self.unsupported(self.peek(), "try-with-resources")
        body, last = self.block()
        children = list(body)
        if not self.at("catch"):
            tok = self.peek()
            if tok.text == "finally":
                self.unsupported(tok, "'finally' clause")
            raise ParseError("expected 'catch' after try block", tok.line, tok.col)
        while self.at("catch"):
            ckw = self.next()
            head = self.balanced("(", ")")
            cbody, last = self.block()
            children.append(
                TreeNode("catch_clause", "catch (" + normalize(head) + ")", _span(ckw, last), tuple(cbody))
            )
        if self.at("finally"):
            self.unsupported(self.peek(), "'finally' clause")
        return TreeNode("try_statement", "try", _span(kw, last), tuple(children))

    def _keyword_statement(self, kind: str) -> TreeNode:
        first = self.peek()
        rest, semi = self.until_semicolon()
        return TreeNode(kind, normalize(rest), _span(first, semi))

    def _stmt_return(self) -> TreeNode:
        return self._keyword_statement("return_statement")

    def _stmt_throw(self) -> TreeNode:
        return self._keyword_statement("throw_statement")

    def _stmt_break(self) -> TreeNode:
        return self._keyword_statement("break_statement")

    def _stmt_continue(self) -> TreeNode:
        return self._keyword_statement("continue_statement")

    def simple_statement(self) -> TreeNode:
        first = self.peek()
        is_decl = self._looks_like_declaration()
        toks, semi = self.until_semicolon()
        if not toks:
            raise ParseError("empty statement", first.line, first.col)
        if any(t.text == "->" for t in toks):
            self.unsupported(next(t for t in toks if t.text == "->"), "lambda expression")
        return TreeNode(_expression_kind(toks, is_decl), normalize(toks), _span(first, semi))


def _expression_kind(toks: list[Token], is_decl: bool) -> str:
    if is_decl:
        return "variable_declaration_statement"
    depth = 0
    for tok in toks:
        if tok.kind != "op":
            continue
        if tok.text in "([{":
            depth += 1
        elif tok.text in ")]}":
            depth -= 1
        elif depth == 0 and tok.text in ASSIGN_OPS:
            return "assignment"
    if toks[0].text == "new":
        return "class_instance_creation"
    if toks[0].text in ("++", "--"):
        return "prefix_expression"
    if toks[-1].text in ("++", "--"):
        return "postfix_expression"
    if toks[-1].text == ")":
        return "method_invocation"
    return "expression_statement"


def parse_mini_java(source: str, path: str = "", revision: str = "") -> SourceTree:
    parser = _Parser(source)
    root = parser.compilation_unit()
    return SourceTree(root, path, revision)
