"""Lexer and recursive-descent parser for `.aits` specs and `.aitsx` extensions."""

from __future__ import annotations

from dataclasses import dataclass

from aits.dsl.model import (
    IDENT_RE,
    NUMBER_RE,
    QID_RE,
    RISK_CLASSES,
    MetricBinding,
    Requirement,
    SandboxSpec,
    SpecExtension,
    check_threshold,
    is_version,
)
from aits.errors import DSLError

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}


@dataclass(frozen=True)
class Token:
    kind: str  # STRING, WORD, NUMBER, PUNCT, EOF
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, line_start = 0, 1, 0
    n = len(source)

    while i < n:
        ch = source[i]
        col = i - line_start + 1
        if ch == "\n":
            i += 1
            line += 1
            line_start = i
            continue
        if ch in " \t\r\f\v":
            i += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch in "{}":
            tokens.append(Token("PUNCT", ch, line, col))
            i += 1
            continue
        if ch in "<>":
            if source.startswith("<=", i) or source.startswith(">=", i):
                tokens.append(Token("PUNCT", source[i:i + 2], line, col))
                i += 2
                continue
            raise DSLError(f"unexpected character {ch!r}", line, col, frozenset({"<=", ">="}))
        if ch == '"':
            i += 1
            out: list[str] = []
            while True:
                if i >= n or source[i] == "\n":
                    raise DSLError("unterminated string", line, col)
                c = source[i]
                if c == '"':
                    i += 1
                    break
                if c == "\\":
                    nxt = source[i + 1] if i + 1 < n else ""
                    if nxt not in _ESCAPES:
                        raise DSLError(f"invalid escape \\{nxt}", line, i - line_start + 1)
                    out.append(_ESCAPES[nxt])
                    i += 2
                    continue
                out.append(c)
                i += 1
            tokens.append(Token("STRING", "".join(out), line, col))
            continue
        m = QID_RE.match(source, i)
        if m:
            tokens.append(Token("WORD", m.group(), line, col))
            i = m.end()
            continue
        m = NUMBER_RE.match(source, i)
        if m:
            tokens.append(Token("NUMBER", m.group(), line, col))
            i = m.end()
            continue
        raise DSLError(f"unexpected character {ch!r}", line, col)

    tokens.append(Token("EOF", "", line, len(source) - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, source: str | bytes) -> None:
        if isinstance(source, (bytes, bytearray)):
            try:
                source = bytes(source).decode("utf-8")
            except UnicodeDecodeError as exc:
                head = bytes(source)[:exc.start]
                line = head.count(b"\n") + 1
                col = len(head) - (head.rfind(b"\n") + 1) + 1
                raise DSLError(f"invalid UTF-8 byte: {exc.reason}", line, col) from None
        self.tokens = _tokenize(source)
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, message: str, expected: set[str] | None = None, tok: Token | None = None) -> DSLError:
        tok = tok or self.tok
        return DSLError(message, tok.line, tok.col, frozenset(expected or ()))

    def _describe(self, tok: Token) -> str:
        if tok.kind == "EOF":
            return "end of input"
        if tok.kind == "STRING":
            return "string"
        return repr(tok.text)

    def keyword(self, *words: str) -> Token:
        tok = self.tok
        if tok.kind == "WORD" and tok.text in words:
            self.pos += 1
            return tok
        raise self.error(f"unexpected {self._describe(tok)}", {f'"{w}"' for w in words})

    def punct(self, p: str) -> Token:
        tok = self.tok
        if tok.kind == "PUNCT" and tok.text == p:
            self.pos += 1
            return tok
        raise self.error(f"unexpected {self._describe(tok)}", {f'"{p}"'})

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.tok
        return tok.kind == kind and (text is None or tok.text == text)

    def string(self) -> Token:
        if not self.at("STRING"):
            raise self.error(f"unexpected {self._describe(self.tok)}", {"STRING"})
        tok = self.tok
        self.pos += 1
        return tok

    def qid(self) -> Token:
        if not self.at("WORD"):
            raise self.error(f"unexpected {self._describe(self.tok)}", {"QID"})
        tok = self.tok
        self.pos += 1
        return tok

    def ident(self) -> Token:
        tok = self.tok
        if tok.kind != "WORD" or IDENT_RE.fullmatch(tok.text) is None:
            raise self.error(f"unexpected {self._describe(tok)}", {"IDENT"})
        self.pos += 1
        return tok

    def version(self) -> str:
        tok = self.string()
        if not is_version(tok.text):
            raise self.error(f"malformed version {tok.text!r} (want MAJOR.MINOR[.PATCH])", tok=tok)
        return tok.text

    def name(self) -> str:
        tok = self.string()
        if not tok.text:
            raise self.error("name must be non-empty", tok=tok)
        return tok.text

    def eof(self) -> None:
        if not self.at("EOF"):
            raise self.error(f"unexpected {self._describe(self.tok)}", {"end of input"})

    # grammar ------------------------------------------------------------

    def requirement(self, allow_unbound: bool = True) -> Requirement:
        self.keyword("requirement")
        rid = self.qid().text
        label = self.string().text if self.at("STRING") else None
        if self.at("WORD", "unbound"):
            tok = self.keyword("unbound")
            if not allow_unbound:
                raise self.error(f"refinement of {rid} cannot be unbound", tok=tok)
            return Requirement(rid, label, (), True)
        if not self.at("PUNCT", "{"):
            raise self.error(f"unexpected {self._describe(self.tok)}", {'"{"', '"unbound"'})
        open_tok = self.punct("{")
        bindings: list[MetricBinding] = []
        seen: set[str] = set()
        while not self.at("PUNCT", "}"):
            if not self.at("WORD", "metric"):
                raise self.error(f"unexpected {self._describe(self.tok)}", {'"metric"', '"}"'})
            self.keyword("metric")
            mtok = self.qid()
            if mtok.text in seen:
                raise self.error(f"duplicate metric {mtok.text} in requirement {rid}", tok=mtok)
            seen.add(mtok.text)
            if not self.at("PUNCT", "<=") and not self.at("PUNCT", ">="):
                raise self.error(f"unexpected {self._describe(self.tok)}", {'"<="', '">="'})
            comparator = "LE" if self.tok.text == "<=" else "GE"
            self.pos += 1
            ntok = self.tok
            if ntok.kind != "NUMBER":
                raise self.error(f"unexpected {self._describe(ntok)}", {"NUMBER"})
            try:
                check_threshold(ntok.text)
            except ValueError as exc:
                raise self.error(str(exc), tok=ntok) from None
            self.pos += 1
            bindings.append(MetricBinding(mtok.text, comparator, ntok.text))
        self.punct("}")
        if not bindings:
            raise self.error(f"requirement {rid} has no metrics; mark it `unbound`", tok=open_tok)
        return Requirement(rid, label, tuple(bindings), False)

    def spec(self) -> SandboxSpec:
        self.keyword("sandbox")
        name = self.name()
        self.keyword("version")
        version = self.version()
        start = self.punct("{")
        system_type = risk_class = None
        reqs: list[Requirement] = []
        ids: set[str] = set()
        while not self.at("PUNCT", "}"):
            tok = self.tok
            if self.at("WORD", "system_type"):
                self.pos += 1
                value = self.ident().text
                if system_type is not None:
                    raise self.error("system_type declared twice", tok=tok)
                system_type = value
            elif self.at("WORD", "risk_class"):
                self.pos += 1
                value = self.keyword(*RISK_CLASSES).text
                if risk_class is not None:
                    raise self.error("risk_class declared twice", tok=tok)
                risk_class = value
            elif self.at("WORD", "requirement"):
                req = self.requirement()
                if req.id in ids:
                    raise self.error(f"duplicate requirement id {req.id}", tok=tok)
                ids.add(req.id)
                reqs.append(req)
            else:
                raise self.error(
                    f"unexpected {self._describe(tok)}",
                    {'"system_type"', '"risk_class"', '"requirement"', '"}"'},
                )
        self.punct("}")
        if system_type is None:
            raise self.error("missing system_type declaration", tok=start)
        if risk_class is None:
            raise self.error("missing risk_class declaration", tok=start)
        return SandboxSpec(name, version, system_type, risk_class, tuple(reqs))

    def extension(self) -> SpecExtension:
        self.keyword("extension")
        name = self.name()
        self.keyword("extends")
        extends_name = self.name()
        self.keyword("version")
        extends_version = self.version()
        self.punct("{")
        adds: list[Requirement] = []
        refines: list[Requirement] = []
        added: set[str] = set()
        refined: set[str] = set()
        while not self.at("PUNCT", "}"):
            tok = self.tok
            if self.at("WORD", "add"):
                self.pos += 1
                req = self.requirement()
                if req.id in added:
                    raise self.error(f"requirement {req.id} added twice", tok=tok)
                if req.id in refined:
                    raise self.error(f"add/refine conflict on {req.id}", tok=tok)
                added.add(req.id)
                adds.append(req)
            elif self.at("WORD", "refine"):
                self.pos += 1
                req = self.requirement(allow_unbound=False)
                if req.id in added:
                    raise self.error(f"add/refine conflict on {req.id}", tok=tok)
                refined.add(req.id)
                refines.append(req)
            else:
                raise self.error(f"unexpected {self._describe(tok)}", {'"add"', '"refine"', '"}"'})
        self.punct("}")
        return SpecExtension(name, extends_name, extends_version, tuple(adds), tuple(refines))


def parse_spec(source: str | bytes) -> SandboxSpec:
    """Parse one ``sandbox`` block. Raises :class:`DSLError` with a position."""
    p = _Parser(source)
    spec = p.spec()
    p.eof()
    return spec


def parse_extensions(source: str | bytes) -> list[SpecExtension]:
    """Parse every ``extension`` block of an `.aitsx` file (at least one)."""
    p = _Parser(source)
    exts = [p.extension()]
    while p.at("WORD", "extension"):
        exts.append(p.extension())
    p.eof()
    return exts


def parse_extension(source: str | bytes) -> SpecExtension:
    p = _Parser(source)
    ext = p.extension()
    p.eof()
    return ext


def parse_any(source: str | bytes) -> SandboxSpec | list[SpecExtension]:
    """Dispatch on the leading keyword; used by the `dsl check|fmt|hash` commands."""
    p = _Parser(source)
    if p.at("WORD", "extension"):
        return parse_extensions(source)
    if p.at("WORD", "sandbox"):
        return parse_spec(source)
    raise p.error(f"unexpected {p._describe(p.tok)}", {'"sandbox"', '"extension"'})
