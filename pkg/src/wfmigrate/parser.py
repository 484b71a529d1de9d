"""Discovery and parsing of the legacy Web Forms corpus.

Markup is scanned into server controls and opaque literal text. Every byte of
a page ends up in exactly one top-level directive, control or literal, so the
spans of those nodes tile the file. Nothing here raises on bad input; problems
become diagnostics and the offending text is demoted to a literal.
"""

from __future__ import annotations

import bisect
import os
import posixpath
import re
import xml.parsers.expat
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .diagnostics import Diagnostic, MigrationError, SourceSpan, diag


class ArtifactKind(str, Enum):
    PAGE_MARKUP = "PageMarkup"
    CONTROL_MARKUP = "ControlMarkup"
    CODE_BEHIND = "CodeBehind"
    RESOURCE_CATALOG = "ResourceCatalog"


# Longest suffixes first so "x.aspx.cs" is not taken for a page.
_SUFFIX_KINDS = [
    (".aspx.cs", ArtifactKind.CODE_BEHIND),
    (".ascx.cs", ArtifactKind.CODE_BEHIND),
    (".aspx", ArtifactKind.PAGE_MARKUP),
    (".ascx", ArtifactKind.CONTROL_MARKUP),
    (".resx", ArtifactKind.RESOURCE_CATALOG),
]


def artifact_kind(path: str) -> ArtifactKind | None:
    lower = path.lower()
    for suffix, kind in _SUFFIX_KINDS:
        if lower.endswith(suffix):
            return kind
    return None


def normalize_path(path: str) -> str:
    p = posixpath.normpath(path.replace("\\", "/"))
    if p in (".", "") or p.startswith("../") or p == ".." or p.startswith("/"):
        raise ValueError(f"path {path!r} does not normalize to a relative path")
    return p


@dataclass(frozen=True)
class SourceArtifact:
    path: str
    kind: ArtifactKind
    text: str
    encoding_ok: bool = True


@dataclass(frozen=True)
class LiteralValue:
    text: str


@dataclass(frozen=True)
class ResourceBinding:
    catalog: str
    key: str

    @property
    def raw(self) -> str:
        return f"<%$ Resources:{self.catalog}, {self.key} %>"


AttrValue = LiteralValue | ResourceBinding


@dataclass
class Directive:
    name: str
    attrs: list[tuple[str, str]]
    span: SourceSpan
    start: int = 0
    end: int = 0

    def get(self, name: str, default: str | None = None) -> str | None:
        lname = name.lower()
        for k, v in self.attrs:
            if k.lower() == lname:
                return v
        return default


class NodeKind(str, Enum):
    SERVER_CONTROL = "ServerControl"
    LITERAL = "Literal"


@dataclass
class MarkupNode:
    kind: NodeKind
    span: SourceSpan
    start: int
    end: int
    prefix: str = ""
    tag: str = ""
    attrs: list[tuple[str, AttrValue]] = field(default_factory=list)
    children: list[MarkupNode] = field(default_factory=list)
    text: str = ""

    @property
    def qualified_tag(self) -> str:
        return f"{self.prefix}:{self.tag}"

    def attr(self, name: str) -> AttrValue | None:
        for k, v in self.attrs:
            if k == name:
                return v
        return None


@dataclass(frozen=True)
class ResourceEntry:
    catalog: str
    locale: str
    key: str
    value: str
    span: SourceSpan | None = None


@dataclass(frozen=True)
class HandlerDecl:
    class_name: str
    method: str
    span: SourceSpan


class DynamicMarker(str, Enum):
    FIND_CONTROL = "FindControl"
    LOAD_CONTROL = "LoadControl"
    CONTROLS_ADD = "ControlsAdd"


@dataclass(frozen=True)
class DynamicConstructFlag:
    file: str
    marker: DynamicMarker
    span: SourceSpan


@dataclass
class ParsedMarkup:
    directives: list[Directive]
    roots: list[MarkupNode]
    diagnostics: list[Diagnostic]


@dataclass
class ParsedCodeBehind:
    class_name: str
    handlers: list[HandlerDecl]
    flags: list[DynamicConstructFlag]
    diagnostics: list[Diagnostic]


class LineIndex:
    """Maps character offsets of one text to 1-based line/column spans."""

    def __init__(self, file: str, text: str):
        self.file = file
        self.starts = [0]
        for m in re.finditer("\n", text):
            self.starts.append(m.end())

    def span(self, start: int, end: int) -> SourceSpan:
        line = bisect.bisect_right(self.starts, start) - 1
        return SourceSpan(self.file, line + 1, start - self.starts[line] + 1, max(0, end - start))

    def offset(self, span: SourceSpan) -> int:
        return self.starts[span.line - 1] + span.col - 1


# --------------------------------------------------------------------------
# discovery


def read_artifact(root: Path, relpath: str) -> SourceArtifact:
    kind = artifact_kind(relpath)
    if kind is None:
        raise ValueError(f"unrecognized artifact {relpath}")
    data = (root / relpath).read_bytes()
    try:
        text = data.decode("utf-8-sig")
        ok = True
    except UnicodeDecodeError:
        text = data.decode("utf-8-sig", errors="replace")
        ok = False
    return SourceArtifact(relpath, kind, text, ok)


def discover_artifacts(root) -> list[SourceArtifact]:
    root = Path(root)
    if not root.is_dir() or not os.access(root, os.R_OK | os.X_OK):
        raise MigrationError("IO_ERROR", f"source root {root} does not exist or is not readable")
    found = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in filenames:
            rel = normalize_path(os.path.relpath(os.path.join(dirpath, name), root))
            if artifact_kind(rel) is not None:
                found.append(rel)
    return [read_artifact(root, rel) for rel in sorted(found)]


def _encoding_diags(artifact: SourceArtifact) -> list[Diagnostic]:
    if artifact.encoding_ok:
        return []
    return [diag("PARSE_ENCODING", f"{artifact.path} is not valid UTF-8",
                 span=SourceSpan(artifact.path, 1, 1, 0))]


# --------------------------------------------------------------------------
# binding expressions

_BINDING_RE = re.compile(
    r"\s*<%\$\s*Resources\s*:\s*([A-Za-z_][A-Za-z0-9_.]*)\s*,\s*([A-Za-z_][A-Za-z0-9_.]*)\s*%>\s*\Z"
)
_BINDING_PREFIX_RE = re.compile(r"\s*<%\$\s*Resources\s*:", re.IGNORECASE)


def parse_binding_expr(raw: str, span: SourceSpan | None = None) -> tuple[AttrValue, Diagnostic | None]:
    m = _BINDING_RE.match(raw)
    if m:
        return ResourceBinding(m.group(1), m.group(2)), None
    if _BINDING_PREFIX_RE.match(raw):
        return LiteralValue(raw), diag(
            "MARKUP_BAD_BINDING", f"malformed resource binding {raw!r}; expected <%$ Resources:Catalog, Key %>",
            span=span)
    return LiteralValue(raw), None


# --------------------------------------------------------------------------
# markup

_NAME = r"[A-Za-z_][\w.\-]*"
_OPEN_RE = re.compile(rf"<({_NAME}):({_NAME})")
_CLOSE_RE = re.compile(rf"</({_NAME}):({_NAME})\s*>")
_ATTR_NAME_RE = re.compile(r"[A-Za-z_][\w:.\-]*")
_WS_RE = re.compile(r"\s*")
_DIRECTIVE_NAME_RE = re.compile(r"<%@\s*([A-Za-z_]\w*)?")


class _Frame:
    __slots__ = ("start", "open_end", "prefix", "tag", "attrs", "children")

    def __init__(self, start, open_end, prefix, tag, attrs):
        self.start = start
        self.open_end = open_end
        self.prefix = prefix
        self.tag = tag
        self.attrs = attrs
        self.children: list[MarkupNode] = []


class _MarkupParser:
    def __init__(self, artifact: SourceArtifact):
        self.path = artifact.path
        self.text = artifact.text
        self.index = LineIndex(artifact.path, artifact.text)
        self.diags: list[Diagnostic] = _encoding_diags(artifact)
        self.directives: list[Directive] = []
        self.roots: list[MarkupNode] = []
        self.stack: list[_Frame] = []

    # helpers -------------------------------------------------------------

    def span(self, start, end):
        return self.index.span(start, end)

    def warn(self, code, message, start, end):
        self.diags.append(diag(code, message, span=self.span(start, end)))

    def container(self) -> list[MarkupNode]:
        return self.stack[-1].children if self.stack else self.roots

    def add_literal(self, target: list[MarkupNode], start: int, end: int):
        if end <= start:
            return
        if target and target[-1].kind is NodeKind.LITERAL and target[-1].end == start:
            prev = target[-1]
            prev.end = end
            prev.text = self.text[prev.start:end]
            prev.span = self.span(prev.start, end)
            return
        target.append(MarkupNode(NodeKind.LITERAL, self.span(start, end), start, end, text=self.text[start:end]))

    def add_node(self, target: list[MarkupNode], node: MarkupNode):
        if node.kind is NodeKind.LITERAL:
            self.add_literal(target, node.start, node.end)
        else:
            target.append(node)

    def demote(self, frame: _Frame, target: list[MarkupNode]):
        """Turn an unclosed open tag into literal text and lift its children."""
        self.add_literal(target, frame.start, frame.open_end)
        for child in frame.children:
            self.add_node(target, child)

    # attribute lists -----------------------------------------------------

    def parse_attrs(self, pos: int, terminators: tuple[str, ...]):
        """Parse name="value" pairs until one of the terminators.

        Returns (attrs, terminator, end_pos) or (None, None, fail_pos).
        """
        text = self.text
        attrs: list[tuple[str, str, int, int]] = []
        while True:
            pos = _WS_RE.match(text, pos).end()
            for term in terminators:
                if text.startswith(term, pos):
                    return attrs, term, pos + len(term)
            m = _ATTR_NAME_RE.match(text, pos)
            if not m:
                return None, None, pos
            name = m.group(0)
            pos = _WS_RE.match(text, m.end()).end()
            if not text.startswith("=", pos):
                return None, None, pos
            pos = _WS_RE.match(text, pos + 1).end()
            if pos >= len(text) or text[pos] not in "\"'":
                return None, None, pos
            quote = text[pos]
            vstart = pos + 1
            vend = -1
            if text.startswith("<%", vstart):
                # Expressions may contain the quote character: <%# Eval("x") %>.
                close = text.find("%>", vstart + 2)
                if close != -1 and text.startswith(quote, close + 2):
                    vend = close + 2
            if vend == -1:
                vend = text.find(quote, vstart)
                if vend == -1:
                    return None, None, len(text)
            attrs.append((name, text[vstart:vend], pos, vend + 1))
            pos = vend + 1

    def dedupe(self, attrs, what):
        out: dict[str, tuple[str, int, int]] = {}
        order: list[str] = []
        for name, value, s, e in attrs:
            if name in out:
                self.warn("MARKUP_DUPLICATE_ATTR", f"duplicate attribute {name} on {what}", s, e)
            else:
                order.append(name)
            out[name] = (value, s, e)
        return [(n, *out[n]) for n in order]

    # constructs ----------------------------------------------------------

    def directive(self, i: int) -> int:
        text = self.text
        m = _DIRECTIVE_NAME_RE.match(text, i)
        end_tag = text.find("%>", i + 3)
        if not m.group(1) or end_tag == -1:
            end = end_tag + 2 if end_tag != -1 else len(text)
            self.warn("MARKUP_MALFORMED_TAG", "directive could not be parsed", i, end)
            self.add_literal(self.container(), i, end)
            return end
        attrs, _, end = self.parse_attrs(m.end(), ("%>",))
        if attrs is None:
            end = end_tag + 2
            self.warn("MARKUP_MALFORMED_TAG", f"malformed attributes in {m.group(1)} directive", i, end)
            self.add_literal(self.container(), i, end)
            return end
        if self.stack:
            self.warn("MARKUP_NESTED_DIRECTIVE", f"{m.group(1)} directive inside a server control", i, end)
            self.add_literal(self.container(), i, end)
            return end
        attrs = self.dedupe(attrs, f"{m.group(1)} directive")
        self.directives.append(
            Directive(m.group(1), [(n, v) for n, v, _, _ in attrs], self.span(i, end), i, end))
        return end

    def server_code(self, i: int) -> int:
        text = self.text
        if text.startswith("<%--", i):
            close = text.find("--%>", i + 4)
            end = close + 4 if close != -1 else len(text)
            if close == -1:
                self.warn("MARKUP_MALFORMED_TAG", "unterminated server comment", i, end)
            self.add_literal(self.container(), i, end)
            return end
        close = text.find("%>", i + 2)
        end = close + 2 if close != -1 else len(text)
        if close == -1:
            self.warn("MARKUP_MALFORMED_TAG", "unterminated code block", i, end)
        else:
            self.warn("MARKUP_INLINE_CODE", "inline code block requires manual review", i, end)
        self.add_literal(self.container(), i, end)
        return end

    def open_tag(self, i: int, m: re.Match) -> int:
        prefix, tag = m.group(1), m.group(2)
        attrs, term, end = self.parse_attrs(m.end(), ("/>", ">"))
        if attrs is None:
            fail = max(end, i + 1)
            self.warn("MARKUP_MALFORMED_TAG", f"malformed <{prefix}:{tag}> tag", i, fail)
            self.add_literal(self.container(), i, fail)
            return fail
        attrs = self.dedupe(attrs, f"<{prefix}:{tag}>")
        values: list[tuple[str, AttrValue]] = []
        runat = False
        for name, raw, s, e in attrs:
            if name.lower() == "runat" and raw.strip().lower() == "server":
                runat = True
            value, problem = parse_binding_expr(raw, self.span(s, e))
            if problem:
                self.diags.append(problem)
            values.append((name, value))
        if not runat:
            self.warn("MARKUP_MISSING_RUNAT", f"<{prefix}:{tag}> lacks runat=\"server\"", i, end)
        if term == "/>":
            node = MarkupNode(NodeKind.SERVER_CONTROL, self.span(i, end), i, end, prefix, tag, values)
            self.container().append(node)
        else:
            self.stack.append(_Frame(i, end, prefix, tag, values))
        return end

    def close_tag(self, i: int, m: re.Match) -> int:
        end = m.end()
        prefix, tag = m.group(1), m.group(2)
        for depth in range(len(self.stack) - 1, -1, -1):
            f = self.stack[depth]
            if f.prefix == prefix and f.tag == tag:
                break
        else:
            self.warn("MARKUP_UNMATCHED_CLOSE", f"</{prefix}:{tag}> has no matching open tag", i, end)
            self.add_literal(self.container(), i, end)
            return end
        while len(self.stack) - 1 > depth:
            inner = self.stack.pop()
            self.warn("MARKUP_UNCLOSED_TAG", f"<{inner.prefix}:{inner.tag}> is never closed",
                      inner.start, inner.open_end)
            self.demote(inner, self.container())
        f = self.stack.pop()
        node = MarkupNode(NodeKind.SERVER_CONTROL, self.span(f.start, end), f.start, end,
                          f.prefix, f.tag, f.attrs, f.children)
        self.container().append(node)
        return end

    def run(self) -> ParsedMarkup:
        text = self.text
        n = len(text)
        pos = 0
        lit = 0  # start of pending literal text
        while pos < n:
            i = text.find("<", pos)
            if i == -1:
                break
            handled = True
            if text.startswith("<!--", i):
                # HTML comments stay opaque literal text, tags inside are not parsed.
                close = text.find("-->", i + 4)
                pos = close + 3 if close != -1 else n
                continue
            if text.startswith("<%@", i):
                self.add_literal(self.container(), lit, i)
                pos = self.directive(i)
            elif text.startswith("<%", i):
                self.add_literal(self.container(), lit, i)
                pos = self.server_code(i)
            elif (m := _CLOSE_RE.match(text, i)) is not None:
                self.add_literal(self.container(), lit, i)
                pos = self.close_tag(i, m)
            elif (m := _OPEN_RE.match(text, i)) is not None:
                self.add_literal(self.container(), lit, i)
                pos = self.open_tag(i, m)
            else:
                handled = False
                pos = i + 1
            if handled:
                lit = pos
        self.add_literal(self.container(), lit, n)
        while self.stack:
            f = self.stack.pop()
            self.warn("MARKUP_UNCLOSED_TAG", f"<{f.prefix}:{f.tag}> is never closed", f.start, f.open_end)
            self.demote(f, self.container())
        return ParsedMarkup(self.directives, self.roots, self.diags)


def parse_markup(artifact: SourceArtifact) -> ParsedMarkup:
    if artifact.kind not in (ArtifactKind.PAGE_MARKUP, ArtifactKind.CONTROL_MARKUP):
        raise ValueError(f"{artifact.path} is not a markup artifact")
    result = _MarkupParser(artifact).run()
    expected = "Page" if artifact.kind is ArtifactKind.PAGE_MARKUP else "Control"
    first = result.directives[0] if result.directives else None
    leading = [r for r in result.roots if first is None or r.start < first.start]
    stray = any(r.kind is NodeKind.SERVER_CONTROL or r.text.strip() for r in leading)
    if first is None or first.name.lower() != expected.lower() or stray:
        result.diagnostics.append(diag(
            "MARKUP_MISSING_DIRECTIVE", f"{artifact.path} does not open with a {expected} directive",
            span=SourceSpan(artifact.path, 1, 1, 0)))
    return result


def walk_controls(nodes):
    """Yield every ServerControl node in document order."""
    for node in nodes:
        if node.kind is NodeKind.SERVER_CONTROL:
            yield node
            yield from walk_controls(node.children)


# --------------------------------------------------------------------------
# resource catalogs

_LOCALE_RE = re.compile(r"^[a-z]{2,3}(-[A-Za-z0-9]{2,8})*$")


def catalog_name_and_locale(path: str) -> tuple[str, str]:
    stem = posixpath.basename(path)[: -len(".resx")]
    base, dot, last = stem.rpartition(".")
    if dot and base and _LOCALE_RE.match(last):
        return base, last
    return stem, "default"


class _ByteToChar:
    """Converts expat byte offsets into character offsets."""

    def __init__(self, text: str):
        self.text = text
        self.ascii = text.isascii()
        self._map: list[int] | None = None

    def __call__(self, b: int) -> int:
        if self.ascii:
            return b
        if self._map is None:
            m = []
            for i, ch in enumerate(self.text):
                m.extend([i] * len(ch.encode("utf-8")))
            m.append(len(self.text))
            self._map = m
        return self._map[min(b, len(self._map) - 1)]


def parse_resource_catalog(artifact: SourceArtifact) -> tuple[list[ResourceEntry], list[Diagnostic]]:
    if artifact.kind is not ArtifactKind.RESOURCE_CATALOG:
        raise ValueError(f"{artifact.path} is not a resource catalog")
    catalog, locale = catalog_name_and_locale(artifact.path)
    index = LineIndex(artifact.path, artifact.text)
    to_char = _ByteToChar(artifact.text)
    diags = _encoding_diags(artifact)
    entries: dict[str, ResourceEntry] = {}

    p = xml.parsers.expat.ParserCreate()
    depth = 0
    current: dict | None = None
    capture: list[str] | None = None

    def here() -> int:
        return to_char(p.CurrentByteIndex)

    def start(name, attrs):
        nonlocal depth, current, capture
        depth += 1
        if depth == 1 and name != "root":
            diags.append(diag("RESX_MALFORMED", f"root element is <{name}>, expected <root>",
                              span=index.span(here(), here())))
        elif depth == 2 and name == "data":
            if "type" in attrs or "mimetype" in attrs:
                current = None  # non-string resource
            else:
                current = {"name": attrs.get("name"), "start": here(), "value": None}
        elif depth == 3 and name == "value" and current is not None:
            capture = []

    def end(name):
        nonlocal depth, current, capture
        if depth == 3 and name == "value" and current is not None and capture is not None:
            current["value"] = "".join(capture)
            capture = None
        elif depth == 2 and name == "data" and current is not None:
            stop = here() + len("</data>")
            span = index.span(current["start"], max(current["start"], stop))
            key = current["name"]
            if not key:
                diags.append(diag("RESX_MALFORMED", "<data> element without a name", span=span))
            elif current["value"] is None:
                diags.append(diag("RESX_MALFORMED", f"<data name=\"{key}\"> has no <value>", span=span))
            else:
                if key in entries:
                    diags.append(diag("RESX_DUPLICATE_KEY", f"duplicate key {key} in {artifact.path}", span=span))
                    del entries[key]
                entries[key] = ResourceEntry(catalog, locale, key, current["value"], span)
            current = None
        depth -= 1

    def chars(data):
        if capture is not None:
            capture.append(data)

    p.StartElementHandler = start
    p.EndElementHandler = end
    p.CharacterDataHandler = chars
    try:
        p.Parse(artifact.text.encode("utf-8"), True)
    except xml.parsers.expat.ExpatError as exc:
        line = max(1, exc.lineno)
        diags.append(diag("RESX_MALFORMED", f"XML error: {xml.parsers.expat.ErrorString(exc.code)}",
                          span=SourceSpan(artifact.path, line, exc.offset + 1, 0)))
    return list(entries.values()), diags


# --------------------------------------------------------------------------
# code-behind

_HANDLER_RE = re.compile(
    r"protected\s+void\s+([A-Za-z_]\w*)\s*\(\s*object\s+sender\s*,\s*EventArgs\s+e\s*\)")
_CLASS_RE = re.compile(r"\bclass\s+([A-Za-z_]\w*)")
_MARKERS = [
    ("FindControl(", DynamicMarker.FIND_CONTROL),
    ("LoadControl(", DynamicMarker.LOAD_CONTROL),
    ("Controls.Add(", DynamicMarker.CONTROLS_ADD),
]


def code_behind_stem(path: str) -> str:
    name = posixpath.basename(path)
    return name.split(".", 1)[0]


def parse_code_behind(artifact: SourceArtifact) -> ParsedCodeBehind:
    if artifact.kind is not ArtifactKind.CODE_BEHIND:
        raise ValueError(f"{artifact.path} is not a code-behind file")
    text = artifact.text
    index = LineIndex(artifact.path, text)
    diags = _encoding_diags(artifact)
    m = _CLASS_RE.search(text)
    if m:
        class_name = m.group(1)
    else:
        class_name = code_behind_stem(artifact.path)
        diags.append(diag("CB_NO_CLASS", f"no class declaration in {artifact.path}",
                          span=SourceSpan(artifact.path, 1, 1, 0)))
    handlers = []
    seen = set()
    for hm in _HANDLER_RE.finditer(text):
        span = index.span(hm.start(), hm.end())
        name = hm.group(1)
        if name in seen:
            diags.append(diag("CB_DUPLICATE_HANDLER", f"handler {name} declared twice", span=span))
            continue
        seen.add(name)
        handlers.append(HandlerDecl(class_name, name, span))
    flags = []
    for needle, marker in _MARKERS:
        start = text.find(needle)
        while start != -1:
            flags.append(DynamicConstructFlag(artifact.path, marker, index.span(start, start + len(needle))))
            start = text.find(needle, start + 1)
    flags.sort(key=lambda f: (f.span.line, f.span.col, f.marker.value))
    return ParsedCodeBehind(class_name, handlers, flags, diags)


# --------------------------------------------------------------------------
# whole corpus


@dataclass
class ParsedCorpus:
    artifacts: list[SourceArtifact]
    markup: dict[str, ParsedMarkup]
    code_behind: dict[str, ParsedCodeBehind]
    resources: list[ResourceEntry]
    diagnostics: list[Diagnostic]


def parse_artifacts(artifacts) -> ParsedCorpus:
    """Parse every artifact; results are keyed and merged in path order."""
    artifacts = sorted(artifacts, key=lambda a: a.path)
    markup, code, resources, diags = {}, {}, [], []
    for a in artifacts:
        if a.kind in (ArtifactKind.PAGE_MARKUP, ArtifactKind.CONTROL_MARKUP):
            markup[a.path] = parse_markup(a)
            diags.extend(markup[a.path].diagnostics)
        elif a.kind is ArtifactKind.CODE_BEHIND:
            code[a.path] = parse_code_behind(a)
            diags.extend(code[a.path].diagnostics)
        else:
            entries, d = parse_resource_catalog(a)
            resources.extend(entries)
            diags.extend(d)
    return ParsedCorpus(artifacts, markup, code, resources, diags)


def parse_corpus(root) -> ParsedCorpus:
    return parse_artifacts(discover_artifacts(root))
