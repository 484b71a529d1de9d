"""A small mustache-like template language.

    {{path.to.value}}          substitution; unknown paths are errors
    {{#each list}}..{{/each}}  repeat the body once per item, item scope first
    {{#if guard}}..{{/if}}     guard from the rule grammar, on the current scope
    {{ident name}}             sanitized identifier (path value, else the literal)

A section tag alone on its line removes that line from the output. A
substitution alone on its line indents every following line of a multi-line
value to the same column. ``{`` directly before ``{{`` is literal, so
``x={{{v}}}`` renders ``x={value}``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .guards import Guard, parse_guard

_TAG_RE = re.compile(r"\{\{(?!\{)(.*?)\}\}")
_PATH_RE = re.compile(r"^[A-Za-z_][\w]*(\.[\w\-]+)*$")


class TemplateSyntaxError(Exception):
    pass


class RenderError(Exception):
    pass


@dataclass
class _Text:
    text: str


@dataclass
class _Var:
    path: str
    indent: str | None = None


@dataclass
class _Ident:
    arg: str


@dataclass
class _Each:
    path: str
    body: list = field(default_factory=list)


@dataclass
class _If:
    guard: Guard
    body: list = field(default_factory=list)


@dataclass
class Template:
    path: str
    text: str
    nodes: list = field(default_factory=list)

    @classmethod
    def parse(cls, text: str, path: str = "<string>") -> Template:
        return cls(path, text, _parse(text, path))

    @classmethod
    def load(cls, path) -> Template:
        p = Path(path)
        return cls.parse(p.read_text(encoding="utf-8"), str(p))

    def referenced_props(self) -> set[str]:
        """Prop names the template can read: props/attr/text/bind paths and guard names."""
        names: set[str] = set()

        def visit(nodes):
            for n in nodes:
                if isinstance(n, _Var):
                    head, _, rest = n.path.partition(".")
                    if head in ("props", "attr", "text", "bind") and rest:
                        names.add(rest.split(".")[0])
                        names.add(rest)
                elif isinstance(n, _If):
                    names.update(n.guard.prop_names)
                    visit(n.body)
                elif isinstance(n, _Each):
                    visit(n.body)

        visit(self.nodes)
        return names


def _tokenize(text: str, where: str):
    """Split into text/tag tokens, applying standalone-line rules."""
    tokens = []  # (type, value)
    pos = 0
    for m in _TAG_RE.finditer(text):
        tokens.append(["text", text[pos:m.start()]])
        tokens.append(["tag", m.group(1).strip(), m.start(), m.end()])
        pos = m.end()
    tokens.append(["text", text[pos:]])
    for t in tokens:
        if t[0] == "text" and "{{" in t[1].replace("{{{", ""):
            line = text.count("\n", 0, text.find(t[1])) + 1 if t[1] else 0
            raise TemplateSyntaxError(f"{where}:{line}: unbalanced '{{{{'")
    # standalone handling, judged on the original line of each tag
    for i in range(1, len(tokens), 2):
        tag, s, e = tokens[i][1], tokens[i][2], tokens[i][3]
        ls = text.rfind("\n", 0, s) + 1
        le = text.find("\n", e)
        prefix = text[ls:s]
        suffix = text[e:] if le == -1 else text[e:le]
        if prefix.strip() or suffix.strip():
            continue
        if tag.startswith(("#", "/")):
            before, after = tokens[i - 1][1], tokens[i + 1][1]
            tokens[i - 1][1] = before[:len(before) - len(prefix)]
            drop = len(suffix) + (1 if le != -1 else 0)
            tokens[i + 1][1] = after[drop:]
        elif prefix:
            tokens[i].append(prefix)
    return tokens


def _parse(text: str, where: str):
    tokens = _tokenize(text, where)
    root: list = []
    stack: list[tuple[str, list, object]] = [("root", root, None)]
    for t in tokens:
        body = stack[-1][1]
        if t[0] == "text":
            if t[1]:
                body.append(_Text(t[1]))
            continue
        tag = t[1]
        line = text.count("\n", 0, t[2]) + 1
        if tag.startswith("#each "):
            path = tag[len("#each "):].strip()
            if not _PATH_RE.match(path):
                raise TemplateSyntaxError(f"{where}:{line}: bad each path {path!r}")
            node = _Each(path)
            body.append(node)
            stack.append(("each", node.body, line))
        elif tag.startswith("#if "):
            try:
                guard = parse_guard(tag[len("#if "):])
            except ValueError as exc:
                raise TemplateSyntaxError(f"{where}:{line}: {exc}") from None
            node = _If(guard)
            body.append(node)
            stack.append(("if", node.body, line))
        elif tag in ("/each", "/if"):
            if stack[-1][0] != tag[1:]:
                raise TemplateSyntaxError(f"{where}:{line}: {{{{{tag}}}}} does not close {stack[-1][0]}")
            stack.pop()
        elif tag.startswith("ident "):
            body.append(_Ident(tag[len("ident "):].strip()))
        elif tag.startswith(("#", "/")) or not _PATH_RE.match(tag):
            raise TemplateSyntaxError(f"{where}:{line}: unknown tag {{{{{tag}}}}}")
        else:
            body.append(_Var(tag, t[4] if len(t) > 4 else None))
    if len(stack) > 1:
        raise TemplateSyntaxError(f"{where}:{stack[-1][2]}: unclosed {{{{#{stack[-1][0]}}}}}")
    return root


# --------------------------------------------------------------------------
# rendering

_MISSING = object()


def _descend(obj, parts: list[str]):
    if not parts:
        return obj
    if not isinstance(obj, dict):
        return _MISSING
    for k in range(len(parts), 0, -1):
        key = ".".join(parts[:k])
        if key in obj:
            found = _descend(obj[key], parts[k:])
            if found is not _MISSING:
                return found
    return _MISSING


def lookup(scopes: list[dict], path: str):
    parts = path.split(".")
    for scope in reversed(scopes):
        found = _descend(scope, parts)
        if found is not _MISSING:
            return found
    return _MISSING


def _scalar(value, path, where) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (str, int)):
        return str(value)
    raise RenderError(f"placeholder {path!r} in {where} is not a scalar")


_IDENT_STRIP = re.compile(r"[^A-Za-z0-9_]")
_WORDS = re.compile(r"[A-Za-z0-9]+")


def sanitize_ident(name: str, style: str = "preserve") -> str:
    if style == "preserve":
        out = _IDENT_STRIP.sub("", name)
    else:
        words = _WORDS.findall(name)
        out = "".join(w[:1].upper() + w[1:] for w in words)
        if style == "camel" and out:
            out = out[:1].lower() + out[1:]
    if not out:
        return "_"
    if out[0].isdigit():
        out = "_" + out
    return out


def _guard_subject(scopes):
    for scope in reversed(scopes):
        if "props" in scope and isinstance(scope["props"], dict):
            return scope
    return {}


def _render(nodes, scopes, where, out: list[str]):
    for n in nodes:
        if isinstance(n, _Text):
            out.append(n.text)
        elif isinstance(n, _Var):
            value = lookup(scopes, n.path)
            if value is _MISSING:
                raise RenderError(f"unknown placeholder {n.path!r} in {where}")
            s = _scalar(value, n.path, where)
            if n.indent:
                s = "\n".join(line if (i == 0 or not line) else n.indent + line
                              for i, line in enumerate(s.split("\n")))
            out.append(s)
        elif isinstance(n, _Ident):
            value = lookup(scopes, n.arg)
            raw = n.arg if value is _MISSING or not isinstance(value, (str, int)) else str(value)
            style = lookup(scopes, "identStyle")
            out.append(sanitize_ident(raw, style if isinstance(style, str) else "preserve"))
        elif isinstance(n, _Each):
            items = lookup(scopes, n.path)
            if items is _MISSING:
                raise RenderError(f"unknown placeholder {n.path!r} in {where}")
            if not isinstance(items, list):
                raise RenderError(f"each over non-list {n.path!r} in {where}")
            for item in items:
                scopes.append(item if isinstance(item, dict) else {"this": item})
                try:
                    _render(n.body, scopes, where, out)
                finally:
                    scopes.pop()
        elif isinstance(n, _If):
            subject = _guard_subject(scopes)
            ok = n.guard.evaluate(subject.get("props", {}), subject.get("confidence", "high"),
                                  len(subject.get("children", [])))
            if ok:
                _render(n.body, scopes, where, out)


def render_template(template: Template, context: dict) -> str:
    out: list[str] = []
    _render(template.nodes, [context], template.path, out)
    return "".join(out)
