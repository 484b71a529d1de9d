"""The enriched intermediate model: typed elements and relations with provenance.

Element ids follow ``kind:relpath#fragment``. Fragments of nested component
uses are ``/``-joined ``index:prefix:Tag`` steps, the index counting server
controls among their siblings, so ids only move when the markup around them
changes.
"""

from __future__ import annotations

import hashlib
import json
import posixpath
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum

from .diagnostics import Diagnostic, MigrationError, SourceSpan, diag
from .parser import (
    DynamicConstructFlag,
    DynamicMarker,
    LiteralValue,
    MarkupNode,
    NodeKind,
    ParsedCorpus,
    ResourceBinding,
)

SCHEMA_VERSION = 1


class ElementKind(str, Enum):
    PAGE = "page"
    USER_CONTROL = "usercontrol"
    COMPONENT_TYPE = "componenttype"
    COMPONENT_USE = "componentuse"
    RESOURCE_STRING = "resourcestring"
    HANDLER_STUB = "handlerstub"
    ROUTE = "route"


class Confidence(str, Enum):
    HIGH = "high"
    LOW = "low"

    @property
    def rank(self) -> int:
        return 1 if self is Confidence.HIGH else 0


class RelationKind(str, Enum):
    CONTAINS = "contains"
    REGISTERS = "registers"
    USES = "uses"
    BINDS = "binds"
    HANDLES = "handles"
    DEPENDS_ON = "dependsOn"
    NAVIGATES_TO = "navigatesTo"


# Props the pipeline derives. Everything else on a page, control or use is a
# markup/directive attribute copied verbatim.
DERIVED_PROPS = frozenset({"tag", "role", "locales", "catalog", "key"})


def is_markup_prop(name: str) -> bool:
    return "." not in name and name not in DERIVED_PROPS


def make_element_id(kind: ElementKind, relpath: str, fragment: str = "") -> str:
    return f"{ElementKind(kind).value}:{relpath}#{fragment}"


def split_element_id(element_id: str) -> tuple[str, str, str]:
    kind, _, rest = element_id.partition(":")
    relpath, _, fragment = rest.partition("#")
    return kind, relpath, fragment


@dataclass
class ModelElement:
    id: str
    kind: ElementKind
    name: str
    props: dict[str, str] = field(default_factory=dict)
    provenance: SourceSpan | None = None
    confidence: Confidence = Confidence.HIGH

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "name": self.name,
            "props": dict(self.props),
            "provenance": self.provenance.to_dict() if self.provenance else None,
            "confidence": self.confidence.value,
        }


@dataclass
class Relation:
    kind: RelationKind
    src: str
    dst: str
    provenance: SourceSpan | None = None
    confidence: Confidence = Confidence.HIGH

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.kind.value, self.src, self.dst)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "src": self.src,
            "dst": self.dst,
            "provenance": self.provenance.to_dict() if self.provenance else None,
            "confidence": self.confidence.value,
        }


@dataclass
class ModelGraph:
    elements: dict[str, ModelElement] = field(default_factory=dict)
    relations: list[Relation] = field(default_factory=list)
    version: int = SCHEMA_VERSION

    def add_element(self, element: ModelElement) -> ModelElement:
        existing = self.elements.get(element.id)
        if existing is not None:
            return existing
        self.elements[element.id] = element
        return element

    def add_relation(self, kind: RelationKind, src: str, dst: str, provenance=None,
                     confidence: Confidence = Confidence.HIGH) -> Relation:
        key = (RelationKind(kind).value, src, dst)
        for rel in self._index().get(key, ()):
            return rel
        rel = Relation(RelationKind(kind), src, dst, provenance, confidence)
        self.relations.append(rel)
        return rel

    def _index(self):
        # The list is append-only in practice, so extend the index with the
        # tail; anything else (shrinking, replaced list) forces a rebuild.
        cache = getattr(self, "_cache", None)
        n = len(self.relations)
        if cache is None or cache[4] is not self.relations or cache[0] > n \
                or (cache[0] and self.relations[cache[0] - 1] is not cache[5]):
            cache = [0, defaultdict(list), defaultdict(list), defaultdict(list), self.relations, None]
            object.__setattr__(self, "_cache", cache)
        if cache[0] < n:
            for r in self.relations[cache[0]:]:
                cache[1][r.key].append(r)
                cache[2][r.src].append(r)
                cache[3][r.dst].append(r)
            cache[0] = n
            cache[5] = self.relations[-1]
        return cache[1]

    def outgoing(self, element_id: str, kind: RelationKind | None = None) -> list[Relation]:
        self._index()
        rels = self._cache[2].get(element_id, [])
        return [r for r in rels if kind is None or r.kind is kind]

    def incoming(self, element_id: str, kind: RelationKind | None = None) -> list[Relation]:
        self._index()
        rels = self._cache[3].get(element_id, [])
        return [r for r in rels if kind is None or r.kind is kind]

    def children(self, element_id: str) -> list[ModelElement]:
        """Contained elements in model order (ids sort by sibling index)."""
        kids = [self.elements[r.dst] for r in self.outgoing(element_id, RelationKind.CONTAINS)
                if r.dst in self.elements]
        return sorted(kids, key=lambda e: _child_order(e.id))

    def container(self, element_id: str) -> ModelElement | None:
        for r in self.incoming(element_id, RelationKind.CONTAINS):
            return self.elements.get(r.src)
        return None

    def owner(self, element_id: str) -> ModelElement | None:
        """The Page or UserControl at the top of the containment chain."""
        seen = set()
        current = self.elements.get(element_id)
        while current is not None and current.id not in seen:
            if current.kind in (ElementKind.PAGE, ElementKind.USER_CONTROL):
                return current
            seen.add(current.id)
            current = self.container(current.id)
        return None

    def descendants(self, element_id: str) -> list[ModelElement]:
        out = []
        for child in self.children(element_id):
            out.append(child)
            out.extend(self.descendants(child.id))
        return out

    def of_kind(self, kind: ElementKind) -> list[ModelElement]:
        return sorted((e for e in self.elements.values() if e.kind is kind), key=lambda e: e.id)

    def __eq__(self, other):
        if not isinstance(other, ModelGraph):
            return NotImplemented
        return serialize_model(self) == serialize_model(other)

    __hash__ = None


def _child_order(element_id: str):
    fragment = element_id.rpartition("#")[2]
    last = fragment.rpartition("/")[2]
    idx, _, rest = last.partition(":")
    return (int(idx) if idx.isdigit() else 0, element_id)


# --------------------------------------------------------------------------
# construction


def resolve_app_path(src: str, base_dir: str) -> str | None:
    """Resolve a ~/, absolute or relative app path; None when it leaves the root."""
    s = src.strip().replace("\\", "/")
    if s.startswith("~/"):
        s = s[2:]
    elif s.startswith("/"):
        s = s[1:]
    else:
        s = posixpath.join(base_dir, s)
    p = posixpath.normpath(s) if s else "."
    if p in (".", "") or p == ".." or p.startswith("../"):
        return None
    return p


def code_behind_candidates(markup_path: str, directive_attrs: dict[str, str]) -> list[str]:
    out = [markup_path + ".cs"]
    base = posixpath.dirname(markup_path)
    for attr in ("CodeBehind", "CodeFile"):
        value = directive_attrs.get(attr)
        if value:
            p = resolve_app_path(value, base)
            if p and p not in out:
                out.append(p)
    return out


def encode_flag(flag: DynamicConstructFlag) -> str:
    s = flag.span
    return f"{flag.marker.value} {s.file}:{s.line}:{s.col}:{s.length}"


def decode_flag(value: str) -> DynamicConstructFlag:
    marker, _, loc = value.partition(" ")
    file, line, col, length = loc.rsplit(":", 3)
    return DynamicConstructFlag(file, DynamicMarker(marker), SourceSpan(file, int(line), int(col), int(length)))


def build_model(parsed: ParsedCorpus) -> tuple[ModelGraph, list[Diagnostic]]:
    g = ModelGraph()
    diags: list[Diagnostic] = []
    markup_paths = sorted(parsed.markup)
    by_text = {a.path: a for a in parsed.artifacts}

    # Owners first so Register directives can resolve regardless of order.
    owners = {}
    for path in markup_paths:
        kind = ElementKind.PAGE if path.lower().endswith(".aspx") else ElementKind.USER_CONTROL
        pm = parsed.markup[path]
        head = "Page" if kind is ElementKind.PAGE else "Control"
        directive = next((d for d in pm.directives if d.name.lower() == head.lower()), None)
        props = dict(directive.attrs) if directive else {}
        text = by_text[path].text if path in by_text else ""
        elem = ModelElement(
            make_element_id(kind, path), kind, posixpath.basename(path).rsplit(".", 1)[0],
            props, SourceSpan(path, 1, 1, len(text)))
        owners[path] = g.add_element(elem)
        if directive and directive.get("MasterPageFile"):
            diags.append(diag("MARKUP_MASTER_PAGE", f"{path} uses master page {directive.get('MasterPageFile')}",
                              elem.id, directive.span))

    # Handler stubs, and which code-behind belongs to which owner.
    handler_index: dict[str, dict[str, str]] = {}
    for cb_path in sorted(parsed.code_behind):
        cb = parsed.code_behind[cb_path]
        handler_index[cb_path] = {}
        for h in cb.handlers:
            hid = make_element_id(ElementKind.HANDLER_STUB, cb_path, h.method)
            g.add_element(ModelElement(hid, ElementKind.HANDLER_STUB, h.method,
                                       {"class": h.class_name, "method": h.method}, h.span))
            handler_index[cb_path][h.method] = hid
    owned_cb: dict[str, str] = {}
    for path in markup_paths:
        for cand in code_behind_candidates(path, owners[path].props):
            if cand in parsed.code_behind and cand not in owned_cb:
                owned_cb[cand] = path
                break
    owner_cb = {v: k for k, v in owned_cb.items()}
    for cb_path in sorted(parsed.code_behind):
        flags = parsed.code_behind[cb_path].flags
        if not flags:
            continue
        if cb_path not in owned_cb:
            diags.append(diag("ORPHAN_CODEBEHIND", f"{cb_path} has dynamic constructs but no owning page/control",
                              span=flags[0].span))
            continue
        owner = owners[owned_cb[cb_path]]
        for i, flag in enumerate(flags):
            owner.props[f"dynamic.{i}"] = encode_flag(flag)

    # Resource strings declared by catalogs.
    grouped: dict[tuple[str, str], list] = defaultdict(list)
    for entry in parsed.resources:
        grouped[(entry.catalog, entry.key)].append(entry)
    for (catalog, key), entries in sorted(grouped.items()):
        entries.sort(key=lambda e: (e.locale != "default", e.locale))
        props = {"catalog": catalog, "key": key}
        for e in sorted(entries, key=lambda e: e.locale):
            props[f"value.{e.locale}"] = e.value
        g.add_element(ModelElement(
            make_element_id(ElementKind.RESOURCE_STRING, catalog, key), ElementKind.RESOURCE_STRING,
            f"{catalog}.{key}", props, entries[0].span))

    # Markup trees.
    for path in markup_paths:
        owner = owners[path]
        pm = parsed.markup[path]
        base = posixpath.dirname(path)
        uc_tags: dict[str, str] = {}
        libraries: dict[str, str] = {}
        for d in pm.directives:
            if d.name.lower() != "register":
                continue
            prefix = d.get("TagPrefix")
            if not prefix:
                continue
            src = d.get("Src")
            if src:
                target = resolve_app_path(src, base)
                uc_path = target or src
                uc_id = make_element_id(ElementKind.USER_CONTROL, uc_path)
                conf = Confidence.HIGH
                if uc_id not in g.elements or g.elements[uc_id].kind is not ElementKind.USER_CONTROL \
                        or target not in owners:
                    conf = Confidence.LOW
                    if uc_id not in g.elements:
                        g.add_element(ModelElement(uc_id, ElementKind.USER_CONTROL,
                                                   posixpath.basename(uc_path).rsplit(".", 1)[0],
                                                   {"missing.src": src}, d.span, Confidence.LOW))
                    diags.append(diag("MODEL_MISSING_REGISTER", f"{path} registers missing control {src}",
                                      owner.id, d.span))
                g.add_relation(RelationKind.REGISTERS, owner.id, uc_id, d.span, conf)
                uc_tags[f"{prefix}:{d.get('TagName') or ''}"] = uc_id
            else:
                libraries[prefix] = d.get("Namespace") or d.get("Assembly") or prefix
        handlers = handler_index.get(owner_cb.get(path, ""), {})
        _add_uses(g, diags, owner, owner.id, "", pm.roots, uc_tags, libraries, handlers)

    return g, diags


def _add_uses(g, diags, owner, parent_id, parent_fragment, nodes: list[MarkupNode],
              uc_tags, libraries, handlers):
    index = 0
    for node in nodes:
        if node.kind is not NodeKind.SERVER_CONTROL:
            continue
        tag = node.qualified_tag
        step = f"{index}:{tag}"
        index += 1
        fragment = f"{parent_fragment}/{step}" if parent_fragment else step
        relpath = split_element_id(owner.id)[1]
        use_id = make_element_id(ElementKind.COMPONENT_USE, relpath, fragment)
        props = {"tag": tag}
        bindings = []
        for name, value in node.attrs:
            if isinstance(value, ResourceBinding):
                props[name] = value.raw
                bindings.append(value)
            else:
                props[name] = value.text
        if "Text" not in props and node.children and all(c.kind is NodeKind.LITERAL for c in node.children):
            inner = " ".join("".join(c.text for c in node.children).split())
            # plain inner content is the control's Text; markup or code stays out
            if inner and "<" not in inner:
                props["Text"] = inner
        name = props.get("ID") or tag
        use = g.add_element(ModelElement(use_id, ElementKind.COMPONENT_USE, name, props, node.span))
        g.add_relation(RelationKind.CONTAINS, parent_id, use_id, node.span)

        type_id = make_element_id(ElementKind.COMPONENT_TYPE, tag)
        if type_id not in g.elements:
            if node.prefix.lower() == "asp":
                library = "builtin"
            elif tag in uc_tags:
                library = "usercontrol"
            elif node.prefix in libraries:
                library = libraries[node.prefix]
            else:
                library = "unknown"
            g.add_element(ModelElement(type_id, ElementKind.COMPONENT_TYPE, tag,
                                       {"tag": tag, "library": library}, node.span))
        g.add_relation(RelationKind.USES, use_id, type_id, node.span)

        if node.prefix.lower() != "asp" and tag not in uc_tags and node.prefix not in libraries:
            diags.append(diag("MARKUP_UNKNOWN_PREFIX", f"prefix {node.prefix} of <{tag}> is not registered",
                              use_id, node.span))
        if tag in uc_tags:
            uc_id = uc_tags[tag]
            use.props["uc.id"] = uc_id
            reg = g.outgoing(owner.id, RelationKind.REGISTERS)
            conf = next((r.confidence for r in reg if r.dst == uc_id), Confidence.HIGH)
            g.add_relation(RelationKind.DEPENDS_ON, owner.id, uc_id, node.span, conf)

        for b in bindings:
            rs_id = make_element_id(ElementKind.RESOURCE_STRING, b.catalog, b.key)
            if rs_id not in g.elements:
                g.add_element(ModelElement(rs_id, ElementKind.RESOURCE_STRING, f"{b.catalog}.{b.key}",
                                           {"catalog": b.catalog, "key": b.key}, node.span))
            g.add_relation(RelationKind.BINDS, use_id, rs_id, node.span)

        for attr, value in node.attrs:
            if not (attr.startswith("On") and len(attr) > 2 and attr[2].isupper()):
                continue
            if not isinstance(value, LiteralValue):
                continue
            hid = handlers.get(value.text.strip())
            if hid:
                g.add_relation(RelationKind.HANDLES, use_id, hid, node.span)
            else:
                diags.append(diag("MODEL_UNKNOWN_HANDLER", f"{attr}={value.text!r} names no declared handler",
                                  use_id, node.span))

        _add_uses(g, diags, owner, use_id, fragment, node.children, uc_tags, libraries, handlers)


# --------------------------------------------------------------------------
# validation


def validate_model(g: ModelGraph) -> list[Diagnostic]:
    diags = []
    for eid, e in sorted(g.elements.items()):
        if eid != e.id or split_element_id(eid)[0] != e.kind.value:
            diags.append(diag("MODEL_ID_KIND", f"id {eid} does not match kind {e.kind.value}", eid, e.provenance))
        if e.kind is ElementKind.COMPONENT_USE and not e.props.get("tag"):
            diags.append(diag("MODEL_MISSING_TAG", f"{eid} has no tag prop", eid, e.provenance))

    seen: dict[tuple, int] = defaultdict(int)
    for r in g.relations:
        seen[r.key] += 1
    for key, count in sorted(seen.items()):
        if count > 1:
            diags.append(diag("MODEL_DUPLICATE_RELATION", f"relation {key} occurs {count} times", key[1]))

    for r in sorted(g.relations, key=lambda r: r.key):
        missing = [x for x in (r.src, r.dst) if x not in g.elements]
        if missing:
            diags.append(diag("MODEL_DANGLING_REF", f"{r.kind.value} {r.src} -> {r.dst}: missing {', '.join(missing)}",
                              r.src, r.provenance))
            continue
        if r.kind is RelationKind.BINDS and g.elements[r.dst].kind is not ElementKind.RESOURCE_STRING:
            diags.append(diag("MODEL_BINDS_KIND", f"binds target {r.dst} is not a ResourceString", r.src, r.provenance))
        if r.kind is RelationKind.HANDLES and g.elements[r.dst].kind is not ElementKind.HANDLER_STUB:
            diags.append(diag("MODEL_HANDLES_KIND", f"handles target {r.dst} is not a HandlerStub", r.src, r.provenance))

    # containment forest: at most one container each, no cycles
    containers: dict[str, set[str]] = defaultdict(set)
    for r in g.relations:
        if r.kind is RelationKind.CONTAINS and r.src in g.elements and r.dst in g.elements:
            containers[r.dst].add(r.src)
    for child, parents in sorted(containers.items()):
        if len(parents) > 1:
            diags.append(diag("MODEL_CONTAINMENT_FOREST", f"{child} has {len(parents)} containers", child))
    reported: set[str] = set()
    for start in sorted(containers):
        path, current = [], start
        on_path = set()
        while current in containers and current not in on_path and current not in reported:
            on_path.add(current)
            path.append(current)
            current = min(containers[current])
        if current in on_path:
            cycle = path[path.index(current):]
            reported.update(cycle)
            diags.append(diag("MODEL_CONTAINMENT_FOREST", f"containment cycle through {min(cycle)}", min(cycle)))
        reported.update(path)

    for cycle in dependency_cycles(g):
        kinds = {g.elements[x].kind for x in cycle}
        if kinds <= {ElementKind.PAGE, ElementKind.USER_CONTROL}:
            diags.append(diag("MODEL_DEPENDS_CYCLE", f"dependsOn cycle: {' -> '.join(cycle)}", cycle[0]))
        else:
            diags.append(diag("MODEL_INVALID_CYCLE", f"dependsOn cycle: {' -> '.join(cycle)}", cycle[0]))
    return diags


def strongly_connected(nodes, edges: dict[str, list[str]]) -> list[list[str]]:
    """Tarjan's algorithm, iterative; components come out with sorted members."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    comps = []
    counter = 0
    for root in sorted(nodes):
        if root in index:
            continue
        work = [(root, iter(sorted(edges.get(root, ()))))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(sorted(edges.get(w, ())))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return comps


def dependency_cycles(g: ModelGraph) -> list[list[str]]:
    edges: dict[str, list[str]] = defaultdict(list)
    nodes = set()
    for r in g.relations:
        if r.kind is RelationKind.DEPENDS_ON and r.src in g.elements and r.dst in g.elements:
            edges[r.src].append(r.dst)
            nodes.update((r.src, r.dst))
    cycles = []
    for comp in strongly_connected(nodes, edges):
        if len(comp) > 1 or comp[0] in edges.get(comp[0], ()):
            cycles.append(comp)
    return sorted(cycles)


# --------------------------------------------------------------------------
# serialization


def canonical_json(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def model_to_dict(g: ModelGraph) -> dict:
    return {
        "version": g.version,
        "elements": [g.elements[k].to_dict() for k in sorted(g.elements)],
        "relations": [r.to_dict() for r in sorted(g.relations, key=lambda r: r.key)],
    }


def serialize_model(g: ModelGraph) -> bytes:
    return canonical_json(model_to_dict(g))


def _no_duplicate_keys(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ValueError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _span_from(d, where):
    if d is None:
        return None
    try:
        return SourceSpan(str(d["file"]), int(d["line"]), int(d["col"]), int(d["length"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise MigrationError("MODEL_SCHEMA", f"{where}: bad provenance ({exc})") from None


def deserialize_model(data: bytes | str) -> ModelGraph:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MigrationError("MODEL_SCHEMA", f"not UTF-8 at byte {exc.start}") from None
    try:
        doc = json.loads(data, object_pairs_hook=_no_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise MigrationError("MODEL_SCHEMA", f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except ValueError as exc:
        raise MigrationError("MODEL_SCHEMA", str(exc)) from None
    if not isinstance(doc, dict) or set(doc) != {"version", "elements", "relations"}:
        raise MigrationError("MODEL_SCHEMA", "top level must hold exactly version, elements, relations")
    if doc["version"] != SCHEMA_VERSION:
        raise MigrationError("MODEL_SCHEMA", f"schema version {doc['version']!r}, expected {SCHEMA_VERSION}")
    g = ModelGraph()
    for i, e in enumerate(doc["elements"]):
        where = f"elements[{i}]"
        try:
            props = e["props"]
            if not isinstance(props, dict) or not all(isinstance(v, str) for v in props.values()):
                raise ValueError("props must map strings to strings")
            elem = ModelElement(str(e["id"]), ElementKind(e["kind"]), str(e["name"]), dict(props),
                                _span_from(e["provenance"], where), Confidence(e["confidence"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise MigrationError("MODEL_SCHEMA", f"{where}: {exc}") from None
        if elem.id in g.elements:
            raise MigrationError("MODEL_SCHEMA", f"{where}: duplicate id {elem.id}")
        g.elements[elem.id] = elem
    for i, r in enumerate(doc["relations"]):
        where = f"relations[{i}]"
        try:
            rel = Relation(RelationKind(r["kind"]), str(r["src"]), str(r["dst"]),
                           _span_from(r["provenance"], where), Confidence(r["confidence"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise MigrationError("MODEL_SCHEMA", f"{where}: {exc}") from None
        g.relations.append(rel)
    return g


# --------------------------------------------------------------------------
# fingerprints

FINGERPRINT_RELATIONS = frozenset({
    RelationKind.CONTAINS, RelationKind.USES, RelationKind.BINDS,
    RelationKind.HANDLES, RelationKind.DEPENDS_ON, RelationKind.REGISTERS,
})


class Fingerprinter:
    """Digests of each element's transitive closure, with shared serialization."""

    def __init__(self, g: ModelGraph):
        self.g = g
        self._elem: dict[str, str] = {}
        self._out: dict[str, list[Relation]] = defaultdict(list)
        for r in g.relations:
            if r.kind in FINGERPRINT_RELATIONS:
                self._out[r.src].append(r)

    def _element_text(self, eid: str) -> str:
        text = self._elem.get(eid)
        if text is None:
            e = self.g.elements.get(eid)
            text = json.dumps(e.to_dict() if e else {"missing": eid}, sort_keys=True, ensure_ascii=False)
            self._elem[eid] = text
        return text

    def closure(self, eid: str) -> set[str]:
        seen = {eid}
        todo = [eid]
        while todo:
            for r in self._out.get(todo.pop(), ()):
                if r.dst not in seen:
                    seen.add(r.dst)
                    todo.append(r.dst)
        return seen

    def digest(self, eid: str) -> str:
        if eid not in self.g.elements:
            raise MigrationError("UNKNOWN_ELEMENT", f"no element {eid}")
        nodes = self.closure(eid)
        h = hashlib.sha256()
        h.update(eid.encode("utf-8") + b"\n")
        for n in sorted(nodes):
            h.update(self._element_text(n).encode("utf-8") + b"\n")
        rels = sorted((r for n in nodes for r in self._out.get(n, ())), key=lambda r: r.key)
        for r in rels:
            h.update(json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False).encode("utf-8") + b"\n")
        return h.hexdigest()


def subgraph_fingerprint(g: ModelGraph, element_id: str) -> str:
    return Fingerprinter(g).digest(element_id)
