"""Enrichment passes over the model.

Each pass only adds props, elements and relations or lowers confidence, and
running a pass twice leaves the graph as after the first run.
"""

from __future__ import annotations

import posixpath
import re
from dataclasses import dataclass
from enum import Enum

from .diagnostics import Diagnostic, diag
from .model import (
    Confidence,
    ElementKind,
    ModelElement,
    ModelGraph,
    RelationKind,
    code_behind_candidates,
    decode_flag,
    make_element_id,
    resolve_app_path,
    split_element_id,
)
from .parser import DynamicConstructFlag, ResourceEntry


class ConstraintKind(str, Enum):
    MAX_LENGTH = "maxLength"
    REQUIRED = "required"


@dataclass(frozen=True)
class ConstraintFact:
    subject: str
    kind: ConstraintKind
    value: str | None = None


class PageRole(str, Enum):
    FORM = "formPage"
    LIST = "listPage"
    PLAIN = "plainPage"


INPUT_TAGS = {"asp:TextBox", "asp:CheckBox", "asp:DropDownList"}


def entries_from_graph(g: ModelGraph) -> list[ResourceEntry]:
    out = []
    for rs in g.of_kind(ElementKind.RESOURCE_STRING):
        for k, v in rs.props.items():
            if k.startswith("value."):
                out.append(ResourceEntry(rs.props.get("catalog", ""), k[len("value."):],
                                         rs.props.get("key", ""), v, rs.provenance))
    return out


def enrich_i18n(g: ModelGraph, entries: list[ResourceEntry] | None = None) -> list[Diagnostic]:
    if entries is None:
        entries = entries_from_graph(g)
    for e in sorted(entries, key=lambda e: (e.catalog, e.key, e.locale)):
        rs_id = make_element_id(ElementKind.RESOURCE_STRING, e.catalog, e.key)
        rs = g.elements.get(rs_id)
        if rs is None:
            rs = g.add_element(ModelElement(rs_id, ElementKind.RESOURCE_STRING, f"{e.catalog}.{e.key}",
                                            {"catalog": e.catalog, "key": e.key}, e.span))
        rs.props[f"value.{e.locale}"] = e.value
    for rs in g.of_kind(ElementKind.RESOURCE_STRING):
        locales = sorted(k[len("value."):] for k in rs.props if k.startswith("value."))
        rs.props["locales"] = ",".join(locales)

    diags = []
    for rel in sorted(g.relations, key=lambda r: r.key):
        if rel.kind is not RelationKind.BINDS:
            continue
        rs = g.elements.get(rel.dst)
        if rs is None or "value.default" in rs.props:
            continue
        rel.confidence = Confidence.LOW
        diags.append(diag("I18N_MISSING_KEY", f"{rel.dst} has no default-locale value", rel.src, rel.provenance))
    return diags


_SCHEME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*:")


def route_url(page_path: str) -> str:
    return "/" + page_path.rsplit(".", 1)[0]


def resolve_navigation(url: str, owner_path: str) -> tuple[str | None, str]:
    """Return (corpus path or None, query+fragment suffix) for a navigation URL."""
    raw = url.strip()
    if not raw or _SCHEME_RE.match(raw) or raw.startswith("//"):
        return None, ""
    cut = min([i for i in (raw.find("?"), raw.find("#")) if i != -1], default=len(raw))
    return resolve_app_path(raw[:cut], posixpath.dirname(owner_path)), raw[cut:]


def enrich_navigation(g: ModelGraph) -> list[Diagnostic]:
    diags = []
    for use in g.of_kind(ElementKind.COMPONENT_USE):
        for attr in ("NavigateUrl", "PostBackUrl"):
            url = use.props.get(attr)
            if url is None:
                continue
            owner = g.owner(use.id)
            owner_path = split_element_id(owner.id)[1] if owner else ""
            target_path, suffix = resolve_navigation(url, owner_path)
            page_id = make_element_id(ElementKind.PAGE, target_path) if target_path else None
            if page_id is None or page_id not in g.elements or url.strip().startswith("<%"):
                use.props[f"nav.{attr}.href"] = url
                diags.append(diag("NAV_EXTERNAL", f"{attr} {url!r} is external or unresolvable",
                                  use.id, use.provenance))
                continue
            url_path = route_url(target_path)
            use.props[f"nav.{attr}.href"] = url_path + suffix
            use.props[f"nav.{attr}.target"] = page_id
            if owner is not None:
                g.add_relation(RelationKind.NAVIGATES_TO, owner.id, page_id, use.provenance)
            route_id = make_element_id(ElementKind.ROUTE, target_path)
            if route_id not in g.elements:
                target = g.elements[page_id]
                g.add_element(ModelElement(route_id, ElementKind.ROUTE, url_path,
                                           {"url": url_path, "page": page_id}, target.provenance))
    return diags


def enrich_constraints(g: ModelGraph) -> tuple[list[ConstraintFact], list[Diagnostic]]:
    facts, diags = [], []
    uses = g.of_kind(ElementKind.COMPONENT_USE)
    by_owner_id: dict[tuple[str, str], ModelElement] = {}
    for u in uses:
        owner = g.owner(u.id)
        if owner is not None and "ID" in u.props:
            by_owner_id.setdefault((owner.id, u.props["ID"]), u)
    for u in uses:
        tag = u.props.get("tag")
        if tag == "asp:TextBox" and "MaxLength" in u.props:
            raw = u.props["MaxLength"].strip()
            if raw.isdigit() and int(raw) > 0:
                value = str(int(raw))
                u.props["constraint.maxLength"] = value
                facts.append(ConstraintFact(u.id, ConstraintKind.MAX_LENGTH, value))
            else:
                diags.append(diag("ENR_BAD_MAXLENGTH", f"MaxLength {raw!r} is not a positive integer",
                                  u.id, u.provenance))
        elif tag == "asp:RequiredFieldValidator" and "ControlToValidate" in u.props:
            owner = g.owner(u.id)
            target_name = u.props["ControlToValidate"].strip()
            target = by_owner_id.get((owner.id, target_name)) if owner else None
            if target is None:
                diags.append(diag("ENR_UNKNOWN_TARGET", f"ControlToValidate {target_name!r} matches no control",
                                  u.id, u.provenance))
                continue
            target.props["constraint.required"] = "true"
            facts.append(ConstraintFact(target.id, ConstraintKind.REQUIRED, "true"))
    return facts, diags


def classify_page(g: ModelGraph, page_id: str) -> PageRole:
    tags = {d.props.get("tag") for d in g.descendants(page_id)}
    if "asp:GridView" in tags:
        return PageRole.LIST
    if tags & INPUT_TAGS and "asp:Button" in tags:
        return PageRole.FORM
    return PageRole.PLAIN


def enrich_roles(g: ModelGraph) -> list[Diagnostic]:
    for page in g.of_kind(ElementKind.PAGE):
        page.props["role"] = classify_page(g, page.id).value
    return []


def flags_from_graph(g: ModelGraph) -> list[DynamicConstructFlag]:
    flags = []
    for e in sorted(g.elements.values(), key=lambda e: e.id):
        keys = [k for k in e.props if k.startswith("dynamic.") and k[len("dynamic."):].isdigit()]
        for k in sorted(keys, key=lambda k: int(k[len("dynamic."):])):
            flags.append(decode_flag(e.props[k]))
    return flags


def mark_dynamic(g: ModelGraph, flags: list[DynamicConstructFlag] | None = None) -> list[Diagnostic]:
    if flags is None:
        flags = flags_from_graph(g)
    owners: dict[str, ModelElement] = {}
    for e in g.elements.values():
        if e.kind in (ElementKind.PAGE, ElementKind.USER_CONTROL):
            for cand in code_behind_candidates(split_element_id(e.id)[1], e.props):
                owners.setdefault(cand, e)
    per_owner: dict[str, list[DynamicConstructFlag]] = {}
    diags = []
    for f in flags:
        owner = owners.get(f.file)
        if owner is None:
            diags.append(diag("ORPHAN_CODEBEHIND", f"{f.file} has dynamic constructs but no owning page/control",
                              span=f.span))
            continue
        per_owner.setdefault(owner.id, []).append(f)
    for owner_id, fl in sorted(per_owner.items()):
        g.elements[owner_id].confidence = Confidence.LOW
        fl.sort(key=lambda f: (f.span.line, f.span.col))
        markers = ", ".join(sorted({f.marker.value for f in fl}))
        diags.append(diag("DYN_CONSTRUCT", f"{len(fl)} dynamic construct(s) ({markers}) in code-behind",
                          owner_id, fl[0].span))
    return diags


def enrich(g: ModelGraph, entries: list[ResourceEntry] | None = None,
           flags: list[DynamicConstructFlag] | None = None) -> tuple[list[ConstraintFact], list[Diagnostic]]:
    """Run every pass in the fixed order i18n, navigation, constraints, roles, dynamic."""
    diags = enrich_i18n(g, entries)
    diags += enrich_navigation(g)
    facts, d = enrich_constraints(g)
    diags += d
    diags += enrich_roles(g)
    diags += mark_dynamic(g, flags)
    return facts, diags
