"""Template contexts resolved from the model graph and the target profile."""

from __future__ import annotations

import json
import re

from .codegen import TargetProfile, map_output_path, module_path
from .model import ElementKind, ModelElement, ModelGraph, RelationKind, is_markup_prop, split_element_id
from .parser import ResourceBinding, parse_binding_expr
from .templates import sanitize_ident

_SAFE_TEXT = re.compile(r"^[\w .,:;!?\-]*$")
_PLAIN_ATTR = re.compile(r'^[^"{}\\<>\n\r]*$')


def as_binding(value: str) -> ResourceBinding | None:
    if not value.lstrip().startswith("<%$"):
        return None
    parsed, problem = parse_binding_expr(value)
    return parsed if problem is None and isinstance(parsed, ResourceBinding) else None


def jsx_attr(value: str) -> str:
    return f'"{value}"' if _PLAIN_ATTR.match(value) else "{" + json.dumps(value, ensure_ascii=False) + "}"


def jsx_text(value: str) -> str:
    return value if _SAFE_TEXT.match(value) else "{" + json.dumps(value, ensure_ascii=False) + "}"


def is_event_attr(name: str) -> bool:
    return name.startswith("On") and len(name) > 2 and name[2].isupper()


def _default_profile() -> TargetProfile:
    from .codegen import default_profile_path, load_profile

    return load_profile(default_profile_path())


def base_context(element: ModelElement, profile: TargetProfile) -> dict:
    return {
        "id": element.id,
        "kind": element.kind.value,
        "name": element.name,
        "ident": sanitize_ident(element.name, profile.ident_style),
        "identStyle": profile.ident_style,
        "tag": element.props.get("tag", ""),
        "props": dict(element.props),
        "confidence": element.confidence.value,
        "traceId": element.id,
        "trace": f'{profile.trace_attr}="{element.id}"',
        "children": [],
    }


def use_target(graph: ModelGraph, use: ModelElement, profile: TargetProfile) -> str:
    uc_id = use.props.get("uc.id")
    if uc_id and uc_id in graph.elements:
        return sanitize_ident(graph.elements[uc_id].name, "pascal")
    return profile.target(use.props.get("tag", "")) or use.props.get("tag", "")


def component_use_context(graph: ModelGraph, use: ModelElement, profile: TargetProfile) -> dict:
    ctx = base_context(use, profile)
    attr, text, bind, handlers = {}, {}, {}, {}
    for name, value in sorted(use.props.items()):
        b = as_binding(value) if is_markup_prop(name) else None
        if b is not None:
            accessor = profile.accessor(b.catalog, b.key)
            attr[name] = "{" + accessor + "}"
            text[name] = "{" + accessor + "}"
            bind[name] = {"catalog": b.catalog, "key": b.key, "accessor": accessor}
            continue
        attr[name] = jsx_attr(value)
        text[name] = jsx_text(value)
        if is_event_attr(name):
            handlers[name] = sanitize_ident(value.strip(), profile.ident_style)
    ctx.update(attr=attr, text=text, bind=bind, handlers=handlers)
    ctx["target"] = use_target(graph, use, profile)
    ctx["constraints"] = {k[len("constraint."):]: v for k, v in use.props.items() if k.startswith("constraint.")}
    uc_id = use.props.get("uc.id")
    if uc_id and uc_id in graph.elements:
        uc = graph.elements[uc_id]
        ctx["uc"] = {"ident": ctx["target"], "module": module_path(map_output_path(uc, profile), profile),
                     "id": uc_id}
    ctx["children"] = [{"id": c.id, "rendered": ""} for c in graph.children(use.id)]
    return ctx


def owner_context(graph: ModelGraph, owner: ModelElement, profile: TargetProfile,
                  generated: set[str] | None = None) -> dict:
    """Context for a page or user control; ``generated`` limits imports to generated uses."""
    ctx = base_context(owner, profile)
    ctx["ident"] = sanitize_ident(owner.name, "pascal" if profile.ident_style == "preserve" else profile.ident_style)
    uses = [d for d in graph.descendants(owner.id) if d.kind is ElementKind.COMPONENT_USE]
    live = [u for u in uses if generated is None or u.id in generated]
    names, ucs, handler_map, any_binding = set(), {}, {}, False
    for u in live:
        uc_id = u.props.get("uc.id")
        target = use_target(graph, u, profile)
        if uc_id and uc_id in graph.elements:
            ucs[target] = module_path(map_output_path(graph.elements[uc_id], profile), profile)
        elif target[:1].isupper():
            names.add(target)
        for name, value in u.props.items():
            if not is_markup_prop(name):
                continue
            if as_binding(value) is not None:
                any_binding = True
            elif is_event_attr(name):
                ident = sanitize_ident(value.strip(), profile.ident_style)
                handles = [r.dst for r in graph.outgoing(u.id, RelationKind.HANDLES)]
                handler_map.setdefault(ident, handles[0] if handles else "")
    ctx["imports"] = [{"names": ", ".join(sorted(names)), "module": profile.component_module}] if names else []
    ctx["ucimports"] = [{"ident": k, "module": v} for k, v in sorted(ucs.items())]
    ctx["i18n"] = ([{"name": profile.accessor_name, "module": profile.i18n_module}]
                   if any_binding and profile.accessor_name else [])
    ctx["handlers"] = [
        {"ident": ident, "handler": hid or "unresolved",
         "source": split_element_id(hid)[1] if hid else split_element_id(owner.id)[1]}
        for ident, hid in sorted(handler_map.items())
    ]
    ctx["role"] = owner.props.get("role", "")
    ctx["title"] = owner.props.get("Title", owner.name)
    ctx["titleLiteral"] = json.dumps(ctx["title"], ensure_ascii=False)
    ctx["children"] = [{"id": c.id, "rendered": ""} for c in graph.children(owner.id)]
    return ctx


def route_context(graph: ModelGraph, route: ModelElement, profile: TargetProfile) -> dict:
    ctx = base_context(route, profile)
    page_id = route.props.get("page", "")
    url = route.props.get("url", route.name)
    ctx["url"] = url
    ctx["urlLiteral"] = json.dumps(url, ensure_ascii=False)
    ctx["page"] = page_id
    page = graph.elements.get(page_id)
    module = module_path(map_output_path(page, profile), profile) if page is not None else ""
    ctx["module"] = module
    ctx["moduleLiteral"] = json.dumps(module, ensure_ascii=False)
    return ctx


def resource_context(rs: ModelElement, profile: TargetProfile) -> dict:
    ctx = base_context(rs, profile)
    catalog, key = rs.props.get("catalog", ""), rs.props.get("key", "")
    ctx.update(catalog=catalog, key=key, accessor=profile.accessor(catalog, key),
               values={k[len("value."):]: v for k, v in rs.props.items() if k.startswith("value.")})
    return ctx


def build_context(graph: ModelGraph, element: ModelElement, profile: TargetProfile | None = None,
                  generated: set[str] | None = None) -> dict:
    profile = profile or _default_profile()
    if element.kind is ElementKind.COMPONENT_USE:
        return component_use_context(graph, element, profile)
    if element.kind in (ElementKind.PAGE, ElementKind.USER_CONTROL):
        return owner_context(graph, element, profile, generated)
    if element.kind is ElementKind.ROUTE:
        return route_context(graph, element, profile)
    if element.kind is ElementKind.RESOURCE_STRING:
        return resource_context(element, profile)
    return base_context(element, profile)


def stub_context(element: ModelElement, profile: TargetProfile, reason: str, children: list[dict]) -> dict:
    ctx = base_context(element, profile)
    ctx["name"] = element.name.replace("*/", "* /")
    ctx["reason"] = reason
    ctx["children"] = children
    return ctx
