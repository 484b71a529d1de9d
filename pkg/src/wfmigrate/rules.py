"""Declarative rules: loading, matching and phased planning."""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .codegen import TargetProfile, map_output_paths
from .diagnostics import Diagnostic, MigrationError, diag
from .guards import Guard, PostCheck, parse_guard, parse_post
from .model import (
    Confidence,
    ElementKind,
    ModelElement,
    ModelGraph,
    RelationKind,
    canonical_json,
    strongly_connected,
)
from .templates import Template, TemplateSyntaxError

KIND_NAMES = {
    "Page": ElementKind.PAGE,
    "UserControl": ElementKind.USER_CONTROL,
    "ComponentUse": ElementKind.COMPONENT_USE,
    "ResourceString": ElementKind.RESOURCE_STRING,
    "Route": ElementKind.ROUTE,
}
PHASE_OF_KIND = {
    ElementKind.RESOURCE_STRING: 1,
    ElementKind.COMPONENT_USE: 2,
    ElementKind.USER_CONTROL: 3,
    ElementKind.PAGE: 4,
    ElementKind.ROUTE: 5,
}
IN_SCOPE = (ElementKind.PAGE, ElementKind.USER_CONTROL, ElementKind.COMPONENT_USE, ElementKind.RESOURCE_STRING)

RULE_SCHEMA = {
    "type": "object",
    "required": ["name", "phase", "priority", "match", "template"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "pattern": r"^[A-Za-z0-9_.\-]+$"},
        "phase": {"type": "integer", "minimum": 1, "maximum": 5},
        "priority": {"type": "integer"},
        "match": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": sorted(KIND_NAMES)},
                "tag": {"type": "string"},
                "props": {"type": "object", "additionalProperties": {"type": "string"}},
                "role": {"type": "string"},
            },
        },
        "guards": {"type": "array", "items": {"type": "string"}},
        "template": {"type": "string", "minLength": 1},
        "post": {"type": "array", "items": {"type": "string"}},
    },
}
_VALIDATOR = jsonschema.Draft202012Validator(RULE_SCHEMA)


@dataclass(frozen=True)
class MatchPattern:
    kind: ElementKind
    tag: str | None = None
    props: tuple[tuple[str, str], ...] = ()
    role: str | None = None

    def holds(self, element: ModelElement) -> bool:
        if element.kind is not self.kind:
            return False
        if self.tag is not None and element.props.get("tag") != self.tag:
            return False
        if self.role is not None and element.props.get("role") != self.role:
            return False
        return all(element.props.get(k) == v for k, v in self.props)


@dataclass
class Rule:
    name: str
    phase: int
    priority: int
    match: MatchPattern
    guards: list[Guard] = field(default_factory=list)
    template_path: str = ""
    post: list[PostCheck] = field(default_factory=list)
    template: Template | None = None

    @property
    def sort_key(self):
        return (self.phase, -self.priority, self.name)

    def understood_props(self) -> set[str]:
        names = set(self.template.referenced_props()) if self.template else set()
        names.update(k for k, _ in self.match.props)
        for g in self.guards:
            names.update(g.prop_names)
        return names


@dataclass
class RuleSet:
    rules: list[Rule] = field(default_factory=list)
    source_files: dict[str, bytes] = field(default_factory=dict)

    def for_phase(self, phase: int) -> list[Rule]:
        return [r for r in self.rules if r.phase == phase]

    def by_name(self, name: str) -> Rule:
        return next(r for r in self.rules if r.name == name)


def load_rules(directory) -> RuleSet:
    root = Path(directory)
    if not root.is_dir():
        raise MigrationError("IO_ERROR", f"rules directory {root} does not exist")
    rules: list[Rule] = []
    sources: dict[str, bytes] = {}
    seen: dict[str, str] = {}
    templates: dict[str, Template] = {}
    for path in sorted(root.glob("*.rule.json")):
        raw = path.read_bytes()
        sources[path.name] = raw
        try:
            doc = json.loads(raw.decode("utf-8"))
            _VALIDATOR.validate(doc)
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MigrationError("RULE_SCHEMA", f"{path.name}: {exc}") from None
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise MigrationError("RULE_SCHEMA", f"{path.name}: {where}: {exc.message}") from None
        name = doc["name"]
        if name in seen:
            raise MigrationError("DUP_RULE", f"rule {name!r} defined in {seen[name]} and {path.name}")
        seen[name] = path.name
        m = doc["match"]
        kind = KIND_NAMES[m["kind"]]
        if PHASE_OF_KIND[kind] != doc["phase"]:
            raise MigrationError("RULE_SCHEMA", f"rule {name!r}: {m['kind']} elements run in phase "
                                                f"{PHASE_OF_KIND[kind]}, not {doc['phase']}")
        try:
            guards = [parse_guard(g) for g in doc.get("guards", [])]
            post = [parse_post(p) for p in doc.get("post", [])]
        except ValueError as exc:
            raise MigrationError("RULE_SCHEMA", f"rule {name!r}: {exc}") from None
        tpath = doc["template"]
        if tpath not in templates:
            tfile = root / tpath
            try:
                text = tfile.read_bytes()
            except OSError:
                raise MigrationError("RULE_SCHEMA", f"rule {name!r}: template {tpath} not found") from None
            sources[tpath] = text
            try:
                templates[tpath] = Template.parse(text.decode("utf-8"), tpath)
            except TemplateSyntaxError as exc:
                raise MigrationError("TEMPLATE_SYNTAX", str(exc)) from None
        pattern = MatchPattern(kind, m.get("tag"), tuple(sorted(m.get("props", {}).items())), m.get("role"))
        rules.append(Rule(name, doc["phase"], doc["priority"], pattern, guards, tpath, post, templates[tpath]))
    rules.sort(key=lambda r: r.sort_key)
    return RuleSet(rules, sources)


def default_rules_dir() -> Path:
    return Path(__file__).parent / "data" / "rules"


def engine_digest(ruleset: RuleSet, profile: TargetProfile) -> str:
    """Digest over everything besides the model that shapes generated bytes."""
    from . import __version__

    h = hashlib.sha256(f"wfmigrate {__version__}\n".encode())
    for tag, files in (("rules", ruleset.source_files), ("profile", profile.source_files)):
        for name in sorted(files):
            h.update(f"{tag}/{name}\n".encode("utf-8"))
            h.update(hashlib.sha256(files[name]).digest())
    return h.hexdigest()


# --------------------------------------------------------------------------
# matching


@dataclass
class MatchBinding:
    element: str
    rule: str
    context: dict


def rule_matches(rule: Rule, graph: ModelGraph, element: ModelElement) -> bool:
    if not rule.match.holds(element):
        return False
    child_count = None
    for g in rule.guards:
        if g.op == "child_count_le" and child_count is None:
            child_count = len(graph.children(element.id))
        if not g.evaluate(element.props, element.confidence.value, child_count or 0):
            return False
    return True


def match_rule(rule: Rule, graph: ModelGraph, element: ModelElement,
               profile: TargetProfile | None = None) -> MatchBinding | None:
    if not rule_matches(rule, graph, element):
        return None
    from .contexts import build_context

    return MatchBinding(element.id, rule.name, build_context(graph, element, profile))


# --------------------------------------------------------------------------
# planning

STUB_NO_RULE = "no rule"
STUB_LOW_CONFIDENCE = "low confidence"
STUB_CONFLICT = "rule conflict"


@dataclass(frozen=True)
class Task:
    element: str
    phase: int
    rule: str | None
    path: str
    stub_reason: str | None = None
    matched: tuple[str, ...] = ()

    @property
    def is_stub(self) -> bool:
        return self.stub_reason is not None

    def to_dict(self) -> dict:
        return {"element": self.element, "phase": self.phase, "rule": self.rule, "path": self.path,
                "stub": self.stub_reason}


@dataclass
class GenerationPlan:
    tasks: list[Task] = field(default_factory=list)
    output_paths: dict[str, str] = field(default_factory=dict)

    @property
    def phase_boundaries(self) -> dict[int, tuple[int, int]]:
        out: dict[int, tuple[int, int]] = {}
        for i, t in enumerate(self.tasks):
            lo, _ = out.get(t.phase, (i, i))
            out[t.phase] = (lo, i + 1)
        return out

    def by_element(self) -> dict[str, Task]:
        return {t.element: t for t in self.tasks}

    def to_dict(self) -> dict:
        return {
            "phases": {str(k): list(v) for k, v in sorted(self.phase_boundaries.items())},
            "tasks": [t.to_dict() for t in self.tasks],
        }

    def listing(self) -> bytes:
        return canonical_json(self.to_dict())


def catalog_path(profile: TargetProfile, locale: str = "default") -> str:
    return f"{profile.i18n_dir}/{locale}.json"


def resource_stub_path(profile: TargetProfile) -> str:
    return f"{profile.i18n_dir}/_stubs.txt"


def _post_order(g: ModelGraph, roots: list[str]) -> list[str]:
    out = []
    for root in roots:
        stack = [(root, False)]
        while stack:
            eid, done = stack.pop()
            if done:
                out.append(eid)
                continue
            stack.append((eid, True))
            for child in reversed(g.children(eid)):
                if child.kind is ElementKind.COMPONENT_USE:
                    stack.append((child.id, False))
    return out


def _topo(ids: list[str], deps: dict[str, set[str]], diags: list[Diagnostic]) -> list[str]:
    """Kahn's algorithm over ids in their given base order; cycles broken at the smallest id."""
    rank = {eid: i for i, eid in enumerate(ids)}
    members = set(ids)
    deps = {eid: {d for d in deps.get(eid, ()) if d in members and d != eid} for eid in ids}
    dependents: dict[str, list[str]] = {eid: [] for eid in ids}
    for eid, ds in deps.items():
        for d in ds:
            dependents[d].append(eid)
    waiting = {eid: len(ds) for eid, ds in deps.items()}
    heap = [(rank[eid], eid) for eid in ids if waiting[eid] == 0]
    heapq.heapify(heap)
    done: set[str] = set()
    out: list[str] = []

    def release(eid):
        done.add(eid)
        out.append(eid)
        for x in dependents[eid]:
            if x not in done:
                waiting[x] -= 1
                if waiting[x] == 0:
                    heapq.heappush(heap, (rank[x], x))

    while len(out) < len(ids):
        if heap:
            _, eid = heapq.heappop(heap)
            if eid not in done:
                release(eid)
            continue
        rest = [x for x in ids if x not in done]
        edges = {x: sorted(d for d in deps[x] if d not in done) for x in rest}
        comps = strongly_connected(rest, edges)
        comp_of = {x: i for i, c in enumerate(comps) for x in c}
        # a component whose remaining dependencies all lie inside itself
        sources = [c for i, c in enumerate(comps)
                   if all(comp_of[d] == i for x in c for d in edges[x])]
        victim = min(min(c) for c in sources)
        diags.append(diag("CYCLE_BROKEN", f"dependsOn cycle broken at {victim}", victim))
        waiting[victim] = 0
        release(victim)
    return out


def plan(graph: ModelGraph, ruleset: RuleSet, profile: TargetProfile) -> tuple[GenerationPlan, list[Diagnostic]]:
    diags: list[Diagnostic] = []
    paths = map_output_paths(graph.elements.values(), profile)
    deps: dict[str, set[str]] = {}
    for r in graph.relations:
        if r.kind is RelationKind.DEPENDS_ON:
            deps.setdefault(r.src, set()).add(r.dst)

    result = GenerationPlan(output_paths=paths)
    for phase in range(1, 6):
        kind = next(k for k, p in PHASE_OF_KIND.items() if p == phase)
        elements = graph.of_kind(kind)
        if phase == 2:
            owners = sorted(e.id for e in graph.elements.values()
                            if e.kind in (ElementKind.PAGE, ElementKind.USER_CONTROL))
            order = [x for x in _post_order(graph, owners) if graph.elements[x].kind is kind]
            placed = set(order)
            order += [e.id for e in elements if e.id not in placed]
        else:
            order = [e.id for e in elements]
        order = _topo(order, deps, diags)
        rules = ruleset.for_phase(phase)
        for eid in order:
            e = graph.elements[eid]
            matched = [r for r in rules if rule_matches(r, graph, e)]
            winner, reason = None, None
            if not matched:
                reason = STUB_NO_RULE
            else:
                top = [r for r in matched if r.priority == matched[0].priority]
                if len(top) > 1:
                    reason = STUB_CONFLICT
                    diags.append(diag("RULE_CONFLICT", "equal-priority rules "
                                      + ", ".join(r.name for r in top) + " all match", eid, e.provenance))
                elif e.confidence is Confidence.LOW:
                    reason = STUB_LOW_CONFIDENCE
                else:
                    winner = top[0].name
            result.tasks.append(Task(eid, phase, winner, _task_path(graph, e, paths, profile, reason),
                                     reason, tuple(r.name for r in matched)))
    return result, diags


def _task_path(graph, e: ModelElement, paths, profile: TargetProfile, reason) -> str:
    if e.kind is ElementKind.RESOURCE_STRING:
        return resource_stub_path(profile) if reason else catalog_path(profile)
    if e.kind is ElementKind.ROUTE:
        return profile.routes_file
    if e.kind is ElementKind.COMPONENT_USE:
        owner = graph.owner(e.id)
        return paths.get(owner.id, "") if owner else ""
    return paths[e.id]
