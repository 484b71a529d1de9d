"""Plan execution, output assembly and (incremental) synthesis into an output directory."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .codegen import (
    META_DIR,
    Classification,
    GeneratedArtifact,
    TargetProfile,
    TraceLink,
    WriteReport,
    emit,
    emit_i18n_catalog,
    line_of,
    trace_document,
    write_bytes_atomic,
)
from .contexts import build_context, stub_context
from .diagnostics import Diagnostic, diag, sort_diagnostics
from .model import ElementKind, Fingerprinter, ModelGraph, canonical_json
from .rules import GenerationPlan, RuleSet, Task, catalog_path, engine_digest, plan, resource_stub_path
from .templates import RenderError, Template, render_template

GENERATED, STUB, WITHHELD = "generated", "stub", "withheld"


@dataclass
class ArtifactRecord:
    """Everything a run knows about one output file, enough to carry it into the next run."""

    path: str
    group: str
    classification: str
    withheld: bool
    elements: dict[str, str]
    diagnostics: list[Diagnostic] = field(default_factory=list)
    links: list[TraceLink] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "group": self.group,
            "classification": self.classification,
            "withheld": self.withheld,
            "elements": dict(sorted(self.elements.items())),
            "diagnostics": [d.to_dict() for d in sort_diagnostics(self.diagnostics)],
            "links": [l.to_dict() for l in sorted(self.links, key=lambda l: (l.element, l.line))],
        }

    @classmethod
    def from_dict(cls, d: dict) -> ArtifactRecord:
        return cls(d["path"], d["group"], d["classification"], bool(d["withheld"]), dict(d["elements"]),
                   [Diagnostic.from_dict(x) for x in d["diagnostics"]],
                   [TraceLink.from_dict(x) for x in d["links"]])


@dataclass
class ExecutionResult:
    artifacts: list[GeneratedArtifact]
    records: list[ArtifactRecord]

    @property
    def links(self) -> list[TraceLink]:
        return [l for r in self.records for l in r.links]

    @property
    def diagnostics(self) -> list[Diagnostic]:
        return sort_diagnostics(d for r in self.records for d in r.diagnostics)

    @property
    def outcomes(self) -> dict[str, str]:
        return {k: v for r in self.records for k, v in r.elements.items()}


I18N_GROUP = "$i18n"


def group_of(task: Task) -> str:
    return I18N_GROUP if task.phase == 1 else task.path


class _Executor:
    def __init__(self, graph: ModelGraph, ruleset: RuleSet, profile: TargetProfile):
        self.g = graph
        self.rules = {r.name: r for r in ruleset.rules}
        self.profile = profile
        self.rendered: dict[str, str] = {}
        self.failed: set[str] = set()
        self.diags: dict[str, list[Diagnostic]] = {}

    def note(self, path: str, d: Diagnostic):
        self.diags.setdefault(path, []).append(d)

    def template_for(self, task: Task) -> Template:
        rule = self.rules[task.rule]
        e = self.g.elements[task.element]
        override = self.profile.component_templates.get(e.props.get("tag", "")) \
            if e.kind is ElementKind.COMPONENT_USE else None
        return override or rule.template

    def stub(self, task: Task, children: list[dict]) -> str:
        e = self.g.elements[task.element]
        self.note(task.path, diag("STUB_EMITTED", f"stub for {e.kind.value} {e.name} ({task.stub_reason})",
                                  e.id, e.provenance))
        return render_template(self.profile.stub_template,
                               stub_context(e, self.profile, task.stub_reason, children)).rstrip("\n")

    def generate(self, task: Task, ctx: dict) -> str | None:
        """Render and gate one task; None when it failed and its file must be withheld."""
        rule = self.rules[task.rule]
        e = self.g.elements[task.element]
        try:
            text = render_template(self.template_for(task), ctx)
        except RenderError as exc:
            self.note(task.path, diag("POST_FAILED", f"rule {rule.name}: {exc}", e.id, e.provenance))
            return None
        bad = [str(p) for p in rule.post if not p.check(text)]
        if bad:
            self.note(task.path, diag("POST_FAILED", f"rule {rule.name}: postcondition {', '.join(bad)} failed",
                                      e.id, e.provenance))
            return None
        return text

    def fragment(self, task: Task, ctx: dict) -> str:
        children = [{"id": c["id"], "rendered": self.rendered.get(c["id"], "")} for c in ctx["children"]]
        ctx["children"] = children
        if task.is_stub:
            return self.stub(task, children)
        text = self.generate(task, ctx)
        if text is None:
            self.failed.add(task.path)
            return ""
        return text.rstrip("\n")


def execute(plan_: GenerationPlan, graph: ModelGraph, ruleset: RuleSet, profile: TargetProfile,
            groups: set[str] | None = None) -> ExecutionResult:
    """Render every task (or only those in ``groups``) into artifacts, records and trace links."""
    ex = _Executor(graph, ruleset, profile)
    tasks = [t for t in plan_.tasks if groups is None or group_of(t) in groups]
    by_path: dict[str, list[Task]] = {}
    for t in tasks:
        by_path.setdefault(t.path, []).append(t)
    artifacts: list[GeneratedArtifact] = []
    records: list[ArtifactRecord] = []

    # phase 1: resource strings feed the catalogs
    rs_tasks = [t for t in tasks if t.phase == 1]
    if rs_tasks:
        a, r = _resources(ex, rs_tasks)
        artifacts += a
        records += r

    # phase 2: component uses, children before containers
    generated_uses = set()
    for t in tasks:
        if t.phase != 2 or not t.path:
            continue
        e = graph.elements[t.element]
        ex.rendered[t.element] = ex.fragment(t, build_context(graph, e, profile))
        if not t.is_stub:
            generated_uses.add(t.element)

    # phases 3 and 4: one file per user control or page
    for t in tasks:
        if t.phase not in (3, 4):
            continue
        e = graph.elements[t.element]
        ctx = build_context(graph, e, profile, generated_uses)
        content = ex.fragment(t, ctx) + "\n"
        a, r = _file(ex, t.path, content, by_path[t.path])
        artifacts.append(a)
        records.append(r)

    # phase 5: the route table
    route_tasks = [t for t in tasks if t.phase == 5]
    if route_tasks:
        entries = []
        for t in route_tasks:
            entries.append({"id": t.element,
                            "rendered": ex.fragment(t, build_context(graph, graph.elements[t.element], profile))})
        path = profile.routes_file
        content = _routes(ex, path, entries)
        a, r = _file(ex, path, content, by_path[path])
        artifacts.append(a)
        records.append(r)

    # uses whose owner is unknown have nowhere to go; they stay uncovered
    return ExecutionResult(sorted(artifacts, key=lambda a: a.path), sorted(records, key=lambda r: r.path))


def _routes(ex: _Executor, path: str, entries: list[dict]) -> str:
    if ex.profile.routes_template is None:
        return "\n".join(e["rendered"] for e in entries) + "\n"
    try:
        text = render_template(ex.profile.routes_template, {"routes": entries, "identStyle": ex.profile.ident_style})
    except RenderError as exc:
        ex.note(path, diag("POST_FAILED", f"routes template: {exc}"))
        ex.failed.add(path)
        return ""
    return text.rstrip("\n") + "\n"


def _file(ex: _Executor, path: str, content: str, tasks: list[Task]):
    withheld = path in ex.failed
    stubbed = any(t.is_stub for t in tasks)
    cls = Classification.REVIEW_REQUIRED if withheld or stubbed else Classification.AUTO_MERGEABLE
    ids = [t.element for t in tasks]
    art = GeneratedArtifact(path, "" if withheld else content, ids, cls, withheld)
    links = []
    outcomes = {}
    for t in tasks:
        if withheld:
            outcomes[t.element] = WITHHELD
            continue
        outcomes[t.element] = STUB if t.is_stub else GENERATED
        e = ex.g.elements[t.element]
        needle = f'{ex.profile.trace_attr}="{t.element}"'
        line = line_of(content, needle) if needle in content else line_of(content, t.element)
        links.append(TraceLink(t.element, e.provenance, path, line, t.is_stub))
    rec = ArtifactRecord(path, path, cls.value, withheld, outcomes, ex.diags.get(path, []), links)
    return art, rec


def _resources(ex: _Executor, tasks: list[Task]):
    g, profile = ex.g, ex.profile
    ok, stub_lines, stub_tasks, withheld = [], [], [], []
    for t in tasks:
        e = g.elements[t.element]
        if t.is_stub:
            stub_lines.append(ex.stub(t, []))
            stub_tasks.append(t)
            continue
        if ex.generate(t, build_context(g, e, profile)) is None:
            withheld.append(t)
        else:
            ok.append(e)
    artifacts = emit_i18n_catalog(ok, profile)
    default_path = catalog_path(profile)
    records = []
    for art in artifacts:
        outcomes, links = {}, []
        if art.path == default_path:
            for e in ok:
                key = json.dumps(f"{e.props.get('catalog', '')}.{e.props.get('key', '')}", ensure_ascii=False)
                home = default_path if "value.default" in e.props else next(
                    (a.path for a in artifacts if e.id in a.elements), default_path)
                content = next(a.content for a in artifacts if a.path == home)
                outcomes[e.id] = GENERATED
                links.append(TraceLink(e.id, e.provenance, home, line_of(content, key + ":")))
            for t in withheld:
                outcomes[t.element] = WITHHELD
        records.append(ArtifactRecord(art.path, I18N_GROUP, art.classification.value, False, outcomes,
                                      ex.diags.get(art.path, []) if art.path == default_path else [], links))
    if stub_tasks:
        path = resource_stub_path(profile)
        content = "\n".join(stub_lines) + "\n"
        art = GeneratedArtifact(path, content, [t.element for t in stub_tasks], Classification.REVIEW_REQUIRED)
        artifacts.append(art)
        links = [TraceLink(t.element, g.elements[t.element].provenance, path, i + 1, True)
                 for i, t in enumerate(stub_tasks)]
        records.append(ArtifactRecord(path, I18N_GROUP, art.classification.value, False,
                                      {t.element: STUB for t in stub_tasks}, ex.diags.get(path, []), links))
    return artifacts, records


# --------------------------------------------------------------------------
# synthesis into an output directory


@dataclass
class SynthResult:
    plan: GenerationPlan
    write: WriteReport
    records: list[ArtifactRecord]
    diagnostics: list[Diagnostic]
    regenerated: list[str]
    fingerprints: dict[str, str]
    full: bool


def meta_path(outdir, name: str) -> Path:
    return Path(outdir) / META_DIR / name


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError):
        return None


def load_previous(outdir) -> tuple[dict | None, list[ArtifactRecord] | None]:
    fps = _read_json(meta_path(outdir, "fingerprints.json"))
    run = _read_json(meta_path(outdir, "run.json"))
    records = None
    if isinstance(run, dict):
        try:
            records = [ArtifactRecord.from_dict(r) for r in run["artifacts"]]
        except (KeyError, TypeError, ValueError):
            records = None
    if not isinstance(fps, dict) or not all(isinstance(v, str) for v in fps.values()):
        fps = None
    return fps, records


def task_fingerprints(graph: ModelGraph, plan_: GenerationPlan) -> dict[str, str]:
    fp = Fingerprinter(graph)
    return {t.element: fp.digest(t.element) for t in plan_.tasks}


def dirty_groups(plan_: GenerationPlan, fps: dict[str, str], prev_fps: dict[str, str],
                 prev_records: list[ArtifactRecord], outdir) -> set[str]:
    groups: dict[str, set[str]] = {}
    for t in plan_.tasks:
        groups.setdefault(group_of(t), set()).add(t.element)
    prev_groups: dict[str, set[str]] = {}
    prev_bad: set[str] = set()
    for r in prev_records:
        prev_groups.setdefault(r.group, set()).update(r.elements)
        if r.withheld or not (Path(outdir) / r.path).is_file():
            prev_bad.add(r.group)
    dirty = set()
    for key, ids in groups.items():
        if key in prev_bad or prev_groups.get(key) != ids or any(fps[i] != prev_fps.get(i) for i in ids):
            dirty.add(key)
    return dirty


def synthesize(graph: ModelGraph, ruleset: RuleSet, profile: TargetProfile, outdir,
               incremental: bool = False) -> SynthResult:
    from .fitgap import classify_plan, coverage_report

    outdir = Path(outdir)
    plan_, diags = plan(graph, ruleset, profile)
    fps = task_fingerprints(graph, plan_)
    engine = engine_digest(ruleset, profile)
    prev_fps, prev_records = load_previous(outdir)

    groups = None
    full = True
    if incremental:
        if prev_fps is None or prev_records is None:
            diags.append(diag("INCREMENTAL_FULL", "no usable fingerprint index; regenerating everything"))
        elif prev_fps.get("$engine") != engine:
            diags.append(diag("INCREMENTAL_FULL", "rules, templates or profile changed; regenerating everything"))
        else:
            groups = dirty_groups(plan_, fps, prev_fps, prev_records, outdir)
            full = False

    result = execute(plan_, graph, ruleset, profile, groups)
    records = list(result.records)
    if groups is not None:
        live = {group_of(t) for t in plan_.tasks}
        records += [r for r in prev_records if r.group not in groups and r.group in live]
    records.sort(key=lambda r: r.path)

    current = {r.path for r in records if not r.withheld}
    stale = [r.path for r in prev_records or [] if r.path not in current]
    report = emit(result.artifacts, outdir, stale)
    outcomes = {k: v for r in records for k, v in r.elements.items()}
    links = [l for r in records for l in r.links]
    catalogs = [r.path for r in records if r.group == I18N_GROUP and not r.withheld]
    withheld = sorted(k for k, v in outcomes.items() if v == WITHHELD)
    classes = classify_plan(graph, plan_, ruleset, profile)
    run_diags = sort_diagnostics(d for r in records for d in r.diagnostics)

    write_bytes_atomic(meta_path(outdir, "plan.json"), plan_.listing())
    write_bytes_atomic(meta_path(outdir, "trace.json"), canonical_json(trace_document(links, catalogs, withheld)))
    fp_doc = dict(fps)
    fp_doc["$engine"] = engine
    write_bytes_atomic(meta_path(outdir, "fingerprints.json"), canonical_json(fp_doc))
    run_doc = {
        "artifacts": [r.to_dict() for r in records],
        "diagnostics": [d.to_dict() for d in sort_diagnostics(diags)
                        if d.code != "INCREMENTAL_FULL"],
        "outcomes": dict(sorted(outcomes.items())),
        "fitgap": {k: v.value for k, v in sorted(classes.items())},
    }
    write_bytes_atomic(meta_path(outdir, "run.json"), canonical_json(run_doc))
    cov = coverage_report(graph, run_doc)
    write_bytes_atomic(meta_path(outdir, "report.json"), canonical_json(cov.to_dict()))

    regenerated = sorted(groups) if groups is not None else sorted({group_of(t) for t in plan_.tasks})
    return SynthResult(plan_, report, records, sort_diagnostics(diags + run_diags), regenerated, fps, full)


def read_run(outdir) -> dict:
    from .diagnostics import MigrationError

    doc = _read_json(meta_path(outdir, "run.json"))
    if not isinstance(doc, dict) or "artifacts" not in doc:
        raise MigrationError("IO_ERROR", f"no synthesis run recorded in {outdir}")
    return doc
