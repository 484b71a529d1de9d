"""Fit-gap classification, coverage reporting, trace verification and exit gating."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .codegen import TargetProfile, TraceLink, output_files
from .diagnostics import INVARIANT_CODES, Diagnostic, Severity, diag, sort_diagnostics
from .model import ElementKind, ModelGraph, is_markup_prop
from .rules import IN_SCOPE, GenerationPlan, RuleSet, plan


class FitGapClass(str, Enum):
    DIRECTLY_MAPPABLE = "DirectlyMappable"
    MAPPABLE_WITH_ADAPTATION = "MappableWithAdaptation"
    REQUIRING_REDESIGN = "RequiringRedesign"


def unknown_props(element, rule, profile: TargetProfile) -> list[str]:
    understood = rule.understood_props() | set(profile.allow_props)
    override = profile.component_templates.get(element.props.get("tag", ""))
    if override is not None and element.kind is ElementKind.COMPONENT_USE:
        understood |= override.referenced_props()
    return sorted(p for p in element.props if is_markup_prop(p) and p not in understood)


def classify_plan(graph: ModelGraph, plan_: GenerationPlan, ruleset: RuleSet,
                  profile: TargetProfile) -> dict[str, FitGapClass]:
    rules = {r.name: r for r in ruleset.rules}
    out = {}
    for t in plan_.tasks:
        e = graph.elements[t.element]
        if e.kind not in IN_SCOPE:
            continue
        if not t.matched:
            out[e.id] = FitGapClass.REQUIRING_REDESIGN
            continue
        rule = rules[t.rule or t.matched[0]]
        if t.rule is None or unknown_props(e, rule, profile):
            out[e.id] = FitGapClass.MAPPABLE_WITH_ADAPTATION
        else:
            out[e.id] = FitGapClass.DIRECTLY_MAPPABLE
    return out


def classify(graph: ModelGraph, ruleset: RuleSet, profile: TargetProfile) -> dict[str, FitGapClass]:
    plan_, _ = plan(graph, ruleset, profile)
    return classify_plan(graph, plan_, ruleset, profile)


@dataclass
class CoverageReport:
    totals: dict[str, int] = field(default_factory=dict)
    fitgap: dict[str, int] = field(default_factory=dict)
    by_kind: dict[str, dict[str, int]] = field(default_factory=dict)
    generated: int = 0
    stubbed: int = 0
    withheld: int = 0
    auto_mergeable: int = 0
    review_required: int = 0

    @property
    def in_scope(self) -> int:
        return sum(self.totals.get(k.value, 0) for k in IN_SCOPE)

    @property
    def percent_automated(self) -> float:
        if not self.in_scope:
            return 0.0
        return round(100.0 * (self.generated - self.withheld) / self.in_scope, 4)

    def fraction(self, kind: ElementKind, outcome: str = "generated") -> float:
        row = self.by_kind.get(kind.value, {})
        total = self.totals.get(kind.value, 0)
        return row.get(outcome, 0) / total if total else 0.0

    def to_dict(self) -> dict:
        return {
            "totals": dict(sorted(self.totals.items())),
            "inScope": self.in_scope,
            "fitgap": dict(sorted(self.fitgap.items())),
            "byKind": {k: dict(sorted(v.items())) for k, v in sorted(self.by_kind.items())},
            "generated": self.generated,
            "stubbed": self.stubbed,
            "withheld": self.withheld,
            "artifacts": {"autoMergeable": self.auto_mergeable, "reviewRequired": self.review_required},
            "percentAutomated": self.percent_automated,
        }

    def summary(self) -> str:
        lines = [f"in scope: {self.in_scope} elements"]
        for kind in IN_SCOPE:
            row = self.by_kind.get(kind.value, {})
            lines.append(f"  {kind.value:15} {self.totals.get(kind.value, 0):6} total  "
                         f"{row.get('generated', 0):6} generated  {row.get('stubbed', 0):6} stubbed  "
                         f"{row.get('withheld', 0):6} withheld")
        lines.append("fit-gap: " + ", ".join(f"{k} {v}" for k, v in sorted(self.fitgap.items())))
        lines.append(f"artifacts: {self.auto_mergeable} auto-mergeable, {self.review_required} review-required")
        lines.append(f"automated: {self.percent_automated:.2f}%")
        return "\n".join(lines)


def coverage_report(graph: ModelGraph, run: dict) -> CoverageReport:
    """Coverage from a run document (its outcomes, fitgap map and artifact records)."""
    outcomes = run.get("outcomes", {})
    rep = CoverageReport()
    for kind in IN_SCOPE:
        rep.totals[kind.value] = 0
        rep.by_kind[kind.value] = {"generated": 0, "stubbed": 0, "withheld": 0}
    for e in graph.elements.values():
        if e.kind not in IN_SCOPE:
            continue
        rep.totals[e.kind.value] += 1
        row = rep.by_kind[e.kind.value]
        outcome = outcomes.get(e.id)
        if outcome == "stub":
            row["stubbed"] += 1
            rep.stubbed += 1
        elif outcome in ("generated", "withheld"):
            row["generated"] += 1
            rep.generated += 1
            if outcome == "withheld":
                row["withheld"] += 1
                rep.withheld += 1
    for cls in FitGapClass:
        rep.fitgap[cls.value] = 0
    for eid, cls in run.get("fitgap", {}).items():
        if eid in graph.elements:
            rep.fitgap[cls] = rep.fitgap.get(cls, 0) + 1
    for r in run.get("artifacts", []):
        if r["classification"] == "autoMergeable" and not r["withheld"]:
            rep.auto_mergeable += 1
        else:
            rep.review_required += 1
    return rep


def verify_trace_completeness(graph: ModelGraph, trace: dict, outdir) -> list[Diagnostic]:
    outdir = Path(outdir)
    diags = []
    links = [TraceLink.from_dict(d) for d in trace.get("links", [])]
    linked_ids = {l.element for l in links}
    for e in sorted(graph.elements.values(), key=lambda e: e.id):
        if e.kind in IN_SCOPE and e.id not in linked_ids:
            diags.append(diag("TRACE_UNCOVERED", f"{e.id} has neither a generated artifact nor a stub", e.id))
    for l in links:
        if l.element not in graph.elements:
            diags.append(diag("TRACE_UNKNOWN_ELEMENT", f"trace link names unknown element {l.element}", l.element))
    referenced = {l.path for l in links} | set(trace.get("catalogs", []))
    for path in sorted(referenced):
        if not (outdir / path).is_file():
            diags.append(diag("TRACE_MISSING_FILE", f"{path} is traced but missing from {outdir}"))
    for path in output_files(outdir):
        if path not in referenced:
            diags.append(diag("TRACE_ORPHAN_OUTPUT", f"{path} carries no trace link"))
    return sort_diagnostics(diags)


@dataclass
class Thresholds:
    max_warnings: int | None = None
    max_errors: int = 0


def gate(diagnostics, thresholds: Thresholds | None = None) -> int:
    """0 clean, 1 errors (or too many warnings), 2 model/trace invariant violations."""
    thresholds = thresholds or Thresholds()
    diagnostics = list(diagnostics)
    if any(d.code in INVARIANT_CODES and d.severity is Severity.ERROR for d in diagnostics):
        return 2
    errors = sum(d.severity is Severity.ERROR for d in diagnostics)
    warnings = sum(d.severity is Severity.WARNING for d in diagnostics)
    if errors > thresholds.max_errors:
        return 1
    if thresholds.max_warnings is not None and warnings > thresholds.max_warnings:
        return 1
    return 0

