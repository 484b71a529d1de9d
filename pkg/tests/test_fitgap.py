from __future__ import annotations

import shutil

import pytest
from conftest import DATA, analyze, default_profile, default_ruleset, pipeline
from hypothesis import given
from hypothesis import strategies as st

from wfmigrate.codegen import read_trace
from wfmigrate.diagnostics import CATALOG, INVARIANT_CODES, Severity, diag
from wfmigrate.enrich import enrich
from wfmigrate.execute import read_run, synthesize
from wfmigrate.fitgap import (
    FitGapClass,
    Thresholds,
    classify,
    coverage_report,
    gate,
    unknown_props,
    verify_trace_completeness,
)
from wfmigrate.model import ElementKind
from wfmigrate.rules import IN_SCOPE

PANEL = "componentuse:Nested.aspx#1:asp:Panel"


@pytest.fixture(scope="module")
def mini_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("fit") / "out"
    g, _, result = pipeline(DATA / "mini", out)
    return g, out, result


def test_mini_classification(mini_run):
    g, _, _ = mini_run
    classes = classify(g, default_ruleset(), default_profile())
    assert classes["componentuse:Nested.aspx#1:asp:Panel/1:asp:TextBox"] is FitGapClass.DIRECTLY_MAPPABLE
    assert classes[PANEL] is FitGapClass.MAPPABLE_WITH_ADAPTATION  # CssClass is not understood
    assert classes["componentuse:Nested.aspx#2:asp:HyperLink"] is FitGapClass.MAPPABLE_WITH_ADAPTATION
    assert classes["resourcestring:Labels#Name"] is FitGapClass.DIRECTLY_MAPPABLE
    assert classes["page:Nested.aspx#"] is FitGapClass.DIRECTLY_MAPPABLE
    assert "route:Default.aspx#" not in classes
    rule = default_ruleset().by_name("panel")
    assert unknown_props(g.elements[PANEL], rule, default_profile()) == ["CssClass"]


def test_redesign_for_unmatched(tmp_path):
    (tmp_path / "P.aspx").write_text('<%@ Page %>\n<%@ Register TagPrefix="x" Namespace="N" %>\n'
                                     '<x:Fancy ID="f" runat="server" />\n')
    g, _ = analyze(tmp_path)
    enrich(g)
    assert classify(g, default_ruleset(), default_profile())["componentuse:P.aspx#0:x:Fancy"] \
        is FitGapClass.REQUIRING_REDESIGN


def test_coverage_report(mini_run):
    g, out, _ = mini_run
    cov = coverage_report(g, read_run(out))
    assert cov.in_scope == 2 + 1 + 13 + 1
    assert cov.generated == cov.in_scope and cov.stubbed == 0 and cov.withheld == 0
    assert cov.percent_automated == 100.0
    assert sum(cov.fitgap.values()) == cov.in_scope
    assert cov.fraction(ElementKind.COMPONENT_USE) == 1.0
    doc = cov.to_dict()
    assert doc["inScope"] == cov.in_scope and doc["percentAutomated"] == 100.0
    assert "automated: 100.00%" in cov.summary()


def test_percent_counts_withheld_against_automation(mini_run):
    g, out, _ = mini_run
    run = read_run(out)
    run["outcomes"]["page:Nested.aspx#"] = "withheld"
    run["outcomes"]["page:Default.aspx#"] = "stub"
    cov = coverage_report(g, run)
    assert cov.generated == cov.in_scope - 1 and cov.withheld == 1 and cov.stubbed == 1
    assert cov.percent_automated == round(100 * (cov.in_scope - 2) / cov.in_scope, 4)


def test_fitgap_conserves_elements(small_corpus, tmp_path):
    src, _ = small_corpus
    g, _, _ = pipeline(src, tmp_path / "out")
    run = read_run(tmp_path / "out")
    cov = coverage_report(g, run)
    assert sum(cov.fitgap.values()) == cov.in_scope
    assert set(run["fitgap"]) == {e.id for e in g.elements.values() if e.kind in IN_SCOPE}
    assert cov.fitgap[FitGapClass.REQUIRING_REDESIGN.value] == cov.by_kind["componentuse"]["stubbed"]


def test_verify_clean_and_broken(mini_run, tmp_path):
    g, out0, _ = mini_run
    out = tmp_path / "out"
    shutil.copytree(out0, out)
    trace = read_trace(out)
    assert verify_trace_completeness(g, trace, out) == []

    (out / "stray.tsx").write_text("x")
    assert [d.code for d in verify_trace_completeness(g, trace, out)] == ["TRACE_ORPHAN_OUTPUT"]
    (out / "stray.tsx").unlink()

    (out / "i18n" / "de.json").unlink()
    assert [d.code for d in verify_trace_completeness(g, trace, out)] == ["TRACE_MISSING_FILE"]
    shutil.copy(out0 / "i18n" / "de.json", out / "i18n" / "de.json")

    bad = dict(trace, links=[l for l in trace["links"] if l["element"] != PANEL]
               + [dict(trace["links"][0], element="page:Ghost.aspx#")])
    diags = verify_trace_completeness(g, bad, out)
    assert sorted(d.code for d in diags) == ["TRACE_UNCOVERED", "TRACE_UNKNOWN_ELEMENT"]
    assert gate(diags) == 2


_codes = st.sampled_from(sorted(CATALOG))
_diag_lists = st.lists(_codes.map(lambda c: diag(c, "m")), max_size=12)


@given(_diag_lists, _codes, st.one_of(st.none(), st.integers(0, 5)))
def test_gate_is_monotone(diags, extra, max_warnings):
    t = Thresholds(max_warnings=max_warnings)
    assert gate(diags + [diag(extra, "m")], t) >= gate(diags, t)


@given(_diag_lists)
def test_gate_levels(diags):
    status = gate(diags)
    if any(d.code in INVARIANT_CODES for d in diags):
        assert status == 2
    elif any(d.severity is Severity.ERROR for d in diags):
        assert status == 1
    else:
        assert status == 0


def test_gate_warning_threshold():
    warnings = [diag("STUB_EMITTED", "m")] * 3
    assert gate(warnings) == 0
    assert gate(warnings, Thresholds(max_warnings=3)) == 0
    assert gate(warnings, Thresholds(max_warnings=2)) == 1
    assert gate([diag("NAV_EXTERNAL", "m")] * 9, Thresholds(max_warnings=0)) == 0


def test_verify_unwritten_run_is_uncovered(mini_run, tmp_path):
    g, _, _ = mini_run
    out = tmp_path / "empty"
    synthesize(g, default_ruleset(), default_profile(), out)
    trace = read_trace(out)
    trace["links"] = []
    codes = {d.code for d in verify_trace_completeness(g, trace, out)}
    assert codes == {"TRACE_UNCOVERED", "TRACE_ORPHAN_OUTPUT"}
