"""The nine acceptance criteria, each reported as one PASS/FAIL line in the terminal summary."""

from __future__ import annotations

import random
import re
import shutil
import time
from collections import Counter
from pathlib import Path

import pytest
from conftest import DATA, SHORTDESC, GOLDEN, analyze, criterion, default_profile, default_ruleset, pipeline, tree_digest

from wfmigrate.cli import main as cli_main
from wfmigrate.codegen import read_trace
from wfmigrate.corpus import CorpusSpec, gen_corpus
from wfmigrate.diagnostics import CATALOG
from wfmigrate.enrich import enrich
from wfmigrate.execute import read_run, synthesize
from wfmigrate.fitgap import coverage_report, gate, verify_trace_completeness
from wfmigrate.model import (
    FINGERPRINT_RELATIONS,
    ElementKind,
    RelationKind,
    deserialize_model,
    serialize_model,
    validate_model,
)
from wfmigrate.parser import ArtifactKind, NodeKind, SourceArtifact, parse_markup


# -- 1 ---------------------------------------------------------------------

def test_golden_short_description(tmp_path):
    with criterion(1, "golden ShortDescription page transformation") as c:
        src = tmp_path / "src"
        shutil.copytree(SHORTDESC, src)
        out = tmp_path / "out"
        started = time.perf_counter()
        pipeline(src, out)
        elapsed = time.perf_counter() - started

        page = (out / "ShortDescription.tsx").read_text(encoding="utf-8")
        assert 't("Labels.ShortDescription")' in page
        assert "maxLength={50}" in page
        for eid in ("page:ShortDescription.aspx#", "componentuse:ShortDescription.aspx#0:asp:Label",
                    "componentuse:ShortDescription.aspx#1:asp:TextBox"):
            assert f'data-trace="{eid}"' in page
        assert (out / "ShortDescription.tsx").read_bytes() == (GOLDEN / "shortdesc" / "ShortDescription.tsx").read_bytes()
        assert (out / "i18n" / "default.json").read_bytes() == (GOLDEN / "shortdesc" / "i18n" / "default.json").read_bytes()
        assert elapsed < 1.0, f"took {elapsed:.3f}s"
        c.detail = f"({elapsed * 1000:.0f} ms)"


# -- full-scale run shared by 2, 3, 5 -------------------------------------

FULL_SPEC = CorpusSpec(pages=1500, user_controls=500, resource_strings=6000, bespoke_ratio=0.1, seed=42)


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("full")
    src, out = root / "src", root / "out"
    started = time.perf_counter()
    manifest = gen_corpus(FULL_SPEC, src)
    g, diags, result = pipeline(src, out)
    elapsed = time.perf_counter() - started
    return {"root": root, "src": src, "out": out, "graph": g, "manifest": manifest,
            "result": result, "elapsed": elapsed}


def test_full_scale_inventory(full_run):
    with criterion(2, "full-scale inventory and 90/10 coverage") as c:
        g, m = full_run["graph"], full_run["manifest"]
        assert len(g.of_kind(ElementKind.PAGE)) == 1500
        assert len(g.of_kind(ElementKind.USER_CONTROL)) == 500
        assert len(g.of_kind(ElementKind.RESOURCE_STRING)) == 6000
        assert full_run["elapsed"] < 120.0, f"took {full_run['elapsed']:.1f}s"

        cov = coverage_report(g, read_run(full_run["out"]))
        uses = cov.by_kind[ElementKind.COMPONENT_USE.value]
        total = cov.totals[ElementKind.COMPONENT_USE.value]
        assert total == m.uses
        assert uses["generated"] * 10 == total * 9, uses
        assert uses["stubbed"] * 10 == total, uses
        assert uses["stubbed"] == m.bespoke_uses
        pages = cov.by_kind[ElementKind.PAGE.value]
        assert pages["generated"] + pages["stubbed"] == 1500
        assert pages["withheld"] == 0
        c.detail = (f"({full_run['elapsed']:.1f} s; uses {uses['generated']}/{total} generated, "
                    f"{uses['stubbed']} stubbed)")


# -- 3 ---------------------------------------------------------------------

def test_idempotent_rerun(full_run):
    with criterion(3, "idempotent re-run writes 0 files") as c:
        out = full_run["out"]
        before = tree_digest(out)
        g, _, result = pipeline(full_run["src"], out)
        assert result.write.written == []
        assert result.write.removed == []
        assert tree_digest(out) == before
        c.detail = f"({len(result.write.skipped)} skipped)"


# -- 4 ---------------------------------------------------------------------

def test_determinism_under_shuffles(tmp_path):
    with criterion(4, "determinism across 10 discovery shuffles") as c:
        src = tmp_path / "src"
        gen_corpus(CorpusSpec(pages=80, user_controls=20, resource_strings=300, seed=11), src)
        ref_model = ref_plan = ref_tree = None
        for seed in range(10):
            g, _ = analyze(src, shuffle_seed=seed)
            model_bytes = serialize_model(g)
            enrich(g)
            out = tmp_path / f"out{seed}"
            result = synthesize(g, default_ruleset(), default_profile(), out)
            listing = result.plan.listing()
            tree = tree_digest(out)
            if ref_model is None:
                ref_model, ref_plan, ref_tree = model_bytes, listing, tree
            assert model_bytes == ref_model
            assert listing == ref_plan
            assert tree == ref_tree
        c.detail = f"({len(ref_tree)} files identical)"


# -- 5 ---------------------------------------------------------------------

def _dependent_owners(g, changed: str) -> set[str]:
    """Independent reverse walk: owners whose fingerprint closure reaches ``changed``."""
    rev: dict[str, list[str]] = {}
    for r in g.relations:
        if r.kind in FINGERPRINT_RELATIONS:
            rev.setdefault(r.dst, []).append(r.src)
    seen, todo = {changed}, [changed]
    while todo:
        for src in rev.get(todo.pop(), ()):
            if src not in seen:
                seen.add(src)
                todo.append(src)
    return {e for e in seen if g.elements[e].kind in (ElementKind.PAGE, ElementKind.USER_CONTROL)}


def test_incremental_equals_full(full_run, tmp_path):
    with criterion(5, "incremental synth equals full synth") as c:
        src = tmp_path / "src"
        shutil.copytree(full_run["src"], src)
        inc_out = tmp_path / "inc"
        shutil.copytree(full_run["out"], inc_out)

        # mutate the most widely bound resource value
        g0 = full_run["graph"]
        binders = Counter(r.dst for r in g0.relations if r.kind is RelationKind.BINDS)
        target = min(binders, key=lambda k: (-binders[k], k))
        catalog, key = target.split(":", 1)[1].split("#")
        resx = src / "App_GlobalResources" / f"{catalog}.resx"
        text = resx.read_text(encoding="utf-8")
        pattern = re.compile(rf'(<data name="{key}"[^>]*>\s*<value>)(.*?)(</value>)', re.S)
        assert pattern.search(text)
        resx.write_text(pattern.sub(lambda m: m.group(1) + "Changed value" + m.group(3), text), encoding="utf-8")

        g, _, inc = pipeline(src, inc_out, incremental=True)
        full_out = tmp_path / "full"
        pipeline(src, full_out)
        assert tree_digest(inc_out) == tree_digest(full_out)

        assert not inc.full
        paths = inc.plan.output_paths
        expected = {paths[o] for o in _dependent_owners(g, target)} | {"$i18n"}
        assert set(inc.regenerated) == expected
        assert inc.write.written == ["i18n/default.json"]
        c.detail = f"({len(expected) - 1} dependent file(s) regenerated, {len(inc.write.written)} written)"


# -- 6 ---------------------------------------------------------------------

INVARIANTS = sorted(p.stem for p in (DATA / "invariants").glob("*.json"))


def test_model_invariant_fixtures(tmp_path):
    with criterion(6, "model invariant fixtures -> exact code, gate 2") as c:
        assert len(INVARIANTS) == 8
        for code in INVARIANTS:
            path = DATA / "invariants" / f"{code}.json"
            g = deserialize_model(path.read_bytes())
            diags = validate_model(g)
            assert [d.code for d in diags] == [code], code
            assert gate(diags) == 2
            assert cli_main(["enrich", str(path), "-o", str(tmp_path / "e.json")]) == 2
            assert cli_main(["synth", str(path), "-o", str(tmp_path / "out")]) == 2
        c.detail = f"({len(INVARIANTS)} fixtures)"


# -- 7 ---------------------------------------------------------------------

_OPEN_TAG = re.compile(r"<([A-Za-z_][\w.\-]*):([A-Za-z_][\w.\-]*)[\s/>]")


def regex_scanner(root: Path) -> Counter:
    counts = Counter()
    for p in root.rglob("*"):
        if p.suffix in (".aspx", ".ascx"):
            for prefix, tag in _OPEN_TAG.findall(p.read_text(encoding="utf-8")):
                counts[f"{prefix}:{tag}"] += 1
    return counts


def test_oracle_equivalence(tmp_path):
    with criterion(7, "parser vs regex oracle on 50 corpora, round trip") as c:
        uses = 0
        for seed in range(50):
            src = tmp_path / f"c{seed}"
            gen_corpus(CorpusSpec(pages=100, user_controls=10, resource_strings=100, seed=seed), src)
            g, _ = analyze(src)
            counted = Counter(e.props["tag"] for e in g.of_kind(ElementKind.COMPONENT_USE))
            assert counted == regex_scanner(src), seed
            uses += sum(counted.values())
            data = serialize_model(g)
            assert deserialize_model(data) == g
            assert serialize_model(deserialize_model(data)) == data
            shutil.rmtree(src)
        c.detail = f"({uses} uses compared)"


# -- 8 ---------------------------------------------------------------------

def test_trace_completeness(tmp_path, small_corpus):
    with criterion(8, "trace completeness; one deleted file -> one TRACE diagnostic") as c:
        src, _ = small_corpus
        out = tmp_path / "out"
        g, _, _ = pipeline(src, out)
        trace = read_trace(out)
        assert [d for d in verify_trace_completeness(g, trace, out) if d.code.startswith("TRACE_")] == []
        victims = sorted({link["path"] for link in trace["links"]})
        for victim in (victims[0], victims[len(victims) // 2], "i18n/default.json"):
            saved = (out / victim).read_bytes()
            (out / victim).unlink()
            diags = [d for d in verify_trace_completeness(g, trace, out) if d.code.startswith("TRACE_")]
            assert len(diags) == 1, (victim, diags)
            assert diags[0].code == "TRACE_MISSING_FILE"
            (out / victim).write_bytes(saved)
        c.detail = f"({len(trace['links'])} links)"


# -- 9 ---------------------------------------------------------------------

def _check_structure(pm, text: str):
    n = len(text)
    for d in pm.directives:
        assert 0 <= d.start <= d.end <= n
    for node in walk_all(pm.roots):
        assert 0 <= node.start <= node.end <= n
        assert node.span.line >= 1 and node.span.col >= 1
        assert isinstance(node.kind, NodeKind)
    for d in pm.diagnostics:
        assert d.code in CATALOG


def walk_all(nodes):
    for node in nodes:
        yield node
        yield from walk_all(node.children)


def test_fuzz_liberality():
    with criterion(9, "10,000 byte mutations never crash the markup parser") as c:
        seeds = [p.read_bytes() for p in sorted((DATA / "markup").glob("*.aspx"))]
        seeds.append((SHORTDESC / "ShortDescription.aspx").read_bytes())
        rng = random.Random(20240601)
        diagnostics = 0
        for i in range(10_000):
            data = bytearray(rng.choice(seeds))
            for _ in range(rng.randint(1, 8)):
                op = rng.randrange(3)
                pos = rng.randrange(len(data) + 1)
                if op == 0 and data:
                    data[min(pos, len(data) - 1)] = rng.randrange(256)
                elif op == 1:
                    data[pos:pos] = bytes([rng.choice(b"<>%@/=\"' :\n") if rng.random() < 0.7 else rng.randrange(256)])
                elif data:
                    del data[min(pos, len(data) - 1)]
            text = bytes(data).decode("utf-8", errors="replace")
            pm = parse_markup(SourceArtifact(f"fuzz{i}.aspx", ArtifactKind.PAGE_MARKUP, text))
            _check_structure(pm, text)
            diagnostics += len(pm.diagnostics)
        c.detail = f"({diagnostics} diagnostics over 10,000 runs)"
