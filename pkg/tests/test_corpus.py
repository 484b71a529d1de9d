from __future__ import annotations

from collections import Counter

import pytest
from conftest import analyze, tree_digest
from hypothesis import given, settings
from hypothesis import strategies as st

from wfmigrate.corpus import BESPOKE_TAGS, CorpusSpec, gen_corpus
from wfmigrate.model import ElementKind


@pytest.mark.parametrize("kwargs", [
    {"pages": -1}, {"bespoke_ratio": 1.5}, {"dynamic_ratio": -0.1}, {"seed": 2 ** 64}, {"seed": -1},
])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        CorpusSpec(**kwargs)


def test_same_seed_same_bytes(tmp_path):
    spec = CorpusSpec(pages=12, user_controls=4, resource_strings=30, seed=99)
    gen_corpus(spec, tmp_path / "a")
    gen_corpus(spec, tmp_path / "b")
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")
    gen_corpus(CorpusSpec(pages=12, user_controls=4, resource_strings=30, seed=100), tmp_path / "c")
    assert tree_digest(tmp_path / "a") != tree_digest(tmp_path / "c")


def test_manifest_matches_model(small_corpus):
    src, m = small_corpus
    g, diags = analyze(src)
    assert len(g.of_kind(ElementKind.PAGE)) == m.pages == 60
    assert len(g.of_kind(ElementKind.USER_CONTROL)) == m.user_controls == 15
    assert len(g.of_kind(ElementKind.RESOURCE_STRING)) == m.resource_strings == 240
    uses = g.of_kind(ElementKind.COMPONENT_USE)
    assert len(uses) == m.uses
    assert Counter(u.props["tag"] for u in uses) == m.uses_by_tag
    assert sum(1 for u in uses if u.props["tag"] in BESPOKE_TAGS) == m.bespoke_uses
    assert sorted(p.relative_to(src).as_posix() for p in src.rglob("*") if p.is_file()) == sorted(m.files)
    assert diags == []


def test_bindings_resolve(small_corpus):
    src, _ = small_corpus
    g, _ = analyze(src)
    binds = [r for r in g.relations if r.kind.value == "binds"]
    assert binds
    assert all("value.default" in g.elements[r.dst].props for r in binds)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 40), st.sampled_from([0.0, 0.1, 0.25, 0.5]), st.integers(0, 2 ** 64 - 1))
def test_bespoke_ratio_is_exact(pages, ratio, seed):
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        m = gen_corpus(CorpusSpec(pages=pages, user_controls=pages // 4, resource_strings=20,
                                  bespoke_ratio=ratio, seed=seed), tmp)
    assert m.bespoke_uses == round(m.uses * ratio)
    assert m.bespoke_uses * 100 == m.uses * round(ratio * 100)
    assert sum(m.uses_by_tag.values()) == m.uses


def test_locales_and_dynamic(tmp_path):
    m = gen_corpus(CorpusSpec(pages=100, user_controls=0, resource_strings=12, locales=("de", "fr"),
                              dynamic_ratio=0.1, seed=1), tmp_path)
    resx = sorted(f for f in m.files if f.endswith(".resx"))
    assert len(resx) == 3 * 6
    code = [f for f in m.files if f.endswith(".aspx.cs")]
    dynamic = [f for f in code if "LoadControl(" in (tmp_path / f).read_text()]
    assert len(dynamic) == 10
