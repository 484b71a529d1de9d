from __future__ import annotations

import hashlib
import random
import shutil
from pathlib import Path

import pytest

from wfmigrate.codegen import default_profile_path, load_profile
from wfmigrate.corpus import CorpusSpec, gen_corpus
from wfmigrate.enrich import enrich
from wfmigrate.execute import synthesize
from wfmigrate.model import build_model, validate_model
from wfmigrate.parser import discover_artifacts, parse_artifacts
from wfmigrate.rules import default_rules_dir, load_rules

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"
SHORTDESC = DATA / "shortdesc"

_RESULTS: list[tuple[int, str, bool, str]] = []


class criterion:
    """Record one acceptance criterion as a PASS/FAIL line in the terminal summary."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        detail = self.detail if ok else f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        _RESULTS.append((self.number, self.title, ok, detail))
        return False


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {title}  {detail}".rstrip())


def tree_digest(root) -> dict[str, str]:
    root = Path(root)
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def analyze(src, shuffle_seed: int | None = None):
    artifacts = discover_artifacts(src)
    if shuffle_seed is not None:
        random.Random(shuffle_seed).shuffle(artifacts)
    parsed = parse_artifacts(artifacts)
    g, diags = build_model(parsed)
    return g, parsed.diagnostics + diags + validate_model(g)


def pipeline(src, outdir, incremental=False, shuffle_seed=None, ruleset=None, profile=None):
    g, diags = analyze(src, shuffle_seed)
    _, d = enrich(g)
    result = synthesize(g, ruleset or default_ruleset(), profile or default_profile(), outdir, incremental)
    return g, diags + d, result


_CACHE = {}


def default_ruleset():
    if "rules" not in _CACHE:
        _CACHE["rules"] = load_rules(default_rules_dir())
    return _CACHE["rules"]


def default_profile():
    if "profile" not in _CACHE:
        _CACHE["profile"] = load_profile(default_profile_path())
    return _CACHE["profile"]


@pytest.fixture
def shortdesc_src(tmp_path):
    dst = tmp_path / "src"
    shutil.copytree(SHORTDESC, dst)
    return dst


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("small") / "src"
    manifest = gen_corpus(CorpusSpec(pages=60, user_controls=15, resource_strings=240, seed=7), root)
    return root, manifest
