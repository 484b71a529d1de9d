"""Target profile, output paths, message catalogs, trace documents and file emission."""

from __future__ import annotations

import json
import os
import posixpath
import re
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import jsonschema

from .diagnostics import MigrationError, SourceSpan
from .model import ElementKind, ModelElement, canonical_json, split_element_id
from .templates import Template, TemplateSyntaxError

META_DIR = ".migrate"

PROFILE_SCHEMA = {
    "type": "object",
    "required": ["name", "extension", "pathMode", "components", "i18nAccessor", "stubTemplate",
                 "identStyle", "traceAttr"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "extension": {"type": "string", "pattern": r"^\.[A-Za-z0-9]+$"},
        "pathMode": {"enum": ["mirror", "flatten"]},
        "components": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["target"],
                "additionalProperties": False,
                "properties": {"target": {"type": "string", "minLength": 1},
                               "template": {"type": "string"}},
            },
        },
        "i18nAccessor": {"type": "string"},
        "stubTemplate": {"type": "string"},
        "identStyle": {"enum": ["preserve", "pascal", "camel"]},
        "traceAttr": {"type": "string", "pattern": r"^[A-Za-z_][\w\-]*$"},
        "componentModule": {"type": "string"},
        "i18nModule": {"type": "string"},
        "modulePrefix": {"type": "string"},
        "i18nDir": {"type": "string"},
        "routesFile": {"type": "string"},
        "routesTemplate": {"type": "string"},
        "allowProps": {"type": "array", "items": {"type": "string"}},
    },
}
_VALIDATOR = jsonschema.Draft202012Validator(PROFILE_SCHEMA)

DEFAULT_ALLOW_PROPS = ("ID", "runat", "Language", "AutoEventWireup", "CodeBehind", "CodeFile", "Inherits")


class Classification(str, Enum):
    AUTO_MERGEABLE = "autoMergeable"
    REVIEW_REQUIRED = "reviewRequired"


@dataclass
class TargetProfile:
    name: str
    extension: str
    path_mode: str
    components: dict[str, dict[str, str]]
    i18n_accessor: str
    stub_template: Template
    ident_style: str
    trace_attr: str
    component_module: str = "@/components/ui"
    i18n_module: str = "@/i18n"
    module_prefix: str = "@/"
    i18n_dir: str = "i18n"
    routes_file: str = "routes.ts"
    routes_template: Template | None = None
    allow_props: tuple[str, ...] = DEFAULT_ALLOW_PROPS
    component_templates: dict[str, Template] = field(default_factory=dict)
    source_files: dict[str, bytes] = field(default_factory=dict)

    def accessor(self, catalog: str, key: str) -> str:
        return self.i18n_accessor.replace("{catalog}", catalog).replace("{key}", key)

    @property
    def accessor_name(self) -> str:
        m = re.match(r"\s*([A-Za-z_$][\w$]*)\s*\(", self.i18n_accessor)
        return m.group(1) if m else ""

    def target(self, tag: str) -> str | None:
        entry = self.components.get(tag)
        return entry["target"] if entry else None


def load_profile(path) -> TargetProfile:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise MigrationError("IO_ERROR", f"cannot read profile {path}: {exc}") from None
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MigrationError("PROFILE_SCHEMA", f"{path}: {exc}") from None
    if isinstance(doc, dict) and ".pathMode" in doc and "pathMode" not in doc:
        doc["pathMode"] = doc.pop(".pathMode")
    try:
        _VALIDATOR.validate(doc)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise MigrationError("PROFILE_SCHEMA", f"{path}: {where}: {exc.message}") from None
    if "{catalog}" not in doc["i18nAccessor"] or "{key}" not in doc["i18nAccessor"]:
        raise MigrationError("PROFILE_SCHEMA", f"{path}: i18nAccessor needs both {{catalog}} and {{key}}")

    base = path.parent
    sources = {"profile.json": raw}

    def template(rel: str) -> Template:
        p = base / rel
        try:
            text = p.read_bytes()
        except OSError:
            raise MigrationError("PROFILE_SCHEMA", f"{path}: template {rel} not found") from None
        sources[rel] = text
        try:
            return Template.parse(text.decode("utf-8"), rel)
        except TemplateSyntaxError as exc:
            raise MigrationError("TEMPLATE_SYNTAX", str(exc)) from None

    comp_templates = {tag: template(c["template"]) for tag, c in sorted(doc["components"].items())
                      if c.get("template")}
    return TargetProfile(
        name=doc["name"], extension=doc["extension"], path_mode=doc["pathMode"],
        components=doc["components"], i18n_accessor=doc["i18nAccessor"],
        stub_template=template(doc["stubTemplate"]), ident_style=doc["identStyle"],
        trace_attr=doc["traceAttr"],
        component_module=doc.get("componentModule", "@/components/ui"),
        i18n_module=doc.get("i18nModule", "@/i18n"),
        module_prefix=doc.get("modulePrefix", "@/"),
        i18n_dir=doc.get("i18nDir", "i18n"),
        routes_file=doc.get("routesFile", "routes.ts"),
        routes_template=template(doc["routesTemplate"]) if doc.get("routesTemplate") else None,
        allow_props=tuple(doc.get("allowProps", DEFAULT_ALLOW_PROPS)),
        component_templates=comp_templates,
        source_files=sources,
    )


def default_profile_path() -> Path:
    return Path(__file__).parent / "data" / "profile" / "profile.json"


# --------------------------------------------------------------------------
# output paths


def map_output_path(element: ModelElement, profile: TargetProfile) -> str:
    if element.kind not in (ElementKind.PAGE, ElementKind.USER_CONTROL, ElementKind.ROUTE):
        raise ValueError(f"{element.id}: only pages, user controls and routes map to files")
    if element.kind is ElementKind.ROUTE:
        return profile.routes_file
    relpath = split_element_id(element.id)[1]
    stem = relpath.rsplit(".", 1)[0] if "." in posixpath.basename(relpath) else relpath
    if profile.path_mode == "flatten":
        stem = stem.replace("/", "__")
    return stem + profile.extension


def map_output_paths(elements, profile: TargetProfile) -> dict[str, str]:
    """Map every page/control to its output path; collisions are fatal."""
    out: dict[str, str] = {}
    seen: dict[str, str] = {}
    reserved = {profile.routes_file}
    for e in sorted(elements, key=lambda e: e.id):
        if e.kind not in (ElementKind.PAGE, ElementKind.USER_CONTROL):
            continue
        p = map_output_path(e, profile)
        key = p.lower()
        if key in seen or p in reserved or p.split("/")[0] in (META_DIR, profile.i18n_dir):
            other = seen.get(key, "a reserved output")
            raise MigrationError("PATH_COLLISION", f"{e.id} and {other} both map to {p}")
        seen[key] = e.id
        out[e.id] = p
    return out


def module_path(output_path: str, profile: TargetProfile) -> str:
    return profile.module_prefix + output_path.rsplit(".", 1)[0]


# --------------------------------------------------------------------------
# artifacts and trace


@dataclass
class GeneratedArtifact:
    path: str
    content: str
    elements: list[str]
    classification: Classification = Classification.AUTO_MERGEABLE
    withheld: bool = False

    def to_dict(self) -> dict:
        return {"path": self.path, "elements": list(self.elements),
                "classification": self.classification.value, "withheld": self.withheld}


@dataclass(frozen=True)
class TraceLink:
    element: str
    span: SourceSpan | None
    path: str
    line: int
    stub: bool = False

    def to_dict(self) -> dict:
        return {"element": self.element, "span": self.span.to_dict() if self.span else None,
                "path": self.path, "line": self.line, "stub": self.stub}

    @classmethod
    def from_dict(cls, d: dict) -> TraceLink:
        span = SourceSpan.from_dict(d["span"]) if d.get("span") else None
        return cls(d["element"], span, d["path"], int(d["line"]), bool(d.get("stub", False)))


def line_of(content: str, needle: str) -> int:
    i = content.find(needle)
    return 1 if i < 0 else content.count("\n", 0, i) + 1


def emit_i18n_catalog(resource_strings: list[ModelElement], profile: TargetProfile) -> list[GeneratedArtifact]:
    """One catalog per locale with sorted "Catalog.Key" entries; the default locale always exists."""
    per_locale: dict[str, dict[str, str]] = {"default": {}}
    for rs in resource_strings:
        key = f"{rs.props.get('catalog', '')}.{rs.props.get('key', '')}"
        for k, v in rs.props.items():
            if k.startswith("value."):
                per_locale.setdefault(k[len("value."):], {})[key] = v
    out = []
    for locale in sorted(per_locale):
        content = canonical_json(per_locale[locale]).decode("utf-8")
        ids = sorted(rs.id for rs in resource_strings if f"value.{locale}" in rs.props)
        out.append(GeneratedArtifact(f"{profile.i18n_dir}/{locale}.json", content, ids))
    return out


def trace_document(links: list[TraceLink], catalogs: list[str] = (), withheld: list[str] = ()) -> dict:
    return {
        "links": [l.to_dict() for l in sorted(links, key=lambda l: (l.element, l.path, l.line))],
        "catalogs": sorted(catalogs),
        "withheld": sorted(withheld),
    }


def emit_trace(links, outdir, catalogs=(), withheld=()) -> dict:
    doc = trace_document(list(links), list(catalogs), list(withheld))
    write_bytes_atomic(Path(outdir) / META_DIR / "trace.json", canonical_json(doc))
    return doc


def read_trace(outdir) -> dict:
    path = Path(outdir) / META_DIR / "trace.json"
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise MigrationError("IO_ERROR", f"cannot read trace {path}: {exc}") from None


# --------------------------------------------------------------------------
# emission


@dataclass
class WriteReport:
    written: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    withheld: list[str] = field(default_factory=list)
    removed: list[str] = field(default_factory=list)

    def summary(self) -> str:
        return (f"{len(self.written)} written, {len(self.skipped)} skipped, "
                f"{len(self.withheld)} withheld, {len(self.removed)} removed")


def write_bytes_atomic(path: Path, data: bytes) -> bool:
    """Write via temp file + rename; returns False when the bytes were already there."""
    try:
        if path.is_file() and path.read_bytes() == data:
            return False
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise MigrationError("IO_ERROR", f"cannot write {path}: {exc}") from None
    return True


def emit(artifacts: list[GeneratedArtifact], outdir, stale: list[str] = ()) -> WriteReport:
    """Write artifacts in path order; withheld artifacts are not written, stale paths are removed."""
    outdir = Path(outdir)
    report = WriteReport()
    for art in sorted(artifacts, key=lambda a: a.path):
        if art.withheld:
            report.withheld.append(art.path)
            continue
        if write_bytes_atomic(outdir / art.path, art.content.encode("utf-8")):
            report.written.append(art.path)
        else:
            report.skipped.append(art.path)
    keep = {a.path for a in artifacts if not a.withheld}
    for rel in sorted(set(stale) - keep):
        p = outdir / rel
        if p.is_file():
            try:
                p.unlink()
            except OSError as exc:
                raise MigrationError("IO_ERROR", f"cannot remove {p}: {exc}") from None
            report.removed.append(rel)
    return report


def output_files(outdir) -> list[str]:
    """Relative paths of all files under outdir except the metadata directory."""
    root = Path(outdir)
    if not root.is_dir():
        return []
    out = []
    for p in root.rglob("*"):
        rel = p.relative_to(root).as_posix()
        if p.is_file() and not rel.startswith(META_DIR + "/"):
            out.append(rel)
    return sorted(out)
