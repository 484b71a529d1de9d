"""Deterministic synthetic Web Forms corpora for desk-scale evaluation."""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

BUILTIN_TAGS = (
    "asp:Label", "asp:TextBox", "asp:Button", "asp:CheckBox", "asp:DropDownList",
    "asp:HyperLink", "asp:Panel", "asp:Literal", "asp:GridView", "asp:RequiredFieldValidator",
)
BESPOKE_TAGS = ("x:FancyGrid", "x:FancyChart", "x:FancyUpload", "x:FancyDatePicker")
FOLDERS = ("", "Admin", "Orders", "Reports", "Customers")
CATALOGS = ("Labels", "Buttons", "Messages", "Errors", "Titles", "Help")
WORDS = ("Save", "Cancel", "Order", "Customer", "Report", "Name", "Date", "Total", "Status", "Search",
         "Address", "Email", "Notes", "Review", "Submit", "Account", "Invoice", "Filter")
_PREFIX = {"asp:Label": "lbl", "asp:TextBox": "txt", "asp:Button": "btn", "asp:CheckBox": "chk",
           "asp:DropDownList": "ddl", "asp:HyperLink": "lnk", "asp:Panel": "pnl", "asp:Literal": "lit",
           "asp:GridView": "gv", "asp:RequiredFieldValidator": "rfv"}


@dataclass(frozen=True)
class CorpusSpec:
    pages: int = 1500
    user_controls: int = 500
    resource_strings: int = 6000
    bespoke_ratio: float = 0.1
    locales: tuple[str, ...] = ("de",)
    seed: int = 0
    dynamic_ratio: float = 0.02

    def __post_init__(self):
        if min(self.pages, self.user_controls, self.resource_strings) < 0:
            raise ValueError("counts must be >= 0")
        if not 0.0 <= self.bespoke_ratio <= 1.0 or not 0.0 <= self.dynamic_ratio <= 1.0:
            raise ValueError("ratios must lie in [0, 1]")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class CorpusManifest:
    pages: int = 0
    user_controls: int = 0
    resource_strings: int = 0
    uses: int = 0
    bespoke_uses: int = 0
    uses_by_tag: Counter = field(default_factory=Counter)
    files: list[str] = field(default_factory=list)


@dataclass
class _Use:
    tag: str
    attrs: dict[str, str]
    children: list[_Use] = field(default_factory=list)
    uc: bool = False


class _Builder:
    def __init__(self, spec: CorpusSpec, rng: random.Random, keys: list[tuple[str, str]]):
        self.spec = spec
        self.rng = rng
        self.keys = keys
        self.counter = 0

    def text(self, attrs: dict, name: str, p_bind: float = 0.7):
        if self.keys and self.rng.random() < p_bind:
            catalog, key = self.keys[self.rng.randrange(len(self.keys))]
            attrs[name] = f"<%$ Resources:{catalog}, {key} %>"
        else:
            attrs[name] = " ".join(self.rng.sample(WORDS, 2))

    def control(self, tag: str, page_paths: list[str], handlers: list[str], textboxes: list[str]) -> _Use:
        self.counter += 1
        ident = f"{_PREFIX[tag]}{self.counter}"
        attrs = {"ID": ident}
        rng = self.rng
        if tag in ("asp:Label", "asp:Literal", "asp:CheckBox"):
            self.text(attrs, "Text")
        elif tag == "asp:TextBox":
            if rng.random() < 0.6:
                attrs["MaxLength"] = str(rng.choice((20, 50, 100, 255)))
            textboxes.append(ident)
        elif tag == "asp:Button":
            self.text(attrs, "Text")
            handler = f"{ident}_Click"
            attrs["OnClick"] = handler
            handlers.append(handler)
        elif tag == "asp:HyperLink":
            self.text(attrs, "Text")
            if page_paths:
                attrs["NavigateUrl"] = "~/" + rng.choice(page_paths)
        elif tag == "asp:GridView":
            attrs["AutoGenerateColumns"] = "true"
        elif tag == "asp:RequiredFieldValidator":
            attrs["ControlToValidate"] = textboxes[-1]
            self.text(attrs, "ErrorMessage")
        if tag == "asp:CheckBox" and rng.random() < 0.3:
            attrs["Checked"] = "true"
        return _Use(tag, attrs)

    def body(self, count: int, page_paths, handlers) -> list[_Use]:
        """Draw ``count`` built-in controls; panels adopt up to three following controls."""
        textboxes: list[str] = []
        flat: list[_Use] = []
        for _ in range(count):
            tag = self.rng.choice(BUILTIN_TAGS)
            if tag == "asp:RequiredFieldValidator" and not textboxes:
                tag = "asp:TextBox"
            flat.append(self.control(tag, page_paths, handlers, textboxes))
        roots: list[_Use] = []
        i = 0
        while i < len(flat):
            use = flat[i]
            i += 1
            roots.append(use)
            if use.tag == "asp:Panel":
                take = self.rng.randint(0, 3)
                while take and i < len(flat) and flat[i].tag != "asp:Panel":
                    use.children.append(flat[i])
                    i += 1
                    take -= 1
        return roots


def _walk(uses: list[_Use]):
    for u in uses:
        yield u
        yield from _walk(u.children)


def _render_use(u: _Use, indent: str) -> str:
    attrs = "".join(f' {k}="{v}"' for k, v in u.attrs.items())
    if not u.children:
        return f'{indent}<{u.tag}{attrs} runat="server" />\n'
    inner = "".join(_render_use(c, indent + "  ") for c in u.children)
    return f'{indent}<{u.tag}{attrs} runat="server">\n{inner}{indent}</{u.tag}>\n'


_X_REGISTER = '<%@ Register TagPrefix="x" Namespace="Vendor.Controls" Assembly="Vendor.Controls" %>\n'


def _markup(head: str, registers: list[str], uses: list[_Use], page: bool) -> str:
    parts = [head, _X_REGISTER, *registers]
    body = "".join(_render_use(u, "      " if page else "  ") for u in uses)
    if page:
        parts.append('<html>\n<body>\n  <form id="form1" runat="server">\n    <div>\n')
        parts.append(body)
        parts.append("    </div>\n  </form>\n</body>\n</html>\n")
    else:
        parts.append('<div class="widget">\n' + body + "</div>\n")
    return "".join(parts)


def _code_behind(class_name: str, handlers: list[str], dynamic: bool) -> str:
    lines = ["using System;", "using System.Web.UI;", "", "namespace App", "{",
             f"    public partial class {class_name} : Page", "    {",
             "        protected void Page_Load(object sender, EventArgs e)", "        {"]
    if dynamic:
        lines.append("            Controls.Add(LoadControl(\"~/Controls/Dynamic.ascx\"));")
    lines.append("        }")
    for h in handlers:
        lines += ["", f"        protected void {h}(object sender, EventArgs e)", "        {", "        }"]
    lines += ["    }", "}", ""]
    return "\n".join(lines)


def _resx(entries: list[tuple[str, str]]) -> str:
    out = ['<?xml version="1.0" encoding="utf-8"?>', "<root>"]
    for key, value in entries:
        out.append(f'  <data name={quoteattr(key)} xml:space="preserve">')
        out.append(f"    <value>{escape(value)}</value>")
        out.append("  </data>")
    out.append("</root>")
    return "\n".join(out) + "\n"


def gen_corpus(spec: CorpusSpec, outdir) -> CorpusManifest:
    """Write a corpus under ``outdir``; the same spec always yields the same bytes."""
    rng = random.Random(spec.seed)
    out = Path(outdir)
    files: dict[str, str] = {}

    # resource strings spread over the catalogs
    n_cat = min(len(CATALOGS), spec.resource_strings) or 1
    keys: list[tuple[str, str]] = []
    per_catalog: dict[str, list[tuple[str, str]]] = {c: [] for c in CATALOGS[:n_cat]}
    for n in range(spec.resource_strings):
        catalog = CATALOGS[n % n_cat]
        key = f"Key{n:05d}"
        keys.append((catalog, key))
        per_catalog[catalog].append((key, " ".join(rng.sample(WORDS, 3))))
    for catalog, entries in per_catalog.items():
        if not entries:
            continue
        files[f"App_GlobalResources/{catalog}.resx"] = _resx(entries)
        for loc in spec.locales:
            files[f"App_GlobalResources/{catalog}.{loc}.resx"] = _resx(
                [(k, f"{v} [{loc}]") for k, v in entries])

    page_paths = []
    for i in range(spec.pages):
        folder = FOLDERS[i % len(FOLDERS)]
        page_paths.append(f"{folder}/Page{i:04d}.aspx".lstrip("/"))
    uc_paths = [f"Controls/Widget{j:03d}.ascx" for j in range(spec.user_controls)]

    b = _Builder(spec, rng, keys)
    owners: list[tuple[str, list[_Use], list[str], list[str], bool]] = []

    for path in uc_paths:
        handlers: list[str] = []
        uses = b.body(rng.randint(1, 4), page_paths, handlers)
        owners.append((path, uses, handlers, [], False))

    n_dynamic = round(spec.dynamic_ratio * spec.pages)
    dynamic = set(rng.sample(range(spec.pages), n_dynamic)) if spec.pages else set()
    for i, path in enumerate(page_paths):
        handlers = []
        uses = b.body(rng.randint(3, 20), page_paths, handlers)
        registers = []
        if uc_paths and rng.random() < 0.3:
            for uc in sorted(rng.sample(uc_paths, min(len(uc_paths), rng.randint(1, 2)))):
                name = uc.rsplit("/", 1)[1].rsplit(".", 1)[0]
                registers.append(f'<%@ Register TagPrefix="uc" TagName="{name}" Src="~/{uc}" %>\n')
                b.counter += 1
                uses.insert(rng.randint(0, len(uses)), _Use(f"uc:{name}", {"ID": f"uc{b.counter}"}, uc=True))
        owners.append((path, uses, handlers, registers, i in dynamic))

    # pad with literals so the bespoke share is exact
    total = sum(1 for _, uses, *_ in owners for _ in _walk(uses))
    ratio = Fraction(spec.bespoke_ratio).limit_denominator(1000)
    if owners and ratio:
        while total % ratio.denominator:
            b.counter += 1
            owners[-1][1].append(_Use("asp:Literal", {"ID": f"lit{b.counter}", "Text": "Padding"}))
            total += 1
    n_bespoke = int(ratio * total)
    leaves = [u for _, uses, *_ in owners for u in _walk(uses) if not u.uc and not u.children]
    for u in rng.sample(leaves, min(n_bespoke, len(leaves))):
        u.tag = rng.choice(BESPOKE_TAGS)
        u.attrs = {"ID": u.attrs["ID"]}

    manifest = CorpusManifest(spec.pages, spec.user_controls, spec.resource_strings)
    for path, uses, handlers, registers, dyn in owners:
        is_page = path.endswith(".aspx")
        stem = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
        cb = path.rsplit("/", 1)[-1] + ".cs"
        if is_page:
            head = f'<%@ Page Language="C#" AutoEventWireup="true" CodeBehind="{cb}" Inherits="App.{stem}" %>\n'
        else:
            head = f'<%@ Control Language="C#" AutoEventWireup="true" CodeBehind="{cb}" Inherits="App.{stem}" %>\n'
        files[path] = _markup(head, registers, uses, is_page)
        files[path + ".cs"] = _code_behind(stem, handlers, dyn)
        for u in _walk(uses):
            manifest.uses += 1
            manifest.uses_by_tag[u.tag] += 1
            manifest.bespoke_uses += u.tag.startswith("x:")

    for rel in sorted(files):
        p = out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(files[rel].encode("utf-8"))
    manifest.files = sorted(files)
    return manifest
