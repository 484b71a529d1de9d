"""Source spans, diagnostics, and the closed diagnostic-code catalog."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Severity(str, Enum):
    INFO = "info"
    WARNING = "warning"
    ERROR = "error"

    @property
    def rank(self) -> int:
        return _SEVERITY_RANK[self]


_SEVERITY_RANK = {Severity.INFO: 0, Severity.WARNING: 1, Severity.ERROR: 2}


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    col: int
    length: int

    def __post_init__(self):
        if self.line < 1 or self.col < 1 or self.length < 0:
            raise ValueError(f"invalid span {self!r}")

    def to_dict(self) -> dict:
        return {"file": self.file, "line": self.line, "col": self.col, "length": self.length}

    @classmethod
    def from_dict(cls, d: dict) -> SourceSpan:
        return cls(d["file"], d["line"], d["col"], d["length"])

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"


# code -> (default severity, one-line meaning). docs/diagnostics.md mirrors this table.
CATALOG: dict[str, tuple[Severity, str]] = {
    # corpus parsing
    "PARSE_ENCODING": (Severity.WARNING, "input is not valid UTF-8; invalid sequences were replaced"),
    "MARKUP_MISSING_DIRECTIVE": (Severity.WARNING, "page/control file does not open with its Page/Control directive"),
    "MARKUP_DUPLICATE_ATTR": (Severity.WARNING, "attribute repeated on a directive or server control; last value wins"),
    "MARKUP_MISSING_RUNAT": (Severity.WARNING, "server control lacks runat=\"server\"; still treated as a server control"),
    "MARKUP_UNMATCHED_CLOSE": (Severity.WARNING, "closing tag without a matching open tag; demoted to literal text"),
    "MARKUP_UNCLOSED_TAG": (Severity.WARNING, "open tag never closed; tag text demoted to literal, children lifted"),
    "MARKUP_MALFORMED_TAG": (Severity.WARNING, "tag or directive could not be parsed; region demoted to literal text"),
    "MARKUP_INLINE_CODE": (Severity.WARNING, "inline <% ... %> code block kept as literal text; needs review"),
    "MARKUP_NESTED_DIRECTIVE": (Severity.WARNING, "directive inside a server control; kept as literal text"),
    "MARKUP_BAD_BINDING": (Severity.WARNING, "resource binding expression is malformed; kept as a literal value"),
    "MARKUP_UNKNOWN_PREFIX": (Severity.WARNING, "tag prefix is neither asp nor registered by a Register directive"),
    "MARKUP_MASTER_PAGE": (Severity.WARNING, "page uses a master page; merge semantics are not modelled"),
    "RESX_MALFORMED": (Severity.WARNING, "resource catalog violates the supported XML subset"),
    "RESX_DUPLICATE_KEY": (Severity.WARNING, "key repeated in one resource catalog; last occurrence wins"),
    "CB_NO_CLASS": (Severity.WARNING, "no class declaration in code-behind; file stem used as class name"),
    "CB_DUPLICATE_HANDLER": (Severity.WARNING, "handler declared twice in one code-behind file; first kept"),
    # model
    "MODEL_MISSING_REGISTER": (Severity.WARNING, "Register directive points at a user control that is not in the corpus"),
    "MODEL_UNKNOWN_HANDLER": (Severity.WARNING, "On* attribute names no handler declared in the code-behind"),
    "MODEL_DANGLING_REF": (Severity.ERROR, "relation endpoint does not exist in the graph"),
    "MODEL_CONTAINMENT_FOREST": (Severity.ERROR, "contains relations do not form a forest"),
    "MODEL_DUPLICATE_RELATION": (Severity.ERROR, "(kind, src, dst) occurs more than once"),
    "MODEL_BINDS_KIND": (Severity.ERROR, "binds relation target is not a ResourceString"),
    "MODEL_HANDLES_KIND": (Severity.ERROR, "handles relation target is not a HandlerStub"),
    "MODEL_ID_KIND": (Severity.ERROR, "element id prefix disagrees with the element kind"),
    "MODEL_MISSING_TAG": (Severity.ERROR, "ComponentUse element lacks its tag prop"),
    "MODEL_DEPENDS_CYCLE": (Severity.WARNING, "dependsOn cycle among pages/user controls"),
    "MODEL_INVALID_CYCLE": (Severity.ERROR, "dependsOn cycle involving elements other than pages/user controls"),
    "ORPHAN_CODEBEHIND": (Severity.WARNING, "code-behind with dynamic constructs has no owning page or control"),
    # enrichment
    "I18N_MISSING_KEY": (Severity.WARNING, "bound resource key has no default-locale value"),
    "NAV_EXTERNAL": (Severity.INFO, "navigation URL is external or does not resolve to a corpus page"),
    "ENR_UNKNOWN_TARGET": (Severity.WARNING, "ControlToValidate names no control in the same page/control"),
    "ENR_BAD_MAXLENGTH": (Severity.WARNING, "MaxLength is not a positive integer; no constraint recorded"),
    "DYN_CONSTRUCT": (Severity.WARNING, "code-behind builds controls dynamically; owner marked low-confidence"),
    # rule engine / synthesis
    "RULE_CONFLICT": (Severity.WARNING, "several rules of equal top priority match; element routed to a stub"),
    "CYCLE_BROKEN": (Severity.WARNING, "dependsOn cycle broken at the lexicographically smallest id"),
    "STUB_EMITTED": (Severity.WARNING, "stub emitted for an unmatched or low-confidence element"),
    "POST_FAILED": (Severity.ERROR, "template render error or failed postcondition; artifact withheld"),
    "INCREMENTAL_FULL": (Severity.INFO, "fingerprint index missing, corrupt or stale; full regeneration"),
    # trace verification
    "TRACE_UNCOVERED": (Severity.ERROR, "in-scope element has neither a generated artifact nor a stub"),
    "TRACE_MISSING_FILE": (Severity.ERROR, "trace link points at an output file that does not exist"),
    "TRACE_ORPHAN_OUTPUT": (Severity.ERROR, "output file carries no trace link"),
    "TRACE_UNKNOWN_ELEMENT": (Severity.ERROR, "trace link names an element that is not in the model"),
}

# Fatal error codes raised as MigrationError rather than reported as diagnostics.
FATAL_CODES = {
    "IO_ERROR": "source root, model or output path missing or unreadable",
    "MODEL_SCHEMA": "model document malformed or of an unsupported schema version",
    "DUP_RULE": "two rules share one name",
    "RULE_SCHEMA": "rule document invalid, unknown guard/post token, or template missing",
    "PROFILE_SCHEMA": "target profile invalid or incomplete for the loaded rule pack",
    "TEMPLATE_SYNTAX": "template has unbalanced or unknown tags",
    "PATH_COLLISION": "two elements map to one output path",
    "UNKNOWN_ELEMENT": "element id not present in the graph",
}

# Error codes that signal a broken model or trace document (gate status 2).
INVARIANT_CODES = frozenset(
    {
        "MODEL_DANGLING_REF",
        "MODEL_CONTAINMENT_FOREST",
        "MODEL_DUPLICATE_RELATION",
        "MODEL_BINDS_KIND",
        "MODEL_HANDLES_KIND",
        "MODEL_ID_KIND",
        "MODEL_MISSING_TAG",
        "MODEL_INVALID_CYCLE",
        "TRACE_UNKNOWN_ELEMENT",
    }
)


class MigrationError(Exception):
    """Fatal pipeline error carrying a stable code."""

    def __init__(self, code: str, message: str):
        if code not in FATAL_CODES:
            raise ValueError(f"unknown fatal code {code}")
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    element: str | None = None
    span: SourceSpan | None = None

    def __post_init__(self):
        if self.code not in CATALOG:
            raise ValueError(f"diagnostic code {self.code!r} is not in the catalog")

    def sort_key(self):
        s = self.span
        return (
            -self.severity.rank,
            self.code,
            self.element or "",
            (s.file, s.line, s.col, s.length) if s else ("", 0, 0, 0),
            self.message,
        )

    def to_dict(self) -> dict:
        d = {"severity": self.severity.value, "code": self.code, "message": self.message}
        if self.element is not None:
            d["element"] = self.element
        if self.span is not None:
            d["span"] = self.span.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Diagnostic:
        span = SourceSpan.from_dict(d["span"]) if "span" in d else None
        return cls(Severity(d["severity"]), d["code"], d["message"], d.get("element"), span)

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        elem = f" [{self.element}]" if self.element else ""
        return f"{where}{self.severity.value}: {self.code}: {self.message}{elem}"


def diag(code: str, message: str, element: str | None = None, span: SourceSpan | None = None,
         severity: Severity | None = None) -> Diagnostic:
    """Build a diagnostic with the catalog's default severity."""
    return Diagnostic(severity or CATALOG[code][0], code, message, element, span)


def sort_diagnostics(diags) -> list[Diagnostic]:
    return sorted(diags, key=Diagnostic.sort_key)
