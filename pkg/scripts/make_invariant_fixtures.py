"""Regenerate tests/data/invariants: the ShortDescription model with exactly one invariant broken per file."""

from __future__ import annotations

import json
import sys
from pathlib import Path

from wfmigrate.enrich import enrich
from wfmigrate.model import build_model, canonical_json, model_to_dict
from wfmigrate.parser import parse_corpus

ROOT = Path(__file__).resolve().parent.parent
SHORTDESC = ROOT / "tests" / "data" / "shortdesc"
OUT = ROOT / "tests" / "data" / "invariants"

LABEL = "componentuse:ShortDescription.aspx#0:asp:Label"
TEXTBOX = "componentuse:ShortDescription.aspx#1:asp:TextBox"
PAGE = "page:ShortDescription.aspx#"
RS = "resourcestring:Labels#ShortDescription"
LABEL_TYPE = "componenttype:asp:Label#"


def rel(kind, src, dst):
    return {"kind": kind, "src": src, "dst": dst, "provenance": None, "confidence": "high"}


def element(doc, eid):
    return next(e for e in doc["elements"] if e["id"] == eid)


def dangling(doc):
    doc["relations"].append(rel("uses", TEXTBOX, "componenttype:asp:Missing#"))


def forest(doc):
    doc["relations"].append(rel("contains", LABEL, TEXTBOX))


def duplicate(doc):
    doc["relations"].append(dict(doc["relations"][0]))


def binds_kind(doc):
    doc["relations"].append(rel("binds", TEXTBOX, LABEL_TYPE))


def handles_kind(doc):
    doc["relations"].append(rel("handles", TEXTBOX, RS))


def id_kind(doc):
    element(doc, LABEL_TYPE)["kind"] = "route"


def missing_tag(doc):
    del element(doc, TEXTBOX)["props"]["tag"]


def invalid_cycle(doc):
    doc["relations"] += [rel("dependsOn", LABEL, RS), rel("dependsOn", RS, LABEL)]


MUTATIONS = {
    "MODEL_DANGLING_REF": dangling,
    "MODEL_CONTAINMENT_FOREST": forest,
    "MODEL_DUPLICATE_RELATION": duplicate,
    "MODEL_BINDS_KIND": binds_kind,
    "MODEL_HANDLES_KIND": handles_kind,
    "MODEL_ID_KIND": id_kind,
    "MODEL_MISSING_TAG": missing_tag,
    "MODEL_INVALID_CYCLE": invalid_cycle,
}


def main() -> int:
    g, _ = build_model(parse_corpus(SHORTDESC))
    enrich(g)
    OUT.mkdir(parents=True, exist_ok=True)
    for code, mutate in MUTATIONS.items():
        doc = json.loads(json.dumps(model_to_dict(g)))
        mutate(doc)
        (OUT / f"{code}.json").write_bytes(canonical_json(doc))
        print(f"wrote {code}.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
