"""Run the ShortDescription example end to end and print the generated page, catalog and trace."""

from __future__ import annotations

import json
import shutil
import tempfile
from pathlib import Path

from wfmigrate.cli import main

ROOT = Path(__file__).resolve().parent.parent
SHORTDESC = ROOT / "tests" / "data" / "shortdesc"


def demo(work: Path):
    model, enriched, out = work / "model.json", work / "enriched.json", work / "out"
    for argv in (["analyze", str(SHORTDESC), "-o", str(model)],
                 ["enrich", str(model), "-o", str(enriched)],
                 ["synth", str(enriched), "-o", str(out)],
                 ["verify", str(enriched), str(out)]):
        if main(argv) != 0:
            raise SystemExit(f"{argv[0]} failed")
    print("\n--- source: ShortDescription.aspx")
    print((SHORTDESC / "ShortDescription.aspx").read_text())
    print("--- generated: ShortDescription.tsx")
    print((out / "ShortDescription.tsx").read_text())
    print("--- generated: i18n/default.json")
    print((out / "i18n" / "default.json").read_text())
    print("--- trace links")
    for link in json.loads((out / ".migrate" / "trace.json").read_text())["links"]:
        print(f"  {link['element']} -> {link['path']}:{link['line']}")


if __name__ == "__main__":
    tmp = Path(tempfile.mkdtemp())
    try:
        demo(tmp)
    finally:
        shutil.rmtree(tmp)
