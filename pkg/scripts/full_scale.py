"""Generate the full-scale synthetic corpus, run the pipeline stage by stage and print timings and coverage."""

from __future__ import annotations

import argparse
import json
import tempfile
import time
from pathlib import Path

from wfmigrate.cli import main


def stage(name: str, argv: list[str]) -> float:
    started = time.perf_counter()
    status = main(argv)
    elapsed = time.perf_counter() - started
    print(f"== {name}: status {status}, {elapsed:.2f}s")
    if status == 2:
        raise SystemExit(status)
    return elapsed


def run(work: Path, args) -> dict:
    src, out = work / "src", work / "out"
    model, enriched = work / "model.json", work / "enriched.json"
    timings = {
        "gen-corpus": stage("gen-corpus", ["gen-corpus", "--pages", str(args.pages), "--controls", str(args.controls),
                                           "--resources", str(args.resources), "--bespoke-ratio",
                                           str(args.bespoke_ratio), "--seed", str(args.seed), "-o", str(src)]),
        "analyze": stage("analyze", ["analyze", str(src), "-o", str(model)]),
        "enrich": stage("enrich", ["enrich", str(model), "-o", str(enriched)]),
        "synth": stage("synth", ["synth", str(enriched), "-o", str(out)]),
        "synth (rerun)": stage("synth (rerun)", ["synth", str(enriched), "-o", str(out), "--incremental"]),
        "report": stage("report", ["report", str(enriched), str(out)]),
        "verify": stage("verify", ["verify", str(enriched), str(out)]),
    }
    report = json.loads((out / ".migrate" / "report.json").read_text())
    return {"timings": timings, "report": report}


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--pages", type=int, default=1500)
    p.add_argument("--controls", type=int, default=500)
    p.add_argument("--resources", type=int, default=6000)
    p.add_argument("--bespoke-ratio", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--workdir", type=Path, default=None, help="keep artifacts here instead of a temp dir")
    return p.parse_args(argv)


if __name__ == "__main__":
    args = parse_args()
    if args.workdir:
        args.workdir.mkdir(parents=True, exist_ok=True)
        result = run(args.workdir, args)
    else:
        with tempfile.TemporaryDirectory() as tmp:
            result = run(Path(tmp), args)
    print(json.dumps(result, indent=2, sort_keys=True))
