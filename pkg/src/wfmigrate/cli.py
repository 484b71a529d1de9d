"""Command line: analyze, enrich, synth, report, verify and gen-corpus."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .codegen import default_profile_path, load_profile, read_trace, write_bytes_atomic
from .corpus import CorpusSpec, gen_corpus
from .diagnostics import Diagnostic, MigrationError, Severity, sort_diagnostics
from .enrich import enrich
from .execute import meta_path, read_run, synthesize
from .fitgap import Thresholds, coverage_report, gate, verify_trace_completeness
from .model import ElementKind, ModelGraph, build_model, canonical_json, deserialize_model, serialize_model, validate_model
from .parser import parse_corpus
from .rules import default_rules_dir, load_rules

log = logging.getLogger("wfmigrate")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


@dataclass
class RunConfig:
    source: Path | None = None
    model: Path | None = None
    rules: Path | None = None
    profile: Path | None = None
    outdir: Path | None = None
    incremental: bool = False
    seed: int = 0
    log_level: str = "warn"
    max_warnings: int | None = None

    def __post_init__(self):
        for name in ("source", "model", "rules", "profile", "outdir"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, Path(value).resolve())
        if self.log_level not in LOG_LEVELS:
            raise ValueError(f"log level must be one of {', '.join(LOG_LEVELS)}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def require(self, *names: str, dirs: tuple[str, ...] = ()):
        for name in names:
            path = getattr(self, name)
            if path is None or not path.exists():
                raise MigrationError("IO_ERROR", f"{name} path {path} does not exist")
            if name in dirs and not path.is_dir():
                raise MigrationError("IO_ERROR", f"{name} path {path} is not a directory")


def report_diagnostics(diags: list[Diagnostic]):
    level = {Severity.ERROR: logging.ERROR, Severity.WARNING: logging.WARNING, Severity.INFO: logging.INFO}
    for d in sort_diagnostics(diags):
        log.log(level[d.severity], "%s", d)
    counts = {s: sum(d.severity is s for d in diags) for s in Severity}
    print(f"diagnostics: {counts[Severity.ERROR]} error(s), {counts[Severity.WARNING]} warning(s), "
          f"{counts[Severity.INFO]} info")


def inventory(g: ModelGraph) -> str:
    kinds = [ElementKind.PAGE, ElementKind.USER_CONTROL, ElementKind.COMPONENT_USE,
             ElementKind.COMPONENT_TYPE, ElementKind.RESOURCE_STRING, ElementKind.HANDLER_STUB]
    return "\n".join(f"  {k.value:15} {len(g.of_kind(k))}" for k in kinds)


def read_model(path: Path) -> ModelGraph:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise MigrationError("IO_ERROR", f"cannot read model {path}: {exc}") from None
    return deserialize_model(data)


def cmd_analyze(cfg: RunConfig) -> int:
    cfg.require("source", dirs=("source",))
    parsed = parse_corpus(cfg.source)
    g, diags = build_model(parsed)
    diags = parsed.diagnostics + diags + validate_model(g)
    write_bytes_atomic(cfg.model, serialize_model(g))
    print(f"model written to {cfg.model}")
    print(inventory(g))
    report_diagnostics(diags)
    return gate(diags, Thresholds(cfg.max_warnings))


def cmd_enrich(cfg: RunConfig, out: Path) -> int:
    cfg.require("model")
    g = read_model(cfg.model)
    invariant = validate_model(g)
    if gate(invariant) == 2:
        report_diagnostics(invariant)
        return 2
    _, diags = enrich(g)
    diags += validate_model(g)
    write_bytes_atomic(out, serialize_model(g))
    print(f"enriched model written to {out}")
    report_diagnostics(diags)
    return gate(diags, Thresholds(cfg.max_warnings))


def cmd_synth(cfg: RunConfig) -> int:
    cfg.require("model", "rules", "profile", dirs=("rules",))
    g = read_model(cfg.model)
    invariant = validate_model(g)
    if gate(invariant) == 2:
        report_diagnostics(invariant)
        return 2
    ruleset = load_rules(cfg.rules)
    profile = load_profile(cfg.profile)
    started = time.perf_counter()
    result = synthesize(g, ruleset, profile, cfg.outdir, incremental=cfg.incremental)
    log.info("synthesis took %.2fs", time.perf_counter() - started)
    cov = coverage_report(g, read_run(cfg.outdir))
    print(result.write.summary())
    print(f"automated: {cov.percent_automated:.2f}%")
    diags = invariant + result.diagnostics
    report_diagnostics(diags)
    return gate(diags, Thresholds(cfg.max_warnings))


def cmd_report(cfg: RunConfig) -> int:
    cfg.require("model", "outdir", dirs=("outdir",))
    g = read_model(cfg.model)
    run = read_run(cfg.outdir)
    cov = coverage_report(g, run)
    write_bytes_atomic(meta_path(cfg.outdir, "report.json"), canonical_json(cov.to_dict()))
    print(cov.summary())
    diags = [Diagnostic.from_dict(d) for d in run.get("diagnostics", [])]
    diags += [Diagnostic.from_dict(d) for r in run["artifacts"] for d in r["diagnostics"]]
    return gate(diags, Thresholds(cfg.max_warnings))


def cmd_verify(cfg: RunConfig) -> int:
    cfg.require("model", "outdir", dirs=("outdir",))
    g = read_model(cfg.model)
    diags = validate_model(g) + verify_trace_completeness(g, read_trace(cfg.outdir), cfg.outdir)
    report_diagnostics(diags)
    status = gate(diags, Thresholds(cfg.max_warnings))
    print("verify: " + ("clean" if status == 0 else f"failed (status {status})"))
    return status


def cmd_gen_corpus(spec: CorpusSpec, outdir: Path) -> int:
    m = gen_corpus(spec, outdir)
    print(f"corpus written to {outdir}: {m.pages} pages, {m.user_controls} user controls, "
          f"{m.resource_strings} resource strings, {m.uses} component uses ({m.bespoke_uses} bespoke)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="migrate", description=__doc__)
    p.add_argument("--max-warnings", type=int, default=None, help="fail (status 1) above this many warnings")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="parse a legacy source tree into model.json")
    a.add_argument("source")
    a.add_argument("-o", "--output", default="model.json")

    e = sub.add_parser("enrich", help="run the enrichment passes over a model")
    e.add_argument("model")
    e.add_argument("-o", "--output", default="enriched.json")

    s = sub.add_parser("synth", help="plan and generate target artifacts")
    s.add_argument("model")
    s.add_argument("--rules", default=str(default_rules_dir()))
    s.add_argument("--profile", default=str(default_profile_path()))
    s.add_argument("-o", "--output", default="out")
    s.add_argument("--incremental", action="store_true")

    for name, help_ in (("report", "coverage and fit-gap report for a synth run"),
                        ("verify", "trace completeness and model invariants")):
        r = sub.add_parser(name, help=help_)
        r.add_argument("model")
        r.add_argument("outdir")

    g = sub.add_parser("gen-corpus", help="write a deterministic synthetic corpus")
    g.add_argument("--pages", type=int, default=1500)
    g.add_argument("--controls", type=int, default=500, help="user controls")
    g.add_argument("--resources", type=int, default=6000)
    g.add_argument("--bespoke-ratio", type=float, default=0.1)
    g.add_argument("--locales", default="de", help="comma-separated extra locales")
    g.add_argument("--dynamic-ratio", type=float, default=0.02)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = os.environ.get("MIGRATE_LOG", "warn").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    try:
        cfg_kw = {"log_level": level if level in LOG_LEVELS else "warn", "max_warnings": args.max_warnings}
        if args.command == "analyze":
            return cmd_analyze(RunConfig(source=args.source, model=args.output, **cfg_kw))
        if args.command == "enrich":
            return cmd_enrich(RunConfig(model=args.model, **cfg_kw), Path(args.output))
        if args.command == "synth":
            return cmd_synth(RunConfig(model=args.model, rules=args.rules, profile=args.profile,
                                       outdir=args.output, incremental=args.incremental, **cfg_kw))
        if args.command == "report":
            return cmd_report(RunConfig(model=args.model, outdir=args.outdir, **cfg_kw))
        if args.command == "verify":
            return cmd_verify(RunConfig(model=args.model, outdir=args.outdir, **cfg_kw))
        locales = tuple(x.strip() for x in args.locales.split(",") if x.strip())
        spec = CorpusSpec(args.pages, args.controls, args.resources, args.bespoke_ratio, locales,
                          args.seed, args.dynamic_ratio)
        cfg = RunConfig(outdir=args.output, seed=args.seed, **cfg_kw)
        return cmd_gen_corpus(spec, cfg.outdir)
    except MigrationError as exc:
        log.error("%s", exc)
        print(f"fatal: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
