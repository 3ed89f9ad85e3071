"""Command line entry points.

Subcommands:
  penalty          line protocol for batch JSON-validity penalties (stdin/stdout)
  corpus filter    apply exclusion rules and the per-article cap
  corpus split     seeded stratified train/val/test manifest
  corpus stats     per domain/repository count table
  pipeline run     execute pipeline stages from a JSON config
  pipeline report  rebuild and print the report for a run directory
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus as corpus_mod
from .penalty import ValidityMode, penalty_service
from .pipeline import RunConfig, build_report, render_report_text, run_pipeline, run_stage


def _cmd_penalty(args: argparse.Namespace) -> int:
    mode = ValidityMode(args.mode)
    penalty_service(sys.stdin, sys.stdout, default_mode=mode)
    return 0


def _cmd_corpus_filter(args: argparse.Namespace) -> int:
    records = corpus_mod.load_corpus(args.input)
    rules = corpus_mod.FilterConfig(
        article_cap=args.cap, symbol_ratio_threshold=args.symbol_threshold
    )
    retained, report = corpus_mod.filter_sentences(records, rules)
    corpus_mod.save_corpus(retained, args.output)
    if args.report:
        Path(args.report).write_text(
            json.dumps(
                {
                    "retained_count": report.retained_count,
                    "excluded": [{"id": rid, "reason": reason} for rid, reason in report.excluded],
                },
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
    print(f"retained {report.retained_count} of {len(records)} sentences")
    return 0


def _cmd_corpus_split(args: argparse.Namespace) -> int:
    records = corpus_mod.load_corpus(args.input)
    ratios = corpus_mod.DEFAULT_RATIOS
    if args.ratios:
        parts = [float(x) for x in args.ratios.split(",")]
        if len(parts) != 3:
            raise SystemExit("--ratios needs three comma-separated numbers")
        ratios = (parts[0], parts[1], parts[2])
    manifest = corpus_mod.split_corpus(
        records, seed=args.seed, ratios=ratios, stratify=not args.no_stratify
    )
    corpus_mod.save_manifest(manifest, args.output)
    train, val, test = manifest.counts
    print(f"split {len(records)} records into train={train} val={val} test={test}")
    return 0


def _cmd_corpus_stats(args: argparse.Namespace) -> int:
    records = corpus_mod.load_corpus(args.input)
    print(corpus_mod.format_stats_table(records))
    return 0


def _cmd_pipeline_run(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    stages = tuple(args.stages.split(",")) if args.stages else None
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_config.json").write_text(
        json.dumps(config.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    run_pipeline(config, resume=args.resume, stages=stages)
    for stage in stages or config.stages:
        print(f"stage {stage}: done")
    return 0


def _config_for_run_dir(run_dir: str) -> RunConfig:
    saved = Path(run_dir) / "run_config.json"
    if saved.exists():
        raw = json.loads(saved.read_text(encoding="utf-8"))
        raw["out_dir"] = run_dir
        return RunConfig.from_dict(raw)
    return RunConfig(corpus_path="", out_dir=run_dir)


def _cmd_pipeline_report(args: argparse.Namespace) -> int:
    config = _config_for_run_dir(args.run)
    run_stage("report", config)
    print(render_report_text(build_report(config)), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="structsent")
    sub = parser.add_subparsers(dest="command", required=True)

    p_penalty = sub.add_parser("penalty", help="batch JSON-validity penalty line protocol")
    p_penalty.add_argument("--mode", choices=["strict", "extract"], default="strict")
    p_penalty.add_argument(
        "--stdin", action="store_true", help="read request lines from standard input"
    )
    p_penalty.set_defaults(func=_cmd_penalty)

    p_corpus = sub.add_parser("corpus", help="corpus filtering, splitting, statistics")
    corpus_sub = p_corpus.add_subparsers(dest="corpus_command", required=True)

    p_filter = corpus_sub.add_parser("filter", help="apply exclusion rules")
    p_filter.add_argument("--input", required=True)
    p_filter.add_argument("--output", required=True)
    p_filter.add_argument("--report", help="optional JSON exclusion report path")
    p_filter.add_argument("--cap", type=int, default=6, help="max sentences per article")
    p_filter.add_argument("--symbol-threshold", type=float, default=0.15)
    p_filter.set_defaults(func=_cmd_corpus_filter)

    p_split = corpus_sub.add_parser("split", help="seeded stratified split")
    p_split.add_argument("--input", required=True)
    p_split.add_argument("--output", required=True)
    p_split.add_argument("--seed", type=int, default=corpus_mod.DEFAULT_SEED)
    p_split.add_argument("--ratios", help="train,val,test fractions (default: corpus-scale)")
    p_split.add_argument("--no-stratify", action="store_true")
    p_split.set_defaults(func=_cmd_corpus_split)

    p_stats = corpus_sub.add_parser("stats", help="count table by domain and repository")
    p_stats.add_argument("--input", required=True)
    p_stats.set_defaults(func=_cmd_corpus_stats)

    p_pipeline = sub.add_parser("pipeline", help="run stages or render reports")
    pipeline_sub = p_pipeline.add_subparsers(dest="pipeline_command", required=True)

    p_run = pipeline_sub.add_parser("run", help="run pipeline stages from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--stages", help="comma-separated subset of stages")
    p_run.add_argument("--resume", action="store_true")
    p_run.set_defaults(func=_cmd_pipeline_run)

    p_report = pipeline_sub.add_parser("report", help="rebuild the report for a run directory")
    p_report.add_argument("--run", required=True)
    p_report.set_defaults(func=_cmd_pipeline_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
