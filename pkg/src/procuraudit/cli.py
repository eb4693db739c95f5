"""``procuraudit`` command line: clean, score, report and synth subcommands.

Exit codes: 0 success, 2 input or schema problem, 3 feature/model stage
failure, 4 explanation stage failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import pipeline, synth
from .errors import (
    AlignmentError,
    DegenerateAfterExclusion,
    EmptyVocabulary,
    InsufficientData,
    ParseError,
    SchemaError,
    SingleClassError,
    SingularDesign,
)

logger = logging.getLogger("procuraudit")

EXIT_INPUT = 2
EXIT_FEATURES = 3
EXIT_EXPLAIN = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="procuraudit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="pipeline configuration (JSON)")
    common.add_argument("--input", type=Path, help="input CSV")
    common.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, help="override the random seed")
    common.add_argument("--top-k", type=int, help="number of anomalies to report")
    common.add_argument("--no-text", action="store_true", help="leave out bag-of-words features")
    common.add_argument("--workers", type=int, help="threads used to build the forest")
    common.add_argument("-v", "--verbose", action="store_true")

    sub.add_parser("clean", parents=[common], help="parse and deduplicate a contract CSV")
    sub.add_parser("score", parents=[common], help="featurize and score cleaned contracts")
    p = sub.add_parser("report", parents=[common], help="rank anomalies and fit the explainer")
    p.add_argument("--labels", type=Path, help="external label CSV (row_key,label)")
    s = sub.add_parser("synth", parents=[common], help="generate a synthetic contract extract")
    s.add_argument("--n-contracts", type=int, default=1000)
    s.add_argument("--anomaly-rate", type=float, default=0.01)
    s.add_argument("--duplicate-rate", type=float, default=0.0)
    s.add_argument("--date-inversion-rate", type=float, default=0.0)
    return parser


def load_config(args: argparse.Namespace) -> tuple[pipeline.PipelineConfig, dict]:
    raw: dict = {}
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    cfg = pipeline.PipelineConfig.from_dict(raw)
    if args.seed is not None:
        cfg.forest = dataclasses.replace(cfg.forest, seed=args.seed)
    if args.top_k is not None:
        cfg.top_k = args.top_k
    if args.no_text:
        cfg.use_text = False
    if args.workers is not None:
        cfg.workers = args.workers
    if getattr(args, "labels", None) is not None:
        cfg.explain = pipeline.ExplainConfig(
            cfg.explain.max_depth, cfg.explain.min_samples_split, "external_file", str(args.labels)
        )
    cfg.__post_init__()
    return cfg, raw


def _require_input(args) -> Path:
    if args.input is None:
        raise FileNotFoundError(f"{args.command} needs --input")
    return args.input


def cmd_clean(args, cfg) -> int:
    result = pipeline.run_clean(_require_input(args), args.out_dir, cfg)
    sys.stdout.write(result.summary())
    return 0


def cmd_score(args, cfg) -> int:
    source = _require_input(args)
    try:
        result = pipeline.run_score(source, args.out_dir, cfg)
    except (EmptyVocabulary, AlignmentError, InsufficientData, SingularDesign, DegenerateAfterExclusion) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FEATURES
    m = result.featurized.matrix
    print(f"scored {m.shape[0]} contracts on {m.shape[1]} features")
    return 0


def cmd_report(args, cfg) -> int:
    scores = args.input or args.out_dir / "scores.csv"
    try:
        rep = pipeline.run_report(scores, args.out_dir, cfg)
    except SingleClassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXPLAIN
    print(f"reported {len(rep.rows)} contracts")
    return 0


def cmd_synth(args, cfg, raw) -> int:
    opts = dict(
        n_contracts=args.n_contracts,
        anomaly_rate=args.anomaly_rate,
        duplicate_rate=args.duplicate_rate,
        date_inversion_rate=args.date_inversion_rate,
        seed=args.seed if args.seed is not None else 0,
    )
    opts.update(raw.get("synth", {}))
    if args.seed is not None:
        opts["seed"] = args.seed
    csv_text, truth = synth.generate(synth.SynthConfig(**opts))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "contracts.csv").write_text(csv_text, encoding="utf-8")
    (args.out_dir / "ground_truth.jsonl").write_text(synth.truth_jsonl(truth), encoding="utf-8")
    print(f"wrote {len(truth)} rows to {args.out_dir / 'contracts.csv'}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg, raw = load_config(args)
        if args.command == "clean":
            return cmd_clean(args, cfg)
        if args.command == "score":
            return cmd_score(args, cfg)
        if args.command == "report":
            return cmd_report(args, cfg)
        return cmd_synth(args, cfg, raw)
    except (SchemaError, ParseError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
