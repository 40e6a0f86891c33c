"""Command-line entry points.

Subcommands map onto the library one-to-one: prepare (synthetic fixtures),
train, eval, index, serve, query, bench. Operational failures exit 1,
usage errors exit 2.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import bench, retrieval, training
from .errors import QseekError
from .head import checkpoint_fingerprint, load_checkpoint, save_checkpoint
from .indexing import build_index, load_index, manifest_sha256, query as run_query
from .service import load_service_state, serve_forever
from .synthetic import SyntheticSpec, generate_corpus, load_fixture_bundle, write_fixture_bundle

VARIANTS = ("indent", "indent-text", "no-train")


def _bundle(args):
    return load_fixture_bundle(args.data)


def _feature_provider(bundle, variant: str, transcripts: str):
    if variant == "indent":
        return bundle.speech_provider()
    if variant == "indent-text":
        return retrieval.TextFeatureProvider(
            bundle.transcript_provider(transcripts), bundle.sentence_provider()
        )
    raise QseekError(f"variant {variant!r} has no trainable feature provider")


def cmd_prepare(args) -> int:
    spec = SyntheticSpec(seed=args.seed)
    if args.config:
        overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
        spec = replace(spec, **overrides)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_fixture_bundle(generate_corpus(spec), out)
    print(f"fixture bundle written to {out}")
    return 0


def cmd_train(args) -> int:
    bundle = _bundle(args)
    cfg = training.load_train_config(args.config) if args.config else training.TrainConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    provider = _feature_provider(bundle, args.variant, args.transcripts)
    result = training.train(
        cfg,
        bundle.split_records("train"),
        provider,
        bundle.question_embeddings,
        dev_records=bundle.split_records("dev"),
        dev_provider=provider,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.params, result.steps, out / "last.ckpt")
    save_checkpoint(result.best_params, result.steps, out / "best.ckpt")
    training.write_train_log(result.log, out / "trainlog.jsonl")
    final = result.log[-1] if result.log else None
    if final is not None:
        print(
            f"trained {cfg.epochs} epochs, final loss {final.mean_loss:.4f}"
            + (f", dev R-avg {final.dev_ravg:.3f}" if final.dev_ravg is not None else "")
        )
    print(f"checkpoints and log in {out}")
    return 0


def cmd_eval(args) -> int:
    bundle = _bundle(args)
    records = bundle.split_records(args.split)
    if args.variant == "no-train":
        report = retrieval.evaluate_no_train(
            records,
            bundle.transcript_provider(args.transcripts),
            bundle.sentence_provider(),
            bundle.question_texts(),
            args.w,
        )
    else:
        if not args.checkpoint:
            raise QseekError(f"--checkpoint is required for variant {args.variant}")
        params, _ = load_checkpoint(args.checkpoint)
        provider = _feature_provider(bundle, args.variant, args.transcripts)
        report = retrieval.evaluate_records(
            records, params, provider, bundle.question_embeddings, args.w
        )
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"report written to {args.out}")
    else:
        print(text)
    return 0


def cmd_index(args) -> int:
    bundle = _bundle(args)
    params, _ = load_checkpoint(args.checkpoint)
    fingerprint = checkpoint_fingerprint(args.checkpoint)
    provider = _feature_provider(bundle, args.variant, args.transcripts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = bundle.records if args.split == "all" else bundle.split_records(args.split)
    for record in records:
        manifest = bundle.root / "interviews" / f"{record.interview_id}.json"
        build_index(
            record,
            params,
            provider,
            args.w,
            out / f"{record.interview_id}.idx",
            checkpoint_fp=fingerprint,
            manifest_fp=manifest_sha256(manifest),
        )
    print(f"built {len(records)} indices in {out}")
    return 0


def cmd_serve(args) -> int:
    bundle = _bundle(args)
    state = load_service_state(
        indices_dir=args.indices,
        questions_cache=bundle.question_embeddings,
        sentence_provider=bundle.sentence_provider(),
        questionnaire_path=bundle.root / "questionnaire.jsonl",
        feedback_path=args.feedback,
        static_dir=args.static,
    )
    serve_forever(state, args.host, args.port)
    return 0


def cmd_query(args) -> int:
    index = load_index(Path(args.indices) / f"{args.interview}.idx")
    bundle = _bundle(args)
    if args.question_id:
        emb = bundle.question_embeddings.get(args.question_id)
        if emb is None:
            raise QseekError(f"unknown question id {args.question_id!r}")
    elif args.text:
        emb = bundle.sentence_provider().embed(args.text)
    else:
        raise QseekError("provide --text or --question-id")
    outcome = run_query(index, emb, args.k)
    for row in outcome.result.rows:
        print(
            f"#{row.segment:<3d} score {row.score:9.4f}  "
            f"[{row.start_s:8.2f}s – {row.end_s:8.2f}s]  best chunk {row.best_chunk}"
        )
    if outcome.clamped:
        print(f"(k clamped to {len(outcome.result.rows)} windows)")
    return 0


def cmd_bench(args) -> int:
    results, passed = bench.run_acceptance(args.workdir, only=args.only or None)
    if args.out:
        Path(args.out).write_text(
            json.dumps(bench.report_to_dict(results, passed), indent=2) + "\n", encoding="utf-8"
        )
        print(f"report written to {args.out}")
    return 0 if passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qseek",
        description="Locate questionnaire questions inside long audio interviews.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="generate the synthetic fixture bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON file with generator overrides")
    p.set_defaults(fn=cmd_prepare)

    p = sub.add_parser("train", help="train the alignment head")
    p.add_argument("--data", required=True, help="fixture bundle directory")
    p.add_argument("--out", required=True, help="output directory for checkpoints and log")
    p.add_argument("--config", help="train config (JSON or key=value)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--variant", choices=("indent", "indent-text"), default="indent")
    p.add_argument("--transcripts", choices=("para", "decor"), default="para")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a variant and emit the metrics report")
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("dev", "test"), default="test")
    p.add_argument("--variant", choices=VARIANTS, default="indent")
    p.add_argument("--checkpoint")
    p.add_argument("--transcripts", choices=("para", "decor"), default="para")
    p.add_argument("--w", type=int, default=retrieval.DEFAULT_WINDOW)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("index", help="build retrieval indices")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=("train", "dev", "test", "all"), default="test")
    p.add_argument("--variant", choices=("indent", "indent-text"), default="indent")
    p.add_argument("--transcripts", choices=("para", "decor"), default="para")
    p.add_argument("--w", type=int, default=retrieval.DEFAULT_WINDOW)
    p.set_defaults(fn=cmd_index)

    p = sub.add_parser("serve", help="serve the query API (and optional review console)")
    p.add_argument("--data", required=True)
    p.add_argument("--indices", required=True)
    p.add_argument("--feedback", default="feedback.jsonl")
    p.add_argument("--static", help="directory with the built review console")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8750)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("query", help="query one interview index")
    p.add_argument("--data", required=True)
    p.add_argument("--indices", required=True)
    p.add_argument("--interview", required=True)
    p.add_argument("--text")
    p.add_argument("--question-id")
    p.add_argument("-k", type=int, default=5)
    p.set_defaults(fn=cmd_query)

    p = sub.add_parser("bench", help="run the acceptance suite")
    p.add_argument("--workdir", default=".qseek-bench")
    p.add_argument("--out", help="write the machine-readable report here")
    p.add_argument("--only", action="append", choices=bench.CRITERIA, help="run a subset")
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except QseekError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
