"""Command-line entry points.

    echomap play      --audio-dir DATA --models mel-small,mel-large [...]
    echomap embed     ... (embedding stage only)
    echomap evaluate  ... (evaluation tasks over persisted artifacts)
    echomap benchmark ... (scores prediction tables, prints AP table)
    echomap serve     --output-root OUT [--dataset NAME] [--audio-dir DATA]
    echomap synthgen  --out DIR [--classes 3 --files 12 --duration 60 --seed 0]

Exit codes: 0 success, 1 task failures occurred, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, EchomapError
from .pipeline import run_pipeline
from .service import ApiSession, serve
from .synth import synthgen

log = logging.getLogger("echomap")

EXIT_OK = 0
EXIT_TASK_FAILURES = 1
EXIT_CONFIG_ERROR = 2


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config file (flat schema)")
    parser.add_argument("--audio-dir", help="root of the audio folder tree")
    parser.add_argument("--models", help="comma-separated model names")
    parser.add_argument("--tasks", help="comma-separated evaluation tasks")
    parser.add_argument("--dashboard", help="true/false: open the dashboard service")
    parser.add_argument("--device", help="cpu or gpu (recorded; cpu path runs)")
    parser.add_argument("--workers", help="worker pool size")
    parser.add_argument("--output-root", help="artifact root directory")
    parser.add_argument("--seed", help="random seed")
    parser.add_argument("--annotations", help="ground-truth CSV path")
    parser.add_argument("--reducer", help="pca or tsne")
    parser.add_argument("--threshold", help="detection threshold in (0,1)")


def _overrides(args: argparse.Namespace) -> dict:
    mapping = {
        "audio_dir": args.audio_dir,
        "selected_models": args.models,
        "evaluation_tasks": args.tasks,
        "dashboard": args.dashboard,
        "device": args.device,
        "worker_count": args.workers,
        "output_root": args.output_root,
        "random_seed": args.seed,
        "annotations_path": args.annotations,
        "reducer": args.reducer,
        "detection_threshold": args.threshold,
    }
    return {k: v for k, v in mapping.items() if v is not None}


def _run(args: argparse.Namespace, *, embed: bool, evaluate_stage: bool,
         forced_tasks: str | None = None) -> int:
    overrides = _overrides(args)
    if forced_tasks is not None:
        overrides["evaluation_tasks"] = forced_tasks
    config, settings = load_config(args.config, overrides)
    result = run_pipeline(config, settings, embed=embed,
                          evaluate_stage=evaluate_stage)
    for outcome in result.failed:
        log.error("failed: %s (%s)", outcome.name, outcome.error)
    return EXIT_TASK_FAILURES if result.failed else EXIT_OK


def _cmd_play(args: argparse.Namespace) -> int:
    overrides = _overrides(args)
    config, settings = load_config(args.config, overrides)
    result = run_pipeline(config, settings)
    for outcome in result.failed:
        log.error("failed: %s (%s)", outcome.name, outcome.error)
    code = EXIT_TASK_FAILURES if result.failed else EXIT_OK
    if config.dashboard:
        session = ApiSession(settings.output_root, result.index.dataset_name,
                             audio_root=config.audio_dir)
        url = f"http://{args.host}:{args.port}"
        print(f"dashboard service at {url} (endpoints: /models, /embeddings, "
              f"/metrics, /heatmap, /spectrogram, /audio)")
        serve(session, host=args.host, port=args.port,
              static_dir=Path(args.static) if args.static else None)
    return code


def _cmd_benchmark(args: argparse.Namespace) -> int:
    code = _run(args, embed=False, evaluate_stage=True,
                forced_tasks="benchmarking")
    config, settings = load_config(args.config, _overrides(args))
    dataset = Path(config.audio_dir).resolve().name
    for model in config.selected_models:
        path = (Path(settings.output_root) / dataset / "evaluations" / model
                / "benchmark.json")
        if not path.exists():
            continue
        report = json.loads(path.read_text("utf-8"))
        print(f"\nbenchmark {model}")
        width = max((len(c) for c in report["per_class_ap"]), default=5)
        for name in sorted(report["per_class_ap"]):
            print(f"  {name:<{width}}  AP {report['per_class_ap'][name]:.4f}")
        print(f"  {'mAP':<{width}}  {report['map']:.4f}")
    return code


def _cmd_serve(args: argparse.Namespace) -> int:
    output_root = Path(args.output_root)
    dataset = args.dataset
    if dataset is None:
        candidates = [p.name for p in output_root.iterdir() if p.is_dir()] \
            if output_root.is_dir() else []
        if len(candidates) != 1:
            log.error("--dataset is required (found %s under %s)",
                      candidates or "nothing", output_root)
            return EXIT_CONFIG_ERROR
        dataset = candidates[0]
    session = ApiSession(output_root, dataset, audio_root=args.audio_dir)
    print(f"serving {output_root / dataset} at http://{args.host}:{args.port}")
    serve(session, host=args.host, port=args.port,
          static_dir=Path(args.static) if args.static else None)
    return EXIT_OK


def _cmd_synthgen(args: argparse.Namespace) -> int:
    dataset = synthgen(args.out, n_classes=args.classes, n_files=args.files,
                       duration_s=args.duration, seed=args.seed)
    print(f"wrote {len(dataset.files)} files, {dataset.n_annotations} "
          f"annotations -> {dataset.audio_dir}")
    print(f"annotations: {dataset.annotations_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echomap",
        description="Embedding pipelines and evaluation for audio archives")
    sub = parser.add_subparsers(dest="command", required=True)

    play = sub.add_parser("play", help="full pipeline: embed, classify, "
                                       "reduce, evaluate, serve")
    _add_run_flags(play)
    play.add_argument("--host", default="127.0.0.1")
    play.add_argument("--port", type=int, default=8765)
    play.add_argument("--static", help="built dashboard directory to mount")
    play.set_defaults(func=_cmd_play)

    embed = sub.add_parser("embed", help="embedding stage only")
    _add_run_flags(embed)
    embed.set_defaults(func=lambda a: _run(a, embed=True, evaluate_stage=False))

    evaluate = sub.add_parser("evaluate",
                              help="evaluation tasks over persisted artifacts")
    _add_run_flags(evaluate)
    evaluate.set_defaults(func=lambda a: _run(a, embed=False, evaluate_stage=True))

    benchmark = sub.add_parser("benchmark",
                               help="score prediction tables against annotations")
    _add_run_flags(benchmark)
    benchmark.set_defaults(func=_cmd_benchmark)

    serve_p = sub.add_parser("serve", help="serve a completed artifact root")
    serve_p.add_argument("--output-root", required=True)
    serve_p.add_argument("--dataset")
    serve_p.add_argument("--audio-dir")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8765)
    serve_p.add_argument("--static", help="built dashboard directory to mount")
    serve_p.set_defaults(func=_cmd_serve)

    synth = sub.add_parser("synthgen", help="generate a labeled synthetic dataset")
    synth.add_argument("--out", required=True)
    synth.add_argument("--classes", type=int, default=3)
    synth.add_argument("--files", type=int, default=12)
    synth.add_argument("--duration", type=float, default=60.0)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=_cmd_synthgen)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG_ERROR
    except EchomapError as exc:
        log.error("%s", exc)
        return EXIT_TASK_FAILURES


if __name__ == "__main__":
    sys.exit(main())
