"""Operator command line: data generation, training, calibration,
evaluation, population statistics and the API server."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .analytics import population_aggregate
from .data.preprocess import apply_preprocessor
from .data.schema import Cohort, save_cohort
from .data.splits import split_stratified_kfold
from .data.synthetic import SyntheticSpec, generate_synthetic_cohort
from .model.inference import TrainedModel
from .pipeline import (RunConfig, calibrate_checkpoint, evaluate_model,
                       load_labeled, run_cross_validation, write_manifest)

log = logging.getLogger(__name__)


def _cmd_gen_synth(args) -> int:
    spec = SyntheticSpec(n_patients=args.patients, n_dynamic=args.dynamic,
                         n_static=args.static, seed=args.seed)
    cohort = generate_synthetic_cohort(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_cohort(cohort, out / "visits.csv", out / "static.csv",
                out / "schema.json")
    write_manifest(out, "gen-synth", cohort.schema.hash(), args.seed)
    print(f"wrote {len(cohort.records)} patients to {out}")
    return 0


def _cmd_preprocess(args) -> int:
    config = RunConfig.from_json(args.config)
    labeled, removed = load_labeled(config)
    out = Path(config.out_dir) / "clean"
    out.mkdir(parents=True, exist_ok=True)
    records = [lr.record for lr in labeled.records]
    save_cohort(Cohort(labeled.schema, records),
                out / "visits.csv", out / "static.csv", out / "schema.json")
    (out / "pruned.json").write_text(
        json.dumps({"removed_features": removed}, indent=2) + "\n",
        encoding="utf-8")
    write_manifest(out, "preprocess", config.config_hash(), config.seed)
    print(f"cleaned cohort: {len(records)} patients, "
          f"{len(removed)} features pruned")
    return 0


def _parse_folds(spec: str | None, k: int) -> list[int] | None:
    if spec is None:
        return None
    folds = [int(tok) for tok in spec.split(",") if tok.strip()]
    for i in folds:
        if not (0 <= i < k):
            raise ValueError(f"fold {i} out of range for k={k}")
    return folds


def _cmd_train(args) -> int:
    config = RunConfig.from_json(args.config)
    summary = run_cross_validation(config, args.with_calibration,
                                   _parse_folds(args.folds, config.k_folds))
    print(f"AUROC {summary['auroc_mean']:.4f} ± {summary['auroc_sd']:.4f}  "
          f"AUPRC {summary['auprc_mean']:.4f} ± {summary['auprc_sd']:.4f}")
    return 0


def _fold_split(config: RunConfig, fold_idx: int):
    labeled, _ = load_labeled(config)
    folds = split_stratified_kfold(labeled, config.k_folds, config.seed)
    return folds[fold_idx]


def _cmd_calibrate(args) -> int:
    config = RunConfig.from_json(args.config)
    fold_dir = Path(config.out_dir) / f"fold-{args.fold}"
    _, val_c, _ = _fold_split(config, args.fold)
    model = TrainedModel.load(fold_dir / "model.ckpt")
    val_ready = apply_preprocessor(val_c, model.preprocessor)
    calibrated = calibrate_checkpoint(fold_dir / "model.ckpt", val_ready,
                                      config.threshold_beta)
    print(f"temperature {calibrated.calibration.temperature:.4f}  "
          f"threshold {calibrated.calibration.threshold:.4f}")
    return 0


def _cmd_evaluate(args) -> int:
    config = RunConfig.from_json(args.config)
    fold_dir = Path(config.out_dir) / f"fold-{args.fold}"
    if args.checkpoint:
        ckpt = Path(args.checkpoint)
    else:
        ckpt = fold_dir / "model_calibrated.ckpt"
        if not ckpt.exists():
            ckpt = fold_dir / "model.ckpt"
    model = TrainedModel.load(ckpt)
    train_c, val_c, test_c = _fold_split(config, args.fold)
    split = {"train": train_c, "val": val_c, "test": test_c}[args.split]
    ready = apply_preprocessor(split, model.preprocessor)
    metrics = evaluate_model(model, ready)
    metrics["fold"] = args.fold
    body = json.dumps(metrics, sort_keys=True, indent=2)
    (fold_dir / f"eval-{args.split}.json").write_text(body + "\n",
                                                      encoding="utf-8")
    print(body)
    return 0


def _load_serving_patients(args, model: TrainedModel):
    from .service.app import load_runtime
    return load_runtime(args.checkpoint, args.visits, args.static,
                        args.schema, task=args.task)


def _cmd_popstats(args) -> int:
    model = TrainedModel.load(args.checkpoint)
    runtime = _load_serving_patients(args, model)
    summary = population_aggregate(runtime.model,
                                   list(runtime.patients.values()),
                                   args.feature, n=args.n, seed=args.seed)
    csv_text = summary.to_csv()
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
        print(f"wrote {summary.sample_size}-patient summary to {args.out}")
    else:
        print(csv_text, end="")
    return 0


def _cmd_serve(args) -> int:
    from .service.app import load_runtime, serve
    runtime = load_runtime(args.checkpoint, args.visits, args.static,
                           args.schema, store_path=args.store, task=args.task,
                           cors_origins=tuple(args.cors or ()))
    serve(runtime, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aicare",
        description="Interpretable longitudinal EHR risk prediction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a seeded synthetic cohort")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--patients", type=int, default=500)
    p.add_argument("--dynamic", type=int, default=8)
    p.add_argument("--static", type=int, default=2)
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("preprocess",
                       help="aggregate, prune and label a cohort")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("train", help="cross-validated training")
    p.add_argument("--config", required=True)
    p.add_argument("--with-calibration", action="store_true")
    p.add_argument("--folds", help="comma-separated fold indices")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("calibrate",
                       help="fit temperature and threshold for one fold")
    p.add_argument("--config", required=True)
    p.add_argument("--fold", type=int, required=True)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("evaluate", help="metrics for one fold split")
    p.add_argument("--config", required=True)
    p.add_argument("--fold", type=int, required=True)
    p.add_argument("--split", choices=["train", "val", "test"],
                   default="test")
    p.add_argument("--checkpoint")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("popstats", help="population (value, importance, "
                       "risk) triples for one feature")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--visits", required=True)
    p.add_argument("--static", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--feature", required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--task", default="mortality")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_popstats)

    p = sub.add_parser("serve", help="run the REST API server")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--visits", required=True)
    p.add_argument("--static", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--store", default=":memory:")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--task", default="mortality")
    p.add_argument("--cors", nargs="*")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except Exception as e:  # any pipeline failure is exit code 1
        print(f"error: {e}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
