"""Command-line entry point: synth, extract, evaluate, train, predict.

Every command is driven by one JSON config (see README) plus a few
overriding flags, writes its artifacts under --output-dir, and is
byte-reproducible for a fixed config and inputs.

Exit codes: 0 success, 2 config error, 3 data/schema error, 4 internal
invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from .augment import augment_dataset
from .boosting import BoostedEnsemble, predict_proba, soft_vote, train_gbdt
from .config import RunConfig, load_run_config
from .core import (
    ConfigError,
    DataError,
    LabelSet,
    PipelineError,
    SchemaError,
    ValidationError,
)
from .evaluation import run_cv
from .features import extract_matrix, write_catalog_json, write_matrix_csv
from .ingest import (
    default_column_map,
    fuse_sides,
    parse_wide_csv,
    window_streams,
    write_windows_csv,
)
from .normalize import QuantileMap, fit_quantile, transform
from .report import write_eval_outputs
from .synth import synth_generate


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="limbwise",
        description="Exercise recognition pipeline for wrist/ankle accelerometers.",
    )
    parser.add_argument("--version", action="version", version=f"limbwise {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, inputs: bool = True) -> None:
        p.add_argument("--config", type=Path, default=None, help="JSON run config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--limb", choices=["arm", "leg"], default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--output-dir", default=None)
        if inputs:
            p.add_argument("inputs", nargs="*", help="input CSV files")

    p = sub.add_parser("synth", help="generate synthetic wide-format CSVs")
    common(p, inputs=False)
    p.add_argument("--n-subjects", type=int, default=None)

    p = sub.add_parser("extract", help="ingest, fuse, augment, and write the feature matrix")
    common(p)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--dump-windows", action="store_true", help="also dump the windowed dataset")

    p = sub.add_parser("evaluate", help="grouped cross-validation with full reporting")
    common(p)
    p.add_argument("--no-augment", action="store_true")

    p = sub.add_parser("train", help="train on all subjects and serialize the model bundle")
    common(p)
    p.add_argument("--no-augment", action="store_true")

    p = sub.add_parser("predict", help="per-window predictions from a trained bundle")
    common(p)
    p.add_argument("--model", type=Path, required=True, help="model bundle JSON")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "seed": args.seed,
        "limb": getattr(args, "limb", None),
        "threads": args.threads,
        "output_dir": getattr(args, "output_dir", None),
        "n_subjects": getattr(args, "n_subjects", None),
    }
    if getattr(args, "inputs", None):
        overrides["inputs"] = tuple(args.inputs)
    if getattr(args, "no_augment", False):
        overrides["augmentation"] = ()
    return load_run_config(args.config, overrides)


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _ingest(cfg: RunConfig):
    streams = []
    for path in cfg.require_inputs():
        streams.extend(parse_wide_csv(path, cfg.column_map, cfg.rate))
    label_set = LabelSet(cfg.labels) if cfg.labels else None
    return window_streams(
        streams, label_set, cfg.rate, cfg.window_seconds, cfg.overlap
    )


def cmd_synth(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    streams = synth_generate(
        cfg.synth.n_subjects,
        cfg.synth.classes,
        cfg.rate,
        cfg.synth.seconds_per_class,
        cfg.seed,
    )
    cmap = default_column_map()
    by_subject: dict[str, list] = {}
    for s in streams:
        by_subject.setdefault(s.subject, []).append(s)

    class_counts: dict[str, int] = {}
    for subject, subject_streams in by_subject.items():
        keyed = {f"{s.side.value}_{s.limb.value}": s for s in subject_streams}
        ref = subject_streams[0]
        header = ["subject", "time"]
        columns = [np.full(len(ref), subject, dtype=object), ref.times]
        for key, cols in cmap["positions"].items():
            s = keyed[key]
            header.extend(cols)
            columns.extend([s.xyz[:, 0], s.xyz[:, 1], s.xyz[:, 2]])
        header.append("label")
        columns.append(np.array(ref.labels, dtype=object))
        for label in ref.labels:
            class_counts[label] = class_counts.get(label, 0) + 1

        path = out / f"synth_{subject}.csv"
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write("# schema_version=1\n")
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(len(ref)):
                row = []
                for col in columns:
                    v = col[i]
                    row.append(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v))
                writer.writerow(row)
        print(f"wrote {path}")

    for label in sorted(class_counts):
        print(f"  {label}: {class_counts[label]} samples/stream-set")
    return 0


def cmd_extract(cfg: RunConfig, dump_windows: bool = False) -> int:
    out = _outdir(cfg)
    dataset = _ingest(cfg)
    fused = fuse_sides(dataset, cfg.limb)
    augmented = augment_dataset(fused, cfg.augmentation)
    if dump_windows:
        write_windows_csv(augmented, out / f"windows_{cfg.limb.value}.csv")
    matrix = extract_matrix(augmented.windows, cfg.rate, workers=cfg.threads)
    matrix_path = out / f"features_{cfg.limb.value}.csv"
    write_matrix_csv(matrix, matrix_path)
    write_catalog_json(out / "feature_catalog.json")
    print(f"wrote {matrix_path}: {matrix.n_rows} rows x {len(matrix.names)} feature columns")
    if matrix.sanitized_count:
        print(f"  sanitized {matrix.sanitized_count} non-finite values to 0")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    dataset = _ingest(cfg)
    report = run_cv(dataset, cfg.limb, cfg.pipeline_config())
    paths = write_eval_outputs(report, out)
    print(
        f"{cfg.limb.value}: macro F1 {report.mean_f1:.4f} +/- {report.std_f1:.4f} "
        f"over {len(report.fold_scores)} folds"
    )
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    dataset = _ingest(cfg)
    fused = fuse_sides(dataset, cfg.limb)
    augmented = augment_dataset(fused, cfg.augmentation)
    matrix = extract_matrix(augmented.windows, cfg.rate, workers=cfg.threads)
    qmap = fit_quantile(matrix, cfg.n_quantiles)
    transformed = transform(qmap, matrix)
    labels = transformed.labels()
    model_w = train_gbdt(
        transformed, labels, cfg.weighted, label_set=dataset.label_set, threads=cfg.threads
    )
    model_u = train_gbdt(
        transformed, labels, cfg.unweighted, label_set=dataset.label_set, threads=cfg.threads
    )
    bundle = {
        "schema_version": 1,
        "kind": "model_bundle",
        "tool_version": __version__,
        "limb": cfg.limb.value,
        "labels": list(model_w.label_set.names),
        "quantile_map": qmap.to_json_dict(),
        "weighted": model_w.to_json_dict(),
        "unweighted": model_u.to_json_dict(),
    }
    path = out / f"model_{cfg.limb.value}.json"
    path.write_text(json.dumps(bundle, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {path} ({matrix.n_rows} training rows)")
    return 0


def _load_bundle(path: Path):
    if not path.exists():
        raise ConfigError(f"model file does not exist: {path}")
    payload = json.loads(path.read_text(encoding="utf-8"))
    if payload.get("kind") != "model_bundle" or payload.get("schema_version") != 1:
        raise SchemaError(f"{path}: not a schema_version=1 model_bundle")
    qmap = QuantileMap.from_json_dict(payload["quantile_map"])
    model_w = BoostedEnsemble.from_json_dict(payload["weighted"])
    model_u = BoostedEnsemble.from_json_dict(payload["unweighted"])
    from .core import Limb

    return Limb(payload["limb"]), qmap, model_w, model_u


def cmd_predict(cfg: RunConfig, model_path: Path) -> int:
    out = _outdir(cfg)
    limb, qmap, model_w, model_u = _load_bundle(model_path)
    dataset = _ingest(cfg)
    fused = fuse_sides(dataset, limb)
    if not fused.windows:
        raise ValidationError(f"no windows for limb {limb.value!r} in the inputs")
    matrix = extract_matrix(fused.windows, cfg.rate, workers=cfg.threads)
    transformed = transform(qmap, matrix)
    p_w = predict_proba(model_w, transformed)
    p_u = predict_proba(model_u, transformed)
    probs, picked = soft_vote(p_w, p_u)
    names = model_w.label_set.names

    path = out / f"predictions_{limb.value}.csv"
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("# schema_version=1\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["subject", "limb", "side", "label", "window_index", "predicted",
             *(f"prob_{n}" for n in names)]
        )
        for i, meta in enumerate(matrix.meta):
            writer.writerow(
                [meta.subject, meta.limb.value, meta.side.value, meta.label, i,
                 names[int(np.atleast_1d(picked)[i])],
                 *(repr(float(v)) for v in np.atleast_2d(probs)[i])]
            )
    print(f"wrote {path}: {matrix.n_rows} windows")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "extract":
            return cmd_extract(cfg, dump_windows=args.dump_windows)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "predict":
            return cmd_predict(cfg, args.model)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SchemaError, DataError, ValidationError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except AssertionError as exc:
        print(f"internal invariant failure: {exc}", file=sys.stderr)
        return 4


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
