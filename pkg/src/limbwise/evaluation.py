"""Subject-grouped cross-validation, metrics, and the evaluation report.

Folds partition subjects, never windows, so no individual's motion leaks
between training and validation.  Augmented copies inherit their source
subject and are generated for training rows only; validation windows stay
original.  The quantile map is re-fit inside every fold on that fold's
training rows.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._version import __version__ as _tool_version
from .augment import normalize_policy, transform_window
from .boosting import (
    TrainConfig,
    UNWEIGHTED_CONFIG,
    WEIGHTED_CONFIG,
    predict_proba,
    soft_vote,
    train_gbdt,
)
from .core import LabelSet, Limb, Provenance, ValidationError
from .features import (
    FeatureMatrix,
    anova_by_family,
    anova_f_scores,
    extract_matrix,
)
from .ingest import WindowedDataset, fuse_sides
from .normalize import fit_quantile, transform


@dataclass(frozen=True)
class FoldPlan:
    """k validation/training subject splits; validation sets partition the subjects."""

    k: int
    folds: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for val, train in self.folds:
            overlap = set(val) & set(train)
            if overlap:
                raise ValidationError(f"subjects {sorted(overlap)} in both sides of a fold")
            if seen & set(val):
                raise ValidationError("validation groups must be disjoint")
            seen.update(val)

    def __iter__(self):
        return iter(self.folds)


def group_kfold(subjects: Sequence[str], k: int, seed: int = 0) -> FoldPlan:
    """Shuffle subjects by seed and deal them round-robin into k groups."""
    uniq = sorted(set(subjects))
    if len(uniq) < k:
        raise ValidationError(f"need at least {k} subjects, got {len(uniq)}")
    if k < 2:
        raise ValidationError("k must be at least 2")
    rng = np.random.default_rng(seed)
    order = [uniq[i] for i in rng.permutation(len(uniq))]
    groups = [tuple(order[i::k]) for i in range(k)]
    folds = []
    for i in range(k):
        val = groups[i]
        train = tuple(s for j, g in enumerate(groups) if j != i for s in g)
        folds.append((val, train))
    return FoldPlan(k, tuple(folds))


def confusion_matrix(
    truth: Sequence[str], pred: Sequence[str], label_set: LabelSet
) -> np.ndarray:
    """Count matrix with truth on rows and predictions on columns, in label order."""
    if len(truth) != len(pred):
        raise ValidationError("truth and prediction lengths differ")
    t = label_set.encode(truth)
    p = label_set.encode(pred)
    k = len(label_set)
    return np.bincount(t * k + p, minlength=k * k).reshape(k, k)


def macro_f1(
    truth: Sequence[str], pred: Sequence[str], label_set: LabelSet
) -> float:
    """Unweighted mean per-class F1 over classes present in truth or predictions.

    A class with no true or predicted instances at all is excluded; a
    class whose F1 denominator is zero contributes 0.
    """
    cm = confusion_matrix(truth, pred, label_set)
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    present = (cm.sum(axis=0) + cm.sum(axis=1)) > 0
    denom = 2 * tp + fp + fn
    with np.errstate(divide="ignore", invalid="ignore"):
        f1 = np.where(denom > 0, 2 * tp / denom, 0.0)
    return float(f1[present].mean())


@dataclass(frozen=True)
class PipelineConfig:
    """Everything run_cv needs besides the windowed data itself."""

    k_folds: int = 5
    seed: int = 7
    rate: float = 50.0
    augmentation: tuple[Provenance, ...] = (Provenance.INVERTED, Provenance.ROTATED)
    n_quantiles: int = 1000
    weighted: TrainConfig = WEIGHTED_CONFIG
    unweighted: TrainConfig = UNWEIGHTED_CONFIG
    threads: int = 1

    def snapshot(self) -> dict:
        return {
            "k_folds": self.k_folds,
            "seed": self.seed,
            "rate": self.rate,
            "augmentation": [p.value for p in normalize_policy(self.augmentation)],
            "n_quantiles": self.n_quantiles,
            "weighted": self.weighted.to_json_dict(),
            "unweighted": self.unweighted.to_json_dict(),
        }


@dataclass(frozen=True)
class EvalReport:
    """Per-fold and aggregate scores plus the feature-analysis summary."""

    limb: Limb
    label_names: tuple[str, ...]
    fold_scores: tuple[float, ...]
    mean_f1: float
    std_f1: float
    confusions: tuple[np.ndarray, ...]
    fold_val_subjects: tuple[tuple[str, ...], ...]
    anova_scores: dict[str, float]
    config_snapshot: dict = field(default_factory=dict)
    tool_version: str = _tool_version

    def aggregate_confusion(self) -> np.ndarray:
        return np.sum(self.confusions, axis=0)

    def anova_family_stats(self) -> dict[str, dict[str, float]]:
        """Box-plot statistics (min/q1/median/q3/max) of F scores per family."""
        names = list(self.anova_scores.keys())
        scores = np.array([self.anova_scores[n] for n in names])
        grouped = anova_by_family(scores, names)
        out: dict[str, dict[str, float]] = {}
        for fam, vals in grouped.items():
            finite = vals[np.isfinite(vals)]
            if finite.size == 0:
                finite = np.array([0.0])
            q1, med, q3 = np.percentile(finite, (25.0, 50.0, 75.0))
            out[fam] = {
                "min": float(finite.min()),
                "q1": float(q1),
                "median": float(med),
                "q3": float(q3),
                "max": float(finite.max()),
                "n_infinite": int(np.count_nonzero(~np.isfinite(vals))),
            }
        return out

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "eval_report",
            "tool_version": self.tool_version,
            "limb": self.limb.value,
            "labels": list(self.label_names),
            "fold_macro_f1": list(self.fold_scores),
            "mean_macro_f1": self.mean_f1,
            "std_macro_f1": self.std_f1,
            "fold_val_subjects": [list(s) for s in self.fold_val_subjects],
            "confusion_matrices": [c.tolist() for c in self.confusions],
            "anova_f_scores": {
                k: (v if math.isfinite(v) else "Infinity")
                for k, v in self.anova_scores.items()
            },
            "anova_family_stats": self.anova_family_stats(),
            "config": self.config_snapshot,
        }


# Payload shared with fold workers through fork (set right before the pool
# is created); avoids pickling the full feature matrices per job.
_SHARED: dict | None = None


def _fold_rows(payload: dict, fold_idx: int):
    """Training block (originals then augmented variants) and validation rows."""
    plan: FoldPlan = payload["plan"]
    val_subjects, train_subjects = plan.folds[fold_idx]
    train_set = sorted(set(train_subjects))
    val_set = sorted(set(val_subjects))
    assert not (set(train_set) & set(val_set))

    x_parts, y_parts, meta_parts = [], [], []
    for m in payload["matrices"]:
        mask = np.isin(m.subjects(), train_set)
        idx = np.flatnonzero(mask)
        x_parts.append(m.values[mask])
        labs = m.labels()
        y_parts.extend(labs[i] for i in idx)
        meta_parts.extend(m.meta[i] for i in idx)
    x_train = np.vstack(x_parts)
    assert not ({meta.subject for meta in meta_parts} & set(val_set))

    original: FeatureMatrix = payload["matrices"][0]
    val_mask = np.isin(original.subjects(), val_set)
    val_idx = np.flatnonzero(val_mask)
    labs = original.labels()
    y_val = [labs[i] for i in val_idx]
    train_m = FeatureMatrix(x_train, original.names, tuple(meta_parts))
    val_m = FeatureMatrix(
        original.values[val_mask], original.names, tuple(original.meta[i] for i in val_idx)
    )
    return train_m, y_parts, val_m, y_val


def _train_predict_job(args: tuple) -> tuple[np.ndarray, tuple[str, ...]]:
    """Train one booster configuration on one fold; return validation probabilities."""
    fold_idx, which, payload = args
    if payload is None:
        payload = _SHARED
    config: PipelineConfig = payload["config"]
    train_m, y_train, val_m, _ = _fold_rows(payload, fold_idx)
    qmap = fit_quantile(train_m, config.n_quantiles)
    train_t = transform(qmap, train_m)
    val_t = transform(qmap, val_m)
    booster = config.weighted if which == "weighted" else config.unweighted
    model = train_gbdt(
        train_t, y_train, booster,
        label_set=LabelSet(payload["label_names"]),
        threads=payload["train_threads"],
    )
    return predict_proba(model, val_t), model.label_set.names


def run_cv(d: WindowedDataset, limb: Limb, config: PipelineConfig) -> EvalReport:
    """Grouped k-fold evaluation of the full pipeline for one limb.

    Per fold: training windows are augmented per policy (validation
    windows stay original), features are quantile-normalized with a map
    fit on training rows only, both booster configurations are trained,
    and their soft vote is scored with macro F1.
    """
    global _SHARED
    fused = fuse_sides(d, limb)
    if not fused.windows:
        raise ValidationError(f"no windows for limb {limb.value!r}")
    subjects = fused.subjects()
    plan = group_kfold(subjects, config.k_folds, config.seed)

    variants = (Provenance.ORIGINAL, *normalize_policy(config.augmentation))
    matrices: list[FeatureMatrix] = []
    for variant in variants:
        windows = [transform_window(w, variant) for w in fused.windows]
        matrices.append(extract_matrix(windows, config.rate, workers=config.threads))
    original = matrices[0]

    anova = anova_f_scores(original.values, original.labels())
    anova_scores = {n: float(v) for n, v in zip(original.names, anova)}

    jobs = [
        (fold_idx, which, None)
        for fold_idx in range(config.k_folds)
        for which in ("weighted", "unweighted")
    ]
    parallel = config.threads > 1 and len(jobs) > 1
    payload = {
        "plan": plan,
        "matrices": matrices,
        "config": config,
        "label_names": d.label_set.names,
        "train_threads": 1 if parallel else config.threads,
    }
    if parallel:
        import multiprocessing

        _SHARED = payload
        try:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(
                max_workers=min(config.threads, len(jobs)), mp_context=ctx
            ) as pool:
                results = list(pool.map(_train_predict_job, jobs))
        finally:
            _SHARED = None
    else:
        results = [
            _train_predict_job((fold_idx, which, payload))
            for fold_idx, which, _ in jobs
        ]

    orig_subjects = original.subjects()
    orig_labels = original.labels()
    scores = []
    confusions = []
    for fold_idx in range(config.k_folds):
        p_w, names_w = results[2 * fold_idx]
        p_u, names_u = results[2 * fold_idx + 1]
        if names_w != names_u:
            raise ValidationError("the two boosters disagree on class ordering")
        _, picked = soft_vote(p_w, p_u)
        pred = [names_w[i] for i in np.atleast_1d(picked)]
        val_mask = np.isin(orig_subjects, sorted(plan.folds[fold_idx][0]))
        y_val = [orig_labels[i] for i in np.flatnonzero(val_mask)]
        scores.append(macro_f1(y_val, pred, d.label_set))
        confusions.append(confusion_matrix(y_val, pred, d.label_set))

    return EvalReport(
        limb=limb,
        label_names=d.label_set.names,
        fold_scores=tuple(scores),
        mean_f1=float(np.mean(scores)),
        std_f1=float(np.std(scores)),
        confusions=tuple(confusions),
        fold_val_subjects=tuple(val for val, _ in plan),
        anova_scores=anova_scores,
        config_snapshot=config.snapshot(),
    )
