"""File outputs of an evaluation run: JSON report, CSV tables, and figures.

The confusion-matrix heatmap and the per-family F-score box plot are
rendered to PNG next to the delimited exports, so a run directory is
self-contained for inspection.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import EvalReport

_FAMILY_TITLES = {
    "statistical_temporal": "Statistical & temporal",
    "fractal_spectral": "Fractal & spectral",
    "higher_order_differential": "Higher-order differential",
}

_PNG_META = {"Software": "limbwise"}


def write_fold_scores_csv(report: EvalReport, path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("# schema_version=1\n")
        writer = csv.writer(fh)
        writer.writerow(["fold", "macro_f1", "val_subjects"])
        for i, (score, subjects) in enumerate(
            zip(report.fold_scores, report.fold_val_subjects)
        ):
            writer.writerow([i, repr(score), ";".join(subjects)])
        writer.writerow(["mean", repr(report.mean_f1), ""])
        writer.writerow(["std", repr(report.std_f1), ""])


def write_confusion_csv(report: EvalReport, path: Path) -> None:
    cm = report.aggregate_confusion()
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("# schema_version=1\n")
        writer = csv.writer(fh)
        writer.writerow(["truth\\pred", *report.label_names])
        for name, row in zip(report.label_names, cm):
            writer.writerow([name, *(int(v) for v in row)])


def write_fscore_stats_csv(report: EvalReport, path: Path) -> None:
    stats = report.anova_family_stats()
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("# schema_version=1\n")
        writer = csv.writer(fh)
        writer.writerow(["family", "min", "q1", "median", "q3", "max", "n_infinite"])
        for fam in sorted(stats):
            s = stats[fam]
            writer.writerow(
                [fam, repr(s["min"]), repr(s["q1"]), repr(s["median"]),
                 repr(s["q3"]), repr(s["max"]), s["n_infinite"]]
            )


def render_confusion_figure(report: EvalReport, path: Path) -> None:
    cm = report.aggregate_confusion().astype(np.float64)
    row_sums = cm.sum(axis=1, keepdims=True)
    shares = np.divide(cm, row_sums, out=np.zeros_like(cm), where=row_sums > 0)
    k = len(report.label_names)
    fig, ax = plt.subplots(figsize=(max(5.0, 0.5 * k + 2.0),) * 2)
    im = ax.imshow(shares, cmap="Blues", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(k), report.label_names, rotation=90, fontsize=7)
    ax.set_yticks(range(k), report.label_names, fontsize=7)
    ax.set_xlabel("predicted")
    ax.set_ylabel("truth")
    ax.set_title(f"{report.limb.value} confusion (row-normalized)")
    if k <= 12:
        for i in range(k):
            for j in range(k):
                if cm[i, j]:
                    ax.text(j, i, int(cm[i, j]), ha="center", va="center", fontsize=6)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)


def render_fscore_figure(report: EvalReport, path: Path) -> None:
    from .features import anova_by_family

    names = list(report.anova_scores.keys())
    scores = np.array([report.anova_scores[n] for n in names])
    grouped = anova_by_family(scores, names)
    families = sorted(grouped)
    data = []
    for fam in families:
        vals = grouped[fam]
        finite = vals[np.isfinite(vals)]
        data.append(finite if finite.size else np.array([0.0]))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.boxplot(data, tick_labels=[_FAMILY_TITLES.get(f, f) for f in families], showfliers=False)
    ax.set_ylabel("ANOVA F score")
    ax.set_title(f"{report.limb.value} feature-family F scores")
    ax.tick_params(axis="x", labelsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)


def write_report_json(report: EvalReport, path: Path) -> None:
    payload = report.to_json_dict()
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_eval_outputs(report: EvalReport, outdir: str | Path) -> list[Path]:
    """Write every artifact of one evaluation run; returns the created paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    limb = report.limb.value
    paths = {
        "json": outdir / f"report_{limb}.json",
        "folds": outdir / f"fold_scores_{limb}.csv",
        "confusion": outdir / f"confusion_{limb}.csv",
        "fscores": outdir / f"fscore_stats_{limb}.csv",
        "confusion_png": outdir / f"confusion_{limb}.png",
        "fscore_png": outdir / f"fscore_boxplot_{limb}.png",
    }
    write_report_json(report, paths["json"])
    write_fold_scores_csv(report, paths["folds"])
    write_confusion_csv(report, paths["confusion"])
    write_fscore_stats_csv(report, paths["fscores"])
    render_confusion_figure(report, paths["confusion_png"])
    render_fscore_figure(report, paths["fscore_png"])
    return list(paths.values())
