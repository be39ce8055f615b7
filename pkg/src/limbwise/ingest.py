"""Raw sensor CSV parsing, window segmentation, and left/right side fusion.

Input files are wide CSVs with one row per synchronized sample: a subject
column, x/y/z acceleration columns for each of the four worn positions
(right/left arm, right/left leg), a shared label column, and optionally a
time column.  When no time column is mapped, sample times are synthesized
from the row index at the configured rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .core import (
    DataError,
    ConfigError,
    LabelSet,
    Limb,
    Provenance,
    SchemaError,
    Side,
    TriaxialWindow,
    ValidationError,
    WindowMeta,
    validate_window,
)

POSITIONS: tuple[tuple[Limb, Side], ...] = (
    (Limb.ARM, Side.RIGHT),
    (Limb.ARM, Side.LEFT),
    (Limb.LEG, Side.RIGHT),
    (Limb.LEG, Side.LEFT),
)


def default_column_map() -> dict:
    """Column layout written by `limbwise synth` and expected by default."""
    positions = {}
    for limb, side in POSITIONS:
        stem = f"{side.value}_{limb.value}"
        positions[f"{side.value}_{limb.value}"] = [
            f"{stem}_acc_x",
            f"{stem}_acc_y",
            f"{stem}_acc_z",
        ]
    return {
        "subject": "subject",
        "label": "label",
        "time": "time",
        "positions": positions,
    }


def _position_key(limb: Limb, side: Side) -> str:
    return f"{side.value}_{limb.value}"


@dataclass(frozen=True)
class SensorStream:
    """One position's full recording: samples plus the per-sample labels."""

    subject: str
    limb: Limb
    side: Side
    times: np.ndarray
    xyz: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.float64)
        xyz = np.asarray(self.xyz, dtype=np.float64)
        if xyz.shape != (times.shape[0], 3) or len(self.labels) != times.shape[0]:
            raise ValidationError("stream samples and labels must have equal length")
        if times.size > 1 and (np.diff(times) < 0).any():
            raise ValidationError("stream times must be non-decreasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self) -> int:
        return self.times.shape[0]


@dataclass(frozen=True)
class WindowedDataset:
    """Validated windows sharing one label vocabulary."""

    windows: tuple[TriaxialWindow, ...]
    label_set: LabelSet
    expected_length: int | None = field(default=None)

    def __post_init__(self) -> None:
        windows = tuple(self.windows)
        expected = self.expected_length
        if expected is None and windows:
            expected = len(windows[0])
        for i, w in enumerate(windows):
            check = validate_window(w, expected)
            if not check:
                raise ValidationError(
                    f"window {i} invalid: {check.reason} at index {check.index}"
                )
            if w.meta.label not in self.label_set:
                raise ValidationError(
                    f"window {i} label {w.meta.label!r} not in label set"
                )
        object.__setattr__(self, "windows", windows)
        object.__setattr__(self, "expected_length", expected)

    def __len__(self) -> int:
        return len(self.windows)

    def labels(self) -> list[str]:
        return [w.meta.label for w in self.windows]

    def subjects(self) -> list[str]:
        return sorted({w.meta.subject for w in self.windows})


def _require_columns(df: pd.DataFrame, names: Iterable[str], path: str) -> None:
    for name in names:
        if name not in df.columns:
            raise SchemaError(f"{path}: missing column {name!r}")


def _numeric(df: pd.DataFrame, column: str, path: str, line_offset: int) -> np.ndarray:
    values = pd.to_numeric(df[column], errors="coerce").to_numpy(dtype=np.float64)
    bad = np.isnan(values)
    if bad.any():
        row = int(np.argmax(bad))
        # offset covers leading comment lines, the header, and 1-based numbering
        raise DataError(
            f"{path}: column {column!r} has a non-numeric cell", line=row + line_offset
        )
    return values


def parse_wide_csv(
    path: str | Path,
    column_map: Mapping | None = None,
    rate: float = 50.0,
) -> list[SensorStream]:
    """Parse one wide CSV into per-(subject, limb, side) sensor streams.

    Returns streams ordered by subject appearance, then position order
    (right arm, left arm, right leg, left leg).  Row order is preserved.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"input file does not exist: {path}")
    cmap = dict(column_map) if column_map is not None else default_column_map()
    positions: Mapping[str, Sequence[str]] = cmap.get("positions") or {}
    if not positions:
        raise SchemaError(f"{path}: column map declares no sensor positions")

    label_col = cmap.get("label")
    # na_filter off so literal strings like "null" survive as labels
    df = pd.read_csv(path, dtype=str, sep=",", comment="#", na_filter=False)
    leading_comments = 0
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            leading_comments += 1
    line_offset = leading_comments + 2  # header line plus 1-based numbering

    needed = [cmap["subject"]]
    if label_col:
        needed.append(label_col)
    time_col = cmap.get("time")
    if time_col:
        needed.append(time_col)
    for cols in positions.values():
        needed.extend(cols)
    _require_columns(df, needed, str(path))

    subjects_col = df[cmap["subject"]].astype(str).to_numpy()
    if label_col:
        labels_col = df[label_col].astype(str).to_numpy()
    else:
        # Unlabeled input (the prediction path): a single placeholder class.
        labels_col = np.full(len(df), "unknown", dtype=object)
    if time_col:
        times_all = _numeric(df, time_col, str(path), line_offset)
    else:
        times_all = np.arange(len(df), dtype=np.float64) / float(rate)
    axis_data = {
        key: np.column_stack([_numeric(df, c, str(path), line_offset) for c in cols])
        for key, cols in positions.items()
    }

    streams: list[SensorStream] = []
    seen: list[str] = []
    for subj in subjects_col:
        if subj not in seen:
            seen.append(subj)
    for subj in seen:
        mask = subjects_col == subj
        for limb, side in POSITIONS:
            key = _position_key(limb, side)
            if key not in axis_data:
                continue
            streams.append(
                SensorStream(
                    subject=subj,
                    limb=limb,
                    side=side,
                    times=times_all[mask],
                    xyz=axis_data[key][mask],
                    labels=tuple(labels_col[mask]),
                )
            )
    return streams


def _majority_label(labels: Sequence[str], center: int) -> str:
    counts: dict[str, int] = {}
    for l in labels:
        counts[l] = counts.get(l, 0) + 1
    best = max(counts.values())
    winners = [l for l, c in counts.items() if c == best]
    if len(winners) == 1:
        return winners[0]
    return labels[center]


def window_length(rate: float, window_seconds: float) -> int:
    """Samples per window; errors unless rate * window_seconds is a positive integer."""
    raw = rate * window_seconds
    n = int(round(raw))
    if n < 1 or abs(raw - n) > 1e-9:
        raise ConfigError(
            f"rate * window_seconds must be a positive integer, got {raw!r}"
        )
    return n


def window_stream(
    s: SensorStream,
    rate: float = 50.0,
    window_seconds: float = 1.0,
    overlap_fraction: float = 0.0,
) -> list[TriaxialWindow]:
    """Segment a stream into fixed-length windows.

    Recording sessions separated by a time gap larger than two sample
    periods are windowed independently so a window never spans a gap.
    Each window takes the majority per-sample label; ties resolve to the
    label of the window's center sample.  Trailing samples shorter than a
    full window are dropped.
    """
    if not 0.0 <= overlap_fraction < 1.0:
        raise ConfigError(f"overlap_fraction must be in [0, 1), got {overlap_fraction}")
    L = window_length(rate, window_seconds)
    stride = max(1, int(round(L * (1.0 - overlap_fraction))))

    n = len(s)
    if n == 0:
        return []
    gap = 2.0 / float(rate)
    breaks = np.flatnonzero(np.diff(s.times) > gap) + 1
    session_edges = [0, *breaks.tolist(), n]

    out: list[TriaxialWindow] = []
    for a, b in zip(session_edges[:-1], session_edges[1:]):
        start = a
        while start + L <= b:
            stop = start + L
            label = _majority_label(s.labels[start:stop], L // 2)
            meta = WindowMeta(
                subject=s.subject,
                limb=s.limb,
                side=s.side,
                label=label,
                provenance=Provenance.ORIGINAL,
            )
            out.append(TriaxialWindow(meta, s.times[start:stop], s.xyz[start:stop]))
            start += stride
    return out


def window_streams(
    streams: Iterable[SensorStream],
    label_set: LabelSet | None = None,
    rate: float = 50.0,
    window_seconds: float = 1.0,
    overlap_fraction: float = 0.0,
) -> WindowedDataset:
    """Window every stream and collect the result into one dataset."""
    windows: list[TriaxialWindow] = []
    for s in streams:
        windows.extend(window_stream(s, rate, window_seconds, overlap_fraction))
    if label_set is None:
        label_set = LabelSet.from_labels(w.meta.label for w in windows)
    return WindowedDataset(tuple(windows), label_set)


def fuse_sides(d: WindowedDataset, limb: Limb) -> WindowedDataset:
    """Merge left and right windows of one limb into a limb-specific dataset.

    Side metadata is retained; output order is deterministic (subject,
    side, start time).
    """
    kept = [w for w in d.windows if w.meta.limb == limb]
    kept.sort(key=lambda w: (w.meta.subject, w.meta.side.value, float(w.times[0])))
    return WindowedDataset(tuple(kept), d.label_set, d.expected_length)


def write_windows_csv(d: WindowedDataset, path: str | Path) -> None:
    """Dump a windowed dataset as CSV: metadata columns then L x 3 sample columns."""
    import csv

    path = Path(path)
    if not d.windows:
        raise ValidationError("cannot dump an empty dataset")
    L = len(d.windows[0])
    header = ["subject", "limb", "side", "label", "provenance", "window_index"]
    for i in range(L):
        header.extend([f"ax_{i}", f"ay_{i}", f"az_{i}"])
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("# schema_version=1\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for idx, w in enumerate(d.windows):
            m = w.meta
            cells = [m.subject, m.limb.value, m.side.value, m.label, m.provenance.value, str(idx)]
            cells.extend(repr(float(v)) for v in w.xyz.reshape(-1))
            writer.writerow(cells)
