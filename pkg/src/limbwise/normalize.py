"""Rank-based quantile normalization of feature columns.

The map is fit on training rows only and stores, per column, the
empirical quantiles at equally spaced probability levels.  Transforming
maps each value onto its interpolated cumulative probability, so training
marginals become approximately uniform on [0, 1] and extreme values are
clipped instead of dominating the scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import SchemaError, ValidationError
from .features import FeatureMatrix

DEFAULT_QUANTILES = 1000


@dataclass(frozen=True)
class QuantileMap:
    """Per-column reference quantiles at equally spaced probability levels."""

    names: tuple[str, ...]
    references: np.ndarray  # (n_levels, n_columns), non-decreasing per column

    def __post_init__(self) -> None:
        refs = np.asarray(self.references, dtype=np.float64)
        if refs.ndim != 2 or refs.shape[1] != len(self.names):
            raise ValidationError("references must be (levels, columns)")
        if (np.diff(refs, axis=0) < 0).any():
            raise ValidationError("reference quantiles must be non-decreasing")
        object.__setattr__(self, "references", refs)

    @property
    def n_levels(self) -> int:
        return self.references.shape[0]

    @property
    def levels(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_levels)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "n_levels": self.n_levels,
            "columns": list(self.names),
            "references": [
                [float(v) for v in self.references[:, j]]
                for j in range(len(self.names))
            ],
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "QuantileMap":
        names = tuple(payload["columns"])
        refs = np.array(payload["references"], dtype=np.float64).T
        return cls(names, refs)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), sort_keys=True) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "QuantileMap":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_quantile(m: FeatureMatrix, n_quantiles: int = DEFAULT_QUANTILES) -> QuantileMap:
    """Fit a quantile map on training rows; levels clamp to the row count."""
    if m.n_rows < 2:
        raise ValidationError("quantile fitting needs at least 2 rows")
    if n_quantiles < 2:
        raise ValidationError("n_quantiles must be at least 2")
    n_levels = min(n_quantiles, m.n_rows)
    levels = np.linspace(0.0, 1.0, n_levels)
    refs = np.quantile(m.values, levels, axis=0)
    return QuantileMap(m.names, refs)


def _transform_column(values: np.ndarray, refs: np.ndarray, levels: np.ndarray) -> np.ndarray:
    # Collapse duplicate reference values so ties map to the midpoint of
    # their probability run; a fully constant column then maps to 0.5.
    uniq, first = np.unique(refs, return_index=True)
    last = np.searchsorted(refs, uniq, side="right") - 1
    mid_levels = 0.5 * (levels[first] + levels[last])
    return np.interp(values, uniq, mid_levels, left=0.0, right=1.0)


def transform(q: QuantileMap, m: FeatureMatrix) -> FeatureMatrix:
    """Map every value onto its cumulative probability under the fitted map.

    Values outside the reference range clip to exactly 0 or 1; the output
    is monotone within each column.
    """
    if tuple(m.names) != tuple(q.names):
        raise SchemaError("feature columns do not match the quantile map")
    levels = q.levels
    out = np.empty_like(m.values)
    for j in range(len(q.names)):
        out[:, j] = _transform_column(m.values[:, j], q.references[:, j], levels)
    return FeatureMatrix(out, m.names, m.meta, m.sanitized_count)


def transform_values(q: QuantileMap, values: np.ndarray, names: Sequence[str]) -> np.ndarray:
    """Array-level transform for callers that do not hold a FeatureMatrix."""
    if tuple(names) != tuple(q.names):
        raise SchemaError("feature columns do not match the quantile map")
    values = np.asarray(values, dtype=np.float64)
    levels = q.levels
    out = np.empty_like(values)
    for j in range(len(q.names)):
        out[:, j] = _transform_column(values[:, j], q.references[:, j], levels)
    return out
