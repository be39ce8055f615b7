"""Shared domain types for the accelerometer activity-recognition pipeline.

Everything here is immutable after construction and safe to hand to
concurrent workers: windows keep their sample arrays with the writeable
flag cleared, and metadata types are frozen dataclasses.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PipelineError):
    """A run configuration is invalid (bad value, missing path, missing seed)."""


class SchemaError(PipelineError):
    """An input file or matrix does not match the expected column layout."""


class DataError(PipelineError):
    """A file parsed but a cell or row is unusable; carries a line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"{message} (line {line})")
        self.line = line


class ValidationError(PipelineError):
    """A domain invariant was violated."""


class Limb(str, enum.Enum):
    ARM = "arm"
    LEG = "leg"


class Side(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class Provenance(str, enum.Enum):
    ORIGINAL = "original"
    INVERTED = "inverted"
    ROTATED = "rotated"
    INVERTED_ROTATED = "inverted_rotated"

    @property
    def is_inverted(self) -> bool:
        return self in (Provenance.INVERTED, Provenance.INVERTED_ROTATED)

    @property
    def is_rotated(self) -> bool:
        return self in (Provenance.ROTATED, Provenance.INVERTED_ROTATED)


def compose_provenance(inverted: bool, rotated: bool) -> Provenance:
    if inverted and rotated:
        return Provenance.INVERTED_ROTATED
    if inverted:
        return Provenance.INVERTED
    if rotated:
        return Provenance.ROTATED
    return Provenance.ORIGINAL


class TriaxialSample(NamedTuple):
    """One accelerometer reading: time in seconds plus the three axis values."""

    t: float
    ax: float
    ay: float
    az: float


# The 18 exercise activities of the target recording protocol plus the
# background "null" class.  Any run may substitute its own label list.
DEFAULT_LABELS: tuple[str, ...] = (
    "null",
    "jogging",
    "jogging (rotating arms)",
    "jogging (skipping)",
    "jogging (sidesteps)",
    "jogging (butt-kicks)",
    "stretching (triceps)",
    "stretching (lunging)",
    "stretching (shoulders)",
    "stretching (hamstrings)",
    "stretching (lumbar rotation)",
    "push-ups",
    "push-ups (complex)",
    "sit-ups",
    "sit-ups (complex)",
    "burpees",
    "lunges",
    "lunges (complex)",
    "bench-dips",
)


@dataclass(frozen=True)
class LabelSet:
    """Ordered activity-class vocabulary; the order fixes probability vectors."""

    names: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        names = tuple(self.names)
        if len(set(names)) != len(names):
            raise ValidationError("label names must be unique")
        if not names:
            raise ValidationError("label set must not be empty")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ValidationError(f"unknown label {name!r}") from None

    def encode(self, labels: Sequence[str]) -> np.ndarray:
        return np.array([self.index(l) for l in labels], dtype=np.int64)

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> "LabelSet":
        """Build a deterministic label set from observed labels: sorted, null first."""
        uniq = sorted(set(labels))
        if "null" in uniq:
            uniq.remove("null")
            uniq.insert(0, "null")
        return cls(tuple(uniq))


def default_label_set() -> LabelSet:
    return LabelSet(DEFAULT_LABELS)


@dataclass(frozen=True)
class WindowMeta:
    subject: str
    limb: Limb
    side: Side
    label: str
    provenance: Provenance = Provenance.ORIGINAL


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TriaxialWindow:
    """A fixed-length triaxial segment: times (L,) and axis values (L, 3)."""

    meta: WindowMeta
    times: np.ndarray
    xyz: np.ndarray

    def __post_init__(self) -> None:
        times = _readonly(self.times)
        xyz = _readonly(self.xyz)
        if times.ndim != 1 or xyz.ndim != 2 or xyz.shape != (times.shape[0], 3):
            raise ValidationError(
                f"window shape mismatch: times {times.shape}, xyz {xyz.shape}"
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "xyz", xyz)

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def samples(self) -> list[TriaxialSample]:
        return [
            TriaxialSample(float(t), float(x), float(y), float(z))
            for t, (x, y, z) in zip(self.times, self.xyz)
        ]

    @classmethod
    def from_samples(
        cls, meta: WindowMeta, samples: Iterable[TriaxialSample]
    ) -> "TriaxialWindow":
        rows = list(samples)
        times = np.array([s.t for s in rows], dtype=np.float64)
        xyz = np.array([[s.ax, s.ay, s.az] for s in rows], dtype=np.float64)
        return cls(meta, times, xyz)


@dataclass(frozen=True)
class WindowValidation:
    """Outcome of validate_window: ok, or the first violated rule and where."""

    ok: bool
    reason: str | None = None
    index: int | None = None

    def __bool__(self) -> bool:
        return self.ok


def validate_window(
    w: TriaxialWindow, expected_length: int | None = None
) -> WindowValidation:
    """Check the window invariants: exact length, finite values, strictly increasing times.

    Returns the first violation in the order length -> finiteness -> monotone
    time, with the sample index where it occurred.
    """
    n = len(w)
    if expected_length is not None and n != expected_length:
        return WindowValidation(False, "length", n)
    finite = np.isfinite(w.xyz).all(axis=1)
    if not finite.all():
        return WindowValidation(False, "finiteness", int(np.argmin(finite)))
    if not np.isfinite(w.times).all():
        return WindowValidation(False, "finiteness", int(np.argmin(np.isfinite(w.times))))
    dt = np.diff(w.times)
    if dt.size and not (dt > 0).all():
        return WindowValidation(False, "monotonicity", int(np.argmin(dt > 0)) + 1)
    return WindowValidation(True)


@dataclass(frozen=True)
class FeatureVector:
    """Named scalar features of one window; every value is finite."""

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self) -> None:
        values = _readonly(self.values)
        if values.ndim != 1 or values.shape[0] != len(self.names):
            raise ValidationError(
                f"feature vector has {values.shape[0]} values for {len(self.names)} names"
            )
        if not np.isfinite(values).all():
            raise ValidationError("feature vector contains non-finite values")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}
