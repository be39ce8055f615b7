"""Per-window signal channels and the 45-feature catalog applied to each.

Every window yields ten scalar channels: the three raw axes, the squared
signal-magnitude vector over all axes and over each axis pair, and the
arctan2 angle of each axis pair.  Each channel runs through the same
45-feature catalog (27 statistical/temporal, 4 fractal/spectral, 14
higher-order differential), giving the fixed 450-dimensional vector
3*45 raw + 4*45 magnitude + 3*45 angle = 135 + 180 + 135.

Conventions for degenerate signals are pinned here so results are
reproducible: population variance everywhere, entropy and mode over 10
equal-width bins, crossing counts where zero samples carry the previous
nonzero sign, and fractal dimensions guarded into [1, 10].

The scalar math lives in numba kernels; public operations and the batch
matrix extractor share them, so a matrix row is bit-identical to the
corresponding single-window extraction.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit

from .core import (
    FeatureVector,
    TriaxialWindow,
    ValidationError,
    WindowMeta,
    validate_window,
)

CHANNELS: tuple[str, ...] = (
    "acc_x",
    "acc_y",
    "acc_z",
    "smv2_xyz",
    "smv2_xy",
    "smv2_xz",
    "smv2_yz",
    "angle_xy",
    "angle_xz",
    "angle_yz",
)

CHANNEL_FAMILIES: dict[str, str] = {
    "acc_x": "raw",
    "acc_y": "raw",
    "acc_z": "raw",
    "smv2_xyz": "smv",
    "smv2_xy": "smv",
    "smv2_xz": "smv",
    "smv2_yz": "smv",
    "angle_xy": "angle",
    "angle_xz": "angle",
    "angle_yz": "angle",
}

STATISTICAL_FEATURES: tuple[str, ...] = (
    "mean",
    "median",
    "mode",
    "max",
    "min",
    "std",
    "var",
    "iqr",
    "rms",
    "average_power",
    "abs_energy",
    "peak_to_peak",
    "mean_crossing_rate",
    "auc",
    "entropy",
    "autocorr_lag1",
    "temporal_centroid",
    "mean_abs_diff",
    "mean_diff",
    "median_abs_diff",
    "median_diff",
    "sum_abs_diff",
    "signal_distance",
    "slope",
    "zero_crossing_rate",
    "positive_turnings",
    "negative_turnings",
)

FRACTAL_SPECTRAL_FEATURES: tuple[str, ...] = (
    "petrosian_fd",
    "katz_fd",
    "dominant_freq_1",
    "dominant_freq_2",
)

DIFFERENTIAL_FEATURES: tuple[str, ...] = (
    "d2_mean",
    "d2_median",
    "d2_std",
    "d2_abs_mean",
    "d2_abs_median",
    "d2_abs_std",
    "d2_katz_fd",
    "d3_mean",
    "d3_median",
    "d3_std",
    "d3_abs_mean",
    "d3_abs_median",
    "d3_abs_std",
    "d3_katz_fd",
)

FAMILY_STATISTICAL = "statistical_temporal"
FAMILY_FRACTAL_SPECTRAL = "fractal_spectral"
FAMILY_DIFFERENTIAL = "higher_order_differential"

KFD_CAP = 10.0


@dataclass(frozen=True)
class FeatureCatalog:
    """The ordered 45-feature catalog and its three family groups."""

    statistical: tuple[str, ...] = STATISTICAL_FEATURES
    fractal_spectral: tuple[str, ...] = FRACTAL_SPECTRAL_FEATURES
    differential: tuple[str, ...] = DIFFERENTIAL_FEATURES

    def __post_init__(self) -> None:
        if (
            len(self.statistical) != 27
            or len(self.fractal_spectral) != 4
            or len(self.differential) != 14
        ):
            raise ValidationError("catalog groups must have sizes 27/4/14")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.statistical + self.fractal_spectral + self.differential

    def family_of(self, feature: str) -> str:
        if feature in self.statistical:
            return FAMILY_STATISTICAL
        if feature in self.fractal_spectral:
            return FAMILY_FRACTAL_SPECTRAL
        if feature in self.differential:
            return FAMILY_DIFFERENTIAL
        raise ValidationError(f"unknown feature {feature!r}")

    def column_names(self) -> tuple[str, ...]:
        return tuple(
            f"{ch}__{feat}" for ch in CHANNELS for feat in self.feature_names
        )

    def column_families(self) -> tuple[str, ...]:
        return tuple(
            self.family_of(feat) for _ in CHANNELS for feat in self.feature_names
        )


CATALOG = FeatureCatalog()
FEATURE_COUNT = len(CATALOG.column_names())  # 450


@dataclass(frozen=True)
class ChannelSeries:
    """One derived scalar series of a window, with its sample times."""

    name: str
    values: np.ndarray
    times: np.ndarray

    def __post_init__(self) -> None:
        if self.name not in CHANNELS:
            raise ValidationError(f"unknown channel {self.name!r}")
        values = np.asarray(self.values, dtype=np.float64)
        if self.name.startswith("smv2") and (values < 0).any():
            raise ValidationError(f"{self.name} must be non-negative")
        if self.name.startswith("angle") and (
            (values <= -np.pi).any() or (values > np.pi).any()
        ):
            raise ValidationError(f"{self.name} must lie in (-pi, pi]")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]


def _angle(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    a = np.arctan2(u, v)
    # arctan2 can return exactly -pi; fold it onto +pi to keep (-pi, pi].
    return np.where(a == -np.pi, np.pi, a)


def _channel_arrays(xyz: np.ndarray) -> list[np.ndarray]:
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    x2, y2, z2 = x * x, y * y, z * z
    return [
        x,
        y,
        z,
        x2 + y2 + z2,
        x2 + y2,
        x2 + z2,
        y2 + z2,
        _angle(x, y),
        _angle(x, z),
        _angle(y, z),
    ]


def derive_channels(w: TriaxialWindow) -> tuple[ChannelSeries, ...]:
    """Derive the ten scalar channels of a window in canonical order."""
    arrays = _channel_arrays(w.xyz)
    return tuple(
        ChannelSeries(name, values, w.times) for name, values in zip(CHANNELS, arrays)
    )


# ---------------------------------------------------------------------------
# numba kernels: the single source of truth for the scalar feature math
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _quantile_sorted(s, q):  # pragma: no cover
    n = s.shape[0]
    pos = q * (n - 1)
    lo = int(np.floor(pos))
    if lo >= n - 1:
        return s[n - 1]
    frac = pos - lo
    return s[lo] + frac * (s[lo + 1] - s[lo])


@njit(cache=True, nogil=True)
def _sign_changes_nb(a):  # pragma: no cover
    # zeros inherit the previous nonzero sign
    count = 0
    prev = 0.0
    for i in range(a.shape[0]):
        v = a[i]
        if v > 0.0:
            if prev < 0.0:
                count += 1
            prev = 1.0
        elif v < 0.0:
            if prev > 0.0:
                count += 1
            prev = -1.0
    return count


@njit(cache=True, nogil=True)
def _pfd_nb(v):  # pragma: no cover
    n = v.shape[0]
    count = 0
    prev = 0.0
    for i in range(n - 1):
        d = v[i + 1] - v[i]
        if d > 0.0:
            if prev < 0.0:
                count += 1
            prev = 1.0
        elif d < 0.0:
            if prev > 0.0:
                count += 1
            prev = -1.0
    log_n = np.log10(float(n))
    return log_n / (log_n + np.log10(n / (n + 0.4 * count)))


@njit(cache=True, nogil=True)
def _kfd_nb(v):  # pragma: no cover
    n = v.shape[0]
    length = 0.0
    for i in range(n - 1):
        length += abs(v[i + 1] - v[i])
    extent = 0.0
    for i in range(n):
        d = abs(v[i] - v[0])
        if d > extent:
            extent = d
    if length == 0.0 or extent == 0.0:
        return 1.0
    log_n = np.log10(n - 1.0)
    denom = log_n + np.log10(extent / length)
    if denom <= 1e-12:
        return 10.0
    r = log_n / denom
    return r if r < 10.0 else 10.0


@njit(cache=True, nogil=True)
def _domfreq_nb(mags, freqs):  # pragma: no cover
    # bin 0 is DC and excluded; ties go to the lower frequency
    best1 = -1
    m1 = 0.0
    for i in range(1, mags.shape[0]):
        if mags[i] > m1:
            m1 = mags[i]
            best1 = i
    if best1 < 0:
        return 0.0, 0.0
    best2 = -1
    m2 = 0.0
    for i in range(1, mags.shape[0]):
        if i == best1:
            continue
        if mags[i] > m2:
            m2 = mags[i]
            best2 = i
    f2 = freqs[best2] if best2 >= 0 else 0.0
    return freqs[best1], f2


@njit(cache=True, nogil=True)
def _stat27_nb(v, t, out, off):  # pragma: no cover
    L = v.shape[0]
    total = 0.0
    vmin = v[0]
    vmax = v[0]
    energy = 0.0
    t_energy = 0.0
    for i in range(L):
        x = v[i]
        total += x
        if x < vmin:
            vmin = x
        if x > vmax:
            vmax = x
        energy += x * x
        t_energy += t[i] * x * x
    mean = total / L
    ptp = vmax - vmin

    var = 0.0
    for i in range(L):
        d = v[i] - mean
        var += d * d
    cvar = var
    var /= L

    srt = np.sort(v)
    median = _quantile_sorted(srt, 0.5)
    iqr = _quantile_sorted(srt, 0.75) - _quantile_sorted(srt, 0.25)

    if ptp == 0.0:
        mode = v[0]
        entropy = 0.0
    else:
        counts = np.zeros(10, dtype=np.int64)
        for i in range(L):
            b = int((v[i] - vmin) * 10.0 / ptp)
            if b > 9:
                b = 9
            counts[b] += 1
        best = 0
        for b in range(1, 10):
            if counts[b] > counts[best]:
                best = b
        mode = vmin + (best + 0.5) * ptp / 10.0
        entropy = 0.0
        for b in range(10):
            if counts[b] > 0:
                p = counts[b] / L
                entropy -= p * np.log2(p)

    mean_cross = 0
    prev = 0.0
    for i in range(L):
        d = v[i] - mean
        if d > 0.0:
            if prev < 0.0:
                mean_cross += 1
            prev = 1.0
        elif d < 0.0:
            if prev > 0.0:
                mean_cross += 1
            prev = -1.0

    auc = 0.0
    for i in range(L - 1):
        auc += 0.5 * (v[i] + v[i + 1]) * (t[i + 1] - t[i])

    autocorr = 0.0
    if cvar > 0.0:
        num = 0.0
        for i in range(L - 1):
            num += (v[i] - mean) * (v[i + 1] - mean)
        autocorr = num / cvar

    centroid = t_energy / energy if energy > 0.0 else 0.0

    dv = np.empty(L - 1, dtype=np.float64)
    adv = np.empty(L - 1, dtype=np.float64)
    sum_d = 0.0
    sum_ad = 0.0
    distance = 0.0
    for i in range(L - 1):
        d = v[i + 1] - v[i]
        dv[i] = d
        adv[i] = abs(d)
        sum_d += d
        sum_ad += abs(d)
        distance += np.sqrt(1.0 + d * d)

    pos_turn = 0
    neg_turn = 0
    for i in range(L - 2):
        if dv[i] > 0.0 and dv[i + 1] < 0.0:
            pos_turn += 1
        elif dv[i] < 0.0 and dv[i + 1] > 0.0:
            neg_turn += 1

    half = (L - 1) / 2.0
    sxy = 0.0
    sxx = 0.0
    for i in range(L):
        xc = i - half
        sxy += xc * v[i]
        sxx += xc * xc
    slope = sxy / sxx

    out[off + 0] = mean
    out[off + 1] = median
    out[off + 2] = mode
    out[off + 3] = vmax
    out[off + 4] = vmin
    out[off + 5] = np.sqrt(var)
    out[off + 6] = var
    out[off + 7] = iqr
    out[off + 8] = np.sqrt(energy / L)
    out[off + 9] = energy / L
    out[off + 10] = energy
    out[off + 11] = ptp
    out[off + 12] = mean_cross / (L - 1)
    out[off + 13] = auc
    out[off + 14] = entropy
    out[off + 15] = autocorr
    out[off + 16] = centroid
    out[off + 17] = sum_ad / (L - 1)
    out[off + 18] = sum_d / (L - 1)
    out[off + 19] = _quantile_sorted(np.sort(adv), 0.5)
    out[off + 20] = _quantile_sorted(np.sort(dv), 0.5)
    out[off + 21] = sum_ad
    out[off + 22] = distance
    out[off + 23] = slope
    out[off + 24] = _sign_changes_nb(v) / (L - 1)
    out[off + 25] = pos_turn
    out[off + 26] = neg_turn


@njit(cache=True, nogil=True)
def _diff_stats_nb(d, out, off):  # pragma: no cover
    n = d.shape[0]
    total = 0.0
    total_abs = 0.0
    for i in range(n):
        total += d[i]
        total_abs += abs(d[i])
    mean = total / n
    mean_abs = total_abs / n
    var = 0.0
    var_abs = 0.0
    for i in range(n):
        a = d[i] - mean
        b = abs(d[i]) - mean_abs
        var += a * a
        var_abs += b * b
    ad = np.abs(d)
    out[off + 0] = mean
    out[off + 1] = _quantile_sorted(np.sort(d), 0.5)
    out[off + 2] = np.sqrt(var / n)
    out[off + 3] = mean_abs
    out[off + 4] = _quantile_sorted(np.sort(ad), 0.5)
    out[off + 5] = np.sqrt(var_abs / n)
    out[off + 6] = _kfd_nb(d)


@njit(cache=True, nogil=True)
def _diff14_nb(v, out, off):  # pragma: no cover
    L = v.shape[0]
    d1 = np.empty(L - 1, dtype=np.float64)
    for i in range(L - 1):
        d1[i] = v[i + 1] - v[i]
    d2 = np.empty(L - 2, dtype=np.float64)
    for i in range(L - 2):
        d2[i] = d1[i + 1] - d1[i]
    d3 = np.empty(L - 3, dtype=np.float64)
    for i in range(L - 3):
        d3[i] = d2[i + 1] - d2[i]
    _diff_stats_nb(d2, out, off)
    _diff_stats_nb(d3, out, off + 7)


@njit(cache=True, nogil=True)
def _batch_kernel(chan, times, mags, freqs, out):  # pragma: no cover
    n = chan.shape[0]
    n_chan = chan.shape[1]
    for wi in range(n):
        for c in range(n_chan):
            base = c * 45
            v = chan[wi, c]
            _stat27_nb(v, times[wi], out[wi], base)
            out[wi, base + 27] = _pfd_nb(v)
            out[wi, base + 28] = _kfd_nb(v)
            f1, f2 = _domfreq_nb(mags[wi, c], freqs)
            out[wi, base + 29] = f1
            out[wi, base + 30] = f2
            _diff14_nb(v, out[wi], base + 31)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def extract_statistical(c: ChannelSeries) -> np.ndarray:
    """The 27 statistical/temporal features of one channel, in catalog order.

    Order: mean, median, mode (center of the most populated of 10
    equal-width bins, ties to the lowest), max, min, population std,
    population variance, interquartile range, RMS, average power, absolute
    energy, peak-to-peak, mean-crossing rate, trapezoidal AUC over sample
    time, Shannon entropy (base 2, 10 bins, 0 for constant signals), lag-1
    autocorrelation (0 for zero variance), energy-weighted temporal
    centroid, mean absolute difference, mean difference, median absolute
    difference, median difference, sum of absolute differences, signal
    distance, linear-regression slope over the sample index, zero-crossing
    rate, positive turning count, negative turning count.
    """
    if len(c) < 4:
        raise ValidationError("statistical features need at least 4 samples")
    out = np.zeros(27, dtype=np.float64)
    _stat27_nb(
        np.ascontiguousarray(c.values),
        np.ascontiguousarray(c.times, dtype=np.float64),
        out,
        0,
    )
    return out


def petrosian_fd(s: Sequence[float] | np.ndarray) -> float:
    """Petrosian fractal dimension from sign changes of the first difference."""
    v = np.ascontiguousarray(s, dtype=np.float64)
    if v.shape[0] < 3:
        raise ValidationError("petrosian_fd needs at least 3 samples")
    return float(_pfd_nb(v))


def katz_fd(s: Sequence[float] | np.ndarray) -> float:
    """Katz fractal dimension, guarded into [1, 10] for degenerate inputs."""
    v = np.ascontiguousarray(s, dtype=np.float64)
    if v.shape[0] < 2:
        raise ValidationError("katz_fd needs at least 2 samples")
    return float(_kfd_nb(v))


def _magnitudes(v: np.ndarray) -> np.ndarray:
    return np.abs(np.fft.rfft(v - v.mean()))


def dominant_frequencies(
    s: Sequence[float] | np.ndarray, rate: float
) -> tuple[float, float]:
    """Frequencies of the two largest non-DC magnitude bins of the mean-removed signal.

    Ties resolve to the lower frequency; a flat spectrum yields (0, 0).
    """
    v = np.ascontiguousarray(s, dtype=np.float64)
    if v.shape[0] < 4:
        raise ValidationError("dominant_frequencies needs at least 4 samples")
    freqs = np.fft.rfftfreq(v.shape[0], d=1.0 / rate)
    f1, f2 = _domfreq_nb(_magnitudes(v), freqs)
    return (float(f1), float(f2))


def diff_n(s: Sequence[float] | np.ndarray, n: int) -> np.ndarray:
    """The n-fold first difference; output is n samples shorter."""
    v = np.asarray(s, dtype=np.float64)
    if n < 1:
        raise ValidationError("differential order must be positive")
    if v.shape[0] <= n:
        raise ValidationError("insufficient samples")
    return np.diff(v, n=n)


def extract_differential(c: ChannelSeries) -> np.ndarray:
    """The 14 second- and third-differential features of one channel."""
    if len(c) < 5:
        raise ValidationError("differential features need at least 5 samples")
    out = np.zeros(14, dtype=np.float64)
    _diff14_nb(np.ascontiguousarray(c.values), out, 0)
    return out


def _batch_features(
    xyz: np.ndarray, times: np.ndarray, rate: float
) -> tuple[np.ndarray, int]:
    """Feature rows for a (n, L, 3) window batch; returns values and sanitize count."""
    n, L, _ = xyz.shape
    x = xyz[:, :, 0]
    y = xyz[:, :, 1]
    z = xyz[:, :, 2]
    # overflow in the squared channels is tolerated: the resulting
    # non-finite features are zeroed and tallied after the kernel
    with np.errstate(over="ignore"):
        x2, y2, z2 = x * x, y * y, z * z
    chan = np.empty((n, len(CHANNELS), L), dtype=np.float64)
    chan[:, 0] = x
    chan[:, 1] = y
    chan[:, 2] = z
    chan[:, 3] = x2 + y2 + z2
    chan[:, 4] = x2 + y2
    chan[:, 5] = x2 + z2
    chan[:, 6] = y2 + z2
    chan[:, 7] = _angle(x, y)
    chan[:, 8] = _angle(x, z)
    chan[:, 9] = _angle(y, z)

    flat = chan.reshape(n * len(CHANNELS), L)
    # overflowing channels produce non-finite cells here; they are zeroed
    # and tallied after the kernel
    with np.errstate(invalid="ignore", over="ignore"):
        mags = np.abs(np.fft.rfft(flat - flat.mean(axis=1, keepdims=True), axis=1))
    mags = np.ascontiguousarray(mags.reshape(n, len(CHANNELS), -1))
    freqs = np.fft.rfftfreq(L, d=1.0 / rate)

    out = np.empty((n, FEATURE_COUNT), dtype=np.float64)
    _batch_kernel(chan, np.ascontiguousarray(times, dtype=np.float64), mags, freqs, out)
    bad = ~np.isfinite(out)
    n_bad = int(np.count_nonzero(bad))
    if n_bad:
        out[bad] = 0.0
    return out, n_bad


def window_features(w: TriaxialWindow, rate: float) -> tuple[np.ndarray, int]:
    """All 450 features of a window plus the count of sanitized entries.

    Any non-finite value (overflow in a squared channel, for instance) is
    replaced by 0 so downstream consumers always see finite numbers.
    """
    check = validate_window(w)
    if not check:
        raise ValidationError(f"invalid window: {check.reason} at {check.index}")
    values, n_bad = _batch_features(w.xyz[None, :, :], w.times[None, :], rate)
    return values[0], n_bad


def extract_window(w: TriaxialWindow, rate: float = 50.0) -> FeatureVector:
    """Extract the named 450-dimensional feature vector of one window."""
    values, _ = window_features(w, rate)
    return FeatureVector(values, CATALOG.column_names())


@dataclass(frozen=True)
class FeatureMatrix:
    """Feature rows for a window sequence, with per-row metadata."""

    values: np.ndarray
    names: tuple[str, ...]
    meta: tuple[WindowMeta, ...]
    sanitized_count: int = 0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != len(self.names):
            raise ValidationError("feature matrix must be rectangular over the names")
        if values.shape[0] != len(self.meta):
            raise ValidationError("feature matrix needs one meta entry per row")
        if values.size and not np.isfinite(values).all():
            raise ValidationError("feature matrix contains non-finite entries")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "meta", tuple(self.meta))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def labels(self) -> list[str]:
        return [m.label for m in self.meta]

    def subjects(self) -> np.ndarray:
        return np.array([m.subject for m in self.meta])

    def row_vector(self, i: int) -> FeatureVector:
        return FeatureVector(self.values[i], self.names)


_CHUNK = 2048


def _extract_chunk(args: tuple[list[TriaxialWindow], float]) -> tuple[np.ndarray, int]:
    windows, rate = args
    for i, w in enumerate(windows):
        check = validate_window(w)
        if not check:
            raise ValidationError(
                f"window {i} invalid: {check.reason} at index {check.index}"
            )
    xyz = np.stack([w.xyz for w in windows])
    times = np.stack([w.times for w in windows])
    return _batch_features(xyz, times, rate)


def extract_matrix(
    windows: Sequence[TriaxialWindow], rate: float = 50.0, workers: int = 1
) -> FeatureMatrix:
    """Extract features for many windows; rows keep the input order.

    Work is split into contiguous chunks whose results land in
    pre-assigned row slots, so output is identical for any worker count.
    """
    names = CATALOG.column_names()
    meta = tuple(w.meta for w in windows)
    if not windows:
        return FeatureMatrix(np.empty((0, FEATURE_COUNT)), names, ())
    jobs = [
        (list(windows[a : a + _CHUNK]), rate) for a in range(0, len(windows), _CHUNK)
    ]
    values = np.empty((len(windows), FEATURE_COUNT), dtype=np.float64)
    total_bad = 0
    if workers <= 1 or len(jobs) < 2:
        results = map(_extract_chunk, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=min(workers, len(jobs)))
        try:
            results = list(pool.map(_extract_chunk, jobs))
        finally:
            pool.shutdown()
    row = 0
    for chunk_values, bad in results:
        values[row : row + chunk_values.shape[0]] = chunk_values
        total_bad += bad
        row += chunk_values.shape[0]
    return FeatureMatrix(values, names, meta, total_bad)


def anova_f_scores(values: np.ndarray, labels: Sequence[str]) -> np.ndarray:
    """One-way ANOVA F statistic per feature column.

    Columns with zero between-class variance score 0; columns with zero
    within-class variance but differing class means score +inf so they
    rank above every finite value.
    """
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    k = classes.shape[0]
    if k < 2:
        raise ValidationError("ANOVA needs at least 2 classes")
    n = values.shape[0]
    grand = values.mean(axis=0)
    ssb = np.zeros(values.shape[1])
    ssw = np.zeros(values.shape[1])
    for c in classes:
        rows = values[labels == c]
        m = rows.mean(axis=0)
        ssb += rows.shape[0] * (m - grand) ** 2
        ssw += ((rows - m) ** 2).sum(axis=0)
    msb = ssb / (k - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = msb * (n - k) / ssw
    f = np.where(ssw == 0.0, np.inf, f)
    return np.where(ssb == 0.0, 0.0, f)


def anova_by_family(
    f_scores: np.ndarray, names: Sequence[str] | None = None
) -> dict[str, np.ndarray]:
    """Group per-column F scores by feature family for reporting."""
    if names is None:
        names = CATALOG.column_names()
    families = [CATALOG.family_of(n.split("__", 1)[1]) for n in names]
    out: dict[str, list[float]] = {}
    for fam, score in zip(families, f_scores):
        out.setdefault(fam, []).append(float(score))
    return {fam: np.array(v) for fam, v in out.items()}


def write_matrix_csv(m: FeatureMatrix, path: str | Path) -> None:
    """Write a feature matrix as CSV with the metadata columns first."""
    import csv

    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("# schema_version=1\n")
        writer = csv.writer(fh)
        writer.writerow(["subject", "limb", "side", "label", "provenance", *m.names])
        for meta, row in zip(m.meta, m.values):
            writer.writerow(
                [
                    meta.subject,
                    meta.limb.value,
                    meta.side.value,
                    meta.label,
                    meta.provenance.value,
                    *(repr(float(v)) for v in row),
                ]
            )


def write_catalog_json(path: str | Path) -> None:
    """Write the sidecar JSON naming every column and its family."""
    import json

    payload = {
        "schema_version": 1,
        "channels": list(CHANNELS),
        "channel_families": CHANNEL_FAMILIES,
        "groups": {
            FAMILY_STATISTICAL: list(CATALOG.statistical),
            FAMILY_FRACTAL_SPECTRAL: list(CATALOG.fractal_spectral),
            FAMILY_DIFFERENTIAL: list(CATALOG.differential),
        },
        "columns": [
            {"name": n, "family": f}
            for n, f in zip(CATALOG.column_names(), CATALOG.column_families())
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
