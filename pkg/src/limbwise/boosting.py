"""From-scratch multiclass histogram gradient-boosted decision trees.

Features are discretized once into at most 255 quantile bins; trees then
grow best-first on per-bin gradient/hessian histograms, with the classic
sibling-subtraction trick so only the smaller child of a split pays for a
histogram scan.  One engine serves both ensemble configurations used by
the pipeline: balanced class weights without L2, and unweighted with L2.

Each tree is grown by a single numba kernel working on a reusable
workspace (pooled histogram slots, row-index segments), so the per-tree
cost is pure kernel time.  The trees of one boosting iteration depend
only on the iteration's softmax snapshot and write disjoint score
columns, so they can be grown by concurrent threads; every reduction
runs in a fixed order and results are bit-identical for any thread count.
"""

from __future__ import annotations

import enum
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit

from .core import (
    ConfigError,
    FeatureVector,
    LabelSet,
    SchemaError,
    ValidationError,
)
from .features import FeatureMatrix

_HESSIAN_EPS = 1e-12  # guards 0/0 when a node's hessian mass vanishes


class ClassWeighting(str, enum.Enum):
    BALANCED = "balanced"
    NONE = "none"


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 100
    learning_rate: float = 0.1
    max_leaves: int = 31
    min_samples_leaf: int = 20
    l2_regularization: float = 0.0
    max_bins: int = 255
    class_weighting: ClassWeighting = ClassWeighting.BALANCED
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "class_weighting", ClassWeighting(self.class_weighting)
        )
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.max_leaves < 2:
            raise ConfigError("max_leaves must be >= 2")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")
        if self.l2_regularization < 0:
            raise ConfigError("l2_regularization must be >= 0")
        if not 2 <= self.max_bins <= 255:
            raise ConfigError("max_bins must be in [2, 255]")

    def to_json_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "learning_rate": self.learning_rate,
            "max_leaves": self.max_leaves,
            "min_samples_leaf": self.min_samples_leaf,
            "l2_regularization": self.l2_regularization,
            "max_bins": self.max_bins,
            "class_weighting": self.class_weighting.value,
            "seed": self.seed,
        }


# The two pipeline configurations: histogram boosting with balanced class
# weights, and the regularized unweighted counterpart.
WEIGHTED_CONFIG = TrainConfig(class_weighting=ClassWeighting.BALANCED, l2_regularization=0.0)
UNWEIGHTED_CONFIG = TrainConfig(class_weighting=ClassWeighting.NONE, l2_regularization=1.0)


@dataclass(frozen=True)
class BinMapper:
    """Per-feature strictly increasing thresholds; value <= threshold[i] -> bin i."""

    thresholds: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        cleaned = []
        for th in self.thresholds:
            th = np.asarray(th, dtype=np.float64)
            if th.size and (np.diff(th) <= 0).any():
                raise ValidationError("bin thresholds must be strictly increasing")
            cleaned.append(th)
        object.__setattr__(self, "thresholds", tuple(cleaned))

    @property
    def n_features(self) -> int:
        return len(self.thresholds)

    def n_bins(self, feature: int) -> int:
        return self.thresholds[feature].shape[0] + 1

    @property
    def max_n_bins(self) -> int:
        return max(self.n_bins(f) for f in range(self.n_features))

    def bin_column(self, feature: int, values: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.thresholds[feature], values, side="left")

    def bin_matrix(self, values: np.ndarray) -> np.ndarray:
        """Discretize an (n, F) value matrix into an (F, n) uint8 bin matrix."""
        values = np.asarray(values, dtype=np.float64)
        out = np.empty((self.n_features, values.shape[0]), dtype=np.uint8)
        for f in range(self.n_features):
            out[f] = self.bin_column(f, values[:, f]).astype(np.uint8)
        return out

    def flat_thresholds(self) -> tuple[np.ndarray, np.ndarray]:
        offsets = np.zeros(self.n_features + 1, dtype=np.int64)
        for f, th in enumerate(self.thresholds):
            offsets[f + 1] = offsets[f] + th.shape[0]
        values = (
            np.concatenate(self.thresholds)
            if offsets[-1]
            else np.empty(0, dtype=np.float64)
        )
        return values, offsets


def fit_bins(m: FeatureMatrix | np.ndarray, max_bins: int = 255) -> BinMapper:
    """Derive quantile bin thresholds per feature from training data.

    Columns with at most max_bins distinct values get one bin per value
    (thresholds at midpoints); denser columns get thresholds at equally
    spaced quantiles of the distinct values, capped at max_bins bins.
    """
    values = m.values if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=np.float64)
    if values.shape[0] < 2:
        raise ValidationError("bin fitting needs at least 2 rows")
    if not 2 <= max_bins <= 255:
        raise ConfigError("max_bins must be in [2, 255]")
    thresholds = []
    for f in range(values.shape[1]):
        distinct = np.unique(values[:, f])
        if distinct.shape[0] <= max_bins:
            th = 0.5 * (distinct[:-1] + distinct[1:])
        else:
            q = np.arange(1, max_bins, dtype=np.float64) / max_bins
            th = np.unique(np.quantile(distinct, q, method="midpoint"))
        thresholds.append(th)
    return BinMapper(tuple(thresholds))


def balanced_weights(labels: Sequence[str]) -> np.ndarray:
    """Inverse-frequency row weights: n / (classes_present * class_count)."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValidationError("cannot weight an empty label list")
    classes, counts = np.unique(labels, return_counts=True)
    if classes.shape[0] == 1:
        warnings.warn("balanced weights degenerate: only one class present")
        return np.ones(labels.shape[0], dtype=np.float64)
    per_class = labels.shape[0] / (classes.shape[0] * counts.astype(np.float64))
    lookup = dict(zip(classes.tolist(), per_class.tolist()))
    return np.array([lookup[l] for l in labels.tolist()], dtype=np.float64)


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _zero_slot(pg, ph, pc, slot):  # pragma: no cover
    n_feat, n_bins = pg.shape[1], pg.shape[2]
    for f in range(n_feat):
        for b in range(n_bins):
            pg[slot, f, b] = 0.0
            ph[slot, f, b] = 0.0
            pc[slot, f, b] = 0


@njit(cache=True, nogil=True)
def _build_slot(binned, rows, a, b, g, h, pg, ph, pc, slot):  # pragma: no cover
    n_feat = binned.shape[0]
    for f in range(n_feat):
        brow = binned[f]
        for j in range(a, b):
            i = rows[j]
            bn = brow[i]
            pg[slot, f, bn] += g[i]
            ph[slot, f, bn] += h[i]
            pc[slot, f, bn] += 1


@njit(cache=True, nogil=True)
def _sub_slot(pg, ph, pc, parent, small, dst):  # pragma: no cover
    n_feat, n_bins = pg.shape[1], pg.shape[2]
    for f in range(n_feat):
        for b in range(n_bins):
            pg[dst, f, b] = pg[parent, f, b] - pg[small, f, b]
            ph[dst, f, b] = ph[parent, f, b] - ph[small, f, b]
            pc[dst, f, b] = pc[parent, f, b] - pc[small, f, b]


@njit(cache=True, nogil=True)
def _scan_slot(pg, ph, pc, slot, tg, th, tc, lam, min_leaf):  # pragma: no cover
    best_gain = 0.0
    best_f = -1
    best_b = -1
    dp = th + lam
    parent = tg * tg / dp if dp > 1e-12 else 0.0
    n_feat, n_bins = pg.shape[1], pg.shape[2]
    for f in range(n_feat):
        gl = 0.0
        hl = 0.0
        cl = 0
        for b in range(n_bins):
            c = pc[slot, f, b]
            if c == 0:
                continue
            gl += pg[slot, f, b]
            hl += ph[slot, f, b]
            cl += c
            if cl < min_leaf:
                continue
            if tc - cl < min_leaf:
                break
            dl = hl + lam
            left = gl * gl / dl if dl > 1e-12 else 0.0
            gr = tg - gl
            dr = (th - hl) + lam
            right = gr * gr / dr if dr > 1e-12 else 0.0
            gain = 0.5 * (left + right - parent)
            if gain > best_gain:
                best_gain = gain
                best_f = f
                best_b = b
    return best_gain, best_f, best_b


@njit(cache=True, nogil=True)
def _grow_tree_kernel(
    binned, th_values, th_offset, g, h, lam, lr, max_leaves, min_leaf,
    rows, rows_tmp, pg, ph, pc, slot_dirty,
    out_feat, out_thr, out_left, out_right, out_val, score_out,
):  # pragma: no cover
    n = g.shape[0]
    n_slots = pg.shape[0]
    max_nodes = out_feat.shape[0]

    ns_start = np.empty(max_nodes, dtype=np.int64)
    ns_end = np.empty(max_nodes, dtype=np.int64)
    ns_tg = np.empty(max_nodes, dtype=np.float64)
    ns_th = np.empty(max_nodes, dtype=np.float64)
    ns_gain = np.empty(max_nodes, dtype=np.float64)
    ns_sf = np.empty(max_nodes, dtype=np.int64)
    ns_sb = np.empty(max_nodes, dtype=np.int64)
    ns_slot = np.full(max_nodes, -1, dtype=np.int64)

    for i in range(max_nodes):
        out_feat[i] = -1
        out_thr[i] = np.nan
        out_left[i] = -1
        out_right[i] = -1
        out_val[i] = 0.0

    free = np.empty(n_slots, dtype=np.int64)
    for p in range(n_slots):
        free[p] = n_slots - 1 - p
    n_free = n_slots

    for j in range(n):
        rows[j] = j
    tg = 0.0
    th = 0.0
    ag = 0.0
    for j in range(n):
        tg += g[j]
        th += h[j]
        ag += abs(g[j])
    ns_start[0] = 0
    ns_end[0] = n
    ns_tg[0] = tg
    ns_th[0] = th
    n_nodes = 1

    frontier = np.empty(max_leaves + 2, dtype=np.int64)
    nf = 0
    if n >= 2 * min_leaf and ag > 0.0:
        slot = free[n_free - 1]
        n_free -= 1
        if slot_dirty[slot] == 1:
            _zero_slot(pg, ph, pc, slot)
        slot_dirty[slot] = 1
        _build_slot(binned, rows, 0, n, g, h, pg, ph, pc, slot)
        gain, sf, sb = _scan_slot(pg, ph, pc, slot, tg, th, n, lam, min_leaf)
        if sf >= 0:
            ns_gain[0] = gain
            ns_sf[0] = sf
            ns_sb[0] = sb
            ns_slot[0] = slot
            frontier[0] = 0
            nf = 1
        else:
            free[n_free] = slot
            n_free += 1

    leaves = 1
    while nf > 0 and leaves < max_leaves:
        # best gain wins; ties go to the earliest-inserted frontier entry
        bi = 0
        for i in range(1, nf):
            if ns_gain[frontier[i]] > ns_gain[frontier[bi]]:
                bi = i
        node = frontier[bi]
        for i in range(bi, nf - 1):
            frontier[i] = frontier[i + 1]
        nf -= 1

        a = ns_start[node]
        bnd = ns_end[node]
        f = ns_sf[node]
        sbin = ns_sb[node]
        pslot = ns_slot[node]
        brow = binned[f]

        nl = 0
        tgl = 0.0
        thl = 0.0
        agl = 0.0
        tgr = 0.0
        thr = 0.0
        agr = 0.0
        for j in range(a, bnd):
            i_ = rows[j]
            if brow[i_] <= sbin:
                rows_tmp[a + nl] = i_
                nl += 1
                tgl += g[i_]
                thl += h[i_]
                agl += abs(g[i_])
        pos = a + nl
        for j in range(a, bnd):
            i_ = rows[j]
            if brow[i_] > sbin:
                rows_tmp[pos] = i_
                pos += 1
                tgr += g[i_]
                thr += h[i_]
                agr += abs(g[i_])
        for j in range(a, bnd):
            rows[j] = rows_tmp[j]
        nr = bnd - a - nl

        node_l = n_nodes
        node_r = n_nodes + 1
        n_nodes += 2
        ns_start[node_l] = a
        ns_end[node_l] = a + nl
        ns_tg[node_l] = tgl
        ns_th[node_l] = thl
        ns_start[node_r] = a + nl
        ns_end[node_r] = bnd
        ns_tg[node_r] = tgr
        ns_th[node_r] = thr
        out_feat[node] = f
        out_thr[node] = th_values[th_offset[f] + sbin]
        out_left[node] = node_l
        out_right[node] = node_r
        ns_slot[node] = -1
        leaves += 1

        small_is_left = nl <= nr
        ag_l, ag_r = agl, agr
        want_l = nl >= 2 * min_leaf and ag_l > 0.0 and leaves < max_leaves
        want_r = nr >= 2 * min_leaf and ag_r > 0.0 and leaves < max_leaves
        slot_l = -1
        slot_r = -1
        if want_l or want_r:
            # build the smaller side; derive the larger by subtraction
            if small_is_left:
                sa, sb_ = a, a + nl
            else:
                sa, sb_ = a + nl, bnd
            slot_s = free[n_free - 1]
            n_free -= 1
            if slot_dirty[slot_s] == 1:
                _zero_slot(pg, ph, pc, slot_s)
            slot_dirty[slot_s] = 1
            _build_slot(binned, rows, sa, sb_, g, h, pg, ph, pc, slot_s)
            want_big = want_r if small_is_left else want_l
            slot_b = -1
            if want_big:
                slot_b = free[n_free - 1]
                n_free -= 1
                slot_dirty[slot_b] = 1  # subtraction overwrites every cell
                _sub_slot(pg, ph, pc, pslot, slot_s, slot_b)
            if small_is_left:
                slot_l, slot_r = slot_s, slot_b
            else:
                slot_l, slot_r = slot_b, slot_s
        free[n_free] = pslot
        n_free += 1

        for side in range(2):
            if side == 0:
                child, want, slot_c = node_l, want_l, slot_l
                tg_c, th_c, n_c = tgl, thl, nl
            else:
                child, want, slot_c = node_r, want_r, slot_r
                tg_c, th_c, n_c = tgr, thr, nr
            pushed = False
            if want and slot_c >= 0:
                gain_c, sf_c, sb_c = _scan_slot(
                    pg, ph, pc, slot_c, tg_c, th_c, n_c, lam, min_leaf
                )
                if sf_c >= 0:
                    ns_gain[child] = gain_c
                    ns_sf[child] = sf_c
                    ns_sb[child] = sb_c
                    ns_slot[child] = slot_c
                    frontier[nf] = child
                    nf += 1
                    pushed = True
            if not pushed and slot_c >= 0:
                free[n_free] = slot_c
                n_free += 1

    for i in range(nf):
        node = frontier[i]
        if ns_slot[node] >= 0:
            free[n_free] = ns_slot[node]
            n_free += 1

    for i in range(n_nodes):
        if out_left[i] == -1:
            denom = ns_th[i] + lam
            if denom <= 1e-12:
                val = 0.0
            else:
                val = -ns_tg[i] / denom * lr
            out_val[i] = val
            if val != 0.0:
                for j in range(ns_start[i], ns_end[i]):
                    score_out[rows[j]] += val
    return n_nodes


@njit(cache=True, nogil=True)
def _traverse_kernel(x, feat, thr, left, right, value, out):  # pragma: no cover
    for i in range(x.shape[0]):
        node = 0
        while left[node] >= 0:
            if x[i, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] += value[node]


# ---------------------------------------------------------------------------
# trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TreeNode:
    """Logical tree node: a split over a feature threshold, or a leaf value."""

    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def __post_init__(self) -> None:
        if self.is_leaf:
            if self.value is None or not np.isfinite(self.value):
                raise ValidationError("leaf value must be finite")
        elif self.right is None or self.feature is None or self.threshold is None:
            raise ValidationError("split node needs feature, threshold, two children")


@dataclass(frozen=True)
class Tree:
    """Array-packed decision tree; node 0 is the root, left < 0 marks leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_leaves(self) -> int:
        return int((self.left < 0).sum())

    def root(self) -> TreeNode:
        def build(i: int) -> TreeNode:
            if self.left[i] < 0:
                return TreeNode(value=float(self.value[i]))
            return TreeNode(
                feature=int(self.feature[i]),
                threshold=float(self.threshold[i]),
                left=build(int(self.left[i])),
                right=build(int(self.right[i])),
            )

        return build(0)

    def add_scores(self, x: np.ndarray, out: np.ndarray) -> None:
        _traverse_kernel(
            x, self.feature, self.threshold, self.left, self.right, self.value, out
        )

    def to_json_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.array(d["feature"], dtype=np.int32),
            threshold=np.array(d["threshold"], dtype=np.float64),
            left=np.array(d["left"], dtype=np.int32),
            right=np.array(d["right"], dtype=np.int32),
            value=np.array(d["value"], dtype=np.float64),
        )


class _Workspace:
    """Reusable per-thread buffers for tree growth."""

    def __init__(self, n_rows: int, n_features: int, n_bins: int, max_leaves: int):
        n_slots = max_leaves + 2
        max_nodes = 2 * max_leaves + 1
        self.rows = np.empty(n_rows, dtype=np.int64)
        self.rows_tmp = np.empty(n_rows, dtype=np.int64)
        self.pg = np.zeros((n_slots, n_features, n_bins), dtype=np.float64)
        self.ph = np.zeros((n_slots, n_features, n_bins), dtype=np.float64)
        self.pc = np.zeros((n_slots, n_features, n_bins), dtype=np.int32)
        self.slot_dirty = np.zeros(n_slots, dtype=np.uint8)
        self.out_feat = np.empty(max_nodes, dtype=np.int64)
        self.out_thr = np.empty(max_nodes, dtype=np.float64)
        self.out_left = np.empty(max_nodes, dtype=np.int64)
        self.out_right = np.empty(max_nodes, dtype=np.int64)
        self.out_val = np.empty(max_nodes, dtype=np.float64)

    def grow(
        self,
        binned: np.ndarray,
        th_values: np.ndarray,
        th_offset: np.ndarray,
        g: np.ndarray,
        h: np.ndarray,
        config: TrainConfig,
        score_out: np.ndarray,
    ) -> Tree:
        n_nodes = _grow_tree_kernel(
            binned, th_values, th_offset, g, h,
            config.l2_regularization, config.learning_rate,
            config.max_leaves, config.min_samples_leaf,
            self.rows, self.rows_tmp, self.pg, self.ph, self.pc, self.slot_dirty,
            self.out_feat, self.out_thr, self.out_left, self.out_right, self.out_val,
            score_out,
        )
        return Tree(
            feature=self.out_feat[:n_nodes].astype(np.int32),
            threshold=self.out_thr[:n_nodes].copy(),
            left=self.out_left[:n_nodes].astype(np.int32),
            right=self.out_right[:n_nodes].astype(np.int32),
            value=self.out_val[:n_nodes].copy(),
        )


# ---------------------------------------------------------------------------
# ensemble
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoostedEnsemble:
    """Init scores plus iterations x classes trees, with the fitted bin mapper."""

    label_set: LabelSet
    feature_names: tuple[str, ...]
    init_scores: np.ndarray
    trees: tuple[tuple[Tree, ...], ...]
    learning_rate: float
    bin_mapper: BinMapper
    config: TrainConfig
    train_losses: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        k = len(self.label_set)
        for it in self.trees:
            if len(it) != k:
                raise ValidationError("each boosting iteration needs one tree per class")

    @property
    def n_classes(self) -> int:
        return len(self.label_set)

    def raw_scores(self, values: np.ndarray) -> np.ndarray:
        values = np.ascontiguousarray(values, dtype=np.float64)
        n = values.shape[0]
        scores = np.tile(self.init_scores, (n, 1))
        for iteration in self.trees:
            for k, tree in enumerate(iteration):
                tree.add_scores(values, scores[:, k])
        return scores

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "boosted_ensemble",
            "labels": list(self.label_set.names),
            "feature_names": list(self.feature_names),
            "init_scores": self.init_scores.tolist(),
            "learning_rate": self.learning_rate,
            "bin_thresholds": [t.tolist() for t in self.bin_mapper.thresholds],
            "config": self.config.to_json_dict(),
            "train_losses": list(self.train_losses),
            "trees": [[t.to_json_dict() for t in it] for it in self.trees],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "BoostedEnsemble":
        if d.get("kind") != "boosted_ensemble" or d.get("schema_version") != 1:
            raise SchemaError("not a schema_version=1 boosted_ensemble artifact")
        return cls(
            label_set=LabelSet(tuple(d["labels"])),
            feature_names=tuple(d["feature_names"]),
            init_scores=np.array(d["init_scores"], dtype=np.float64),
            trees=tuple(
                tuple(Tree.from_json_dict(t) for t in it) for it in d["trees"]
            ),
            learning_rate=float(d["learning_rate"]),
            bin_mapper=BinMapper(
                tuple(np.array(t, dtype=np.float64) for t in d["bin_thresholds"])
            ),
            config=TrainConfig(**d["config"]),
            train_losses=tuple(d["train_losses"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), sort_keys=True) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "BoostedEnsemble":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _weighted_log_loss(p: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    picked = np.clip(p[np.arange(y.shape[0]), y], 1e-300, None)
    return float(-(w * np.log(picked)).sum() / w.sum())


def train_gbdt(
    m: FeatureMatrix,
    labels: Sequence[str],
    config: TrainConfig,
    label_set: LabelSet | None = None,
    threads: int = 1,
) -> BoostedEnsemble:
    """Train a multiclass softmax boosted ensemble.

    Init scores are the log of the (weighted) class priors.  Each
    iteration fits one tree per class on gradients p - y and hessians
    p(1 - p), scaled by the row weights.  Training is deterministic for a
    fixed config and input order, independent of `threads`.
    """
    labels = list(labels)
    if m.n_rows != len(labels):
        raise ValidationError("labels must align with matrix rows")
    present = sorted(set(labels))
    if len(present) < 2:
        raise ValidationError("training needs at least 2 classes present")
    if m.n_rows < 2 * config.min_samples_leaf:
        raise ValidationError(
            f"training needs at least {2 * config.min_samples_leaf} rows"
        )
    if label_set is not None:
        ordered = tuple(n for n in label_set.names if n in set(present))
        missing = set(present) - set(ordered)
        if missing:
            raise ValidationError(f"labels {sorted(missing)} not in the label set")
        classes = LabelSet(ordered)
    else:
        classes = LabelSet.from_labels(present)

    y = classes.encode(labels)
    k = len(classes)
    n = m.n_rows
    if config.class_weighting == ClassWeighting.BALANCED:
        w = balanced_weights(labels)
    else:
        w = np.ones(n, dtype=np.float64)

    priors = np.zeros(k, dtype=np.float64)
    for c in range(k):
        priors[c] = w[y == c].sum()
    priors /= w.sum()
    init_scores = np.log(priors)

    mapper = fit_bins(m, config.max_bins)
    binned = mapper.bin_matrix(m.values)
    th_values, th_offset = mapper.flat_thresholds()
    onehot = np.zeros((n, k), dtype=np.float64)
    onehot[np.arange(n), y] = 1.0

    n_workers = max(1, min(threads, k))
    workspaces = [
        _Workspace(n, mapper.n_features, mapper.max_n_bins, config.max_leaves)
        for _ in range(n_workers)
    ]

    def grow_classes(args: tuple[int, np.ndarray, np.ndarray, np.ndarray, list]):
        ws_idx, grad, hess, scores, out = args
        ws = workspaces[ws_idx]
        for c in range(ws_idx, k, n_workers):
            g = np.ascontiguousarray(grad[:, c])
            h = np.ascontiguousarray(hess[:, c])
            out[c] = ws.grow(binned, th_values, th_offset, g, h, config, scores[:, c])

    scores = np.tile(init_scores, (n, 1))
    losses = [_weighted_log_loss(_softmax(scores), y, w)]
    iterations: list[tuple[Tree, ...]] = []
    pool = ThreadPoolExecutor(max_workers=n_workers) if n_workers > 1 else None
    try:
        for _ in range(config.iterations):
            p = _softmax(scores)
            grad = (p - onehot) * w[:, None]
            hess = p * (1.0 - p) * w[:, None]
            round_trees: list = [None] * k
            if pool is None:
                grow_classes((0, grad, hess, scores, round_trees))
            else:
                jobs = [
                    (ws_idx, grad, hess, scores, round_trees)
                    for ws_idx in range(n_workers)
                ]
                for _ in pool.map(grow_classes, jobs):
                    pass
            iterations.append(tuple(round_trees))
            losses.append(_weighted_log_loss(_softmax(scores), y, w))
    finally:
        if pool is not None:
            pool.shutdown()

    return BoostedEnsemble(
        label_set=classes,
        feature_names=tuple(m.names),
        init_scores=init_scores,
        trees=tuple(iterations),
        learning_rate=config.learning_rate,
        bin_mapper=mapper,
        config=config,
        train_losses=tuple(losses),
    )


def _as_matrix(e: BoostedEnsemble, features) -> tuple[np.ndarray, bool]:
    if isinstance(features, FeatureVector):
        if tuple(features.names) != e.feature_names:
            raise SchemaError("feature names do not match the trained model")
        return features.values[None, :], True
    if isinstance(features, FeatureMatrix):
        if tuple(features.names) != e.feature_names:
            raise SchemaError("feature names do not match the trained model")
        return features.values, False
    arr = np.asarray(features, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.shape[1] != len(e.feature_names):
        raise SchemaError(
            f"expected {len(e.feature_names)} feature columns, got {arr.shape[1]}"
        )
    return arr, single


def predict_proba(e: BoostedEnsemble, features) -> np.ndarray:
    """Class probabilities (softmax over init + tree scores) per row.

    Accepts a FeatureVector, FeatureMatrix, or plain array; named inputs
    must match the training columns.
    """
    x, single = _as_matrix(e, features)
    p = _softmax(e.raw_scores(x))
    return p[0] if single else p


def soft_vote(p1: np.ndarray, p2: np.ndarray) -> tuple[np.ndarray, int | np.ndarray]:
    """Average two probability vectors (or row-aligned matrices) and argmax.

    Ties break toward the lowest class index.
    """
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    if p1.shape != p2.shape:
        raise ValidationError("probability shapes do not match")
    mean = 0.5 * (p1 + p2)
    if mean.ndim == 1:
        return mean, int(np.argmax(mean))
    return mean, np.argmax(mean, axis=1)
