from __future__ import annotations

import json
from dataclasses import replace

import numpy as np
import pytest

from limbwise.boosting import (
    BinMapper,
    BoostedEnsemble,
    ClassWeighting,
    TrainConfig,
    Tree,
    UNWEIGHTED_CONFIG,
    WEIGHTED_CONFIG,
    _build_slot,
    balanced_weights,
    fit_bins,
    predict_proba,
    soft_vote,
    train_gbdt,
)
from limbwise.core import ConfigError, LabelSet, Limb, SchemaError, Side, ValidationError, WindowMeta
from limbwise.features import FeatureMatrix


def _matrix(values, labels):
    values = np.asarray(values, dtype=np.float64)
    names = tuple(f"f{i}" for i in range(values.shape[1]))
    meta = tuple(
        WindowMeta(f"s{i % 6}", Limb.ARM, Side.LEFT, l) for i, l in enumerate(labels)
    )
    return FeatureMatrix(values, names, meta)


def _toy(n=120, n_features=3, seed=0):
    """Two classes where feature 0 equals the class index."""
    rng = np.random.default_rng(seed)
    labels = ["a" if i % 2 == 0 else "b" for i in range(n)]
    X = rng.normal(size=(n, n_features))
    X[:, 0] = [0.0 if l == "a" else 1.0 for l in labels]
    return _matrix(X, labels), labels


class TestBalancedWeights:
    def test_90_10_formula(self):
        labels = ["a"] * 90 + ["b"] * 10
        w = balanced_weights(labels)
        assert w[0] == pytest.approx(100 / (2 * 90), abs=1e-10)
        assert w[-1] == pytest.approx(5.0)

    def test_balanced_classes_give_unit_weights(self):
        w = balanced_weights(["a", "b"] * 25)
        assert np.allclose(w, 1.0)

    def test_single_class_warns_and_returns_ones(self):
        with pytest.warns(UserWarning, match="one class"):
            w = balanced_weights(["a"] * 5)
        assert (w == 1.0).all()

    def test_empty_is_error(self):
        with pytest.raises(ValidationError):
            balanced_weights([])


class TestFitBins:
    def test_binary_column(self):
        values = np.array([[0.0], [1.0], [0.0], [1.0]])
        mapper = fit_bins(values)
        assert mapper.n_bins(0) == 2
        assert mapper.thresholds[0].tolist() == [0.5]

    def test_constant_column_single_bin(self):
        mapper = fit_bins(np.full((5, 1), 3.0))
        assert mapper.n_bins(0) == 1
        assert mapper.thresholds[0].size == 0

    def test_cap_at_max_bins(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=(10_000, 1))
        mapper = fit_bins(values, max_bins=255)
        assert mapper.n_bins(0) == 255

    def test_bin_rule_value_at_threshold_goes_left(self):
        mapper = BinMapper((np.array([0.5, 1.5]),))
        assert mapper.bin_column(0, np.array([0.0, 0.5, 1.0, 1.5, 2.0])).tolist() == [
            0, 0, 1, 1, 2,
        ]

    def test_thresholds_strictly_increasing(self):
        rng = np.random.default_rng(1)
        values = np.round(rng.normal(size=(3000, 2)), 1)
        mapper = fit_bins(values)
        for th in mapper.thresholds:
            assert (np.diff(th) > 0).all()


class TestTrainConfig:
    def test_defaults(self):
        cfg = TrainConfig()
        assert cfg.iterations == 100
        assert cfg.learning_rate == 0.1
        assert cfg.max_leaves == 31
        assert cfg.min_samples_leaf == 20
        assert cfg.max_bins == 255

    def test_presets(self):
        assert WEIGHTED_CONFIG.class_weighting == ClassWeighting.BALANCED
        assert WEIGHTED_CONFIG.l2_regularization == 0.0
        assert UNWEIGHTED_CONFIG.class_weighting == ClassWeighting.NONE
        assert UNWEIGHTED_CONFIG.l2_regularization == 1.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"iterations": -1},
            {"learning_rate": 0.0},
            {"max_leaves": 1},
            {"min_samples_leaf": 0},
            {"max_bins": 256},
            {"l2_regularization": -0.5},
        ],
    )
    def test_invalid_values_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            TrainConfig(**kwargs)


class TestTrainGbdt:
    def test_zero_iterations_predicts_priors(self):
        m, labels = _toy(100)
        labels = ["a"] * 70 + ["b"] * 30
        cfg = TrainConfig(iterations=0, class_weighting=ClassWeighting.NONE)
        e = train_gbdt(m, labels, cfg)
        p = predict_proba(e, m.values[0])
        assert p == pytest.approx([0.7, 0.3], abs=1e-12)

    def test_zero_iterations_balanced_priors_are_uniform(self):
        m, _ = _toy(100)
        labels = ["a"] * 70 + ["b"] * 30
        e = train_gbdt(m, labels, TrainConfig(iterations=0))
        p = predict_proba(e, m.values[0])
        assert p == pytest.approx([0.5, 0.5], abs=1e-12)

    def test_separable_toy_reaches_perfect_accuracy_within_20_iterations(self):
        m, labels = _toy()
        e = train_gbdt(m, labels, replace(WEIGHTED_CONFIG, iterations=20))
        p = predict_proba(e, m)
        pred = [e.label_set.names[i] for i in p.argmax(axis=1)]
        assert pred == labels

    def test_training_log_loss_non_increasing(self):
        m, labels = _toy(200, seed=3)
        e = train_gbdt(m, labels, replace(UNWEIGHTED_CONFIG, iterations=30))
        losses = e.train_losses
        assert len(losses) == 31
        assert all(a >= b - 1e-12 for a, b in zip(losses, losses[1:]))

    def test_single_class_rejected(self):
        m, _ = _toy(60)
        with pytest.raises(ValidationError):
            train_gbdt(m, ["a"] * 60, TrainConfig())

    def test_too_few_rows_rejected(self):
        m, labels = _toy(30)
        with pytest.raises(ValidationError):
            train_gbdt(m, labels, TrainConfig(min_samples_leaf=20))

    def test_thread_count_is_bit_identical(self):
        m, labels = _toy(400, n_features=8, seed=4)
        cfg = replace(WEIGHTED_CONFIG, iterations=10)
        e1 = train_gbdt(m, labels, cfg, threads=1)
        e4 = train_gbdt(m, labels, cfg, threads=4)
        assert json.dumps(e1.to_json_dict(), sort_keys=True) == json.dumps(
            e4.to_json_dict(), sort_keys=True
        )

    def test_repeat_runs_identical(self):
        m, labels = _toy(200, seed=5)
        cfg = replace(UNWEIGHTED_CONFIG, iterations=8)
        a = train_gbdt(m, labels, cfg)
        b = train_gbdt(m, labels, cfg)
        assert json.dumps(a.to_json_dict(), sort_keys=True) == json.dumps(
            b.to_json_dict(), sort_keys=True
        )

    def test_trees_count_is_iterations_times_classes(self):
        m, labels = _toy(120)
        e = train_gbdt(m, labels, replace(WEIGHTED_CONFIG, iterations=7))
        assert len(e.trees) == 7
        assert all(len(it) == 2 for it in e.trees)

    def test_label_set_order_follows_run_label_set(self):
        m, labels = _toy(120)
        ls = LabelSet(("b", "a"))
        e = train_gbdt(m, labels, replace(WEIGHTED_CONFIG, iterations=2), label_set=ls)
        assert e.label_set.names == ("b", "a")

    def test_balanced_weighting_equalizes_init_scores(self):
        m, _ = _toy(100)
        labels = ["a"] * 90 + ["b"] * 10
        e = train_gbdt(m, labels, TrainConfig(iterations=0))
        assert e.init_scores[0] == pytest.approx(e.init_scores[1], abs=1e-12)


class TestPredictProba:
    def test_probabilities_sum_to_one(self):
        m, labels = _toy(200, n_features=5, seed=6)
        e = train_gbdt(m, labels, replace(WEIGHTED_CONFIG, iterations=15))
        rng = np.random.default_rng(7)
        p = predict_proba(e, rng.normal(size=(500, 5)))
        assert np.abs(p.sum(axis=1) - 1.0).max() < 1e-9
        assert (p >= 0).all()

    def test_zero_leaf_tree_changes_nothing(self):
        m, labels = _toy(120)
        e = train_gbdt(m, labels, replace(WEIGHTED_CONFIG, iterations=3))
        zero_tree = Tree(
            feature=np.array([-1], dtype=np.int32),
            threshold=np.array([np.nan]),
            left=np.array([-1], dtype=np.int32),
            right=np.array([-1], dtype=np.int32),
            value=np.array([0.0]),
        )
        padded = BoostedEnsemble(
            label_set=e.label_set,
            feature_names=e.feature_names,
            init_scores=e.init_scores,
            trees=e.trees + ((zero_tree, zero_tree),),
            learning_rate=e.learning_rate,
            bin_mapper=e.bin_mapper,
            config=e.config,
        )
        assert np.array_equal(predict_proba(e, m), predict_proba(padded, m))

    def test_schema_mismatch(self):
        m, labels = _toy(120)
        e = train_gbdt(m, labels, replace(WEIGHTED_CONFIG, iterations=1))
        with pytest.raises(SchemaError):
            predict_proba(e, np.zeros((4, 99)))
        other = FeatureMatrix(m.values, tuple(f"g{i}" for i in range(3)), m.meta)
        with pytest.raises(SchemaError):
            predict_proba(e, other)


class TestMonotoneInvariance:
    def test_training_row_predictions_depend_only_on_bin_ranks(self):
        # a strictly monotone per-feature transform re-fit end to end
        # leaves training-row predictions bit-identical
        m, labels = _toy(200, n_features=4, seed=11)
        cfg = replace(UNWEIGHTED_CONFIG, iterations=10)
        transformed = FeatureMatrix(m.values**3, m.names, m.meta)
        e_raw = train_gbdt(m, labels, cfg)
        e_cubed = train_gbdt(transformed, labels, cfg)
        assert np.array_equal(
            predict_proba(e_raw, m), predict_proba(e_cubed, transformed)
        )


class TestHistogramSubtraction:
    def test_sibling_histograms_add_to_parent(self):
        rng = np.random.default_rng(8)
        n, F, B = 500, 6, 16
        binned = rng.integers(0, B, size=(F, n)).astype(np.uint8)
        g = rng.normal(size=n)
        h = np.abs(rng.normal(size=n))
        split = rng.permutation(n)
        left = np.sort(split[: n // 3]).astype(np.int64)
        right = np.sort(split[n // 3 :]).astype(np.int64)

        def build(rows_):
            pg = np.zeros((1, F, B))
            ph = np.zeros((1, F, B))
            pc = np.zeros((1, F, B), dtype=np.int32)
            _build_slot(binned, rows_, 0, rows_.shape[0], g, h, pg, ph, pc, 0)
            return pg[0], ph[0], pc[0]

        pg, ph, pc = build(np.arange(n, dtype=np.int64))
        lg, lh, lc = build(left)
        rg, rh, rc = build(right)
        assert np.array_equal(lc + rc, pc)  # counts are exact integers
        assert np.allclose(lg + rg, pg, rtol=1e-12, atol=1e-12)
        assert np.allclose(lh + rh, ph, rtol=1e-12, atol=1e-12)


class TestSoftVote:
    def test_elementwise_mean_and_argmax(self):
        a = np.array([0.8, 0.2])
        b = np.array([0.6, 0.4])
        p, cls = soft_vote(a, b)
        assert np.array_equal(p, 0.5 * (a + b))
        assert np.allclose(p, [0.7, 0.3])
        assert cls == 0

    def test_idempotent(self):
        v = np.array([0.25, 0.75])
        p, cls = soft_vote(v, v)
        assert np.array_equal(p, v)
        assert cls == 1

    def test_tie_breaks_to_lowest_index(self):
        p, cls = soft_vote(np.array([0.5, 0.5]), np.array([0.5, 0.5]))
        assert cls == 0

    def test_matrix_form(self):
        a = np.array([[0.9, 0.1], [0.2, 0.8]])
        b = np.array([[0.7, 0.3], [0.4, 0.6]])
        p, cls = soft_vote(a, b)
        assert np.allclose(p, [[0.8, 0.2], [0.3, 0.7]])
        assert cls.tolist() == [0, 1]

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            soft_vote(np.array([0.5, 0.5]), np.array([1.0]))


class TestSerialization:
    def test_round_trip_preserves_predictions(self, tmp_path):
        m, labels = _toy(200, n_features=4, seed=9)
        e = train_gbdt(m, labels, replace(UNWEIGHTED_CONFIG, iterations=12))
        path = tmp_path / "model.json"
        e.save(path)
        loaded = BoostedEnsemble.load(path)
        assert np.array_equal(predict_proba(loaded, m), predict_proba(e, m))
        assert loaded.label_set.names == e.label_set.names

    def test_wrong_kind_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"kind": "other", "schema_version": 1}')
        with pytest.raises(SchemaError):
            BoostedEnsemble.load(path)
