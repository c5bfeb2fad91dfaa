import math

import numpy as np
import pytest

from hetvec.classify import (
    ConfusionMatrix,
    balanced_subsample,
    evaluate,
    load_model,
    logreg_loss_and_grad,
    metrics_report,
    parse_metrics_report,
    predict,
    save_model,
    split_dataset,
    train_logreg,
)
from hetvec.errors import ConfigError, TrainingDiverged
from hetvec.features import FeatureRow


def make_rows(n_pos, n_neg, dim=3, seed=0):
    rng = np.random.default_rng(seed)
    rows = [
        FeatureRow(f"p{i}", "integrated", rng.normal(1.0, 1.0, dim), 1) for i in range(n_pos)
    ]
    rows += [
        FeatureRow(f"n{i}", "integrated", rng.normal(-1.0, 1.0, dim), 0) for i in range(n_neg)
    ]
    return rows


class TestSplit:
    def test_stratified_80_20(self):
        rows = make_rows(40, 60)
        train, test = split_dataset(rows, 0.2, seed=1)
        assert len(train) == 80 and len(test) == 20
        assert abs(sum(r.label for r in test) - 8) <= 1
        assert {r.author for r in train} | {r.author for r in test} == {r.author for r in rows}
        assert not ({r.author for r in train} & {r.author for r in test})

    def test_same_seed_identical(self):
        rows = make_rows(30, 30)
        t1 = split_dataset(rows, 0.25, seed=5)
        t2 = split_dataset(rows, 0.25, seed=5)
        assert [r.author for r in t1[0]] == [r.author for r in t2[0]]
        assert [r.author for r in t1[1]] == [r.author for r in t2[1]]

    def test_degenerate_fraction_errors(self):
        rows = make_rows(5, 5)
        with pytest.raises(ConfigError):
            split_dataset(rows, 0.999, seed=0)

    def test_single_class_errors(self):
        rows = make_rows(10, 0)
        with pytest.raises(ConfigError):
            split_dataset(rows, 0.3, seed=0)


class TestBalancedSubsample:
    def test_ratio_one(self):
        rows = balanced_subsample(make_rows(10, 0), make_rows(0, 1000), 1.0, seed=3)
        assert sum(r.label for r in rows) == 10
        assert sum(1 - r.label for r in rows) == 10

    def test_paper_style_ceiling(self):
        pos = make_rows(4060, 0, dim=1)
        neg = make_rows(0, 6000, dim=1)
        rows = balanced_subsample(pos, neg, 1.12, seed=1)
        n_neg = sum(1 - r.label for r in rows)
        assert n_neg == math.ceil(1.12 * 4060)  # 4548, within rounding of 4550
        assert abs(n_neg - 4550) <= 5

    def test_cap_with_warning(self):
        with pytest.warns(UserWarning, match="negatives available"):
            rows = balanced_subsample(make_rows(10, 0), make_rows(0, 3), 1.0, seed=2)
        assert sum(1 - r.label for r in rows) == 3

    def test_without_replacement(self):
        rows = balanced_subsample(make_rows(5, 0), make_rows(0, 100), 2.0, seed=4)
        negs = [r.author for r in rows if r.label == 0]
        assert len(negs) == len(set(negs)) == 10

    def test_deterministic(self):
        a = balanced_subsample(make_rows(5, 0), make_rows(0, 50), 1.0, seed=9)
        b = balanced_subsample(make_rows(5, 0), make_rows(0, 50), 1.0, seed=9)
        assert [r.author for r in a] == [r.author for r in b]


class TestTrainLogreg:
    def test_separable_reaches_full_accuracy(self):
        rows = [FeatureRow(f"n{i}", "m", np.array([-1.0]), 0) for i in range(50)]
        rows += [FeatureRow(f"p{i}", "m", np.array([1.0]), 1) for i in range(50)]
        model = train_logreg(rows, lr=0.5, max_iters=3000)
        _, preds = predict(model, rows)
        assert (preds == [r.label for r in rows]).all()

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(20):
            X = rng.normal(size=(25, 4))
            y = (rng.random(25) > 0.5).astype(float)
            w = rng.normal(size=4)
            b = float(rng.normal())
            _, gw, gb = logreg_loss_and_grad(X, y, w, b, l2=0.0)
            eps = 1e-6
            for d in range(4):
                wp, wm = w.copy(), w.copy()
                wp[d] += eps
                wm[d] -= eps
                lp, _, _ = logreg_loss_and_grad(X, y, wp, b, 0.0)
                lm, _, _ = logreg_loss_and_grad(X, y, wm, b, 0.0)
                fd = (lp - lm) / (2 * eps)
                worst = max(worst, abs(fd - gw[d]) / max(abs(fd), abs(gw[d]), 1e-10))
            lp, _, _ = logreg_loss_and_grad(X, y, w, b + eps, 0.0)
            lm, _, _ = logreg_loss_and_grad(X, y, w, b - eps, 0.0)
            fd = (lp - lm) / (2 * eps)
            worst = max(worst, abs(fd - gb) / max(abs(fd), abs(gb), 1e-10))
        assert worst < 1e-6

    def test_loss_monotone_at_small_lr(self):
        rows = make_rows(40, 40, dim=4, seed=2)
        model = train_logreg(rows, lr=0.01, max_iters=500)
        losses = model.loss_history
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_single_class_rejected(self):
        rows = make_rows(10, 0)
        with pytest.raises(ConfigError):
            train_logreg(rows)

    def test_divergence_detected(self):
        rows = make_rows(20, 20, dim=2, seed=3)
        with pytest.raises(TrainingDiverged):
            train_logreg(rows, lr=1e12, max_iters=50)

    def test_constant_feature_tolerated(self):
        rows = [FeatureRow(f"x{i}", "m", np.array([1.0, float(i % 2)]), i % 2) for i in range(20)]
        model = train_logreg(rows, lr=0.5, max_iters=500)
        assert np.isfinite(model.weights).all()


class TestPredict:
    def test_zero_model_gives_half(self):
        rows = make_rows(5, 5)
        model = train_logreg(rows, lr=0.1, max_iters=1)
        model.weights[:] = 0.0
        model.bias = 0.0
        probs, preds = predict(model, rows)
        assert np.allclose(probs, 0.5)
        assert (preds == 1).all()  # 0.5 >= threshold

    def test_monotone_in_positive_weight_feature(self):
        rows = make_rows(20, 20, dim=1, seed=5)
        model = train_logreg(rows, lr=0.5, max_iters=2000)
        assert model.weights[0] > 0
        grid = [FeatureRow(f"g{i}", "m", np.array([float(i)]), 0) for i in range(-3, 4)]
        probs, _ = predict(model, grid)
        assert (np.diff(probs) >= 0).all()

    def test_length_mismatch(self):
        rows = make_rows(5, 5, dim=3)
        model = train_logreg(rows, lr=0.1, max_iters=5)
        with pytest.raises(ConfigError):
            predict(model, make_rows(2, 2, dim=4))


class TestEvaluate:
    def test_perfect(self):
        cm = evaluate([1, 0, 1], [1, 0, 1])
        assert cm.accuracy == 1.0 and cm.fnr == 0.0 and cm.degenerate == ()

    def test_hand_counts(self):
        cm = evaluate([1, 0, 0, 1], [1, 1, 0, 0])
        assert (cm.tp, cm.fn, cm.tn, cm.fp) == (1, 1, 1, 1)
        assert cm.accuracy == 0.5 and cm.precision == 0.5 and cm.recall == 0.5
        assert cm.fnr == 0.5 and cm.fdr == 0.5 and cm.fpr_actual == 0.5

    def test_degenerate_all_negative_predictions(self):
        cm = evaluate([0, 0, 0], [1, 1, 1])
        assert cm.recall == 0.0 and cm.precision == 0.0
        assert "precision" in cm.degenerate and "fpr_actual" in cm.degenerate
        assert cm.fnr == 1.0

    def test_counts_sum(self):
        rng = np.random.default_rng(0)
        preds = rng.integers(0, 2, 50)
        ys = rng.integers(0, 2, 50)
        cm = evaluate(preds, ys)
        assert cm.tp + cm.fp + cm.tn + cm.fn == 50
        assert 0.0 <= cm.accuracy <= 1.0
        assert cm.fnr == pytest.approx(1.0 - cm.recall)

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            evaluate([1, 0], [1])


class TestModelIO:
    def test_round_trip(self, tmp_path):
        rows = make_rows(20, 20, dim=3, seed=1)
        model = train_logreg(rows, lr=0.2, max_iters=200, seed=17)
        path = tmp_path / "model.txt"
        save_model(model, path)
        loaded = load_model(path)
        assert np.array_equal(loaded.weights, model.weights)
        assert loaded.bias == model.bias
        assert np.array_equal(loaded.feat_mean, model.feat_mean)
        assert np.array_equal(loaded.feat_std, model.feat_std)
        assert loaded.seed == 17 and loaded.feature_mode == "integrated"
        p1, _ = predict(model, rows)
        p2, _ = predict(loaded, rows)
        assert np.array_equal(p1, p2)

    def test_metrics_report_parses(self):
        cm = evaluate([1, 0, 0, 1], [1, 1, 0, 0])
        got = parse_metrics_report(metrics_report(cm))
        assert got["accuracy"] == 0.5
        assert got["tp"] == 1 and got["fn"] == 1 and got["fp"] == 1 and got["tn"] == 1
