import warnings

import numpy as np
import pytest

import sepsisaudit.learn as learn
from sepsisaudit.errors import (
    DegenerateFolds,
    EmptyTraining,
    NonConvergenceWarning,
    SingleClassError,
)
from sepsisaudit.learn.bayes import fit_bernoulli_nb, fit_multinomial_nb
from sepsisaudit.learn.forest import fit_random_forest
from sepsisaudit.learn.linear import LinearModel, fit_ridge
from sepsisaudit.learn.neighbors import fit_knn
from sepsisaudit.metrics import roc_auc


class TestScaler:
    def test_min_max_definition(self):
        scaler = learn.fit_scaler([[40.0], [60.0], [80.0]])
        out = learn.apply_scaler(scaler, [[40.0], [60.0], [80.0]])
        assert out[:, 0].tolist() == [0.0, 0.5, 1.0]

    def test_constant_feature_maps_to_zero(self):
        scaler = learn.fit_scaler([[5.0], [5.0], [5.0]])
        assert learn.apply_scaler(scaler, [[5.0], [7.0]])[:, 0].tolist() == [0.0, 0.0]

    def test_out_of_range_clips(self):
        scaler = learn.fit_scaler([[40.0], [80.0]])
        out = learn.apply_scaler(scaler, [[90.0], [10.0]])
        assert out[:, 0].tolist() == [1.0, 0.0]

    def test_train_rows_land_in_unit_interval(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 3)) * [5, 2, 20] + [10, 2, 60]
        scaled = learn.apply_scaler(learn.fit_scaler(X), X)
        assert scaled.min() >= 0.0 and scaled.max() <= 1.0

    def test_empty_training(self):
        with pytest.raises(EmptyTraining):
            learn.fit_scaler(np.empty((0, 3)))


class TestRidge:
    def test_four_point_fixture_matches_normal_equations(self):
        X = np.array([[0.0, 0.2, 0.1], [0.3, 0.8, 0.5], [0.9, 0.1, 0.7], [1.0, 1.0, 0.2]])
        y = np.array([False, False, True, True])
        alpha = 0.5
        model = fit_ridge(X, y, alpha=alpha)
        # oracle: solve the 4x4 penalized normal equations directly
        t = np.where(y, 1.0, -1.0)
        Z = np.hstack([X, np.ones((4, 1))])
        A = Z.T @ Z + np.diag([alpha, alpha, alpha, 0.0])
        beta = np.linalg.solve(A, Z.T @ t)
        np.testing.assert_allclose(model.w, beta[:3], atol=1e-9)
        assert model.b == pytest.approx(beta[3], abs=1e-9)


class TestNaiveBayes:
    def test_multinomial_two_point_hand_computation(self):
        X = np.array([[0.5, 0.25, 0.25], [0.2, 0.4, 0.4]])
        y = np.array([True, False])
        model = fit_multinomial_nb(X, y)
        # add-1 smoothing by hand: theta_cj = (x_cj + 1) / (sum_j x_cj + 3)
        theta1 = (X[0] + 1.0) / (X[0].sum() + 3.0)
        theta0 = (X[1] + 1.0) / (X[1].sum() + 3.0)
        x = np.array([0.5, 0.25, 0.25])
        expected = float(x @ (np.log(theta1) - np.log(theta0)))  # equal priors cancel
        assert model.score(x[None, :])[0] == pytest.approx(expected, abs=1e-9)

    def test_bernoulli_binarizes_at_half(self):
        X = np.array([[0.9, 0.1, 0.6], [0.2, 0.8, 0.4], [0.7, 0.3, 0.9], [0.1, 0.6, 0.2]])
        y = np.array([True, False, True, False])
        model = fit_bernoulli_nb(X, y)
        # hand computation: counts of (feature >= 0.5) per class, add-1 over n_c + 2
        B = (X >= 0.5).astype(float)
        t1 = (B[y].sum(axis=0) + 1.0) / (2.0 + 2.0)
        t0 = (B[~y].sum(axis=0) + 1.0) / (2.0 + 2.0)
        x = np.array([[0.55, 0.45, 0.5]])
        bx = np.array([1.0, 0.0, 1.0])
        expected = float(
            bx @ (np.log(t1) - np.log(t0)) + (1 - bx) @ (np.log(1 - t1) - np.log(1 - t0))
        )
        assert model.score(x)[0] == pytest.approx(expected, abs=1e-9)


class TestScoreDefinitions:
    def test_linear_margin(self):
        model = LinearModel(w=np.array([1.0, 0.0, 0.0]), b=0.0)
        assert model.score(np.array([[0.5, 0.9, 0.3]]))[0] == pytest.approx(0.5)

    def test_knn_positive_fraction_and_k1_memorizes(self):
        X = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.9, 0.9, 0.9]])
        y = np.array([False, True, True])
        k1 = fit_knn(X, y, k=1)
        assert k1.score(X).tolist() == [0.0, 1.0, 1.0]
        k3 = fit_knn(X, y, k=3)
        assert k3.score(np.array([[0.0, 0.1, 0.0]]))[0] == pytest.approx(2 / 3)

    def test_forest_score_is_vote_fraction(self):
        rng = np.random.default_rng(1)
        X = rng.random((80, 3))
        y = X[:, 0] + 0.2 * rng.standard_normal(80) > 0.5
        model = fit_random_forest(X, y, n_trees=25, seed=3)
        probe = rng.random((10, 3))
        votes = model.tree_votes(probe)
        assert votes.shape == (10, 25)
        np.testing.assert_allclose(model.score(probe), votes.mean(axis=1), atol=1e-12)
        assert set(np.unique(votes)) <= {0.0, 1.0}


def brute_force_youden(scores, labels):
    """Try every float between/around distinct scores; return the best (lowest) cut."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    n_pos, n_neg = labels.sum(), (~labels).sum()
    distinct = np.unique(scores)
    cuts = [np.nextafter(distinct[0], -np.inf)]
    cuts += [(a + b) / 2 for a, b in zip(distinct[:-1], distinct[1:])]
    cuts += [distinct[-1]]
    best_cut, best_j = None, -np.inf
    for t in cuts:
        pred = scores > t
        j = (pred & labels).sum() / n_pos - (pred & ~labels).sum() / n_neg
        if j > best_j + 1e-15:
            best_cut, best_j = t, j
    return best_cut


class TestYouden:
    def test_separable_returns_midpoint(self):
        assert learn.youden_threshold([0.1, 0.9], [False, True]) == pytest.approx(0.5)

    def test_all_equal_predicts_all_positive(self):
        t = learn.youden_threshold([0.4, 0.4, 0.4], [True, False, True])
        assert t == np.nextafter(0.4, -np.inf)
        assert (np.array([0.4, 0.4, 0.4]) > t).all()

    def test_six_point_fixture_matches_brute_force(self):
        scores = [0.1, 0.3, 0.35, 0.5, 0.6, 0.9]
        labels = [False, True, False, True, True, False]
        assert learn.youden_threshold(scores, labels) == brute_force_youden(scores, labels)

    def test_random_instances_match_brute_force(self):
        rng = np.random.default_rng(19)
        for _ in range(50):
            n = int(rng.integers(4, 30))
            scores = rng.choice([0.1, 0.2, 0.5, 0.5, 0.8], size=n)
            labels = rng.random(n) < 0.5
            if labels.all() or not labels.any():
                continue
            assert learn.youden_threshold(scores, labels) == brute_force_youden(scores, labels)

    def test_single_class_raises(self):
        with pytest.raises(SingleClassError):
            learn.youden_threshold([0.1, 0.2], [True, True])


class TestCrossValidate:
    def test_single_grid_point_chosen_with_five_fold_aucs(self):
        X, y = learn.separable_benchmark(n=60, seed=0)
        Xs = learn.apply_scaler(learn.fit_scaler(X), X)
        params, record = learn.cross_validate("ridge", [{"alpha": 1.0}], Xs, y, folds=5, seed=1)
        assert params == {"alpha": 1.0}
        assert record.chosen_index == 0
        assert len(record.fold_aucs[0]) == 5

    def test_weak_regularization_beats_strong_on_separable_data(self):
        # strong L1 zeroes every weight (constant scores, AUC 0.5); weak separates.
        # strong sits first in the grid so the tie rule cannot mask the comparison.
        X, y = learn.separable_benchmark(n=120, seed=4)
        Xs = learn.apply_scaler(learn.fit_scaler(X), X)
        grid = [{"alpha": 50.0}, {"alpha": 0.01}]
        params, record = learn.cross_validate("sgd_l1", grid, Xs, y, folds=5, seed=2)
        assert params == {"alpha": 0.01}
        assert record.mean_aucs[1] > record.mean_aucs[0]
        assert record.mean_aucs[0] == pytest.approx(0.5, abs=0.1)

    def test_duplicate_grid_points_pick_first(self):
        X, y = learn.separable_benchmark(n=60, seed=5)
        Xs = learn.apply_scaler(learn.fit_scaler(X), X)
        params, record = learn.cross_validate("ridge", [{"alpha": 1.0}, {"alpha": 1.0}], Xs, y, folds=5, seed=3)
        assert record.chosen_index == 0

    def test_degenerate_folds(self):
        X = np.random.default_rng(0).random((10, 3))
        y = np.zeros(10, dtype=bool)
        y[0] = True
        with pytest.raises(DegenerateFolds):
            learn.cross_validate("ridge", [{"alpha": 1.0}], X, y, folds=5, seed=0)

    def test_folds_below_two_rejected(self):
        X, y = learn.separable_benchmark(n=20, seed=0)
        with pytest.raises(ValueError):
            learn.cross_validate("ridge", [{"alpha": 1.0}], X, y, folds=1, seed=0)


class TestTrain:
    def test_logreg_separable_reaches_perfect_auc(self):
        X, y = learn.separable_benchmark(n=120, seed=6)
        Xte, yte = learn.separable_benchmark(n=80, seed=7)
        model = learn.train(learn.ClassifierSpec("logistic_regression", seed=0), X, y)
        assert roc_auc(model.decision_scores(Xte), yte) == 1.0

    def test_single_class_training_raises(self):
        X = np.random.default_rng(0).random((10, 3))
        with pytest.raises(SingleClassError):
            learn.train(learn.ClassifierSpec("ridge", seed=0), X, np.ones(10, dtype=bool))

    def test_nonconvergence_is_warning_carrying_success(self):
        rng = np.random.default_rng(8)
        X = rng.random((40, 3))
        y = rng.random(40) < 0.5  # unlearnable: perceptron cannot settle
        with pytest.warns(NonConvergenceWarning):
            model = learn.train(learn.ClassifierSpec("perceptron", seed=1, epochs=3), X, y)
        assert model.decision_scores(X).shape == (40,)
        assert any("perceptron" in w for w in model.fit_warnings)

    def test_spec_validation(self):
        with pytest.raises(ValueError, match="odd"):
            learn.ClassifierSpec("knn", grid=({"k": 4},))
        with pytest.raises(ValueError, match="unknown classifier"):
            learn.ClassifierSpec("quantum_svm")
        with pytest.raises(ValueError):
            learn.ClassifierSpec("ridge", grid=({"alpha": -1.0},))

    def test_knn_scores_are_neighbor_fractions(self):
        X, y = learn.separable_benchmark(n=90, seed=9)
        model = learn.train(learn.ClassifierSpec("knn", grid=({"k": 5},), seed=0), X, y)
        scores = model.decision_scores(X)
        np.testing.assert_allclose(scores * 5, np.round(scores * 5), atol=1e-12)


@pytest.mark.parametrize("family", learn.FAMILY_NAMES)
def test_row_order_invariance(family):
    rng = np.random.default_rng(23)
    X = rng.random((48, 3)) * [24, 4, 77] + [0, 0, 18]
    risk = 1 / (1 + np.exp(-(X[:, 0] / 6 + X[:, 1] - 5)))
    y = rng.random(48) < risk
    if y.all() or not y.any():
        pytest.skip("degenerate draw")
    perm = rng.permutation(48)
    probe = rng.random((12, 3)) * [24, 4, 77] + [0, 0, 18]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = learn.train(learn.ClassifierSpec(family, seed=5, epochs=10), X, y)
        b = learn.train(learn.ClassifierSpec(family, seed=5, epochs=10), X[perm], y[perm])
    assert np.array_equal(a.decision_scores(probe), b.decision_scores(probe))
    assert a.threshold == b.threshold
    assert a.cv_record.chosen_params == b.cv_record.chosen_params


@pytest.mark.parametrize("family", ["ridge", "logistic_regression", "sgd_l2", "random_forest", "svc_rbf"])
def test_same_seed_same_model(family):
    X, y = learn.separable_benchmark(n=60, seed=10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = learn.train(learn.ClassifierSpec(family, seed=9, epochs=10), X, y)
        b = learn.train(learn.ClassifierSpec(family, seed=9, epochs=10), X, y)
    probe = np.random.default_rng(0).random((8, 3)) * [24, 4, 77]
    assert np.array_equal(a.decision_scores(probe), b.decision_scores(probe))


def central_difference(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        up, down = x.copy(), x.copy()
        up[i] += h
        down[i] -= h
        g[i] = (f(up) - f(down)) / (2 * h)
    return g


class TestGradients:
    def _data(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.random((30, 3))
        y = rng.random(30) < 0.5
        wb = rng.normal(size=4) * 0.8 + np.array([0.3, -0.4, 0.5, 0.1])
        return X, y, wb

    def test_logistic_gradient_matches_finite_differences(self):
        for seed in range(5):
            X, y, wb = self._data(seed)
            analytic = learn.logistic_gradient(wb, X, y, l2=0.1)
            numeric = central_difference(lambda v: learn.logistic_objective(v, X, y, 0.1), wb)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)

    @pytest.mark.parametrize("penalty", ["l1", "l2", "en"])
    def test_hinge_gradient_matches_finite_differences(self, penalty):
        for seed in range(5):
            X, y, wb = self._data(100 + seed)
            analytic = learn.hinge_gradient(wb, X, y, alpha=0.05, penalty=penalty)
            numeric = central_difference(
                lambda v: learn.hinge_objective(v, X, y, alpha=0.05, penalty=penalty), wb
            )
            np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)
