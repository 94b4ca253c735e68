import numpy as np
import pytest

from metricvec.classifiers import (
    ClassifierConfig,
    _rbf_kernel,
    _smo_train,
    accuracy,
    knn_predict,
    knn_predict_batch,
    logreg_fit,
    logreg_loss_grad,
    logreg_predict,
    svm_dual_objective,
    svm_fit,
    svm_predict,
)

from oracles import finite_difference, svm_dual_exact


def blobs(n=20, seed=0, gap=4.0):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=(n // 2, 2))
    x1 = rng.normal(size=(n - n // 2, 2)) + gap
    x = np.vstack([x0, x1])
    y = np.array([0] * (n // 2) + [1] * (n - n // 2))
    return x, y


class TestKnn:
    def test_identity_query(self):
        x, y = blobs()
        for i in (0, 7, 15):
            assert knn_predict(x, y, x[i], 1) == y[i]

    def test_majority_vote(self):
        x = np.array([[0.0], [0.1], [0.2], [5.0]])
        y = np.array([0, 0, 1, 1])
        assert knn_predict(x, y, [0.05], 3) == 0

    def test_agrees_with_brute_scan(self):
        rng = np.random.default_rng(3)
        x, y = blobs(20, seed=1, gap=1.5)
        for _ in range(50):
            q = rng.normal(size=2) * 2
            # brute-force reference with identical tie-breaks
            d = [(float(np.linalg.norm(x[i] - q)), i) for i in range(len(x))]
            d.sort()
            top = [y[i] for _, i in d[:3]]
            counts = {}
            for cls in top:
                counts[cls] = counts.get(cls, 0) + 1
            best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
            assert knn_predict(x, y, q, 3) == best

    def test_distance_tie_breaks_to_lower_index(self):
        x = np.array([[1.0], [-1.0]])
        y = np.array([1, 0])
        assert knn_predict(x, y, [0.0], 1) == 1  # index 0 wins the tie

    def test_vote_tie_breaks_to_lower_class(self):
        x = np.array([[1.0], [-1.0]])
        y = np.array([1, 0])
        assert knn_predict(x, y, [0.0], 2) == 0

    def test_scale_invariance(self):
        x, y = blobs(16, seed=2, gap=2.0)
        rng = np.random.default_rng(4)
        queries = rng.normal(size=(10, 2))
        base = knn_predict_batch(x, y, queries, 3)
        for c in (10.0, 1e-3):
            scaled = knn_predict_batch(c * x, y, c * queries, 3)
            assert np.array_equal(base, scaled)

    def test_errors(self):
        with pytest.raises(ValueError):
            knn_predict(np.zeros((0, 2)), np.array([], dtype=int), [0, 0], 1)
        with pytest.raises(ValueError):
            knn_predict(np.zeros((2, 2)), np.array([0, 1]), [0, 0], 3)


class TestLogreg:
    def test_separable_reaches_full_accuracy(self):
        x, y = blobs(30, seed=5)
        model = logreg_fit(x, y, ClassifierConfig(kind="logreg", l2=1e-6))
        assert accuracy(logreg_predict(model, x), y) == 1.0

    def test_identical_features_predict_majority(self):
        x = np.ones((9, 3))
        y = np.array([0] * 6 + [1] * 3)
        model = logreg_fit(x, y, ClassifierConfig(kind="logreg", l2=1e-2))
        assert np.all(logreg_predict(model, x) == 0)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(12, 4))
        y = rng.integers(0, 3, size=12)
        for _ in range(20):
            w = rng.normal(scale=0.8, size=(3, 4))
            b = rng.normal(scale=0.5, size=3)
            _, g_w, g_b = logreg_loss_grad(w, b, x, y, l2=1e-2)
            fd_w = finite_difference(
                lambda p: logreg_loss_grad(p, b, x, y, 1e-2)[0], w
            )
            fd_b = finite_difference(
                lambda p: logreg_loss_grad(w, p, x, y, 1e-2)[0], b
            )
            assert np.abs(g_w - fd_w).max() / max(np.abs(fd_w).max(), 1e-8) <= 1e-5
            assert np.abs(g_b - fd_b).max() / max(np.abs(fd_b).max(), 1e-8) <= 1e-5

    def test_loss_monotone_and_gradient_small_at_end(self):
        x, y = blobs(20, seed=7)
        model = logreg_fit(x, y, ClassifierConfig(kind="logreg", tol=1e-5,
                                                  max_iters=2000))
        hist = model.loss_history
        assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))
        assert model.final_grad_norm <= 1e-5

    def test_multiclass(self):
        rng = np.random.default_rng(8)
        x = np.vstack([rng.normal(size=(10, 2)) + [0, 0],
                       rng.normal(size=(10, 2)) + [6, 0],
                       rng.normal(size=(10, 2)) + [0, 6]])
        y = np.repeat([0, 1, 2], 10)
        model = logreg_fit(x, y, ClassifierConfig(kind="logreg"))
        assert accuracy(logreg_predict(model, x), y) >= 0.95

    def test_non_finite_rejected(self):
        x = np.array([[np.nan, 0.0], [1.0, 1.0]])
        with pytest.raises(ValueError):
            logreg_fit(x, np.array([0, 1]), ClassifierConfig(kind="logreg"))


class TestSvm:
    def test_separable_any_c(self):
        x, y = blobs(20, seed=9)
        for c in (1.0, 100.0):
            cfg = ClassifierConfig(kind="svm_rbf", c_grid=(c,))
            model = svm_fit(x, y, cfg)
            assert accuracy(svm_predict(model, x), y) == 1.0

    def test_xor_needs_kernel(self):
        x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        y = np.array([0, 0, 1, 1])
        cfg = ClassifierConfig(kind="svm_rbf", c_grid=(100.0,), gamma=2.0)
        model = svm_fit(x, y, cfg)
        assert accuracy(svm_predict(model, x), y) == 1.0
        # oracle: every linear separator misclassifies at least one XOR point
        best_linear = 0
        for w1, w2, b in [(a, c, d) for a in (-1, 1) for c in (-1, 1)
                          for d in (-1.5, -0.5, 0.5, 1.5)]:
            pred = (x @ [w1, w2] + b > 0).astype(int)
            best_linear = max(best_linear, max((pred == y).mean(),
                                               (pred != y).mean()))
        assert best_linear <= 0.75

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_dual_objective_matches_active_set_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = 6
        x = rng.normal(size=(n, 2))
        y = np.where(rng.random(n) > 0.5, 1.0, -1.0)
        if abs(y.sum()) == n:
            y[0] = -y[0]
        c = 1.5
        kernel = _rbf_kernel(x, x, 0.7)
        alpha, _ = _smo_train(kernel, y, c, tol=1e-6, max_passes=20, max_iters=100000)
        got = svm_dual_objective(kernel, y, alpha)
        exact = svm_dual_exact(kernel, y, c)
        assert got == pytest.approx(exact, abs=1e-3)

    def test_kkt_box_and_complementarity(self):
        x, y01 = blobs(16, seed=11, gap=2.0)
        y = np.where(y01 == 1, 1.0, -1.0)
        c = 2.0
        kernel = _rbf_kernel(x, x, 0.5)
        alpha, bias = _smo_train(kernel, y, c, tol=1e-4, max_passes=20,
                                 max_iters=100000)
        assert np.all(alpha >= -1e-12) and np.all(alpha <= c + 1e-12)
        decision = kernel @ (alpha * y) + bias
        margins = y * decision
        tol = 1e-3
        for i in range(len(y)):
            if alpha[i] < 1e-9:
                assert margins[i] >= 1 - tol
            elif alpha[i] > c - 1e-9:
                assert margins[i] <= 1 + tol
            else:
                assert margins[i] == pytest.approx(1.0, abs=tol)

    def test_c_selection_prefers_smaller_on_tie(self):
        x, y = blobs(24, seed=12, gap=6.0)  # easy: all C values tie
        cfg = ClassifierConfig(kind="svm_rbf", c_grid=(0.5, 1.0, 10.0), seed=0)
        model = svm_fit(x, y, cfg)
        assert model.chosen_c == 0.5

    def test_single_class_constant_predictor(self):
        x = np.random.default_rng(13).normal(size=(5, 2))
        y = np.zeros(5, dtype=int)
        with pytest.warns(UserWarning):
            model = svm_fit(x, y, ClassifierConfig(kind="svm_rbf"))
        assert np.all(svm_predict(model, x) == 0)

    def test_multiclass_one_vs_rest(self):
        rng = np.random.default_rng(14)
        x = np.vstack([rng.normal(size=(8, 2)),
                       rng.normal(size=(8, 2)) + 5,
                       rng.normal(size=(8, 2)) + [5, -5]])
        y = np.repeat([0, 1, 2], 8)
        cfg = ClassifierConfig(kind="svm_rbf", c_grid=(1.0, 10.0), seed=1)
        model = svm_fit(x, y, cfg)
        assert accuracy(svm_predict(model, x), y) >= 0.95


class TestAccuracy:
    def test_values(self):
        assert accuracy([1, 1, 1], [1, 1, 1]) == 1.0
        assert accuracy([0, 0], [1, 1]) == 0.0
        assert accuracy([1, 0, 1, 1, 0, 1, 0, 1, 1, 1],
                        [1, 0, 1, 1, 1, 0, 1, 1, 1, 1]) == 0.7

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            accuracy([0, 1], [0, 1, 1])
