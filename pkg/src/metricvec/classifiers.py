"""Lightweight classifiers over the metric-vector features.

All three are deterministic: kNN with documented tie-breaks, multinomial
logistic regression by full-batch descent with a backtracking line
search, and an RBF-kernel SVM trained by sequential minimal optimization
with one-vs-rest multiclass and cross-validated C.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ClassifierConfig",
    "knn_predict",
    "knn_predict_batch",
    "LogisticRegressionModel",
    "logreg_fit",
    "logreg_predict",
    "logreg_loss_grad",
    "SvmModel",
    "svm_fit",
    "svm_predict",
    "svm_dual_objective",
    "accuracy",
    "fit_predict",
]

DEFAULT_C_GRID = (1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6)


@dataclass(frozen=True)
class ClassifierConfig:
    kind: str = "knn"  # knn | logreg | svm_rbf
    k: int = 3
    c_grid: tuple[float, ...] = DEFAULT_C_GRID
    gamma: float | str = "scale"
    l2: float = 1e-4
    max_iters: int = 500
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("knn", "logreg", "svm_rbf"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.c_grid or list(self.c_grid) != sorted(self.c_grid):
            raise ValueError("c_grid must be nonempty and ascending")


# ----------------------------------------------------------------------
# k nearest neighbors


def knn_predict(train_x, train_y, query, k: int) -> int:
    """Majority vote over the k nearest training points.

    Distance ties break toward the lower training index, vote ties toward
    the lower class index.
    """
    train_x = np.asarray(train_x, dtype=float)
    train_y = np.asarray(train_y)
    if train_x.shape[0] == 0:
        raise ValueError("empty training set")
    if k > train_x.shape[0]:
        raise ValueError(f"k={k} exceeds {train_x.shape[0]} training points")
    d = np.sqrt(((train_x - np.asarray(query, dtype=float)) ** 2).sum(axis=1))
    nearest = np.argsort(d, kind="stable")[:k]  # stable sort = index tie-break
    votes = np.bincount(train_y[nearest])
    return int(votes.argmax())  # argmax takes the first (lowest) class on ties


def knn_predict_batch(train_x, train_y, queries, k: int) -> np.ndarray:
    return np.array([knn_predict(train_x, train_y, q, k) for q in np.asarray(queries)])


# ----------------------------------------------------------------------
# multinomial logistic regression


@dataclass
class LogisticRegressionModel:
    weights: np.ndarray  # (n_classes, n_features)
    bias: np.ndarray  # (n_classes,)
    class_count: int
    final_grad_norm: float = 0.0
    loss_history: list[float] = field(default_factory=list)


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    hi = scores.max(axis=1, keepdims=True)
    return scores - hi - np.log(np.exp(scores - hi).sum(axis=1, keepdims=True))


def logreg_loss_grad(weights, bias, x, y, l2):
    """Mean cross-entropy with an L2 penalty on the weights (not the bias)."""
    scores = x @ weights.T + bias
    log_p = _log_softmax(scores)
    n = x.shape[0]
    loss = -log_p[np.arange(n), y].mean() + 0.5 * l2 * float((weights**2).sum())
    p = np.exp(log_p)
    p[np.arange(n), y] -= 1.0
    g_w = p.T @ x / n + l2 * weights
    g_b = p.sum(axis=0) / n
    return loss, g_w, g_b


def logreg_fit(train_x, train_y, config: ClassifierConfig) -> LogisticRegressionModel:
    """Full-batch descent with Armijo backtracking until the gradient is flat."""
    x = np.asarray(train_x, dtype=float)
    y = np.asarray(train_y)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite features")
    k = int(y.max()) + 1
    if len(set(y.tolist())) < 2:
        raise ValueError("need at least 2 classes to fit")
    w = np.zeros((k, x.shape[1]))
    b = np.zeros(k)
    loss, g_w, g_b = logreg_loss_grad(w, b, x, y, config.l2)
    history = [loss]
    step = 1.0
    grad_norm = float(np.sqrt((g_w**2).sum() + (g_b**2).sum()))
    for _ in range(config.max_iters):
        if grad_norm <= config.tol:
            break
        # Backtracking: shrink until the Armijo condition holds.
        step = min(step * 2.0, 1e4)
        while True:
            w_new = w - step * g_w
            b_new = b - step * g_b
            new_loss, g_w_new, g_b_new = logreg_loss_grad(w_new, b_new, x, y, config.l2)
            if new_loss <= loss - 1e-4 * step * grad_norm**2 or step < 1e-12:
                break
            step *= 0.5
        w, b, loss, g_w, g_b = w_new, b_new, new_loss, g_w_new, g_b_new
        history.append(loss)
        grad_norm = float(np.sqrt((g_w**2).sum() + (g_b**2).sum()))
    return LogisticRegressionModel(w, b, k, grad_norm, history)


def logreg_predict(model: LogisticRegressionModel, x) -> np.ndarray:
    scores = np.asarray(x, dtype=float) @ model.weights.T + model.bias
    return scores.argmax(axis=1)


# ----------------------------------------------------------------------
# SVM with RBF kernel, trained by SMO


@dataclass
class _BinarySvm:
    alpha: np.ndarray
    bias: float
    support_x: np.ndarray
    support_y: np.ndarray  # in {-1, +1}
    gamma: float
    c: float

    def decision(self, x) -> np.ndarray:
        k = _rbf_kernel(np.asarray(x, dtype=float), self.support_x, self.gamma)
        return k @ (self.alpha * self.support_y) + self.bias


@dataclass
class SvmModel:
    binaries: list[_BinarySvm]
    classes: np.ndarray
    class_count: int
    gamma: float
    chosen_c: float
    constant: int | None = None  # set when training data had a single class

    def decision_matrix(self, x) -> np.ndarray:
        return np.stack([b.decision(x) for b in self.binaries], axis=1)


def _rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    aa = (a**2).sum(axis=1)[:, None]
    bb = (b**2).sum(axis=1)[None, :]
    sq = np.maximum(aa + bb - 2.0 * a @ b.T, 0.0)
    return np.exp(-gamma * sq)


def _resolve_gamma(x: np.ndarray, gamma: float | str) -> float:
    if gamma == "scale":
        var = float(x.var())
        return 1.0 / (x.shape[1] * var) if var > 0 else 1.0
    return float(gamma)


def svm_dual_objective(kernel: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """Dual objective sum(alpha) - 0.5 * alpha' Q alpha with Q = yy' * K."""
    q = kernel * np.outer(y, y)
    return float(alpha.sum() - 0.5 * alpha @ q @ alpha)


def _smo_train(kernel: np.ndarray, y: np.ndarray, c: float, tol: float = 1e-3,
               max_passes: int = 10, max_iters: int = 200000) -> tuple[np.ndarray, float]:
    """Sequential minimal optimization on a precomputed kernel.

    Deterministic variant of the classic two-variable algorithm: the second
    index first maximizes |E_i - E_j|, then falls back to scanning non-bound
    indices and finally all indices in ascending order. Non-positive
    curvature pairs are resolved by evaluating both segment endpoints.
    """
    n = len(y)
    alpha = np.zeros(n)
    bias = 0.0
    errors = -y.astype(float)  # decision(x_i) - y_i with alpha = 0
    iters = 0

    def take_step(i: int, j: int) -> bool:
        nonlocal bias
        if i == j:
            return False
        a_i, a_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            lo, hi = max(0.0, a_j - a_i), min(c, c + a_j - a_i)
        else:
            lo, hi = max(0.0, a_i + a_j - c), min(c, a_i + a_j)
        if hi - lo < 1e-12:
            return False
        e_i, e_j = errors[i], errors[j]
        eta = 2.0 * kernel[i, j] - kernel[i, i] - kernel[j, j]
        if eta < 0:
            a_j_new = float(np.clip(a_j - y[j] * (e_i - e_j) / eta, lo, hi))
        else:
            # Flat or concave along the segment: the best point is an endpoint.
            s = y[i] * y[j]
            f_i = y[i] * e_i - a_i * kernel[i, i] - s * a_j * kernel[i, j]
            f_j = y[j] * e_j - s * a_i * kernel[i, j] - a_j * kernel[j, j]
            l_i = a_i + s * (a_j - lo)
            h_i = a_i + s * (a_j - hi)
            obj_lo = (l_i * f_i + lo * f_j + 0.5 * l_i**2 * kernel[i, i]
                      + 0.5 * lo**2 * kernel[j, j] + s * lo * l_i * kernel[i, j])
            obj_hi = (h_i * f_i + hi * f_j + 0.5 * h_i**2 * kernel[i, i]
                      + 0.5 * hi**2 * kernel[j, j] + s * hi * h_i * kernel[i, j])
            if obj_lo < obj_hi - 1e-12:
                a_j_new = lo
            elif obj_hi < obj_lo - 1e-12:
                a_j_new = hi
            else:
                return False
        if abs(a_j_new - a_j) < 1e-12 * (a_j_new + a_j + 1e-12):
            return False
        a_i_new = a_i + y[i] * y[j] * (a_j - a_j_new)
        d_i, d_j = a_i_new - a_i, a_j_new - a_j
        b1 = bias - e_i - y[i] * d_i * kernel[i, i] - y[j] * d_j * kernel[i, j]
        b2 = bias - e_j - y[i] * d_i * kernel[i, j] - y[j] * d_j * kernel[j, j]
        if 0 < a_i_new < c:
            bias_new = b1
        elif 0 < a_j_new < c:
            bias_new = b2
        else:
            bias_new = 0.5 * (b1 + b2)
        errors[:] = errors + (y[i] * d_i * kernel[:, i] + y[j] * d_j * kernel[:, j]
                              + (bias_new - bias))
        alpha[i], alpha[j] = a_i_new, a_j_new
        bias = bias_new
        return True

    def examine(i: int) -> bool:
        e_i = errors[i]
        r = e_i * y[i]
        if not ((r < -tol and alpha[i] < c) or (r > tol and alpha[i] > 0)):
            return False
        non_bound = [k for k in range(n) if 0 < alpha[k] < c]
        if non_bound:
            gaps = np.abs(e_i - errors)
            j = max(non_bound, key=lambda k: (gaps[k], -k))
            if take_step(i, j):
                return True
        for j in non_bound:
            if take_step(i, j):
                return True
        for j in range(n):
            if take_step(i, j):
                return True
        return False

    quiet_rounds = 0
    examine_all = True
    while quiet_rounds < max_passes and iters < max_iters:
        changed = 0
        idx = range(n) if examine_all else [k for k in range(n) if 0 < alpha[k] < c]
        for i in idx:
            iters += 1
            if examine(i):
                changed += 1
        # Alternate full sweeps with non-bound sweeps; stop after max_passes
        # consecutive sweeps without an update (at least one of them full).
        if examine_all:
            examine_all = False
        elif changed == 0:
            examine_all = True
        quiet_rounds = quiet_rounds + 1 if changed == 0 else 0
    return alpha, bias


def _fit_binary(x: np.ndarray, y_pm: np.ndarray, c: float, gamma: float) -> _BinarySvm:
    kernel = _rbf_kernel(x, x, gamma)
    alpha, bias = _smo_train(kernel, y_pm, c)
    return _BinarySvm(alpha=alpha, bias=bias, support_x=x, support_y=y_pm,
                      gamma=gamma, c=c)


def _cv_folds_for_selection(y: np.ndarray, n_folds: int, seed: int):
    """Stratified index folds for the internal C search."""
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        members = members[rng.permutation(len(members))]
        for pos, m in enumerate(members):
            folds[pos % n_folds].append(int(m))
    return [sorted(f) for f in folds]


def _fit_multiclass(x, y, c, gamma, classes) -> list[_BinarySvm]:
    return [
        _fit_binary(x, np.where(y == cls, 1.0, -1.0), c, gamma) for cls in classes
    ]


def svm_fit(train_x, train_y, config: ClassifierConfig) -> SvmModel:
    """One-vs-rest RBF SVM; C picked by internal 3-fold CV, ties to smaller C."""
    x = np.asarray(train_x, dtype=float)
    y = np.asarray(train_y)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite features")
    classes = np.unique(y)
    gamma = _resolve_gamma(x, config.gamma)
    if len(classes) < 2:
        warnings.warn("single-class training set: fitting a constant predictor")
        return SvmModel([], classes, int(classes[0]) + 1, gamma, config.c_grid[0],
                        constant=int(classes[0]))

    chosen_c = config.c_grid[0]
    if len(config.c_grid) > 1:
        min_class = min(np.bincount(np.searchsorted(classes, y)))
        n_folds = min(3, int(min_class))
        if n_folds >= 2:
            folds = _cv_folds_for_selection(y, n_folds, config.seed)
            best = (-1.0, None)
            for c in config.c_grid:
                scores = []
                for f in range(n_folds):
                    val_idx = np.array(folds[f])
                    tr_idx = np.array(
                        [i for g in range(n_folds) if g != f for i in folds[g]]
                    )
                    if len(np.unique(y[tr_idx])) < 2:
                        continue
                    binaries = _fit_multiclass(x[tr_idx], y[tr_idx], c, gamma, classes)
                    dec = np.stack([b.decision(x[val_idx]) for b in binaries], axis=1)
                    pred = classes[dec.argmax(axis=1)]
                    scores.append(float((pred == y[val_idx]).mean()))
                mean = sum(scores) / len(scores) if scores else -1.0
                if mean > best[0] + 1e-12:  # strict improvement: ties keep smaller C
                    best = (mean, c)
            if best[1] is not None:
                chosen_c = best[1]
        else:
            warnings.warn("too few samples per class for C selection; using C=1")
            chosen_c = 1.0 if 1.0 in config.c_grid else config.c_grid[0]

    binaries = _fit_multiclass(x, y, chosen_c, gamma, classes)
    return SvmModel(binaries, classes, int(classes.max()) + 1, gamma, chosen_c)


def svm_predict(model: SvmModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if model.constant is not None:
        return np.full(x.shape[0], model.constant, dtype=int)
    dec = model.decision_matrix(x)
    return model.classes[dec.argmax(axis=1)]


# ----------------------------------------------------------------------


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError(
            f"length mismatch: {predictions.shape} predictions vs {labels.shape} labels"
        )
    return float((predictions == labels).mean())


def fit_predict(train_x, train_y, test_x, config: ClassifierConfig) -> np.ndarray:
    """Train the configured classifier and predict test labels."""
    if config.kind == "knn":
        k = min(config.k, len(train_y))
        return knn_predict_batch(train_x, train_y, test_x, k)
    if config.kind == "logreg":
        if len(set(np.asarray(train_y).tolist())) < 2:
            only = int(np.asarray(train_y)[0])
            return np.full(np.asarray(test_x).shape[0], only, dtype=int)
        model = logreg_fit(train_x, train_y, config)
        return logreg_predict(model, test_x)
    model = svm_fit(train_x, train_y, config)
    return svm_predict(model, test_x)
