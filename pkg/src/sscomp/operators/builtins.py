"""Desk-scale operator implementations.

Each class follows the scikit-learn estimator protocol (``get_params``,
``fit``, ``predict``/``transform``) so it composes with sklearn tooling,
but the numerics are implemented here with numpy. Every operator rejects,
at fit time, the configurations its side constraint excludes; this is the
behaviour the constrained-vs-unconstrained ablation relies on.
"""

from __future__ import annotations

from statistics import NormalDist

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import TrainingError


def _as_columns(X) -> np.ndarray:
    """Join parallel-branch outputs column-wise; 1-D inputs become one column."""
    if isinstance(X, tuple):
        parts = [_as_columns(x) for x in X]
        if len({p.shape[0] for p in parts}) > 1:
            raise TrainingError("parallel branches produced different row counts")
        return np.hstack(parts) if parts else np.empty((0, 0))
    X = np.asarray(X)
    return X.reshape(-1, 1) if X.ndim == 1 else X


def _reject_parallel(X, name):
    if isinstance(X, tuple):
        raise TrainingError(
            f"{name} received unconcatenated parallel outputs; insert ConcatFeatures"
        )
    return X


class Scaler(TransformerMixin, BaseEstimator):
    """Per-column centering and scaling.

    ``method`` is one of ``standard`` (mean/std), ``robust`` (median/IQR)
    or ``minmax`` (min/range). ``clip`` bounds the output to [0, 1] and is
    only meaningful for ``minmax``.
    """

    def __init__(self, method="standard", clip=False):
        self.method = method
        self.clip = clip

    def fit(self, X, y=None):
        if self.clip and self.method != "minmax":
            raise TrainingError(f"clip requires method='minmax', got {self.method!r}")
        X = check_array(_reject_parallel(X, "Scaler"), dtype=float)
        if self.method == "standard":
            center, scale = X.mean(axis=0), X.std(axis=0)
        elif self.method == "robust":
            q1, med, q3 = np.percentile(X, [25, 50, 75], axis=0)
            center, scale = med, q3 - q1
        elif self.method == "minmax":
            center, scale = X.min(axis=0), X.max(axis=0) - X.min(axis=0)
        else:
            raise TrainingError(f"unknown scaling method {self.method!r}")
        self.center_ = center
        self.scale_ = np.where(scale > 0, scale, 1.0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "center_")
        X = check_array(_reject_parallel(X, "Scaler"), dtype=float)
        out = (X - self.center_) / self.scale_
        if self.clip:
            out = np.clip(out, 0.0, 1.0)
        return out


class Projector(TransformerMixin, BaseEstimator):
    """Linear projection onto leading principal directions (power iteration)."""

    max_whitened = 4

    def __init__(self, n_components=2, whiten=False, max_iter=200, tol=1e-10,
                 random_state=None):
        self.n_components = n_components
        self.whiten = whiten
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        if self.whiten and self.n_components > self.max_whitened:
            raise TrainingError(
                f"whitening supports at most {self.max_whitened} components, "
                f"got {self.n_components}"
            )
        X = check_array(_reject_parallel(X, "Projector"), dtype=float)
        n, d = X.shape
        self.mean_ = X.mean(axis=0)
        cov = (X - self.mean_).T @ (X - self.mean_) / max(n - 1, 1)
        rng = np.random.default_rng(self.random_state)
        k = min(int(self.n_components), d)
        components, variances = [], []
        for _ in range(k):
            v = rng.standard_normal(d)
            v /= np.linalg.norm(v)
            lam = 0.0
            for _ in range(self.max_iter):
                w = cov @ v
                norm = np.linalg.norm(w)
                if norm == 0.0:
                    break
                w /= norm
                if np.linalg.norm(w - v) < self.tol:
                    v = w
                    break
                v = w
            lam = float(v @ cov @ v)
            # deterministic sign: largest-magnitude coordinate positive
            if v[np.argmax(np.abs(v))] < 0:
                v = -v
            components.append(v)
            variances.append(lam)
            cov = cov - lam * np.outer(v, v)
        self.components_ = np.array(components).reshape(k, d)
        self.explained_variance_ = np.array(variances)
        self.n_features_in_ = d
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(_reject_parallel(X, "Projector"), dtype=float)
        out = (X - self.mean_) @ self.components_.T
        if self.whiten:
            out = out / np.sqrt(np.maximum(self.explained_variance_, 1e-12))
        return out


class KNN(ClassifierMixin, BaseEstimator):
    """k-nearest-neighbour classifier; ties go to the smallest class label."""

    def __init__(self, n_neighbors=5, weights="uniform", metric="euclidean"):
        self.n_neighbors = n_neighbors
        self.weights = weights
        self.metric = metric

    def fit(self, X, y):
        if self.metric == "cosine" and self.weights == "distance":
            raise TrainingError("distance weighting is not supported for the cosine metric")
        if self.metric not in ("euclidean", "manhattan", "cosine"):
            raise TrainingError(f"unknown metric {self.metric!r}")
        X, y = check_X_y(_as_columns(X), y, dtype=float)
        self.classes_, self._y_idx = np.unique(y, return_inverse=True)
        self._X = X
        self.n_features_in_ = X.shape[1]
        return self

    def _distances(self, X):
        A, B = X, self._X
        if self.metric == "euclidean":
            sq = (A ** 2).sum(1)[:, None] + (B ** 2).sum(1)[None, :] - 2 * A @ B.T
            return np.sqrt(np.maximum(sq, 0.0))
        if self.metric == "manhattan":
            return np.abs(A[:, None, :] - B[None, :, :]).sum(-1)
        na = np.linalg.norm(A, axis=1)[:, None]
        nb = np.linalg.norm(B, axis=1)[None, :]
        denom = np.where((na * nb) > 0, na * nb, 1.0)
        return 1.0 - (A @ B.T) / denom

    def predict(self, X):
        check_is_fitted(self, "classes_")
        X = check_array(_as_columns(X), dtype=float)
        D = self._distances(X)
        k = min(int(self.n_neighbors), D.shape[1])
        idx = np.argsort(D, axis=1, kind="stable")[:, :k]
        n_classes = len(self.classes_)
        votes = np.zeros((X.shape[0], n_classes))
        rows = np.arange(X.shape[0])[:, None]
        if self.weights == "distance":
            d = D[rows, idx]
            exact = d == 0
            w = np.where(exact.any(axis=1, keepdims=True), exact.astype(float),
                         1.0 / np.where(d > 0, d, 1.0))
        else:
            w = np.ones_like(idx, dtype=float)
        np.add.at(votes, (np.repeat(rows, k, axis=1), self._y_idx[idx]), w)
        return self.classes_[np.argmax(votes, axis=1)]


class LogReg(ClassifierMixin, BaseEstimator):
    """Multinomial logistic regression by (proximal) gradient descent.

    ``C`` is the inverse regularization strength. ``solver='gd'`` handles
    every penalty through a proximal step; ``solver='momentum'`` uses
    heavy-ball acceleration, which needs a smooth objective, so it rejects
    ``penalty='l1'``.
    """

    def __init__(self, C=1.0, penalty="l2", solver="gd", max_iter=300, momentum=0.9):
        self.C = C
        self.penalty = penalty
        self.solver = solver
        self.max_iter = max_iter
        self.momentum = momentum

    def fit(self, X, y):
        if self.solver == "momentum" and self.penalty == "l1":
            raise TrainingError("solver 'momentum' only supports penalties 'l2' and 'none'")
        if self.penalty not in ("l1", "l2", "none") or self.solver not in ("gd", "momentum"):
            raise TrainingError(f"unsupported penalty/solver {self.penalty!r}/{self.solver!r}")
        if not self.C > 0:
            raise TrainingError("C must be positive")
        X, y = check_X_y(_as_columns(X), y, dtype=float)
        self.classes_, yi = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        self._mu = X.mean(axis=0)
        sd = X.std(axis=0)
        self._sd = np.where(sd > 0, sd, 1.0)
        Z = np.hstack([(X - self._mu) / self._sd, np.ones((X.shape[0], 1))])
        n, d = Z.shape
        K = len(self.classes_)
        Y = np.zeros((n, K))
        Y[np.arange(n), yi] = 1.0
        alpha = 1.0 / (self.C * n)
        lipschitz = 0.5 * np.linalg.eigvalsh(Z.T @ Z / n)[-1]
        if self.penalty == "l2":
            lipschitz += alpha
        step = 1.0 / lipschitz
        mask = np.ones((d, K))
        mask[-1] = 0.0  # intercept is not penalized
        W = np.zeros((d, K))
        velocity = np.zeros_like(W)
        for _ in range(self.max_iter):
            grad = Z.T @ (_softmax(Z @ W) - Y) / n
            if self.penalty == "l2":
                grad = grad + alpha * W * mask
            if self.solver == "momentum":
                velocity = self.momentum * velocity - step * grad
                W = W + velocity
            else:
                W = W - step * grad
                if self.penalty == "l1":
                    shrink = step * alpha * mask
                    W = np.sign(W) * np.maximum(np.abs(W) - shrink, 0.0)
        if not np.all(np.isfinite(W)):
            raise TrainingError("gradient descent diverged")
        self.coef_ = W
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(_as_columns(X), dtype=float)
        Z = np.hstack([(X - self._mu) / self._sd, np.ones((X.shape[0], 1))])
        return Z @ self.coef_

    def predict_proba(self, X):
        return _softmax(self.decision_function(X))

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


def _softmax(S):
    S = S - S.max(axis=1, keepdims=True)
    E = np.exp(S)
    return E / E.sum(axis=1, keepdims=True)


class Stump(ClassifierMixin, BaseEstimator):
    """Depth-one decision tree with C4.5-style pruning.

    With ``reduced_error=False`` the split is kept only if its pessimistic
    error estimate at confidence ``confidence`` beats the leaf's. With
    ``reduced_error=True`` a third of the rows is held out and the split is
    kept only if it lowers the held-out error; ``confidence`` is then
    unused and must stay at its default of 0.25.
    """

    def __init__(self, reduced_error=False, confidence=0.25, criterion="gini", max_depth=1,
                 random_state=0):
        self.reduced_error = reduced_error
        self.confidence = confidence
        self.criterion = criterion
        self.max_depth = max_depth
        self.random_state = random_state

    def fit(self, X, y):
        if self.reduced_error and self.confidence != 0.25:
            raise TrainingError(
                f"confidence must be 0.25 under reduced-error pruning, got {self.confidence!r}"
            )
        if not 0 < self.confidence < 1:
            raise TrainingError("confidence must lie in (0, 1)")
        if self.criterion not in ("gini", "entropy"):
            raise TrainingError(f"unknown criterion {self.criterion!r}")
        X, y = check_X_y(_as_columns(X), y, dtype=float)
        self.classes_, yi = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        K = len(self.classes_)
        self.leaf_ = int(np.argmax(np.bincount(yi, minlength=K)))
        self.feature_ = None
        if self.max_depth < 1 or K < 2:
            return self

        if self.reduced_error:
            rng = np.random.default_rng(self.random_state)
            order = rng.permutation(len(yi))
            n_hold = len(yi) // 3
            hold, grow = order[:n_hold], order[n_hold:]
        else:
            hold, grow = None, np.arange(len(yi))
        split = self._best_split(X[grow], yi[grow], K)
        if split is None:
            return self
        feature, threshold, left_label, right_label = split
        if self.reduced_error:
            if n_hold == 0:
                return self
            Xh, yh = X[hold], yi[hold]
            leaf_label = int(np.argmax(np.bincount(yi[grow], minlength=K)))
            pred = np.where(Xh[:, feature] <= threshold, left_label, right_label)
            if np.sum(pred != yh) >= np.sum(leaf_label != yh):
                return self
        else:
            if not self._pessimistic_keeps(X[:, feature] <= threshold, yi, K):
                return self
        self.feature_, self.threshold_ = feature, threshold
        self.left_, self.right_ = left_label, right_label
        return self

    def _impurity(self, counts):
        total = counts.sum(axis=-1, keepdims=True)
        p = counts / np.where(total > 0, total, 1)
        if self.criterion == "gini":
            return 1.0 - (p ** 2).sum(axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return -np.nansum(np.where(p > 0, p * np.log2(p), 0.0), axis=-1)

    def _best_split(self, X, yi, K):
        best, best_score = None, np.inf
        n = len(yi)
        for j in range(X.shape[1]):
            order = np.argsort(X[:, j], kind="stable")
            xs, ys = X[order, j], yi[order]
            onehot = np.zeros((n, K))
            onehot[np.arange(n), ys] = 1
            left = np.cumsum(onehot, axis=0)[:-1]
            right = left[-1:] + onehot[-1:] - left if n > 1 else left
            valid = xs[1:] > xs[:-1]
            if not valid.any():
                continue
            nl = np.arange(1, n)
            score = (nl * self._impurity(left) + (n - nl) * self._impurity(right)) / n
            score = np.where(valid, score, np.inf)
            i = int(np.argmin(score))
            if score[i] < best_score - 1e-12:
                best_score = score[i]
                best = (j, (xs[i] + xs[i + 1]) / 2.0,
                        int(np.argmax(left[i])), int(np.argmax(right[i])))
        return best

    def _pessimistic_keeps(self, goes_left, yi, K) -> bool:
        z = NormalDist().inv_cdf(1.0 - self.confidence)

        def upper(errors, n):
            if n == 0:
                return 0.0
            f = errors / n
            num = f + z * z / (2 * n) + z * np.sqrt(max(f / n - f * f / n + z * z / (4 * n * n), 0.0))
            return n * num / (1 + z * z / n)

        def leaf_errors(mask):
            counts = np.bincount(yi[mask], minlength=K)
            return counts.sum() - counts.max(), counts.sum()

        split_est = upper(*leaf_errors(goes_left)) + upper(*leaf_errors(~goes_left))
        leaf_est = upper(*leaf_errors(np.ones_like(goes_left)))
        return split_est < leaf_est

    def predict(self, X):
        check_is_fitted(self, "classes_")
        X = check_array(_as_columns(X), dtype=float)
        if self.feature_ is None:
            idx = np.full(X.shape[0], self.leaf_)
        else:
            idx = np.where(X[:, self.feature_] <= self.threshold_, self.left_, self.right_)
        return self.classes_[idx]


class MajorityVote(ClassifierMixin, BaseEstimator):
    """Row-wise vote over label columns produced by upstream classifiers.

    ``weighting='positional'`` gives column i the weight 1/(i+1) and is
    only defined together with ``tie_break='first'``.
    """

    def __init__(self, tie_break="lowest", weighting="equal"):
        self.tie_break = tie_break
        self.weighting = weighting

    def fit(self, X, y):
        if self.weighting == "positional" and self.tie_break != "first":
            raise TrainingError("positional weighting requires tie_break='first'")
        X = _as_columns(X)
        X, y = check_X_y(X, y, dtype=None)
        self.classes_ = np.unique(y)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "classes_")
        X = check_array(_as_columns(X), dtype=None)
        m = X.shape[1]
        weights = (1.0 / np.arange(1, m + 1)) if self.weighting == "positional" else np.ones(m)
        out = []
        for row in X:
            tally: dict = {}
            for col, label in enumerate(row):
                tally[label] = tally.get(label, 0.0) + weights[col]
            top = max(tally.values())
            tied = [lab for lab in tally if tally[lab] == top]
            if self.tie_break == "first":
                out.append(next(lab for lab in row if lab in tied))
            else:
                out.append(sorted(tied)[0])
        return np.asarray(out, dtype=X.dtype)


class ConcatFeatures(TransformerMixin, BaseEstimator):
    """Concatenate the columns of parallel-branch outputs."""

    def fit(self, X, y=None):
        self.n_features_in_ = _as_columns(X).shape[1]
        return self

    def transform(self, X):
        return _as_columns(X)


IMPLEMENTATIONS = {
    cls.__name__: cls
    for cls in (Scaler, Projector, KNN, LogReg, Stump, MajorityVote, ConcatFeatures)
}


def make_estimator(impl: str, config: dict, seed: int | None = None):
    """Instantiate a built-in with ``config``; ``seed`` feeds ``random_state``."""
    try:
        cls = IMPLEMENTATIONS[impl]
    except KeyError:
        raise TrainingError(f"no built-in implementation named {impl!r}") from None
    est = cls()
    params = dict(config)
    if seed is not None and "random_state" in est.get_params():
        params.setdefault("random_state", seed)
    unknown = set(params) - set(est.get_params())
    if unknown:
        raise TrainingError(f"{impl} has no hyperparameters {sorted(unknown)}")
    return est.set_params(**params)
