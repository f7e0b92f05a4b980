"""scikit-learn style wrapper around :func:`parc.core.fit`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .core import ParcConfig, fit
from .data import CATEGORICAL, NUMERIC, ColumnSpec, EncodedDataset
from .predictor import accuracy_score, predict, r2_score, region_of


class PARC(BaseEstimator):
    """Piecewise affine regressor/classifier over one polyhedral partition.

    Parameters mirror :class:`parc.core.ParcConfig`. All features are
    treated as numeric. Target columns listed in ``categorical`` (at fit
    time) are classified, the others regressed.

    Examples
    --------
    >>> est = PARC(K=3).fit(X, y)
    >>> est.predict(X[:2])
    """

    def __init__(self, K=5, alpha=0.1, beta=1e-3, sigma=1.0, separation="softmax",
                 epsilon=1e-4, max_iters=100, c_min_fraction=0.01, discard="drop",
                 seed=0, scale_targets=True):
        self.K = K
        self.alpha = alpha
        self.beta = beta
        self.sigma = sigma
        self.separation = separation
        self.epsilon = epsilon
        self.max_iters = max_iters
        self.c_min_fraction = c_min_fraction
        self.discard = discard
        self.seed = seed
        self.scale_targets = scale_targets

    def _config(self):
        return ParcConfig(**self.get_params()).validate()

    def fit(self, X, y, categorical=()):
        """Train on features ``X`` (N, n) and targets ``y`` (N,) or (N, m).

        Parameters
        ----------
        categorical : sequence of int
            Columns of ``y`` holding class labels (any hashable values).
        """
        X = check_array(X, dtype=float)
        y = np.asarray(y, dtype=object)
        self._single_output = y.ndim == 1
        Y = y.reshape(-1, 1) if y.ndim == 1 else y
        if Y.shape[0] != X.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {Y.shape[0]}")
        cat = sorted(set(int(c) for c in categorical))
        if any(c < 0 or c >= Y.shape[1] for c in cat):
            raise ValueError("categorical column index out of range")
        num = [c for c in range(Y.shape[1]) if c not in cat]

        target_specs, Yd = [], []
        for c in num:
            target_specs.append(ColumnSpec(f"y{c}", NUMERIC))
        for c in cat:
            labels = list(dict.fromkeys(Y[:, c].tolist()))
            if len(labels) < 2:
                raise ValueError(f"categorical target {c} has a single class")
            target_specs.append(ColumnSpec(f"y{c}", CATEGORICAL, labels))
            lookup = {v: k for k, v in enumerate(labels)}
            Yd.append([lookup[v] for v in Y[:, c]])
        Yc = check_array(Y[:, num].astype(float), ensure_min_features=0)
        Yd = np.asarray(Yd, dtype=int).T.reshape(X.shape[0], len(cat))
        dataset = EncodedDataset(
            X, Yc, Yd, [ColumnSpec(f"x{h}", NUMERIC) for h in range(X.shape[1])],
            target_specs)

        self.model_, self.report_ = fit(dataset, self._config())
        self.numeric_columns_ = num
        self.categorical_columns_ = cat
        self.classes_ = [spec.categories for spec in target_specs if spec.kind == CATEGORICAL]
        self.n_features_in_ = X.shape[1]
        self.n_regions_ = self.model_.n_regions
        return self

    def _check(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def predict(self, X):
        """Predictions in the layout of the training ``y``.

        The result is a float array unless a categorical target has
        non-numeric labels, in which case it has object dtype.
        """
        X = self._check(X)
        yc, yd = predict(self.model_, X)
        labels = [np.asarray(self.classes_[i], dtype=object)[yd[:, i]]
                  for i in range(len(self.categorical_columns_))]
        out = np.empty((X.shape[0], len(self.numeric_columns_) + len(labels)), dtype=object)
        for k, c in enumerate(self.numeric_columns_):
            out[:, c] = yc[:, k]
        for k, c in enumerate(self.categorical_columns_):
            out[:, c] = labels[k]
        try:
            out = out.astype(float)
        except (TypeError, ValueError):
            pass
        return out[:, 0] if self._single_output else out

    def predict_region(self, X):
        """Region index (0-based) of each row of ``X``."""
        return np.atleast_1d(region_of(self.model_, self._check(X)))

    def score(self, X, y):
        """Mean over targets of R² (numeric) and accuracy (categorical)."""
        pred = self.predict(X)
        y = np.asarray(y, dtype=object)
        if self._single_output:
            pred, y = pred.reshape(-1, 1), y.reshape(-1, 1)
        pred = np.asarray(pred, dtype=object)
        scores = []
        for c in self.numeric_columns_:
            r2 = r2_score(y[:, c].astype(float), pred[:, c].astype(float))
            if not np.isnan(r2):
                scores.append(r2)
        for c in self.categorical_columns_:
            scores.append(accuracy_score(y[:, c], pred[:, c]))
        return float(np.mean(scores)) if scores else float("nan")
