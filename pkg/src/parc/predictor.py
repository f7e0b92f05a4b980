"""Evaluation of a fitted ParcModel: regions, predictions and scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import VORONOI


@dataclass
class Region:
    """Polyhedron ``{x : H @ x <= h}`` in raw encoded feature units."""

    index: int
    H: np.ndarray
    h: np.ndarray

    def contains(self, x, tol=0.0):
        return bool(np.all(self.H @ np.asarray(x, dtype=float) <= self.h + tol))


def _as_2d(X, n):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = X.reshape(-1, n)
    return X, single


def separation_scores(model, Xs):
    """Scores ``omega @ x + gamma`` for scaled features ``Xs`` (one product)."""
    return Xs @ model.omega.T + model.gamma


def _regions_scaled(model, Xs):
    if model.n_regions == 1:
        return np.zeros(len(Xs), dtype=int)
    if model.separation == VORONOI and model.centroids is not None:
        d = ((Xs[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d, axis=1)
    # argmax returns the first maximizer, i.e. the smallest index on ties
    return np.argmax(separation_scores(model, Xs), axis=1)


def region_of(model, X):
    """Region index (0-based) of raw encoded feature vector(s) ``X``."""
    X, single = _as_2d(X, model.n_features)
    j = _regions_scaled(model, model.x_scaler.transform(X))
    return int(j[0]) if single else j


def regions(model):
    """Halfspace description of every region, derived from the separation."""
    _, _, omega, gamma = model.raw_affine()
    out = []
    K = model.n_regions
    for j in range(K):
        others = [i for i in range(K) if i != j]
        H = omega[others] - omega[j]
        h = gamma[j] - gamma[others]
        out.append(Region(j, H.reshape(len(others), -1), h))
    return out


def predict_scaled(model, Xs, j=None):
    """Numeric outputs (scaled units) and class indices for scaled inputs."""
    if j is None:
        j = _regions_scaled(model, Xs)
    A = model.coef[j]
    B = model.intercept[j]
    scores = np.einsum("kmn,kn->km", A, Xs) + B
    yc = scores[:, :model.n_numeric]
    yd = np.empty((len(Xs), len(model.n_classes)), dtype=int)
    for i, sl in enumerate(model.class_slices()):
        yd[:, i] = np.argmax(scores[:, sl], axis=1)
    return yc, yd


def predict(model, X):
    """Predict numeric targets (raw units) and category indices.

    Returns
    -------
    yc : ndarray of shape (N, m_c), or (m_c,) for a single sample
    yd : ndarray of shape (N, m_d) of 0-based category indices
    """
    X, single = _as_2d(X, model.n_features)
    yc, yd = predict_scaled(model, model.x_scaler.transform(X))
    yc = model.y_scaler.inverse_transform(yc)
    if single:
        return yc[0], yd[0]
    return yc, yd


def category_values(model, yd):
    """Map category indices to the raw category values of each target."""
    cats = [s.categories for s in model.target_specs if s.kind == "categorical"]
    yd = np.atleast_2d(yd)
    if not cats:
        return yd.tolist()
    return [[cats[i][h] for i, h in enumerate(row)] for row in yd.tolist()]


def r2_score(y, yhat):
    """Coefficient of determination; NaN when ``y`` has zero variance."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0:
        return float("nan")
    return float(1.0 - np.sum((y - yhat) ** 2) / ss_tot)


def accuracy_score(y, yhat):
    return float(np.mean(np.asarray(y) == np.asarray(yhat)))


def evaluate(model, dataset):
    """R² per numeric target and accuracy per categorical target.

    Undefined R² (constant target) is reported as ``None``.
    """
    if dataset.n_samples == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    yc, yd = predict(model, dataset.X)
    r2 = [r2_score(dataset.Yc[:, i], yc[:, i]) for i in range(model.n_numeric)]
    acc = [accuracy_score(dataset.Yd[:, i], yd[:, i]) for i in range(len(model.n_classes))]
    return {
        "r2": [None if np.isnan(v) else v for v in r2],
        "accuracy": acc,
    }
