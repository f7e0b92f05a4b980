"""PARC training: block-coordinate descent over predictors and cluster labels.

Cluster indices are 0-based throughout. Ties in every argmin/argmax go to
the smallest index.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import solvers
from .data import fit_scaler
from .model import SOFTMAX, VORONOI, ParcModel
from .solvers import AffineCoeffs, MinimizerSettings, logsumexp

logger = logging.getLogger(__name__)


class ParcError(ValueError):
    pass


@dataclass
class ParcConfig:
    """Hyperparameters of the PARC iteration.

    ``epsilon`` stops the loop once V decreases by less than this amount
    (relative to ``|V|`` when ``relative_epsilon``); ``0`` disables the test
    so that only an unchanged assignment or ``max_iters`` ends the loop.
    Clusters with fewer than ``c_min_fraction * N`` points are discarded at
    the end; their samples are dropped, or moved to the best remaining
    cluster when ``discard="reassign"``.
    """

    K: int = 5
    alpha: float = 0.1
    beta: float = 1e-3
    sigma: float = 1.0
    mu_c: tuple | None = None
    mu_d: tuple | None = None
    separation: str = SOFTMAX
    epsilon: float = 1e-4
    relative_epsilon: bool = False
    max_iters: int = 100
    c_min_fraction: float = 0.01
    discard: str = "drop"
    seed: int = 0
    scale_targets: bool = True
    tol_intermediate: float = 1e-4
    tol_final: float = 1e-6

    def validate(self):
        if int(self.K) != self.K or self.K < 1:
            raise ParcError("K must be a positive integer")
        if not self.alpha > 0:
            raise ParcError("alpha must be positive")
        if self.beta < 0 or self.sigma < 0 or self.epsilon < 0:
            raise ParcError("beta, sigma and epsilon must be nonnegative")
        if self.separation not in (SOFTMAX, VORONOI):
            raise ParcError(f"unknown separation {self.separation!r}")
        if self.separation == SOFTMAX and self.beta == 0 and self.K > 1:
            logger.warning("beta = 0: separation softmax may be unbounded on separable clusters")
        if not 0 <= self.c_min_fraction < 1:
            raise ParcError("c_min_fraction must lie in [0, 1)")
        if self.discard not in ("drop", "reassign"):
            raise ParcError("discard must be 'drop' or 'reassign'")
        if self.max_iters < 1:
            raise ParcError("max_iters must be >= 1")
        for mu in (self.mu_c, self.mu_d):
            if mu is not None and np.any(np.asarray(mu) < 0):
                raise ParcError("loss weights must be nonnegative")
        return self

    def to_dict(self):
        d = asdict(self)
        for key in ("mu_c", "mu_d"):
            if d[key] is not None:
                d[key] = [float(v) for v in d[key]]
        return d


@dataclass
class FitReport:
    objective_per_iter: list = field(default_factory=list)
    cluster_sizes_per_iter: list = field(default_factory=list)
    iterations: int = 0
    stop_reason: str = ""
    discarded_clusters: list = field(default_factory=list)
    n_dropped: int = 0
    wall_time: float = 0.0


@dataclass
class Separation:
    """Separation parameters during training (all K clusters)."""

    mode: str
    omega: np.ndarray
    gamma: np.ndarray
    centroids: np.ndarray | None = None


@dataclass
class _Problem:
    """Scaled training arrays plus the target layout."""

    X: np.ndarray
    Yc: np.ndarray
    Yd: np.ndarray
    n_classes: tuple
    mu_c: np.ndarray
    mu_d: np.ndarray

    @property
    def n_numeric(self):
        return self.Yc.shape[1]

    @property
    def n_rows(self):
        return self.n_numeric + sum(self.n_classes)

    def row_weights(self):
        """1 for coefficient rows whose target enters V, else 0."""
        w = [float(m > 0) for m in self.mu_c]
        for mi, m in zip(self.n_classes, self.mu_d):
            w.extend([float(m > 0)] * mi)
        return np.asarray(w)


def _problem(X, Yc, Yd, n_classes, mu_c=None, mu_d=None):
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    Yc = np.asarray(Yc, dtype=float).reshape(N, -1)
    Yd = np.asarray(Yd, dtype=int).reshape(N, -1)
    n_classes = tuple(int(c) for c in n_classes)
    if Yd.shape[1] != len(n_classes):
        raise ParcError("one class count per categorical target is required")
    mu_c = np.ones(Yc.shape[1]) if mu_c is None else np.asarray(mu_c, dtype=float)
    mu_d = np.ones(Yd.shape[1]) if mu_d is None else np.asarray(mu_d, dtype=float)
    if mu_c.shape != (Yc.shape[1],) or mu_d.shape != (Yd.shape[1],):
        raise ParcError("loss weights do not match the number of targets")
    return _Problem(X, Yc, Yd, n_classes, mu_c, mu_d)


# -- initialization ------------------------------------------------------

def kmeanspp_init(X, K, seed=0, max_iter=300):
    """K-means++ seeding followed by Lloyd iterations.

    Returns 0-based labels. Every cluster is nonempty whenever ``X`` has at
    least ``K`` distinct rows.
    """
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    if K > N:
        raise ParcError(f"K={K} exceeds the number of samples N={N}")
    if K == 1:
        return np.zeros(N, dtype=int)
    rng = np.random.default_rng(seed)
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(N)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for c in range(1, K):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(N, p=d2 / total)
        else:
            idx = rng.integers(N)
        centers[c] = X[idx]
        d2 = np.minimum(d2, ((X - centers[c]) ** 2).sum(axis=1))

    labels = None
    for _ in range(max_iter):
        dist = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(dist, axis=1)
        counts = np.bincount(new, minlength=K)
        for j in np.flatnonzero(counts == 0):
            # move an empty center onto the point farthest from its own center
            far = np.argmax(dist[np.arange(N), new])
            centers[j] = X[far]
            dist[:, j] = ((X - centers[j]) ** 2).sum(axis=1)
            new = np.argmin(dist, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(K):
            members = X[labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    return labels


# -- losses --------------------------------------------------------------

def target_losses(coef, intercept, X, Yc, Yd, n_classes, mu_c, mu_d):
    """Weighted fit loss V^y of one coefficient set at every sample.

    ``coef`` has shape (m, n) with numeric rows first, then one block per
    categorical target. Returns an array of shape (N,).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[0]
    Yc = np.asarray(Yc, dtype=float).reshape(N, -1)
    Yd = np.asarray(Yd, dtype=int).reshape(N, -1)
    scores = X @ coef.T + intercept
    mc = Yc.shape[1]
    loss = ((Yc - scores[:, :mc]) ** 2) @ np.asarray(mu_c, dtype=float).reshape(mc)
    start = mc
    for i, mi in enumerate(n_classes):
        block = scores[:, start:start + mi]
        picked = block[np.arange(N), Yd[:, i]]
        loss = loss + mu_d[i] * (logsumexp(block, axis=1) - picked)
        start += mi
    return loss


def target_loss(coeffs, x, yc, yd, n_classes, mu_c, mu_d):
    """V^y at a single sample for ``coeffs`` (AffineCoeffs)."""
    return float(target_losses(coeffs.a, coeffs.b, np.atleast_2d(x),
                               np.atleast_2d(yc), np.atleast_2d(yd),
                               n_classes, mu_c, mu_d)[0])


def separation_losses(sep, X):
    """V^x of every sample (rows) for every cluster (columns)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if sep.mode == VORONOI:
        return ((X[:, None, :] - sep.centroids[None, :, :]) ** 2).sum(axis=2)
    scores = X @ sep.omega.T + sep.gamma
    # the pinned last row contributes the "1 +" of the normalizer
    return logsumexp(scores, axis=1)[:, None] - scores


def separation_loss(sep, j, x):
    return float(separation_losses(sep, x)[0, j])


def _regularization(coef, intercept, row_weights, alpha, N):
    """Per-cluster penalty (alpha/N) * sum of squared coefficients."""
    sq = (coef ** 2).sum(axis=2) + intercept ** 2
    return (alpha / N) * (sq @ row_weights)


def assignment_costs(prob, coef, intercept, sep, sigma, alpha):
    """Cost of placing each sample in each cluster, shape (N, K).

    Includes the per-sample share of the coefficient penalty so that the
    argmin over clusters is the exact minimizer of V for fixed parameters.
    """
    N = prob.X.shape[0]
    K = coef.shape[0]
    costs = np.empty((N, K))
    for j in range(K):
        costs[:, j] = target_losses(coef[j], intercept[j], prob.X, prob.Yc, prob.Yd,
                                    prob.n_classes, prob.mu_c, prob.mu_d)
    costs += _regularization(coef, intercept, prob.row_weights(), alpha, N)[None, :]
    if sigma != 0:
        costs += sigma * separation_losses(sep, prob.X)
    return costs


def assign_all(prob, coef, intercept, sep, sigma, alpha):
    """Labels minimizing the per-sample cost; smallest index on ties."""
    return np.argmin(assignment_costs(prob, coef, intercept, sep, sigma, alpha), axis=1)


def objective(prob, coef, intercept, sep, labels, config):
    """The PARC cost V for parameters and a hard assignment."""
    costs = assignment_costs(prob, coef, intercept, sep, config.sigma, config.alpha)
    value = float(np.sum(costs[np.arange(len(labels)), labels]))
    if sep.mode == SOFTMAX and config.sigma != 0:
        value += config.sigma * config.beta * float(np.sum(sep.omega ** 2) + np.sum(sep.gamma ** 2))
    return value


# -- block updates -------------------------------------------------------

def _fit_cluster(prob, idx, coef_j, intercept_j, alpha_j, settings):
    """Ridge and softmax fits of one cluster, warm-started in place."""
    X = prob.X[idx]
    mc = prob.n_numeric
    if mc:
        mu = prob.mu_c
        alphas = np.where(mu > 0, alpha_j / np.where(mu > 0, mu, 1.0), alpha_j)
        a, b = solvers.ridge_fit(X, prob.Yc[idx], alphas)
        coef_j[:mc] = a
        intercept_j[:mc] = b
    start = mc
    for i, mi in enumerate(prob.n_classes):
        mu = prob.mu_d[i]
        al = alpha_j / mu if mu > 0 else alpha_j
        rows = slice(start, start + mi)
        warm = AffineCoeffs(coef_j[rows], intercept_j[rows])
        fitted = solvers.softmax_fit(X, prob.Yd[idx, i], mi, al, warm, settings)
        coef_j[rows] = fitted.a
        intercept_j[rows] = fitted.b
        start += mi


def fit_predictors(prob, labels, coef, intercept, alpha, settings):
    """Refit every nonempty cluster; empty clusters keep their parameters."""
    N = prob.X.shape[0]
    for j in range(coef.shape[0]):
        idx = np.flatnonzero(labels == j)
        if idx.size == 0:
            continue
        _fit_cluster(prob, idx, coef[j], intercept[j], alpha * idx.size / N, settings)


def fit_separation(prob, labels, sep, beta, settings):
    K = sep.omega.shape[0]
    if sep.mode == VORONOI:
        for j in range(K):
            members = prob.X[labels == j]
            if len(members):
                sep.centroids[j] = members.mean(axis=0)
        sep.omega = sep.centroids.copy()
        sep.gamma = -0.5 * (sep.centroids ** 2).sum(axis=1)
    else:
        sep.omega, sep.gamma = solvers.separation_fit(
            prob.X, labels, K, beta, warm_start=(sep.omega, sep.gamma), settings=settings)


# -- main loop -----------------------------------------------------------

def fit_arrays(X, Yc, Yd, n_classes, config, init_labels=None):
    """Run PARC on already-scaled arrays.

    Parameters
    ----------
    X : ndarray of shape (N, n)
    Yc : ndarray of shape (N, m_c)
    Yd : ndarray of shape (N, m_d)
        0-based category indices.
    n_classes : sequence of int
        Number of categories of each categorical target.
    config : ParcConfig
    init_labels : ndarray of shape (N,), optional
        Initial clustering; K-means++ on ``X`` when omitted.

    Returns
    -------
    model : ParcModel
        With identity scalers.
    report : FitReport
    """
    config.validate()
    t0 = time.perf_counter()
    prob = _problem(X, Yc, Yd, n_classes, config.mu_c, config.mu_d)
    N, n = prob.X.shape
    K = int(config.K)
    if K > N:
        raise ParcError(f"K={K} exceeds the number of samples N={N}")
    m = prob.n_rows
    loose = MinimizerSettings(gradient_tolerance=config.tol_intermediate)
    tight = MinimizerSettings(gradient_tolerance=config.tol_final)

    if init_labels is None:
        labels = kmeanspp_init(prob.X, K, config.seed)
    else:
        labels = np.asarray(init_labels, dtype=int).copy()
    coef = np.zeros((K, m, n))
    intercept = np.zeros((K, m))
    sep = Separation(config.separation, np.zeros((K, n)), np.zeros(K),
                     np.zeros((K, n)) if config.separation == VORONOI else None)

    report = FitReport()
    for it in range(1, config.max_iters + 1):
        fit_predictors(prob, labels, coef, intercept, config.alpha, tight)
        fit_separation(prob, labels, sep, config.beta, loose)
        costs = assignment_costs(prob, coef, intercept, sep, config.sigma, config.alpha)
        new_labels = np.argmin(costs, axis=1)
        V = float(np.sum(costs[np.arange(N), new_labels]))
        if sep.mode == SOFTMAX and config.sigma != 0:
            V += config.sigma * config.beta * float(np.sum(sep.omega ** 2) + np.sum(sep.gamma ** 2))
        report.objective_per_iter.append(V)
        report.cluster_sizes_per_iter.append(np.bincount(new_labels, minlength=K).tolist())
        report.iterations = it
        logger.debug("iteration %d: V = %.10g", it, V)
        if np.array_equal(new_labels, labels):
            report.stop_reason = "assignment-unchanged"
            break
        labels = new_labels
        if it > 1 and config.epsilon > 0:
            decrease = report.objective_per_iter[-2] - V
            scale = abs(report.objective_per_iter[-2]) if config.relative_epsilon else 1.0
            if decrease < config.epsilon * scale:
                fit_predictors(prob, labels, coef, intercept, config.alpha, tight)
                report.stop_reason = "objective-stalled"
                break
    else:
        fit_predictors(prob, labels, coef, intercept, config.alpha, tight)
        report.stop_reason = "max-iters"

    model, keep_mask = _finalize(prob, labels, coef, intercept, sep, config, tight, report)
    report.n_dropped = int(N - keep_mask.sum())
    report.wall_time = time.perf_counter() - t0
    model.config = config.to_dict()
    model.x_bounds = np.vstack([prob.X.min(axis=0), prob.X.max(axis=0)])
    return model, report


def _finalize(prob, labels, coef, intercept, sep, config, settings, report):
    """Discard small clusters, refit the partition, then refit per region."""
    N = prob.X.shape[0]
    K = coef.shape[0]
    counts = np.bincount(labels, minlength=K)
    c_min = config.c_min_fraction * N
    keep = np.flatnonzero((counts > 0) & (counts >= c_min))
    report.discarded_clusters = [int(j) for j in range(K) if j not in set(keep)]
    if keep.size == 0:
        raise ParcError("all clusters were discarded")

    mask = np.ones(N, dtype=bool)
    if report.discarded_clusters:
        if config.discard == "drop":
            mask = np.isin(labels, keep)
        else:
            costs = assignment_costs(prob, coef[keep], intercept[keep],
                                     _subset_sep(sep, keep), config.sigma, config.alpha)
            moved = ~np.isin(labels, keep)
            labels = labels.copy()
            labels[moved] = keep[np.argmin(costs[moved], axis=1)]
    remap = np.full(K, -1)
    remap[keep] = np.arange(keep.size)
    labels = remap[labels[mask]]
    sub = _Problem(prob.X[mask], prob.Yc[mask], prob.Yd[mask], prob.n_classes,
                   prob.mu_c, prob.mu_d)
    coef = coef[keep].copy()
    intercept = intercept[keep].copy()
    Kf = keep.size

    sep = _subset_sep(sep, keep)
    if sep.mode == SOFTMAX:
        # re-gauge so that the last kept row is zero, then polish
        sep.omega = sep.omega - sep.omega[-1]
        sep.gamma = sep.gamma - sep.gamma[-1]
    fit_separation(sub, labels, sep, config.beta, settings)

    model = ParcModel(coef, intercept, sep.omega, sep.gamma, separation=sep.mode,
                      centroids=None if sep.centroids is None else sep.centroids.copy(),
                      n_numeric=prob.n_numeric, n_classes=prob.n_classes)
    from .predictor import _regions_scaled

    region = _regions_scaled(model, sub.X)
    fit_predictors(sub, region, coef, intercept, config.alpha, settings)
    model.coef, model.intercept = coef, intercept
    logger.debug("final partition: %d regions, sizes %s", Kf,
                 np.bincount(region, minlength=Kf).tolist())
    return model, mask


def _subset_sep(sep, keep):
    return Separation(sep.mode, sep.omega[keep].copy(), sep.gamma[keep].copy(),
                      None if sep.centroids is None else sep.centroids[keep].copy())


# -- dataset-level API ---------------------------------------------------

def fit(dataset, config):
    """Scale an EncodedDataset, run PARC and return ``(ParcModel, FitReport)``.

    Numeric features are standardized (one-hot columns are left alone), as
    are numeric targets unless ``config.scale_targets`` is false.
    """
    x_scaler = fit_scaler(dataset.X, exempt=dataset.onehot_mask)
    mc = dataset.Yc.shape[1]
    if config.scale_targets and mc:
        y_scaler = fit_scaler(dataset.Yc)
    else:
        from .data import Scaler
        y_scaler = Scaler.identity(mc)
    model, report = fit_arrays(
        x_scaler.transform(dataset.X), y_scaler.transform(dataset.Yc),
        dataset.Yd, dataset.n_classes, config)
    model.x_scaler = x_scaler
    model.y_scaler = y_scaler
    model.x_bounds = np.vstack([dataset.X.min(axis=0), dataset.X.max(axis=0)])
    model.feature_specs = list(dataset.feature_specs)
    model.target_specs = list(dataset.target_specs)
    return model, report


def cv_score(dataset, config, folds=5, seed=0):
    """Mean validation score over ``folds`` folds.

    The score of one fold is the mean over targets of R² (numeric) and
    accuracy (categorical); folds where every score is undefined are skipped.
    """
    from .predictor import evaluate

    N = dataset.n_samples
    if folds < 2:
        raise ParcError("folds must be >= 2")
    if folds > N:
        raise ParcError(f"{folds} folds leave an empty fold for N={N}")
    perm = np.random.default_rng(seed).permutation(N)
    parts = np.array_split(perm, folds)
    scores = []
    for f in range(folds):
        val = np.sort(parts[f])
        train = np.sort(np.concatenate([parts[g] for g in range(folds) if g != f]))
        model, _ = fit(dataset.subset(train), config)
        metrics = evaluate(model, dataset.subset(val))
        vals = [v for v in metrics["r2"] if v is not None] + metrics["accuracy"]
        if vals:
            scores.append(float(np.mean(vals)))
    return float(np.mean(scores)) if scores else float("nan")


def select_k(dataset, k_range, folds=5, config=None, tol=1e-12):
    """Pick the K with the best cross-validated score; smallest K on ties.

    Returns ``(best_k, scores)`` with ``scores`` mapping K to its mean score.
    """
    k_range = sorted(set(int(k) for k in k_range))
    if not k_range:
        raise ParcError("k_range is empty")
    config = config or ParcConfig()
    scores = {}
    for K in k_range:
        cfg = ParcConfig(**{**asdict(config), "K": K})
        scores[K] = cv_score(dataset, cfg, folds, config.seed)
        logger.info("K=%d: mean validation score %.6f", K, scores[K])
    finite = {k: s for k, s in scores.items() if not math.isnan(s)}
    if not finite:
        return k_range[0], scores
    best = max(finite.values())
    return min(k for k, s in finite.items() if s >= best - tol), scores
