"""Numerical building blocks: log-sum-exp, ridge and softmax regression.

All regularized fits penalize the intercept together with the coefficients,
i.e. the penalty is ``alpha * (||a||^2 + b^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize


@dataclass(frozen=True)
class MinimizerSettings:
    """Stopping rules for the quasi-Newton softmax solver.

    Parameters
    ----------
    gradient_tolerance : float
        Stop when the largest absolute gradient entry falls below this value.
    max_evaluations : int
        Cap on objective/gradient evaluations.
    memory_depth : int
        Number of correction pairs kept by L-BFGS.
    """

    gradient_tolerance: float = 1e-6
    max_evaluations: int = 15000
    memory_depth: int = 10

    def __post_init__(self):
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be >= 1")
        if self.memory_depth < 1:
            raise ValueError("memory_depth must be >= 1")


FINAL_SETTINGS = MinimizerSettings(gradient_tolerance=1e-6)
INTERMEDIATE_SETTINGS = MinimizerSettings(gradient_tolerance=1e-4)


@dataclass
class AffineCoeffs:
    """Rows of affine functions ``x -> a[i] @ x + b[i]``."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if self.a.shape[0] != self.b.shape[0]:
            raise ValueError("a and b must have the same number of rows")

    def scores(self, X):
        return np.asarray(X, dtype=float) @ self.a.T + self.b

    def as_matrix(self):
        """Stack as ``[a | b]``."""
        return np.hstack([self.a, self.b[:, None]])

    @classmethod
    def from_matrix(cls, W):
        W = np.atleast_2d(W)
        return cls(W[:, :-1].copy(), W[:, -1].copy())


def logsumexp(v, axis=None):
    """Compute ``log(sum(exp(v)))`` with a max shift.

    Works along ``axis`` for arrays; with ``axis=None`` the whole input is
    reduced to a scalar.
    """
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise ValueError("logsumexp of an empty vector")
    vmax = np.max(v, axis=axis, keepdims=True)
    if not np.all(np.isfinite(vmax)):
        raise ValueError("logsumexp requires finite inputs")
    out = np.log(np.sum(np.exp(v - vmax), axis=axis, keepdims=True)) + vmax
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise ValueError("inputs must be finite")


def _augment(X):
    X = np.asarray(X, dtype=float)
    return np.hstack([X, np.ones((X.shape[0], 1))])


def ridge_fit(X, y, alpha):
    """Regularized least squares with penalized intercept.

    Minimizes ``alpha * (||a||^2 + b^2) + sum_k (y_k - a @ x_k - b)^2``.

    Parameters
    ----------
    X : ndarray of shape (N, n)
    y : ndarray of shape (N,) or (N, m)
        Several targets are solved at once when ``y`` is 2-D.
    alpha : float or ndarray of shape (m,)
        Regularization weight, possibly one per target column.

    Returns
    -------
    a : ndarray of shape (n,) or (m, n)
    b : float or ndarray of shape (m,)
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_finite(X, y)
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if np.any(alpha <= 0):
        raise ValueError("alpha must be positive")
    Z = _augment(X)
    Y = y.reshape(len(y), -1)
    if alpha.size == 1:
        alpha = np.full(Y.shape[1], alpha[0])
    if alpha.size != Y.shape[1]:
        raise ValueError("one alpha per target column required")
    G = Z.T @ Z
    rhs = Z.T @ Y
    W = np.empty((Z.shape[1], Y.shape[1]))
    eye = np.eye(Z.shape[1])
    # columns sharing an alpha share a factorization
    for value in np.unique(alpha):
        cols = np.flatnonzero(alpha == value)
        factor = linalg.cho_factor(G + value * eye)
        W[:, cols] = linalg.cho_solve(factor, rhs[:, cols])
    if y.ndim == 1:
        return W[:-1, 0], float(W[-1, 0])
    return W[:-1].T, W[-1].copy()


def _softmax_objective(W_free, Z, labels, alpha, n_classes, reduced):
    """Regularized cross-entropy and its gradient.

    ``W_free`` holds ``[a | b]`` rows flattened; with ``reduced`` the last
    class is pinned to zero and not part of ``W_free``.
    """
    d = Z.shape[1]
    n_free = n_classes - 1 if reduced else n_classes
    W_free = W_free.reshape(n_free, d)
    scores = Z @ W_free.T
    if reduced:
        scores = np.hstack([scores, np.zeros((Z.shape[0], 1))])
    lse = logsumexp(scores, axis=1) if len(scores) else np.zeros(0)
    picked = scores[np.arange(len(labels)), labels]
    value = alpha * np.sum(W_free * W_free) + np.sum(lse - picked)
    P = np.exp(scores - lse[:, None])
    P[np.arange(len(labels)), labels] -= 1.0
    grad = 2.0 * alpha * W_free + P[:, :n_free].T @ Z
    return value, grad.ravel()


def softmax_objective(coeffs, X, labels, alpha):
    """Value of the regularized softmax loss at ``coeffs`` (full parameterization)."""
    Z = _augment(X)
    W = coeffs.as_matrix()
    value, _ = _softmax_objective(
        W.ravel(), Z, np.asarray(labels, dtype=int), alpha, W.shape[0], False)
    return value


def softmax_gradient(coeffs, X, labels, alpha):
    Z = _augment(X)
    W = coeffs.as_matrix()
    _, grad = _softmax_objective(
        W.ravel(), Z, np.asarray(labels, dtype=int), alpha, W.shape[0], False)
    return AffineCoeffs.from_matrix(grad.reshape(W.shape))


def _minimize(W0, Z, labels, alpha, n_classes, reduced, settings, callback):
    fun_args = (Z, labels, alpha, n_classes, reduced)
    start_value, _ = _softmax_objective(W0, *fun_args)
    res = optimize.minimize(
        _softmax_objective, W0, args=fun_args, jac=True, method="L-BFGS-B",
        callback=callback,
        options={
            "gtol": settings.gradient_tolerance,
            "ftol": 0.0,
            "maxfun": settings.max_evaluations,
            "maxiter": settings.max_evaluations,
            "maxcor": settings.memory_depth,
        })
    # never hand back something worse than the warm start
    if res.fun > start_value:
        return W0
    return res.x


def softmax_fit(X, labels, n_classes, alpha, warm_start=None,
                settings=FINAL_SETTINGS, callback=None):
    """Fit an l2-regularized multinomial logistic regression.

    Minimizes ``alpha * sum_h (||a_h||^2 + b_h^2) - sum_k log softmax_k``
    over all ``n_classes`` rows. Classes absent from ``labels`` still get
    finite coefficients thanks to the penalty.

    Parameters
    ----------
    X : ndarray of shape (N, n)
    labels : ndarray of shape (N,)
        Class indices in ``0..n_classes-1``.
    n_classes : int
    alpha : float
        Must be positive.
    warm_start : AffineCoeffs, optional
        Starting point; the returned objective is never larger than the one
        at the warm start.
    settings : MinimizerSettings
    callback : callable, optional
        Forwarded to the minimizer, called with the flattened iterate.

    Returns
    -------
    AffineCoeffs
        ``n_classes`` rows.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=int)
    _check_finite(X)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError("labels out of range")
    Z = _augment(X)
    if warm_start is None:
        W0 = np.zeros((n_classes, Z.shape[1]))
    else:
        W0 = warm_start.as_matrix()
        if W0.shape != (n_classes, Z.shape[1]):
            raise ValueError(
                f"warm start has shape {W0.shape}, expected {(n_classes, Z.shape[1])}")
        _check_finite(W0)
    W = _minimize(W0.ravel(), Z, labels, alpha, n_classes, False, settings, callback)
    return AffineCoeffs.from_matrix(W.reshape(n_classes, Z.shape[1]))


def separation_fit(X, labels, n_clusters, beta, warm_start=None,
                   settings=INTERMEDIATE_SETTINGS):
    """Softmax over cluster labels with the last row pinned to zero.

    Returns ``(omega, gamma)`` of shapes ``(K, n)`` and ``(K,)``; the last
    row of both is exactly zero. ``beta`` may be zero.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n = X.shape[1]
    if n_clusters == 1:
        return np.zeros((1, n)), np.zeros(1)
    Z = _augment(X)
    if warm_start is None:
        W0 = np.zeros((n_clusters - 1, n + 1))
    else:
        omega0, gamma0 = warm_start
        W0 = np.hstack([omega0, np.asarray(gamma0)[:, None]])[:-1]
    W = _minimize(W0.ravel(), Z, labels, beta, n_clusters, True, settings, None)
    W = np.vstack([W.reshape(n_clusters - 1, n + 1), np.zeros((1, n + 1))])
    return W[:, :-1].copy(), W[:, -1].copy()


def separation_objective(omega, gamma, X, labels, beta):
    """Regularized reduced softmax cost of a separation (last row must be zero)."""
    K = omega.shape[0]
    if K == 1:
        return 0.0
    Z = _augment(X)
    W = np.hstack([omega, np.asarray(gamma)[:, None]])[:-1]
    value, _ = _softmax_objective(
        W.ravel(), Z, np.asarray(labels, dtype=int), beta, K, True)
    return value


def _logistic_objective(w, Z, sign, alpha):
    margin = sign * (Z @ w)
    value = alpha * (w @ w) + np.sum(np.logaddexp(0.0, margin))
    weights = 1.0 / (1.0 + np.exp(-margin))
    grad = 2.0 * alpha * w + Z.T @ (sign * weights)
    return value, grad


def logistic_fit(X, y, alpha, settings=FINAL_SETTINGS):
    """Binary logistic regression with penalized intercept.

    Minimizes ``alpha * (||a||^2 + b^2) + sum_k log(1 + exp((1 - 2 y_k)(a @ x_k + b)))``
    so that ``a @ x + b > 0`` predicts class 1.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    _check_finite(X)
    Z = _augment(X)
    sign = 1.0 - 2.0 * y
    res = optimize.minimize(
        _logistic_objective, np.zeros(Z.shape[1]), args=(Z, sign, alpha),
        jac=True, method="L-BFGS-B",
        options={"gtol": settings.gradient_tolerance, "ftol": 0.0,
                 "maxfun": settings.max_evaluations,
                 "maxiter": settings.max_evaluations,
                 "maxcor": settings.memory_depth})
    return res.x[:-1], float(res.x[-1])


def binary_equivalence_check(X, labels, alpha, settings=None, atol=1e-7):
    """Check that two-class softmax and logistic regression classify alike.

    The two-class softmax splits the score difference symmetrically between
    its rows, so its penalty on the difference is half of ``alpha``; the
    logistic fit is run with ``alpha / 2`` to obtain the same discriminant.
    Points whose discriminant is within ``atol`` of zero in both fits count
    as agreeing.
    """
    if settings is None:
        settings = MinimizerSettings(gradient_tolerance=1e-10)
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=int)
    soft = softmax_fit(X, labels, 2, alpha, settings=settings)
    d_soft = X @ (soft.a[1] - soft.a[0]) + (soft.b[1] - soft.b[0])
    a, b = logistic_fit(X, labels, alpha / 2.0, settings=settings)
    d_log = X @ a + b
    agree = (d_soft > 0) == (d_log > 0)
    near = (np.abs(d_soft) <= atol) & (np.abs(d_log) <= atol)
    return bool(np.all(agree | near))
