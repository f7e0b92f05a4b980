"""Synthetic benchmark datasets and the repeated-run benchmark driver.

Random numbers come from numpy's PCG64 generator (``numpy.random.default_rng``),
so a seed reproduces the same samples on every platform.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict

import numpy as np

from .core import ParcConfig, fit
from .data import ColumnSpec, EncodedDataset, split
from .predictor import evaluate

logger = logging.getLogger(__name__)

#: Rows ``(c1, c2, c0)`` of the six affine pieces; the function is their max.
PWA_PIECES = np.array([
    [0.8031, 0.0219, -0.3227],
    [0.2458, -0.5823, -0.1997],
    [0.0942, -0.5617, -0.1622],
    [0.9462, -0.7299, -0.7141],
    [-0.4799, 0.1084, -0.1210],
    [0.5770, 0.1574, -0.1788],
])


def pwa_function(X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.max(X @ PWA_PIECES[:, :2].T + PWA_PIECES[:, 2], axis=1)


def nl_function(X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.sin(4 * X[:, 0] - 5 * (X[:, 1] - 0.5) ** 2) + 2 * X[:, 1]


def _dataset(X, y):
    feats = [ColumnSpec("x1"), ColumnSpec("x2")]
    return EncodedDataset(X, y[:, None], np.zeros((len(y), 0), dtype=int),
                          feats, [ColumnSpec("y")])


def gen_pwa_dataset(n_samples, seed=0):
    """Noiseless samples of the six-piece max-affine function on ``[-1, 1]^2``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    X = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(n_samples, 2))
    return _dataset(X, pwa_function(X))


def gen_nl_dataset(n_samples, seed=0, low=0.0, high=1.0):
    """Samples of ``sin(4 x1 - 5 (x2 - 1/2)^2) + 2 x2`` on ``[low, high]^2``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    X = np.random.default_rng(seed).uniform(low, high, size=(n_samples, 2))
    return _dataset(X, nl_function(X))


GENERATORS = {"pwa": gen_pwa_dataset, "nonlinear": gen_nl_dataset}

#: Default grids of the two experiments: (K values, sigma values, separations).
EXPERIMENTS = {
    "pwa": dict(Ks=(6,), sigmas=(0.0,), separations=("softmax",)),
    "nonlinear": dict(Ks=(1, 3, 5, 8, 12, 30), sigmas=(0.0, 0.01, 1.0, 100.0, 10000.0),
                      separations=("softmax", "voronoi")),
}


def run_benchmark(experiment, repetitions=20, Ks=None, sigmas=None, separations=None,
                  n_samples=1000, test_fraction=0.2, seed=0, base_config=None):
    """Repeat PARC over fresh datasets and summarize the scores.

    Repetition ``r`` draws its dataset, split and K-means++ seed from
    ``seed + r``; the same draw is shared by every (sigma, K, separation)
    combination, so K=1 rows coincide across sigma and separation.

    Returns
    -------
    list of dict
        One row per (sigma, K, separation) with means and standard
        deviations (population, i.e. 0 for a single repetition) of train/test
        R², iteration counts and wall time.
    """
    if experiment not in GENERATORS:
        raise ValueError(f"unknown experiment {experiment!r}; choose from {sorted(GENERATORS)}")
    grid = EXPERIMENTS[experiment]
    Ks = Ks or grid["Ks"]
    sigmas = sigmas if sigmas is not None else grid["sigmas"]
    separations = separations or grid["separations"]
    base = base_config or ParcConfig()
    splits = []
    for r in range(repetitions):
        data = GENERATORS[experiment](n_samples, seed + r)
        splits.append(split(data, test_fraction, seed + r))

    rows = []
    for sigma in sigmas:
        for sep in separations:
            for K in Ks:
                runs = []
                for r, (train, test) in enumerate(splits):
                    cfg = ParcConfig(**{**asdict(base), "K": K, "sigma": sigma,
                                        "separation": sep, "seed": seed + r})
                    t0 = time.perf_counter()
                    model, report = fit(train, cfg)
                    elapsed = time.perf_counter() - t0
                    runs.append((evaluate(model, train)["r2"][0],
                                 evaluate(model, test)["r2"][0],
                                 report.iterations, elapsed))
                arr = np.asarray(runs, dtype=float)
                row = {"experiment": experiment, "sigma": sigma, "K": K, "separation": sep,
                       "repetitions": repetitions}
                for c, name in enumerate(("r2_train", "r2_test", "iterations", "time")):
                    row[f"{name}_mean"] = float(arr[:, c].mean())
                    row[f"{name}_std"] = float(arr[:, c].std())
                logger.info("%s sigma=%g K=%d %s: train R2 %.4f test R2 %.4f",
                            experiment, sigma, K, sep, row["r2_train_mean"], row["r2_test_mean"])
                rows.append(row)
    return rows


def format_table(rows):
    """Plain-text summary: mean (std) per row."""
    lines = [f"{'sigma':>8} {'sep':>8} {'K':>3}  {'R2 train':>16}  {'R2 test':>16}  {'iters':>12}  {'time[s]':>8}"]
    for r in rows:
        lines.append(
            f"{r['sigma']:>8g} {r['separation']:>8} {r['K']:>3}  "
            f"{r['r2_train_mean']:.3f} ({r['r2_train_std']:.3f})  "
            f"{r['r2_test_mean']:.3f} ({r['r2_test_std']:.3f})  "
            f"{r['iterations_mean']:6.1f} ({r['iterations_std']:4.1f})  "
            f"{r['time_mean']:8.3f}")
    return "\n".join(lines)
