import itertools
import math

import numpy as np
import pytest

from parc.core import (ParcConfig, ParcError, Separation, _problem, assign_all,
                       assignment_costs, fit, fit_arrays, kmeanspp_init, objective,
                       select_k, separation_loss, target_loss)
from parc.data import ColumnSpec, EncodedDataset
from parc.model import SOFTMAX, VORONOI
from parc.predictor import evaluate
from parc.solvers import AffineCoeffs, ridge_fit, softmax_fit
from parc.synthetic import gen_pwa_dataset


def _dataset(X, y):
    return EncodedDataset(X, np.asarray(y, float).reshape(len(X), -1),
                          np.zeros((len(X), 0), int),
                          [ColumnSpec(f"x{h}") for h in range(X.shape[1])], [ColumnSpec("y")])


# -- initialization ------------------------------------------------------

def test_kmeanspp_single_cluster(rng):
    assert kmeanspp_init(rng.normal(size=(7, 2)), 1).tolist() == [0] * 7


def test_kmeanspp_singletons(rng):
    X = rng.normal(size=(6, 2))
    labels = kmeanspp_init(X, 6, seed=4)
    assert sorted(labels.tolist()) == list(range(6))


def test_kmeanspp_blobs_match_best_partition():
    rng = np.random.default_rng(2)
    X = np.vstack([rng.normal(-3, 0.4, size=(6, 2)), rng.normal(3, 0.4, size=(6, 2))])

    def sse(mask):
        return sum(((X[m] - X[m].mean(axis=0)) ** 2).sum() for m in (mask, ~mask) if m.any())

    # exhaustive search over 2-partitions (first point fixed in group 0)
    best = min((np.array((0,) + bits, bool) for bits in itertools.product((0, 1), repeat=11)),
               key=sse)
    labels = kmeanspp_init(X, 2, seed=0)
    same = labels == labels[0]
    assert np.array_equal(same, ~best)


def test_kmeanspp_blobs_larger():
    rng = np.random.default_rng(3)
    X = np.vstack([rng.normal(-3, 0.5, size=(20, 2)), rng.normal(3, 0.5, size=(20, 2))])
    labels = kmeanspp_init(X, 2, seed=5)
    assert len(set(labels[:20])) == 1 and len(set(labels[20:])) == 1
    assert labels[0] != labels[20]


def test_kmeanspp_deterministic_and_nonempty(rng):
    X = rng.normal(size=(50, 3))
    a = kmeanspp_init(X, 5, seed=9)
    assert np.array_equal(a, kmeanspp_init(X, 5, seed=9))
    assert np.all(np.bincount(a, minlength=5) > 0)


def test_kmeanspp_too_many_clusters():
    with pytest.raises(ParcError):
        kmeanspp_init(np.zeros((3, 1)), 4)


# -- losses --------------------------------------------------------------

def test_target_loss_examples():
    c = AffineCoeffs([[2.0, -1.0]], [0.5])
    x = np.array([1.0, 3.0])
    assert target_loss(c, x, [2 - 3 + 0.5], np.zeros(0, int), (), [1.0], []) == 0.0
    zero = AffineCoeffs(np.zeros((2, 2)), np.zeros(2))
    assert target_loss(zero, x, np.zeros(0), [1], (2,), [], [1.0]) == pytest.approx(math.log(2), abs=1e-15)


def test_target_loss_direct_formula(rng):
    for _ in range(10):
        c = AffineCoeffs(rng.normal(size=(1 + 3 + 2, 2)), rng.normal(size=6))
        x = rng.normal(size=2)
        yc = rng.normal(size=1)
        yd = [rng.integers(3), rng.integers(2)]
        mu_c, mu_d = [0.7], [1.3, 0.4]
        s = [float(c.a[r] @ x + c.b[r]) for r in range(6)]
        ref = 0.7 * (yc[0] - s[0]) ** 2
        ref += 1.3 * (math.log(sum(math.exp(t) for t in s[1:4])) - s[1 + yd[0]])
        ref += 0.4 * (math.log(sum(math.exp(t) for t in s[4:6])) - s[4 + yd[1]])
        got = target_loss(c, x, yc, yd, (3, 2), mu_c, mu_d)
        assert got == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_separation_loss_examples(rng):
    cent = rng.normal(size=(3, 2))
    vor = Separation(VORONOI, cent, -0.5 * (cent ** 2).sum(1), cent)
    assert separation_loss(vor, 1, cent[1]) == 0.0
    single = Separation(SOFTMAX, np.zeros((1, 2)), np.zeros(1))
    assert separation_loss(single, 0, rng.normal(size=2)) == 0.0


def test_separation_loss_softmax_direct(rng):
    for _ in range(10):
        omega = rng.normal(size=(4, 3))
        gamma = rng.normal(size=4)
        omega[-1], gamma[-1] = 0, 0
        sep = Separation(SOFTMAX, omega, gamma)
        x = rng.normal(size=3)
        s = omega @ x + gamma
        for j in range(4):
            ref = math.log(1 + sum(math.exp(t) for t in s[:3])) - s[j]
            assert abs(separation_loss(sep, j, x) - ref) < 1e-12


# -- assignment ----------------------------------------------------------

def _random_problem(rng, N=10, n=2, mc=1, classes=(3,)):
    X = rng.normal(size=(N, n))
    Yc = rng.normal(size=(N, mc))
    Yd = np.column_stack([rng.integers(0, m, size=N) for m in classes]) if classes else np.zeros((N, 0), int)
    return _problem(X, Yc, Yd, classes)


def _brute_force_labels(prob, coef, intercept, sep, sigma, alpha):
    """Per-point enumeration of every cluster's contribution to V."""
    N, K = prob.X.shape[0], coef.shape[0]
    out = []
    for k in range(N):
        costs = []
        for j in range(K):
            c = AffineCoeffs(coef[j], intercept[j])
            cost = target_loss(c, prob.X[k], prob.Yc[k], prob.Yd[k], prob.n_classes,
                               prob.mu_c, prob.mu_d)
            cost += alpha / N * (np.sum(coef[j] ** 2) + np.sum(intercept[j] ** 2))
            cost += sigma * separation_loss(sep, j, prob.X[k])
            costs.append(cost)
        out.append(min(range(K), key=lambda j: (costs[j], j)))
    return np.array(out)


def test_assign_identical_clusters_go_to_first(rng):
    prob = _random_problem(rng)
    coef = np.repeat(rng.normal(size=(1, 4, 2)), 3, axis=0)
    intercept = np.repeat(rng.normal(size=(1, 4)), 3, axis=0)
    sep = Separation(SOFTMAX, np.zeros((3, 2)), np.zeros(3))
    assert assign_all(prob, coef, intercept, sep, 1.0, 0.1).tolist() == [0] * 10


def test_assign_sigma_zero_ignores_separation(rng):
    prob = _random_problem(rng)
    coef = rng.normal(size=(3, 4, 2))
    intercept = rng.normal(size=(3, 4))
    a = assign_all(prob, coef, intercept, Separation(SOFTMAX, rng.normal(size=(3, 2)), rng.normal(size=3)), 0.0, 0.1)
    b = assign_all(prob, coef, intercept, Separation(SOFTMAX, rng.normal(size=(3, 2)) * 50, rng.normal(size=3)), 0.0, 0.1)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("mode", [SOFTMAX, VORONOI])
def test_assign_matches_brute_force(rng, mode):
    prob = _random_problem(rng)
    coef = rng.normal(size=(3, 4, 2))
    intercept = rng.normal(size=(3, 4))
    cent = rng.normal(size=(3, 2))
    sep = Separation(mode, cent, -0.5 * (cent ** 2).sum(1), cent if mode == VORONOI else None)
    for sigma in (0.0, 0.5, 3.0):
        assert np.array_equal(assign_all(prob, coef, intercept, sep, sigma, 0.1),
                              _brute_force_labels(prob, coef, intercept, sep, sigma, 0.1))


def test_assignment_does_not_increase_objective(rng):
    cfg = ParcConfig(K=3, sigma=0.7)
    prob = _random_problem(rng, N=25)
    coef = rng.normal(size=(3, 4, 2))
    intercept = rng.normal(size=(3, 4))
    sep = Separation(SOFTMAX, rng.normal(size=(3, 2)), rng.normal(size=3))
    labels = rng.integers(0, 3, size=25)
    new = assign_all(prob, coef, intercept, sep, cfg.sigma, cfg.alpha)
    assert objective(prob, coef, intercept, sep, new, cfg) <= objective(prob, coef, intercept, sep, labels, cfg)
    # no single relabeling improves the per-point cost
    costs = assignment_costs(prob, coef, intercept, sep, cfg.sigma, cfg.alpha)
    assert np.all(costs[np.arange(25), new][:, None] <= costs)


# -- objective -----------------------------------------------------------

def test_objective_zero():
    prob = _problem(np.zeros((4, 2)), np.zeros((4, 1)), np.zeros((4, 0), int), ())
    sep = Separation(SOFTMAX, np.zeros((2, 2)), np.zeros(2))
    cfg = ParcConfig(K=2, sigma=0.0)
    assert objective(prob, np.zeros((2, 1, 2)), np.zeros((2, 1)), sep, np.array([0, 1, 0, 1]), cfg) == 0.0


def test_objective_single_cluster_is_ridge_cost(rng):
    X = rng.normal(size=(12, 2))
    y = rng.normal(size=12)
    prob = _problem(X, y[:, None], np.zeros((12, 0), int), ())
    a, b = ridge_fit(X, y, 0.1)
    sep = Separation(SOFTMAX, np.zeros((1, 2)), np.zeros(1))
    cfg = ParcConfig(K=1, alpha=0.1, sigma=2.0)
    got = objective(prob, a[None, None, :], np.array([[b]]), sep, np.zeros(12, int), cfg)
    ref = 0.1 * (a @ a + b * b) + np.sum((y - X @ a - b) ** 2)
    assert got == pytest.approx(ref, rel=1e-12)


# -- fitting -------------------------------------------------------------

def test_single_region_matches_solvers(rng):
    X = rng.normal(size=(40, 2))
    Yc = rng.normal(size=(40, 2))
    Yd = rng.integers(0, 3, size=(40, 1))
    cfg = ParcConfig(K=1, alpha=0.2, tol_final=1e-10)
    model, _ = fit_arrays(X, Yc, Yd, (3,), cfg)
    a, b = ridge_fit(X, Yc, 0.2)
    assert np.allclose(model.coef[0, :2], a, atol=1e-8)
    assert np.allclose(model.intercept[0, :2], b, atol=1e-8)
    from parc.solvers import MinimizerSettings
    c = softmax_fit(X, Yd[:, 0], 3, 0.2, settings=MinimizerSettings(1e-10))
    assert np.allclose(model.coef[0, 2:], c.a, atol=1e-8)
    assert np.allclose(model.intercept[0, 2:], c.b, atol=1e-8)


def test_pwa_fit_monotone():
    data = gen_pwa_dataset(400, seed=1)
    model, report = fit(data, ParcConfig(K=6, sigma=0.0))
    V = report.objective_per_iter
    assert all(b <= a + 1e-9 for a, b in zip(V, V[1:]))
    assert report.iterations <= 100
    assert evaluate(model, data)["r2"][0] > 0.97


def test_large_sigma_voronoi_stops_after_one_iteration(rng):
    X = rng.uniform(-1, 1, size=(200, 2))
    y = np.abs(X[:, 0]) + X[:, 1] ** 2
    _, report = fit(_dataset(X, y), ParcConfig(K=4, sigma=1e4, separation=VORONOI))
    assert report.iterations == 1
    assert report.stop_reason == "assignment-unchanged"


def test_large_sigma_softmax_settles_quickly(rng):
    # the softmax partition can relabel a few K-means boundary points once
    X = rng.uniform(-1, 1, size=(200, 2))
    y = np.abs(X[:, 0]) + X[:, 1] ** 2
    _, report = fit(_dataset(X, y), ParcConfig(K=4, sigma=1e4))
    assert report.iterations <= 2
    assert report.stop_reason == "assignment-unchanged"


def test_voronoi_model_invariants(rng):
    X = rng.uniform(-1, 1, size=(150, 2))
    model, _ = fit_arrays(X, np.abs(X[:, :1]), np.zeros((150, 0), int), (),
                          ParcConfig(K=3, separation=VORONOI))
    assert np.array_equal(model.omega, model.centroids)
    assert np.allclose(model.gamma, -0.5 * (model.centroids ** 2).sum(1))


def test_softmax_model_gauge(rng):
    X = rng.uniform(-1, 1, size=(150, 2))
    model, _ = fit_arrays(X, np.abs(X[:, :1]), np.zeros((150, 0), int), (), ParcConfig(K=4))
    assert np.all(model.omega[-1] == 0) and model.gamma[-1] == 0


def test_small_clusters_dropped_or_reassigned():
    # three outliers on their own affine piece form a cluster below c_min
    X = np.linspace(-1, 1, 60)[:, None]
    y = np.abs(X)
    y[-3:] = -5.0
    cfg = ParcConfig(K=3, sigma=0.0, c_min_fraction=0.1)
    model, report = fit_arrays(X, y, np.zeros((60, 0), int), (), cfg)
    final_sizes = report.cluster_sizes_per_iter[-1]
    assert report.discarded_clusters
    assert all(final_sizes[j] < 6 for j in report.discarded_clusters)
    assert report.n_dropped == sum(final_sizes[j] for j in report.discarded_clusters) > 0
    assert model.n_regions == 3 - len(report.discarded_clusters)
    cfg = ParcConfig(K=3, sigma=0.0, c_min_fraction=0.1, discard="reassign")
    model, report = fit_arrays(X, y, np.zeros((60, 0), int), (), cfg)
    assert report.discarded_clusters and report.n_dropped == 0


def test_all_clusters_discarded_raises():
    X = np.linspace(-1, 1, 30)[:, None]
    init = np.repeat(np.arange(3), 10)
    with pytest.raises(ParcError, match="discarded"):
        fit_arrays(X, X, np.zeros((30, 0), int), (),
                   ParcConfig(K=3, sigma=1e4, c_min_fraction=0.5), init_labels=init)


def test_k_larger_than_n():
    with pytest.raises(ParcError):
        fit_arrays(np.zeros((2, 1)), np.zeros((2, 1)), np.zeros((2, 0), int), (), ParcConfig(K=3))


@pytest.mark.parametrize("bad", [dict(K=0), dict(alpha=0), dict(sigma=-1), dict(separation="x"),
                                 dict(c_min_fraction=1.0), dict(discard="keep"), dict(max_iters=0)])
def test_config_validation(bad):
    with pytest.raises(ParcError):
        ParcConfig(**bad).validate()


def test_fit_deterministic():
    data = gen_pwa_dataset(200, seed=4)
    a, _ = fit(data, ParcConfig(K=4, seed=2))
    b, _ = fit(data, ParcConfig(K=4, seed=2))
    assert a.dumps() == b.dumps()


def test_zero_weight_target_is_ignored(rng):
    X = rng.uniform(-1, 1, size=(100, 1))
    Yc = np.column_stack([np.abs(X[:, 0]), rng.normal(size=100) * 100])
    cfg = ParcConfig(K=2, mu_c=(1.0, 0.0), sigma=0.0)
    model, report = fit_arrays(X, Yc, np.zeros((100, 0), int), (), cfg)
    V = report.objective_per_iter
    assert all(b <= a + 1e-9 for a, b in zip(V, V[1:]))
    # the noisy target does not enter V
    assert V[-1] < 10


# -- K selection ---------------------------------------------------------

def test_select_k_two_pieces():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(200, 1))
    data = _dataset(X, np.abs(X[:, 0]))
    best, scores = select_k(data, [1, 2, 3], folds=5, config=ParcConfig(sigma=0.0))
    assert best >= 2
    assert scores[1] < 0.7 and max(scores[2], scores[3]) > 0.95


def test_select_k_singleton():
    assert select_k(gen_pwa_dataset(30), [1], folds=3)[0] == 1


def test_select_k_constant_target(rng):
    X = rng.uniform(-1, 1, size=(40, 2))
    best, scores = select_k(_dataset(X, np.full(40, 3.0)), [1, 2, 3], folds=4)
    assert best == 1


def test_select_k_errors():
    data = gen_pwa_dataset(10)
    with pytest.raises(ParcError):
        select_k(data, [], folds=3)
    with pytest.raises(ParcError):
        select_k(data, [1], folds=1)
    with pytest.raises(ParcError, match="empty fold"):
        select_k(data, [1], folds=11)
