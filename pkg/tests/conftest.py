import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from parc.data import CATEGORICAL, NUMERIC, ColumnSpec
from parc.model import SOFTMAX, VORONOI, ParcModel

settings.register_profile(
    "repo", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def random_model(rng, K=3, n=2, n_numeric=1, n_classes=(), separation=SOFTMAX, scale=1.0):
    """A ParcModel with random parameters (identity scalers)."""
    m = n_numeric + sum(n_classes)
    coef = rng.normal(size=(K, m, n)) * scale
    intercept = rng.normal(size=(K, m)) * scale
    centroids = None
    if separation == VORONOI:
        centroids = rng.uniform(-1, 1, size=(K, n))
        omega = centroids.copy()
        gamma = -0.5 * (centroids ** 2).sum(axis=1)
    else:
        omega = rng.normal(size=(K, n)) * 2
        gamma = rng.normal(size=K)
        omega[-1] = 0.0
        gamma[-1] = 0.0
    features = [ColumnSpec(f"x{h + 1}") for h in range(n)]
    targets = [ColumnSpec(f"y{i + 1}") for i in range(n_numeric)]
    targets += [ColumnSpec(f"c{i + 1}", CATEGORICAL, [f"k{h}" for h in range(mi)])
                for i, mi in enumerate(n_classes)]
    return ParcModel(coef, intercept, omega, gamma, separation=separation,
                     centroids=centroids, n_numeric=n_numeric, n_classes=n_classes,
                     feature_specs=features, target_specs=targets,
                     x_bounds=np.array([[-1.0] * n, [1.0] * n]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


__all__ = ["random_model", "NUMERIC", "VORONOI", "SOFTMAX"]
