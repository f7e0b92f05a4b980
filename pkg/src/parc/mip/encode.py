"""Big-M mixed-integer encoding of a fitted PARC predictor.

Everything here works in raw encoded feature units and raw numeric target
units (see :meth:`ParcModel.raw_affine`). Variable names are 1-based:
``x_1..x_n`` features, ``d_1..d_K`` region binaries, ``p_i_j`` the value of
numeric output ``i`` contributed by region ``j``, ``nu_i_h`` the category
binaries of categorical target ``i`` and ``eps`` the tracking error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ..data import CATEGORICAL
from .milp import BINARY, CONTINUOUS, MilpModel


@dataclass
class Box:
    x_min: np.ndarray
    x_max: np.ndarray

    def __post_init__(self):
        self.x_min = np.asarray(self.x_min, dtype=float)
        self.x_max = np.asarray(self.x_max, dtype=float)
        if self.x_min.shape != self.x_max.shape:
            raise ValueError("box bounds must have the same shape")
        if np.any(self.x_min > self.x_max):
            raise ValueError("box has x_min > x_max")

    @classmethod
    def around(cls, X, expand=0.05):
        """Bounding box of the rows of ``X`` widened by ``expand`` per side."""
        X = np.atleast_2d(X)
        lo, hi = X.min(axis=0), X.max(axis=0)
        w = hi - lo
        return cls(lo - expand * w, hi + expand * w)

    def vertices(self):
        n = self.x_min.size
        grid = np.array(np.meshgrid(*[[0, 1]] * n, indexing="ij")).reshape(n, -1).T
        return np.where(grid == 1, self.x_max, self.x_min)


def default_box(model, expand=0.05):
    """Training bounding box widened by ``expand`` per side.

    One-hot columns keep the bounds ``[0, 1]``.
    """
    if model.x_bounds is None:
        raise ValueError("model carries no training bounds; pass a Box explicitly")
    lo, hi = model.x_bounds
    w = hi - lo
    lo, hi = lo - expand * w, hi + expand * w
    onehot = _onehot_blocks(model)
    for block in onehot:
        lo[block], hi[block] = 0.0, 1.0
    return Box(lo, hi)


def _onehot_blocks(model):
    blocks, col = [], 0
    for spec in model.feature_specs:
        width = 1 if spec.kind != CATEGORICAL else len(spec.categories) - 1
        if spec.kind == CATEGORICAL:
            blocks.append(list(range(col, col + width)))
        col += width
    return blocks


def bigM_bound(v, gamma_diff, box):
    """Upper bound of ``v @ x + gamma_diff`` over the box (attained at a vertex)."""
    v = np.asarray(v, dtype=float)
    return float(gamma_diff + np.sum(np.maximum(v, 0.0) * box.x_max
                                     - np.maximum(-v, 0.0) * box.x_min))


def bigM_lower(v, offset, box):
    """Lower bound of ``v @ x + offset`` over the box."""
    v = np.asarray(v, dtype=float)
    return float(offset + np.sum(np.maximum(v, 0.0) * box.x_min
                                 - np.maximum(-v, 0.0) * box.x_max))


def bigM_bound_lp(v, gamma_diff, box):
    """Same bound computed by linear programming over the box."""
    res = optimize.linprog(-np.asarray(v, dtype=float),
                           bounds=list(zip(box.x_min, box.x_max)), method="highs")
    return float(-res.fun + gamma_diff)


def _feature_vars(milp, model, box):
    n = model.n_features
    onehot = {c for block in _onehot_blocks(model) for c in block}
    for h in range(n):
        name = f"x_{h + 1}"
        if name in milp.names:
            continue
        kind = BINARY if h in onehot else CONTINUOUS
        milp.add_var(name, kind, box.x_min[h], box.x_max[h])
    for b, block in enumerate(_onehot_blocks(model)):
        if f"onehot_{b + 1}" not in milp.row_names:
            milp.add_row({f"x_{c + 1}": 1.0 for c in block}, "<=", 1.0, f"onehot_{b + 1}")
    return [milp.index(f"x_{h + 1}") for h in range(n)]


def _xterms(x_idx, w, scale=1.0):
    return {i: scale * c for i, c in zip(x_idx, w)}


def encode_partition(model, box, milp=None, bigm="lemma"):
    """Region binaries ``d_j`` with ``d_j = 1`` forcing ``x`` into region ``j``.

    Adds ``K(K-1)`` big-M rows and the exactly-one row.
    """
    milp = milp if milp is not None else MilpModel()
    x = _feature_vars(milp, model, box)
    _, _, omega, gamma = model.raw_affine()
    K = model.n_regions
    bound = bigM_bound_lp if bigm == "lp" else bigM_bound
    d = [milp.add_var(f"d_{j + 1}", BINARY, 0.0, 1.0) for j in range(K)]
    for j in range(K):
        for i in range(K):
            if i == j:
                continue
            v = omega[i] - omega[j]
            M = bound(v, gamma[i] - gamma[j], box)
            # v x <= gamma_j - gamma_i + M (1 - d_j)
            row = _xterms(x, v)
            row[d[j]] = M
            milp.add_row(row, "<=", gamma[j] - gamma[i] + M, f"part_{j + 1}_{i + 1}")
    milp.add_row({dj: 1.0 for dj in d}, "=", 1.0, "one_region")
    return milp


def regression_bounds(model, box):
    """Lower/upper bounds ``(Mminus, Mplus)`` of each region's numeric outputs, shape (K, m_c)."""
    coef, intercept, _, _ = model.raw_affine()
    K, mc = model.n_regions, model.n_numeric
    lo = np.empty((K, mc))
    hi = np.empty((K, mc))
    for j in range(K):
        for i in range(mc):
            lo[j, i] = bigM_lower(coef[j, i], intercept[j, i], box)
            hi[j, i] = bigM_bound(coef[j, i], intercept[j, i], box)
    return lo, hi


def encode_regression(model, box, milp=None):
    """Product variables ``p_i_j = d_j * (a^j_i x + b^j_i)`` for every numeric target.

    Requires the partition fragment (``d_j``) to be present or adds it.
    """
    if model.n_numeric < 1:
        raise ValueError("model has no numeric target")
    if milp is None or "d_1" not in milp.names:
        milp = encode_partition(model, box, milp)
    x = [milp.index(f"x_{h + 1}") for h in range(model.n_features)]
    coef, intercept, _, _ = model.raw_affine()
    lo, hi = regression_bounds(model, box)
    for i in range(model.n_numeric):
        for j in range(model.n_regions):
            d = milp.index(f"d_{j + 1}")
            Mm, Mp = lo[j, i], hi[j, i]
            p = milp.add_var(f"p_{i + 1}_{j + 1}", CONTINUOUS, min(Mm, 0.0), max(Mp, 0.0))
            a, b = coef[j, i], intercept[j, i]
            tag = f"{i + 1}_{j + 1}"
            # p <= a x + b - M- (1 - d)
            row = _xterms(x, a, -1.0)
            row.update({p: 1.0, d: -Mm})
            milp.add_row(row, "<=", b - Mm, f"prod_a_{tag}")
            # p >= a x + b - M+ (1 - d)
            row = _xterms(x, a, -1.0)
            row.update({p: 1.0, d: -Mp})
            milp.add_row(row, ">=", b - Mp, f"prod_b_{tag}")
            milp.add_row({p: 1.0, d: -Mp}, "<=", 0.0, f"prod_c_{tag}")
            milp.add_row({p: 1.0, d: -Mm}, ">=", 0.0, f"prod_d_{tag}")
    return milp


def classifier_bigM(model, box):
    """``M[i][h, t]``: bound of score ``t`` minus score ``h`` of target ``i`` over all regions."""
    coef, intercept, _, _ = model.raw_affine()
    out = []
    for sl in model.class_slices():
        mi = sl.stop - sl.start
        M = np.zeros((mi, mi))
        for h in range(mi):
            for t in range(mi):
                if h == t:
                    continue
                # clamped at zero: the row is relaxed by up to 2M when both binaries are off
                M[h, t] = max(0.0, *(
                    bigM_bound(coef[j, sl.start + t] - coef[j, sl.start + h],
                               intercept[j, sl.start + t] - intercept[j, sl.start + h], box)
                    for j in range(model.n_regions)))
        out.append(M)
    return out


def encode_classifier(model, box, milp=None):
    """Category binaries ``nu_i_h`` selecting the argmax class of each categorical target."""
    if not model.n_classes:
        raise ValueError("model has no categorical target")
    if milp is None or "d_1" not in milp.names:
        milp = encode_partition(model, box, milp)
    x = [milp.index(f"x_{h + 1}") for h in range(model.n_features)]
    coef, intercept, _, _ = model.raw_affine()
    Ms = classifier_bigM(model, box)
    for i, (sl, M) in enumerate(zip(model.class_slices(), Ms)):
        mi = sl.stop - sl.start
        nu = [milp.add_var(f"nu_{i + 1}_{h + 1}", BINARY, 0.0, 1.0) for h in range(mi)]
        for j in range(model.n_regions):
            d = milp.index(f"d_{j + 1}")
            for h in range(mi):
                for t in range(mi):
                    if h == t:
                        continue
                    ah, at = coef[j, sl.start + h], coef[j, sl.start + t]
                    bh, bt = intercept[j, sl.start + h], intercept[j, sl.start + t]
                    # (ah - at) x >= bt - bh - M (2 - nu_h - d_j)
                    row = _xterms(x, ah - at)
                    row[nu[h]] = row.get(nu[h], 0.0) - M[h, t]
                    row[d] = row.get(d, 0.0) - M[h, t]
                    milp.add_row(row, ">=", bt - bh - 2.0 * M[h, t],
                                 f"cls_{i + 1}_{j + 1}_{h + 1}_{t + 1}")
        milp.add_row({v: 1.0 for v in nu}, "=", 1.0, f"one_class_{i + 1}")
    return milp


def build_tracking_milp(model, y_ref, box=None, categories=None):
    """Minimize the infinity-norm gap between numeric outputs and ``y_ref``.

    Parameters
    ----------
    model : ParcModel
    y_ref : array-like of shape (m_c,)
        Reference for the numeric targets, raw units.
    box : Box, optional
        Defaults to the training box widened by 5% per side.
    categories : dict, optional
        ``{target index: category index}`` (0-based) pinning categorical
        outputs; adds the classifier encoding.
    """
    if model.n_numeric < 1:
        raise ValueError("tracking needs at least one numeric target")
    y_ref = np.atleast_1d(np.asarray(y_ref, dtype=float))
    if y_ref.shape != (model.n_numeric,):
        raise ValueError(f"y_ref must have {model.n_numeric} entries")
    box = box or default_box(model)
    milp = encode_partition(model, box)
    encode_regression(model, box, milp)
    if categories:
        encode_classifier(model, box, milp)
        for i, h in categories.items():
            for hh in range(model.n_classes[i]):
                idx = milp.index(f"nu_{i + 1}_{hh + 1}")
                milp.lower[idx] = milp.upper[idx] = 1.0 if hh == h else 0.0
    eps = milp.add_var("eps", CONTINUOUS, 0.0, np.inf)
    for i in range(model.n_numeric):
        p = {milp.index(f"p_{i + 1}_{j + 1}"): 1.0 for j in range(model.n_regions)}
        milp.add_row({**p, eps: -1.0}, "<=", y_ref[i], f"track_up_{i + 1}")
        milp.add_row({**p, eps: 1.0}, ">=", y_ref[i], f"track_lo_{i + 1}")
    milp.set_objective({eps: 1.0})
    return milp


def assignment_from_prediction(model, milp, x):
    """Full variable vector of ``milp`` built from ``x`` and the predictor.

    Region and category binaries follow :func:`region_of` and
    :func:`predict`. ``eps`` is left at zero.
    """
    from ..predictor import predict, region_of

    x = np.asarray(x, dtype=float)
    values = np.zeros(milp.n_vars)
    for h in range(model.n_features):
        values[milp.index(f"x_{h + 1}")] = x[h]
    j = region_of(model, x)
    values[milp.index(f"d_{j + 1}")] = 1.0
    yc, yd = predict(model, x)
    for i in range(model.n_numeric):
        name = f"p_{i + 1}_{j + 1}"
        if name in milp.names:
            values[milp.index(name)] = yc[i]
    for i in range(len(model.n_classes)):
        name = f"nu_{i + 1}_{yd[i] + 1}"
        if name in milp.names:
            values[milp.index(name)] = 1.0
    return values
