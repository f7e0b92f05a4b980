import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parc.data import (CATEGORICAL, NUMERIC, ColumnSpec, DataError, decode_features,
                       encode, encode_features, fit_scaler, infer_specs, load_table, split,
                       write_csv)
from parc.synthetic import gen_pwa_dataset

ABC = ColumnSpec("c", CATEGORICAL, ["a", "b", "c"])


def test_drop_first_onehot():
    assert encode_features([["b"]], [ABC]).tolist() == [[1.0, 0.0]]
    assert encode_features([["a"]], [ABC]).tolist() == [[0.0, 0.0]]
    assert encode_features([["c"]], [ABC]).tolist() == [[0.0, 1.0]]


def test_mixed_table_width():
    specs = [ColumnSpec("u"), ColumnSpec("v"), ABC]
    ds = encode([[1, 2, "a", 0.5], [3, 4, "b", 1.5], [5, 6, "c", 2.5]], specs, [ColumnSpec("y")])
    assert ds.X.shape == (3, 4)
    assert ds.Yc[:, 0].tolist() == [0.5, 1.5, 2.5]
    assert ds.onehot_mask.tolist() == [False, False, True, True]


def test_numeric_cells_kept_bit_exact():
    v = 0.1 + 0.2
    ds = encode([[repr(v), "1"]], [ColumnSpec("u")], [ColumnSpec("y")])
    assert ds.X[0, 0] == v


def test_unknown_category_rejected():
    with pytest.raises(DataError, match="'c'.*'z'"):
        encode_features([["z"]], [ABC])


def test_non_numeric_in_numeric_column_rejected():
    with pytest.raises(DataError, match="non-numeric"):
        encode_features([["abc"]], [ColumnSpec("u")])


def test_missing_value_rejected():
    with pytest.raises(DataError, match="missing"):
        encode_features([[""]], [ColumnSpec("u")])


def test_column_spec_invariants():
    with pytest.raises(DataError):
        ColumnSpec("c", CATEGORICAL, ["a"])
    with pytest.raises(DataError):
        ColumnSpec("c", CATEGORICAL, ["a", "a"])
    assert ABC.width == 2
    assert ColumnSpec.from_dict(ABC.to_dict()) == ABC


def test_infer_specs_threshold_and_order():
    header = ["few", "many", "text"]
    rows = [[str(i % 3), str(i), "q" if i % 2 else "p"] for i in range(10)]
    specs = infer_specs(header, rows)
    assert [s.kind for s in specs] == [CATEGORICAL, NUMERIC, CATEGORICAL]
    assert specs[0].categories == ["0", "1", "2"]
    assert specs[2].categories == ["p", "q"]
    specs = infer_specs(header, rows, overrides={"few": NUMERIC})
    assert specs[0].kind == NUMERIC
    specs = infer_specs(header, rows, threshold=2)
    assert specs[0].kind == NUMERIC


def test_scaler_examples():
    s = fit_scaler(np.array([[0.0], [2.0]]))
    assert s.mean.tolist() == [1.0] and s.std.tolist() == [1.0]
    assert s.transform([[0.0], [2.0]]).tolist() == [[-1.0], [1.0]]
    s = fit_scaler(np.array([[5.0], [5.0]]))
    assert s.transform([[5.0], [5.0]]).tolist() == [[0.0], [0.0]]


def test_scaler_zero_mean(rng):
    X = rng.normal(size=(10, 3)) * [1, 10, 100] + [3, -4, 5]
    Z = fit_scaler(X).transform(X)
    for c in range(3):
        assert abs(math.fsum(Z[:, c]) / 10) < 1e-12
        assert abs(math.sqrt(math.fsum(Z[:, c] ** 2) / 10) - 1) < 1e-12


def test_scaler_exempts_onehot():
    X = np.array([[0.0, 1.0], [4.0, 0.0], [8.0, 1.0]])
    s = fit_scaler(X, exempt=[False, True])
    assert s.transform(X)[:, 1].tolist() == [1.0, 0.0, 1.0]


@given(st.lists(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3), min_size=2, max_size=20))
def test_scaler_round_trip(rows):
    X = np.array(rows)
    s = fit_scaler(X)
    back = s.inverse_transform(s.transform(X))
    assert np.allclose(back, X, rtol=1e-12, atol=1e-12 * (1 + np.abs(X).max()))


@given(st.lists(st.sampled_from(["a", "b", "c"]), min_size=1, max_size=20))
def test_categorical_round_trip(cells):
    specs = [ABC, ColumnSpec("u")]
    rows = [[c, float(k)] for k, c in enumerate(cells)]
    assert decode_features(encode_features(rows, specs), specs) == rows


def test_encoding_order_stable(rng):
    specs = [ColumnSpec("u"), ABC]
    rows = [[float(k), "abc"[k % 3]] for k in range(9)]
    perm = rng.permutation(9)
    X = encode_features(rows, specs)
    assert np.array_equal(encode_features([rows[p] for p in perm], specs), X[perm])


@pytest.mark.parametrize("N,f,sizes", [(1000, 0.2, (800, 200)), (5, 0.2, (4, 1)), (10, 0.5, (5, 5))])
def test_split_sizes(N, f, sizes):
    tr, te = split(gen_pwa_dataset(N, seed=1), f, seed=3)
    assert (tr.n_samples, te.n_samples) == sizes


def test_split_deterministic_and_disjoint():
    ds = gen_pwa_dataset(10, seed=0)
    a = split(ds, 0.5, seed=7)
    b = split(ds, 0.5, seed=7)
    assert np.array_equal(a[0].X, b[0].X) and np.array_equal(a[1].X, b[1].X)
    rows = {tuple(r) for r in np.vstack([a[0].X, a[1].X])}
    assert len(rows) == 10


@pytest.mark.parametrize("f", [0.0, 1.0, -0.1, 1.5])
def test_split_fraction_out_of_range(f):
    with pytest.raises(DataError):
        split(gen_pwa_dataset(10), f)


def test_load_table_csv(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["x", "color", "y", "label"],
              [[0.5, "red", 1.25, "yes"], [1.5, "blue", 2.5, "no"], [2.5, "red", 3.75, "no"],
               [3.5, "green", 4.0, "yes"], [4.5, "red", 5.5, "yes"]])
    ds = load_table(path, ["y", "label"])
    assert ds.X.shape == (5, 3)
    assert ds.Yc[:, 0].tolist() == [1.25, 2.5, 3.75, 4.0, 5.5]
    assert ds.Yd[:, 0].tolist() == [0, 1, 1, 0, 0]
    assert ds.n_classes == (2,)
    with pytest.raises(DataError, match="not found"):
        load_table(path, ["nope"])
