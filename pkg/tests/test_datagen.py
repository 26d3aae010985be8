import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsemkl.datagen import (
    Dataset, SyntheticSpec, generate, holdout_split, load_dataset, planted_sequence, save_dataset,
)
from sparsemkl.diagnostics import dependency_report
from sparsemkl.errors import ParseError, ValidationError
from sparsemkl.oracles import best_subset, global_min_loss


def test_orthogonal_ranges_have_zero_correlation():
    _, bank, truth = generate(SyntheticSpec(40, 4, 2, 0.0, "orthogonal_ranges", 0))
    assert dependency_report(bank, 4).delta == 0.0
    assert len(truth.support) == 2 and len(truth.extra["frequencies"]) == 4


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_noiseless_planted_support_is_recovered(seed, s):
    n = 4 * s * 3
    m = min((n - 1) // 2, s + 4)
    data, bank, truth = generate(SyntheticSpec(n, m, s, 0.0, "orthogonal_ranges", seed))
    f_star, _ = global_min_loss(bank, data.y)
    assert f_star == pytest.approx(0.0, abs=1e-12)
    res = best_subset(bank, data.y, s)
    assert sorted(res.best_support) == sorted(truth.support)
    assert res.f_hat_loss <= f_star + 1e-8


def test_planted_sequence_is_antiperiodic():
    for s in (1, 2, 5):
        x = planted_sequence(s)
        assert x.shape == (4 * s,)
        np.testing.assert_array_equal(x[2 * s:], -x[: 2 * s])
        assert set(np.unique(x)) <= {-1.0, 1.0}


@pytest.mark.parametrize("structure", ["orthogonal_ranges", "random_rbf_bank", "duplicate_counterexample"])
def test_same_seed_is_bit_identical(structure):
    spec = SyntheticSpec(24, 5, 2, 0.3, structure, 9)
    (d1, b1, t1), (d2, b2, t2) = generate(spec), generate(spec)
    np.testing.assert_array_equal(d1.X, d2.X)
    np.testing.assert_array_equal(d1.y, d2.y)
    assert b1.ids == b2.ids and t1.support == t2.support
    for a, b in zip(b1.matrices, b2.matrices):
        np.testing.assert_array_equal(a, b)
    d3, _, _ = generate(SyntheticSpec(24, 5, 2, 0.3, structure, 10))
    assert not np.array_equal(d1.X, d3.X)


def test_infeasible_specs_rejected():
    with pytest.raises(ValidationError):
        generate(SyntheticSpec(20, 12, 2, 0.0, "orthogonal_ranges", 0))
    with pytest.raises(ValidationError):
        generate(SyntheticSpec(30, 5, 2, 0.0, "orthogonal_ranges", 0))
    with pytest.raises(ValidationError):
        SyntheticSpec(30, 2, 3)
    with pytest.raises(ValidationError):
        SyntheticSpec(30, 2, 1, structure="blobs")
    with pytest.raises(ValidationError):
        SyntheticSpec(30, 2, 1, noise_std=-1)


def test_duplicate_counterexample_ids():
    _, bank, truth = generate(SyntheticSpec(30, 4, 1, 0.0, "duplicate_counterexample", 0))
    assert bank.ids == ["kappa1_copy0", "kappa1_copy1", "kappa1_copy2", "kappa2"]
    assert truth.support == ["kappa1_copy0"]


def test_random_rbf_labels_and_signal():
    data, bank, truth = generate(SyntheticSpec(40, 6, 2, 0.0, "random_rbf_bank", 1, signal=2.0))
    assert np.sqrt(np.mean(truth.target ** 2)) == pytest.approx(2.0)
    np.testing.assert_array_equal(data.y, np.where(truth.target >= 0, 1.0, -1.0))
    assert len(bank) == 6 and np.all(np.diag(bank.matrices[0]) == 1.0)


def test_csv_examples(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,y\n1,2,1\n3,4,-1\n")
    d = load_dataset(p)
    np.testing.assert_array_equal(d.X, [[1, 2], [3, 4]])
    np.testing.assert_array_equal(d.y, [1, -1])
    p.write_text("y,a\n-1,5\n1,6\n")
    np.testing.assert_array_equal(load_dataset(p).X, [[5], [6]])
    p.write_text("0.5,1\n0.25,-1\n")
    np.testing.assert_array_equal(load_dataset(p).y, [1, -1])


def test_csv_errors(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1,2,1\n3,0\n")
    with pytest.raises(ParseError, match=":2:"):
        load_dataset(p)
    p.write_text("1,2,1\n3,4,0\n")
    with pytest.raises(ValidationError, match="row 2"):
        load_dataset(p)
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "missing.csv")


def test_sparse_examples(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("1 1:0.5 3:2\n-1 2:1\n")
    d = load_dataset(p, "sparse_labeled")
    np.testing.assert_array_equal(d.X, [[0.5, 0, 2], [0, 1, 0]])
    p.write_text("1 0:0.5\n")
    with pytest.raises(ParseError, match=":1:"):
        load_dataset(p, "sparse_labeled")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["csv", "sparse_labeled"]))
def test_roundtrip_is_bit_exact(tmp_path_factory, seed, fmt):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((7, 3)) * 10.0 ** rng.integers(-8, 8, (7, 3))
    X[:, -1] += 1.0  # keep the last column nonzero for the sparse format
    y = np.where(rng.standard_normal(7) >= 0, 1.0, -1.0)
    path = tmp_path_factory.mktemp("rt") / "d"
    save_dataset(Dataset(X, y), path, fmt)
    back = load_dataset(path, fmt)
    np.testing.assert_array_equal(back.X, X)
    np.testing.assert_array_equal(back.y, y)


def test_holdout_split():
    tr, te = holdout_split(10, 0.3, seed=1)
    assert len(te) == 3 and len(tr) == 7
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(10))
    np.testing.assert_array_equal(holdout_split(10, 0.3, seed=1)[1], te)
    with pytest.raises(ValidationError):
        holdout_split(10, 1.0)
