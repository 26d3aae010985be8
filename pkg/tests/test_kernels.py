import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsemkl.errors import DegenerateKernelError, ParseError, ValidationError
from sparsemkl.kernels import (
    KernelBank, KernelSpec, check_gram, gram, load_specs, normalize, parse_inline_specs, save_specs,
)


def test_linear_identity_rows():
    K = gram(KernelSpec("linear", "a"), np.eye(2)).entries
    np.testing.assert_array_equal(K, np.eye(2))


def test_rbf_diagonal_is_exactly_one(rng):
    for bw in (0.1, 1.0, 7.0):
        K = gram(KernelSpec("rbf", "r", bandwidth=bw), rng.standard_normal((9, 3))).entries
        assert np.all(np.diag(K) == 1.0)


def test_polynomial_hand_value():
    K = gram(KernelSpec("polynomial", "p", degree=2, offset=0.0), np.array([[1.0], [2.0]])).entries
    np.testing.assert_array_equal(K, [[1, 4], [4, 16]])


def test_spec_validation():
    with pytest.raises(ValidationError):
        KernelSpec("rbf", "r", bandwidth=0)
    with pytest.raises(ValidationError):
        KernelSpec("polynomial", "p", degree=0)
    with pytest.raises(ValidationError):
        KernelSpec("sigmoid", "s")
    with pytest.raises(ValidationError):
        KernelSpec("precomputed", "k")


def test_nonfinite_features_rejected():
    with pytest.raises(ValidationError):
        gram(KernelSpec("linear", "a"), np.array([[1.0], [np.nan]]))


def test_precomputed_io(tmp_path):
    p = tmp_path / "k.txt"
    p.write_text("1, 0.5\n0.5 1\n")
    K = gram(KernelSpec("precomputed", "k", path=str(p)), np.zeros((2, 1))).entries
    np.testing.assert_array_equal(K, [[1, 0.5], [0.5, 1]])
    with pytest.raises(OSError):
        gram(KernelSpec("precomputed", "k", path=str(p)), np.zeros((3, 1)))
    with pytest.raises(FileNotFoundError):
        gram(KernelSpec("precomputed", "k", path=str(tmp_path / "missing")), np.zeros((2, 1)))


def test_normalize_examples(rng):
    np.testing.assert_array_equal(normalize(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(normalize(np.array([[4.0, 2.0], [2.0, 1.0]])), np.ones((2, 2)))
    K = gram(KernelSpec("rbf", "r"), rng.standard_normal((6, 2))).entries
    np.testing.assert_allclose(normalize(K), K, atol=1e-15)


def test_normalize_zero_rows():
    K = np.zeros((3, 3))
    K[0, 0] = 2.0
    out = normalize(K)
    assert out[0, 0] == 1.0 and np.all(out[1:] == 0)
    bad = np.array([[0.0, 1.0], [1.0, 1.0]])
    with pytest.raises(DegenerateKernelError):
        normalize(bad)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["linear", "polynomial", "rbf"]), st.integers(1, 30))
def test_normalized_gram_invariants(seed, family, n):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 3))
    spec = KernelSpec(family, "k", degree=int(rng.integers(1, 4)), offset=float(rng.uniform(0, 2)),
                      bandwidth=float(rng.uniform(0.2, 4)))
    G = normalize(gram(spec, X)).entries
    assert np.max(np.abs(G - G.T)) <= 1e-12
    assert np.all(np.diag(G) <= 1 + 1e-12)
    w = np.linalg.eigvalsh(G)
    assert w[0] >= -1e-8 * max(w[-1], 0)
    np.testing.assert_array_equal(gram(spec, X).entries, gram(spec, X).entries)


def test_check_gram_rejects_indefinite():
    with pytest.raises(DegenerateKernelError):
        check_gram(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_bank_ids_unique_and_duplicates(rng):
    X = rng.standard_normal((5, 2))
    with pytest.raises(ValidationError):
        KernelBank.from_specs([KernelSpec("linear", "a"), KernelSpec("rbf", "a")], X)
    bank = KernelBank.from_specs([KernelSpec("linear", "a"), KernelSpec("rbf", "b")], X)
    dup = bank.with_duplicates("a", 3)
    assert dup.ids == ["a_copy0", "a_copy1", "a_copy2", "b"]
    assert dup.canonical == [0, 0, 0, 3]
    sub = bank.subset(["b"])
    assert sub.ids == ["b"] and sub.n == 5
    with pytest.raises(ValidationError):
        bank.index("zzz")


def test_parse_inline_specs():
    specs = parse_inline_specs("linear;rbf:bandwidth=0.5;polynomial:degree=3,offset=1,id=poly,cols=0..2")
    assert [s.family for s in specs] == ["linear", "rbf", "polynomial"]
    assert specs[1].bandwidth == 0.5
    assert specs[2].id == "poly" and specs[2].degree == 3 and specs[2].columns == (0, 1)
    assert parse_inline_specs("linear:cols=0|3")[0].columns == (0, 3)
    with pytest.raises(ParseError):
        parse_inline_specs("rbf:width=2")
    with pytest.raises(ParseError):
        parse_inline_specs(" ; ")


def test_spec_file_roundtrip(tmp_path):
    specs = [KernelSpec("rbf", "r", bandwidth=2.0, columns=(1,)), KernelSpec("polynomial", "p", degree=3, offset=0.5)]
    path = tmp_path / "k.json"
    save_specs(specs, path)
    assert load_specs(path) == specs
    (tmp_path / "bad.json").write_text(json.dumps({"family": "linear"}))
    with pytest.raises(ParseError):
        load_specs(tmp_path / "bad.json")
