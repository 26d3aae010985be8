import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reference import random_features_bank, random_labels
from sparsemkl.datagen import SyntheticSpec, generate
from sparsemkl.diagnostics import fit_rate
from sparsemkl.errors import ValidationError
from sparsemkl.kernels import KernelBank
from sparsemkl.objective import (
    Expansion, empirical_loss, grad_functional_norm, grad_l2_norm, residual, total_norm,
)
from sparsemkl.oracles import global_min_loss, orthogonal_epsilon_star
from sparsemkl.solver_l2 import L2Config, l2_step, select_kernel_l2, solve_l2


def test_config_validation():
    with pytest.raises(ValidationError):
        L2Config(0)
    with pytest.raises(ValidationError):
        L2Config(3, step_scale=1.5)


def test_select_examples(rng):
    r = rng.standard_normal(4)
    assert select_kernel_l2(KernelBank(["a"], [np.eye(4)]), r)[0] == "a"
    assert select_kernel_l2(KernelBank(["a", "b"], [np.eye(4), np.eye(4)]), r)[0] == "a"
    assert select_kernel_l2(KernelBank(["z", "i"], [np.zeros((4, 4)), np.eye(4)]), r)[0] == "i"


def test_one_step_exact_fit():
    bank = KernelBank(["k"], [np.array([[1.0]])])
    f, rec = l2_step(Expansion(), bank, np.array([1.0]), L2Config(1))
    np.testing.assert_allclose(f.coefficients["k"], [1.0])
    assert rec.loss_after == 0.0


def test_converged_signals(rng):
    bank = KernelBank(["k"], [np.eye(3)])
    y = random_labels(rng, 3)
    f0 = Expansion({"k": y.copy()})
    f, rec = l2_step(f0, bank, y, L2Config(1))
    assert rec is None and f is f0
    u = np.array([1.0, 0, 0])
    low = KernelBank(["u"], [np.outer(u, u)])
    y2 = np.array([1.0, 1.0, -1.0])
    f1, rec1 = l2_step(Expansion({"u": np.array([1.0, 0, 0])}), low, y2, L2Config(1))
    assert rec1 is None
    # the in-range residual shrinks by (1 - 1/N) per step; the rest is unreachable
    _, tr = solve_l2(low, y2, L2Config(5))
    for k, it in enumerate(tr.iterations, start=1):
        assert it.loss_after == pytest.approx((2 + (2 / 3) ** (2 * k)) / 6, rel=1e-12)


def test_full_rank_kernel_matches_matrix_power(rng):
    n = 6
    bank = random_features_bank(rng, n, 1, families=("rbf",))
    K = bank.matrices[0]
    y = random_labels(rng, n)
    _, tr = solve_l2(bank, y, L2Config(5))
    for k, it in enumerate(tr.iterations, start=1):
        r = np.linalg.matrix_power(np.eye(n) - K / n, k) @ y
        assert it.loss_after == pytest.approx(r @ r / (2 * n), rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_trace_invariants(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 30))
    m = int(rng.integers(1, 6))
    bank = random_features_bank(rng, n, m)
    y = random_labels(rng, n)
    d = int(rng.integers(1, 12))
    f, tr = solve_l2(bank, y, L2Config(d))
    prev_loss, prev_support = tr.initial_loss, 0
    for k, it in enumerate(tr.iterations, start=1):
        assert it.loss_before == pytest.approx(prev_loss, abs=1e-14)
        assert it.loss_after <= it.loss_before
        # guaranteed decrease of at least half the squared l2 gradient
        assert it.loss_before - it.loss_after >= 0.5 * it.grad_l2_selected ** 2 - 1e-12
        assert prev_support <= it.support_size <= min(k, m)
        prev_loss, prev_support = it.loss_after, it.support_size
    assert len(f.support) <= d
    assert total_norm(f, bank) <= np.sqrt(d) + 1e-8
    if tr.iterations:
        assert empirical_loss(f, bank, y) == pytest.approx(tr.iterations[-1].loss_after, abs=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_decrease_identity(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 30))
    bank = random_features_bank(rng, n, int(rng.integers(1, 6)))
    y = random_labels(rng, n)
    f = Expansion()
    for k in range(6):
        g, rec = l2_step(f, bank, y, L2Config(1), k + 1)
        if rec is None:
            break
        K = bank.matrix(rec.selected)
        r = residual(f, bank, y)
        h, l2 = grad_functional_norm(K, r), grad_l2_norm(K, r)
        rhs = h ** 2 - 0.5 * l2 ** 2
        assert abs(rec.loss_before - rec.loss_after - rhs) <= 1e-9 * abs(rhs)
        f = g


def test_update_lies_in_range(rng):
    bank = random_features_bank(rng, 15, 3)
    y = random_labels(rng, 15)
    f = Expansion()
    for _ in range(4):
        g, rec = l2_step(f, bank, y, L2Config(1))
        delta = g.get(rec.selected, 15) - f.get(rec.selected, 15)
        U = bank.cache(rec.selected).range_basis
        assert np.linalg.norm(delta - U @ (U.T @ delta)) <= 1e-8 * np.linalg.norm(delta)
        f = g


def test_duplicate_invariance(rng):
    bank = random_features_bank(rng, 20, 4)
    y = random_labels(rng, 20)
    _, tr = solve_l2(bank, y, L2Config(8))
    for kid in bank.ids:
        bigger = bank.append(kid + "_dup", bank.matrix(kid), bank.cache(kid))
        _, tr2 = solve_l2(bigger, y, L2Config(8))
        assert tr2.selected == tr.selected
        assert list(tr2.losses) == list(tr.losses)


def test_threads_do_not_change_result(rng):
    bank = random_features_bank(rng, 25, 6)
    y = random_labels(rng, 25)
    _, a = solve_l2(bank, y, L2Config(6))
    _, b = solve_l2(bank, y, L2Config(6, threads=4))
    assert a.selected == b.selected and list(a.losses) == list(b.losses)


def test_geometric_decay_on_orthogonal_bank():
    data, bank, _ = generate(SyntheticSpec(120, 20, 3, 0.1, "orthogonal_ranges", 4))
    f_star, _ = global_min_loss(bank, data.y)
    eps = orthogonal_epsilon_star(bank, data.y, 10)
    _, tr = solve_l2(bank, data.y, L2Config(10))
    fit = fit_rate(tr, 10 * eps, f_star)
    assert fit.rate < 1 and fit.r_squared >= 0.95
