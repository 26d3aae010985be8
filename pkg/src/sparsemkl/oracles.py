"""Brute-force reference solutions.

Everything here is exact (projections and exhaustive enumeration) and meant
for small instances: the global minimizer of the empirical loss, the best
``d``-kernel subset, the two-stage baseline and the duplicate-kernel
counterexample.
"""

import logging
import math
import re
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .datagen import counterexample_features
from .errors import EnumerationInfeasibleError, HarnessError, ValidationError
from .kernels import KernelBank, KernelSpec
from .numlin import orthonormal_union, subspace_correlation
from .objective import Expansion, check_labels, norms_by_kernel
from .solver_l1 import restricted_mkl
from .solver_l2 import L2Config, solve_l2

log = logging.getLogger(__name__)

ENUMERATION_CAP = 100_000
HARNESS_RIDGE = 1e-6


@dataclass
class OracleResult:
    f_star_loss: float
    f_hat_loss: float
    epsilon_star: float
    best_support: list = field(default_factory=list)


def _projection_loss(bank, y, idx):
    Q = orthonormal_union([bank.caches[j].range_basis for j in idx], bank.n)
    r = y - Q @ (Q.T @ y)
    return float(r @ r) / (2 * bank.n)


def global_min_loss(bank, y):
    """Loss of ``f* = argmin E_N`` over all kernels, with a minimum-norm realization.

    ``f*`` fits the projection of ``y`` onto the union of the kernel ranges.
    Writing that projection as ``sum_j U_j c_j`` with the minimum-norm
    least-squares ``c``, ``alpha_j = U_j (c_j / lam_j)`` realizes it.
    """
    if len(bank) == 0:
        raise ValidationError("empty kernel bank")
    y = np.asarray(y, dtype=float)
    loss = _projection_loss(bank, y, range(len(bank)))
    bases = [c.range_basis for c in bank.caches]
    B = np.hstack(bases)
    if B.shape[1] == 0:
        return loss, Expansion()
    c, *_ = np.linalg.lstsq(B, y, rcond=None)
    coef, start = {}, 0
    for kid, cache in zip(bank.ids, bank.caches):
        cj = c[start:start + cache.rank]
        start += cache.rank
        if cache.rank and np.any(cj != 0):
            coef[kid] = cache.range_basis @ (cj / cache.eigenvalues)
    return loss, Expansion(coef)


def best_subset(bank, y, d, cap=ENUMERATION_CAP):
    """Exhaustive best support of at most ``d`` kernels for the unregularized loss.

    Adding a kernel never increases the projection loss, so only supports of
    size ``min(d, m)`` are enumerated, in lexicographic order; a later support
    replaces the incumbent only on strict improvement.
    """
    m = len(bank)
    if int(d) != d or d < 1:
        raise ValidationError(f"d must be a positive integer, got {d}")
    k = min(int(d), m)
    count = math.comb(m, k)
    if count > cap:
        raise EnumerationInfeasibleError(f"C({m},{k}) = {count} subsets exceeds the cap {cap}")
    y = np.asarray(y, dtype=float)
    f_star, _ = global_min_loss(bank, y)
    best, best_idx = math.inf, ()
    for idx in combinations(range(m), k):
        loss = _projection_loss(bank, y, idx)
        if loss < best - 1e-14 * max(1.0, best if math.isfinite(best) else 1.0):
            best, best_idx = loss, idx
    eps = max(best - f_star, 0.0)
    return OracleResult(f_star, best, eps, [bank.ids[j] for j in best_idx])


def orthogonal_epsilon_star(bank, y, d):
    """``eps*`` for a bank whose kernel ranges are mutually orthogonal.

    The projection loss then splits over kernels, so the best ``d`` kernels
    are those capturing the most label energy and ``eps*`` is the energy of
    the rest over ``2N``. Raises ``ValidationError`` if any pair of ranges
    has a nonzero correlation.
    """
    for i, j in combinations(range(len(bank)), 2):
        if subspace_correlation(bank.caches[i], bank.caches[j]) != 0.0:
            raise ValidationError(f"ranges of {bank.ids[i]!r} and {bank.ids[j]!r} are not orthogonal")
    y = np.asarray(y, dtype=float)
    energy = np.sort([float(np.sum((c.range_basis.T @ y) ** 2)) for c in bank.caches])[::-1]
    return float(np.sum(energy[int(d):])) / (2 * bank.n)


def full_group_lasso(bank, y, lam, tol=1e-10, max_iter=100_000, ridge=0.0):
    """Minimizer of ``E_N(f) + lam ||f||`` over the whole bank."""
    return restricted_mkl(bank, y, bank.ids, lam, tol, max_iter, ridge=ridge)


def two_stage(bank, y, lam, d, ridge=0.0, tol=1e-10, max_iter=100_000):
    """Fit all kernels, keep the ``d`` largest by ``||f_j||_H`` (ties by index), refit.

    Returns ``(support, refit_expansion)``. Kernels with zero weight are never kept.
    """
    full = full_group_lasso(bank, y, lam, tol, max_iter, ridge)
    norms = norms_by_kernel(full, bank)
    order = sorted(range(len(bank)), key=lambda j: (-norms.get(bank.ids[j], 0.0), j))
    keep = [bank.ids[j] for j in order[:d] if norms.get(bank.ids[j], 0.0) > 0]
    if not keep:
        return [], Expansion()
    refit = restricted_mkl(bank, y, keep, lam, tol, max_iter, ridge=ridge, warm_start=full)
    return keep, refit


def _family(kid):
    return re.sub(r"_copy\d+$", "", kid)


def _norm_ratio(bank, y, lam):
    f = full_group_lasso(bank, y, lam, ridge=HARNESS_RIDGE)
    norms = norms_by_kernel(f, bank)
    a, b = norms.get("kappa1", 0.0), norms.get("kappa2", 0.0)
    return (a / b if b > 0 else math.inf), a, b


def counterexample_harness(seed=0, n=60, copies=10, target_ratio=4.0, ratio_range=(3.0, 10.0)):
    """Two-stage selection flips under kernel duplication; greedy selection does not.

    Scenario A has ``kappa1`` (aligned with the labels) and ``kappa2`` (noise
    feature). ``lam`` is tuned by bisection so the full group-lasso norms
    satisfy ``||f_1|| / ||f_2|| ~ target_ratio``. Scenario B replaces
    ``kappa1`` by ``copies`` identical copies, which share its weight equally.
    """
    rng = np.random.default_rng(seed)
    X, y = counterexample_features(n, rng)
    y = check_labels(y)
    specs = [KernelSpec("rbf", "kappa1", bandwidth=1.0, columns=(0,)),
             KernelSpec("rbf", "kappa2", bandwidth=1.0, columns=(1,))]
    bank_a = KernelBank.from_specs(specs, X)
    # above lam_max every weight is zero
    lam_max = max(float(np.sqrt(max(y @ K @ y, 0.0))) / n for K in bank_a.matrices)
    lo, hi = np.log(lam_max * 1e-2), np.log(lam_max)
    ratio = a_norm = b_norm = math.nan
    lam = math.nan
    for _ in range(40):
        lam = float(np.exp(0.5 * (lo + hi)))
        ratio, a_norm, b_norm = _norm_ratio(bank_a, y, lam)
        if ratio > target_ratio:
            hi = np.log(lam)
        else:
            lo = np.log(lam)
        if abs(ratio - target_ratio) < 0.05 * target_ratio:
            break
    diag = {"lam": lam, "ratio": ratio, "norm_kappa1": a_norm, "norm_kappa2": b_norm, "seed": seed}
    if not ratio_range[0] <= ratio < ratio_range[1]:
        raise HarnessError(f"norm ratio {ratio:.3g} outside {ratio_range}", diag)
    bank_b = bank_a.with_duplicates("kappa1", copies)
    pick_a, _ = two_stage(bank_a, y, lam, 1, ridge=HARNESS_RIDGE)
    pick_b, _ = two_stage(bank_b, y, lam, 1, ridge=HARNESS_RIDGE)
    _, tr_a = solve_l2(bank_a, y, L2Config(1))
    _, tr_b = solve_l2(bank_b, y, L2Config(1))
    out = {
        "scenario_a_pick": pick_a[0] if pick_a else None,
        "scenario_b_pick": pick_b[0] if pick_b else None,
        "alg2_pick_a": tr_a.selected[0],
        "alg2_pick_b": tr_b.selected[0],
    }
    out["two_stage_flipped"] = (out["scenario_a_pick"] is not None and out["scenario_b_pick"] is not None
                                and _family(out["scenario_a_pick"]) != _family(out["scenario_b_pick"]))
    out["alg2_same_family"] = _family(out["alg2_pick_a"]) == _family(out["alg2_pick_b"])
    out["diagnostics"] = diag
    log.debug("counterexample: %s", out)
    return out
