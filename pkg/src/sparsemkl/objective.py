"""Square-loss empirical objective and per-kernel functional gradients.

The loss is ``l(z, y) = (z - y)**2 / 2`` and ``E_N(f) = mean(l(f(x_i), y_i))``.
For a kernel ``K_j`` and residual ``r = f(X) - y`` the partial functional
gradient is ``(1/N) sum_i r_i k_j(x_i, .)``, whose norms are

    RKHS norm:         sqrt(r^T K_j r) / N
    empirical l2 norm: ||K_j r||_2 / N**1.5
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PSDViolationError, ValidationError

RADICAND_TOL = 1e-10


@dataclass
class Expansion:
    """A sparse MKL model ``f = sum_j K_j alpha_j``.

    ``coefficients`` maps kernel id to its N-vector; insertion order is the
    order in which kernels entered the model.
    """

    coefficients: dict = field(default_factory=dict)

    @property
    def support(self):
        return [k for k, a in self.coefficients.items() if np.any(a != 0)]

    def copy(self):
        return Expansion({k: a.copy() for k, a in self.coefficients.items()})

    def get(self, kernel_id, n):
        a = self.coefficients.get(kernel_id)
        return np.zeros(n) if a is None else a

    def add(self, kernel_id, delta):
        """Return a new expansion with ``delta`` added to one kernel's coefficients."""
        g = self.copy()
        if kernel_id in g.coefficients:
            g.coefficients[kernel_id] = g.coefficients[kernel_id] + delta
        else:
            g.coefficients[kernel_id] = np.array(delta, dtype=float)
        return g

    def to_dict(self):
        return {k: a.tolist() for k, a in self.coefficients.items()}


def _check_y(y, n):
    y = np.asarray(y, dtype=float)
    if y.shape != (n,):
        raise ValidationError(f"label vector has shape {y.shape}, expected ({n},)")
    return y


def check_labels(y):
    """Labels must be in {-1, +1}."""
    y = np.asarray(y, dtype=float)
    bad = np.flatnonzero((y != 1) & (y != -1))
    if bad.size:
        raise ValidationError(f"labels must be -1 or +1; row {bad[0]} has {y[bad[0]]}")
    return y


def predict(f, bank):
    """Training-set predictions ``sum_j K_j alpha_j`` (summed in support order)."""
    out = np.zeros(bank.n)
    for kid, a in f.coefficients.items():
        K = bank.matrix(kid)
        if a.shape != (bank.n,):
            raise ValidationError(f"coefficients for {kid!r} have shape {a.shape}")
        out += K @ a
    return out


def residual(f, bank, y):
    """``l'(f(x_i), y_i) = f(x_i) - y_i`` for the square loss."""
    return predict(f, bank) - _check_y(y, bank.n)


def loss_from_residual(r):
    return float(r @ r) / (2.0 * r.shape[0])


def empirical_loss(f, bank, y):
    return loss_from_residual(residual(f, bank, y))


def _sqrt_radicand(q, what):
    if q < -RADICAND_TOL:
        raise PSDViolationError(f"negative radicand {q:.3g} in {what}")
    return float(np.sqrt(max(q, 0.0)))


def grad_functional_norm(K, r):
    r = np.asarray(r, dtype=float)
    n = r.shape[0]
    return _sqrt_radicand(float(r @ (K @ r)), "gradient RKHS norm") / n


def grad_l2_norm(K, r):
    r = np.asarray(r, dtype=float)
    n = r.shape[0]
    return float(np.linalg.norm(K @ r)) / n ** 1.5


def functional_norm(alpha, K):
    alpha = np.asarray(alpha, dtype=float)
    return _sqrt_radicand(float(alpha @ (K @ alpha)), "functional norm")


def total_norm(f, bank):
    """``||f|| = sum_j ||f_j||_{H_j}``."""
    return float(sum(functional_norm(a, bank.matrix(k)) for k, a in f.coefficients.items()))


def norms_by_kernel(f, bank):
    return {k: functional_norm(a, bank.matrix(k)) for k, a in f.coefficients.items()}


def regularized_objective(f, bank, y, lam):
    """``E_N(f) + lam * ||f||``."""
    return empirical_loss(f, bank, y) + lam * total_norm(f, bank)


def gradient_norms(bank, r, threads=None):
    """Both gradient norms for every kernel in bank order.

    Duplicated matrices share one evaluation, so their scores are
    bit-identical. ``threads > 1`` fans the matrix-vector products out over
    a thread pool; results are collected in index order.
    """
    r = np.asarray(r, dtype=float)
    n = r.shape[0]
    unique = sorted(set(bank.canonical))

    def score(j):
        Kr = bank.matrices[j] @ r
        h = _sqrt_radicand(float(r @ Kr), f"gradient RKHS norm of {bank.ids[j]!r}") / n
        return h, float(np.linalg.norm(Kr)) / n ** 1.5

    if threads and threads > 1 and len(unique) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = dict(zip(unique, pool.map(score, unique)))
    else:
        vals = {j: score(j) for j in unique}
    h = np.array([vals[c][0] for c in bank.canonical])
    l2 = np.array([vals[c][1] for c in bank.canonical])
    return h, l2
