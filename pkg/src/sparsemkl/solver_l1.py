"""Greedy coordinate descent for l1-regularized MKL.

Outer loop: add the kernel whose partial gradient has the largest RKHS norm,
stop as soon as that norm is at most ``lam``. Inner problem: minimize
``E_N(f) + lam * sum_j ||f_j||_{H_j}`` over the selected kernels.

The inner problem is solved as a group lasso. Writing ``K_j = U_j diag(s_j**2) U_j^T``
on its numerical range and ``alpha_j = U_j (beta_j / s_j)`` gives
``||f_j||_H = ||beta_j||`` and ``K_j alpha_j = U_j (s_j * beta_j)``, so each block
subproblem is separable in the eigenbasis and is minimized exactly.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonConvergenceError, ValidationError
from .objective import (
    Expansion, check_labels, empirical_loss, gradient_norms, regularized_objective, residual,
)
from .solver_l2 import IterationRecord, SolverTrace

log = logging.getLogger(__name__)

EARLY_OPTIMAL = "early_optimal"
BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass
class L1Config:
    lam: float
    d: int
    inner_tol: float = 1e-8
    inner_max_iter: int = 10000
    threads: int | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValidationError(f"lambda must be > 0, got {self.lam}")
        if int(self.d) != self.d or self.d < 1:
            raise ValidationError(f"d must be a positive integer, got {self.d}")
        if not self.inner_tol > 0:
            raise ValidationError("inner_tol must be > 0")


def _block_argmin(p, q, n_lam):
    """Minimize ``sum((s*b - z)**2)/2N + lam*||b|| + rho*||b||**2`` in closed form
    up to a scalar root.

    ``p = s * z``, ``q = s**2 + 2*N*rho``, ``n_lam = N * lam``. The minimizer is
    zero when ``||p|| <= N lam``; otherwise ``b_i = p_i nu / (q_i nu + N lam)``
    with ``nu = ||b||`` the root of ``sum(p**2 / (q*nu + N lam)**2) = 1``.
    """
    pn = float(np.linalg.norm(p))
    if pn <= n_lam:
        return np.zeros_like(p)
    p2 = p * p
    lo = (pn - n_lam) / q.max()
    hi = (pn - n_lam) / q.min()
    nu = lo
    # phi is convex and decreasing, so Newton from the left stays left of the root
    for _ in range(100):
        den = q * nu + n_lam
        phi = float(np.sum(p2 / den ** 2)) - 1.0
        dphi = -2.0 * float(np.sum(p2 * q / den ** 3))
        step = -phi / dphi
        nu_new = min(max(nu + step, lo), hi)
        if abs(nu_new - nu) <= 1e-15 * max(nu_new, 1e-300):
            nu = nu_new
            break
        nu = nu_new
    return p * nu / (q * nu + n_lam)


class GroupLassoProblem:
    """Group lasso over a set of kernels in square-root coordinates.

    Exact duplicate kernels are merged into one block and their coefficients
    split equally on the way out; this is the symmetric member of the
    (otherwise non-unique) solution set and the unique solution once a
    ridge term is present.
    """

    def __init__(self, bank, y, support, lam, ridge=0.0):
        if not support:
            raise ValidationError("restricted solve needs a nonempty support")
        self.bank = bank
        self.y = np.asarray(y, dtype=float)
        self.lam = float(lam)
        self.ridge = float(ridge)
        self.n = bank.n
        groups = {}
        for kid in support:
            j = bank.index(kid)
            groups.setdefault(bank.canonical[j], []).append(kid)
        self.blocks = []
        for canon, ids in groups.items():
            cache = bank.caches[canon]
            s = np.sqrt(cache.eigenvalues)
            self.blocks.append({
                "ids": ids,
                "U": cache.range_basis,
                "s": s,
                "q": s * s + 2.0 * self.n * self.ridge / len(ids),
                "rho": self.ridge / len(ids),
            })

    def factors(self):
        return [b["U"] * b["s"] for b in self.blocks]

    def beta_from(self, f):
        out = []
        for b in self.blocks:
            total = np.zeros(b["s"].shape[0])
            for kid in b["ids"]:
                a = f.coefficients.get(kid)
                if a is not None:
                    total += b["s"] * (b["U"].T @ a)
            out.append(total)
        return out

    def to_expansion(self, beta):
        coef = {}
        for b, bj in zip(self.blocks, beta):
            if not np.any(bj != 0):
                continue
            alpha = b["U"] @ (bj / (b["s"] * len(b["ids"])))
            for kid in b["ids"]:
                coef[kid] = alpha.copy()
        return Expansion(coef)

    def fitted(self, beta):
        out = np.zeros(self.n)
        for b, bj in zip(self.blocks, beta):
            out += b["U"] @ (b["s"] * bj)
        return out

    def objective(self, beta):
        res = self.fitted(beta) - self.y
        pen = sum(self.lam * np.linalg.norm(bj) + b["rho"] * (bj @ bj)
                  for b, bj in zip(self.blocks, beta))
        return float(res @ res) / (2 * self.n) + float(pen)

    def violation(self, beta, res=None):
        """Largest violation of the block subgradient conditions."""
        if res is None:
            res = self.fitted(beta) - self.y
        worst = 0.0
        for b, bj in zip(self.blocks, beta):
            g = b["s"] * (b["U"].T @ res) / self.n + 2.0 * b["rho"] * bj
            nb = np.linalg.norm(bj)
            if nb > 0:
                v = np.linalg.norm(g + self.lam * bj / nb)
            else:
                v = max(0.0, np.linalg.norm(g) - self.lam)
            worst = max(worst, float(v))
        return worst

    def solve(self, tol=1e-8, max_iter=10000, beta0=None):
        """Cyclic exact block minimization until the violation is at most ``tol``.

        Returns ``(beta, violation, sweeps)``.
        """
        beta = [np.zeros(b["s"].shape[0]) for b in self.blocks] if beta0 is None \
            else [np.array(x, dtype=float) for x in beta0]
        res = self.fitted(beta) - self.y
        n_lam = self.n * self.lam
        viol = self.violation(beta, res)
        sweeps = 0
        while viol > tol:
            if sweeps >= max_iter:
                raise NonConvergenceError(
                    f"group lasso did not reach tolerance {tol:g} in {max_iter} sweeps "
                    f"(violation {viol:.3g})",
                    best=self.to_expansion(beta), residual=viol)
            for i, b in enumerate(self.blocks):
                U, s = b["U"], b["s"]
                old = beta[i]
                z = -(U.T @ res) + s * old
                new = _block_argmin(s * z, b["q"], n_lam)
                delta = new - old
                if np.any(delta != 0):
                    res = res + U @ (s * delta)
                    beta[i] = new
            sweeps += 1
            # refresh to keep the incremental residual from drifting
            res = self.fitted(beta) - self.y
            viol = self.violation(beta, res)
        return beta, viol, sweeps


def restricted_mkl(bank, y, support, lam, inner_tol=1e-8, inner_max_iter=10000,
                   ridge=0.0, warm_start=None):
    """Minimize ``E_N(f) + lam ||f||`` (plus ``ridge * sum ||f_j||_H**2``) over ``support``.

    Raises ``NonConvergenceError`` (carrying the best iterate) if the block
    stationarity residual does not drop below ``inner_tol``.
    """
    if not lam > 0:
        raise ValidationError("lambda must be > 0")
    prob = GroupLassoProblem(bank, y, list(support), lam, ridge)
    beta0 = prob.beta_from(warm_start) if warm_start is not None else None
    beta, viol, sweeps = prob.solve(inner_tol, inner_max_iter, beta0)
    log.debug("restricted solve on %d kernels: %d sweeps, violation %.2e",
              len(prob.blocks), sweeps, viol)
    return prob.to_expansion(beta)


@dataclass
class Certificate:
    is_optimal: bool
    max_grad: float


def optimality_certificate(f, bank, y, lam, tol=1e-8, threads=None):
    """Global optimality test: every partial gradient has RKHS norm <= lam (+ tol)."""
    r = residual(f, bank, y)
    h, _ = gradient_norms(bank, r, threads)
    mg = float(h.max())
    return Certificate(mg <= lam + tol, mg)


def theorem1_gap_bound(f_star_norm, d):
    """``2 ||f*||^2 / (d - 1)``: suboptimality bound after ``d`` greedy rounds."""
    if d < 2:
        raise DomainError(f"bound needs d >= 2, got {d}")
    return 2.0 * f_star_norm ** 2 / (d - 1)


def solve_l1(bank, y, config):
    """Run the outer greedy loop.

    Returns ``(expansion, trace, exit_reason)`` with ``exit_reason`` either
    ``"early_optimal"`` (all gradients within ``lam``; the output is a global
    minimizer) or ``"budget_exhausted"``.
    """
    y = check_labels(y)
    lam = config.lam
    f = Expansion()
    support = []
    trace = SolverTrace(initial_loss=empirical_loss(f, bank, y))
    obj = regularized_objective(f, bank, y, lam)
    exit_reason = BUDGET_EXHAUSTED
    for k in range(1, config.d + 1):
        r = residual(f, bank, y)
        h, l2 = gradient_norms(bank, r, config.threads)
        j = int(np.argmax(h))
        if h[j] <= lam + config.inner_tol:
            exit_reason = EARLY_OPTIMAL
            break
        kid = bank.ids[j]
        if kid not in support:
            support.append(kid)
        loss_before = float(r @ r) / (2 * bank.n)
        f = restricted_mkl(bank, y, support, lam, config.inner_tol,
                           config.inner_max_iter, warm_start=f)
        new_obj = regularized_objective(f, bank, y, lam)
        trace.iterations.append(IterationRecord(
            k=k, selected=kid, loss_before=loss_before,
            loss_after=empirical_loss(f, bank, y),
            grad_l2_selected=float(l2[j]), grad_h_selected=float(h[j]),
            support_size=len(f.support), objective_before=obj, objective_after=new_obj,
        ))
        obj = new_obj
    trace.stop_reason = exit_reason
    return f, trace, exit_reason
