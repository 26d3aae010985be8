"""Dependence constants, bound formulas and empirical rate fits."""

import logging
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import (
    DomainError, InsufficientDataError, PreconditionError, ProbeFailedError, ValidationError,
)
from .numlin import min_positive_eigenvalue, subspace_correlation

log = logging.getLogger(__name__)

PROBE_DENOM_FLOOR = 1e-12


@dataclass
class DependencyReport:
    """Subspace correlation ``delta``, smallest scaled eigenvalue and the
    resulting upper bound on the dependence constant ``gamma``.

    ``gamma_bound`` is ``inf`` whenever ``gamma_bound_valid`` is False.
    """

    delta: float
    sigma_plus_min: float
    gamma_bound: float
    gamma_bound_valid: bool
    d: int

    def to_dict(self):
        return {
            "delta": self.delta,
            "sigma_plus_min": self.sigma_plus_min,
            "gamma_bound": self.gamma_bound if self.gamma_bound_valid else None,
            "gamma_bound_valid": self.gamma_bound_valid,
            "d": self.d,
        }


def gamma_upper_bound(delta, sigma_plus_min, d):
    """``sqrt(d) / (sqrt(1 - (d - 1) delta) * sigma_plus_min)``; ``(inf, False)``
    unless ``delta < 1 / (d - 1)``."""
    radicand = 1.0 - (d - 1) * delta
    if radicand <= 0.0:
        return math.inf, False
    return math.sqrt(d) / (math.sqrt(radicand) * sigma_plus_min), True


def dependency_report(bank, d):
    if int(d) != d or d < 1:
        raise ValidationError(f"d must be a positive integer, got {d}")
    sig = min(min_positive_eigenvalue(c) for c in bank.caches)
    delta = 0.0
    for i, j in combinations(range(len(bank)), 2):
        delta = max(delta, subspace_correlation(bank.caches[i], bank.caches[j]))
    bound, valid = gamma_upper_bound(delta, sig, int(d))
    return DependencyReport(delta, sig, bound, valid, int(d))


def gamma_probe(bank, J, samples=1000, seed=0):
    """Sampled lower bound on the dependence constant over the kernels ``J``.

    Each sample draws ``a_j = U_j z_j`` with standard normal ``z_j`` for
    ``j`` in ``J`` and evaluates ``sum ||a_j|| / ||sum (K_j / N) a_j||``.
    Sample ``i`` uses its own generator seeded with ``[seed, i]``.
    """
    J = list(J)
    if not J:
        raise ValidationError("gamma_probe needs at least one kernel")
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    caches = [bank.cache(k) for k in J]
    n = bank.n
    best = -math.inf
    for i in range(samples):
        rng = np.random.default_rng([seed, i])
        num = 0.0
        total = np.zeros(n)
        for c in caches:
            z = rng.standard_normal(c.rank)
            num += float(np.linalg.norm(z))  # ||U z|| = ||z||
            total += c.range_basis @ (c.eigenvalues * z) / n
        den = float(np.linalg.norm(total))
        if den < PROBE_DENOM_FLOOR:
            continue
        best = max(best, num / den)
    if not math.isfinite(best):
        raise ProbeFailedError(f"all {samples} probe samples were degenerate")
    return best


def tau(mu, gamma):
    """Contraction constant ``(mu - 1)**2 / (8 mu (mu + 1) gamma)``."""
    if not mu >= 1:
        raise DomainError(f"mu must be >= 1, got {mu}")
    if not gamma > 0:
        raise DomainError(f"gamma must be > 0, got {gamma}")
    return (mu - 1) ** 2 / (8.0 * mu * (mu + 1) * gamma)


def required_d(gamma_2d, epsilon_star):
    """``16 gamma ln(1 / (12 eps))``.

    Returns ``(value, vacuous)``; for ``eps >= 1/12`` the requirement holds
    for every ``d`` and ``(0.0, True)`` is returned.
    """
    if not epsilon_star > 0:
        raise DomainError(f"epsilon_star must be > 0, got {epsilon_star}")
    if not gamma_2d > 0:
        raise DomainError(f"gamma must be > 0, got {gamma_2d}")
    if 12.0 * epsilon_star >= 1.0:
        return 0.0, True
    return 16.0 * gamma_2d * math.log(1.0 / (12.0 * epsilon_star)), False


def gen_bound(R, d, m, N, A, epsilon_star, strict=False):
    """``6 eps + 196 (R + sqrt(d))**2 sqrt(A ln(m + 1) / N)``.

    Valid for ``A > 1``, ``m >= 3`` and ``A ln(m + 1) <= N <= 2**(m + 1)``;
    a violated clause raises ``PreconditionError`` naming it. The upper
    limit on ``N`` only logs a warning unless ``strict`` is set, since the
    formula itself stays well defined there.
    """
    if not A > 1:
        raise PreconditionError("A > 1", f"need A > 1, got A={A}")
    if m < 3:
        raise PreconditionError("m >= 3", f"need m >= 3, got m={m}")
    if N < A * math.log(m + 1):
        raise PreconditionError("A ln(m+1) <= N", f"need N >= A ln(m+1) = {A * math.log(m + 1):.4g}, got N={N}")
    if N > 2.0 ** (m + 1):
        msg = f"need N <= 2^(m+1) = {2 ** (m + 1)}, got N={N}"
        if strict:
            raise PreconditionError("N <= 2^(m+1)", msg)
        log.warning("gen_bound outside its stated range: %s", msg)
    if R < 0 or d < 1 or epsilon_star < 0:
        raise DomainError("need R >= 0, d >= 1 and epsilon_star >= 0")
    return 6.0 * epsilon_star + 196.0 * (R + math.sqrt(d)) ** 2 * math.sqrt(A * math.log(m + 1) / N)


@dataclass
class RateFit:
    rate: float
    r_squared: float
    plateau_index: int
    plateau_level: float
    slope: float = math.nan


def fit_rate(trace, floor=0.0, f_star_loss=0.0):
    """Log-linear fit of the excess loss before it reaches ``floor``.

    Parameters
    ----------
    trace : SolverTrace or sequence of float
        A solver trace (``loss_after`` of each iteration is used) or the
        losses themselves.
    floor : float
        Plateau threshold on the excess; the fit uses iterations before the
        first excess at or below it.
    f_star_loss : float
        Subtracted from every loss to form the excess.

    Returns
    -------
    RateFit
        ``rate = exp(slope)``; ``plateau_level`` is the last excess.
    """
    losses = np.asarray(trace.losses if hasattr(trace, "losses") else trace, dtype=float)
    if losses.size == 0:
        raise InsufficientDataError("empty trace")
    if floor < 0:
        raise DomainError("floor must be >= 0")
    excess = losses - f_star_loss
    hit = np.flatnonzero(excess <= floor)
    plateau = int(hit[0]) if hit.size else int(excess.size)
    if plateau < 3:
        raise InsufficientDataError(f"only {plateau} pre-plateau points, need 3")
    k = np.arange(plateau, dtype=float)
    z = np.log(excess[:plateau])
    slope, icept = np.polyfit(k, z, 1)
    resid = z - (slope * k + icept)
    ss = float(np.sum((z - z.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return RateFit(float(min(np.exp(slope), 1.0)), r2, plateau, float(excess[-1]), float(slope))
