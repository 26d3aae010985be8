"""Sparse multiple kernel learning by greedy coordinate descent.

Two solvers are provided: ``solve_l2`` selects kernels by the empirical l2
norm of their functional gradients and takes unit projected steps;
``solve_l1`` adds kernels by the RKHS gradient norm and re-solves an
l1-regularized problem on the selected set. ``oracles`` and ``diagnostics``
supply exact reference solutions and the dependence constants.
"""

__version__ = "0.1.0"

from .errors import SparseMKLError
from .kernels import KernelBank, KernelSpec
from .objective import Expansion, empirical_loss
from .solver_l1 import L1Config, solve_l1
from .solver_l2 import L2Config, solve_l2

__all__ = [
    "Expansion", "KernelBank", "KernelSpec", "L1Config", "L2Config", "SparseMKLError",
    "empirical_loss", "solve_l1", "solve_l2",
]
