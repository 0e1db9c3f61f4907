"""Balanced random quantum walks on Z^d and T_{2d}: Monte-Carlo disorder averages,
exact phase-content path sums and self-avoiding-walk bounds on the localisation length."""

from .coin import SkeletonMatrix, make_fourier_coin, make_hadamard_coin
from .dynamics import DisorderRealization, WalkState, apply_U, mc_expectation
from .graph import Graph, Norm
from .paths import build_class_table, exact_S_n, zero_class_census

__version__ = "0.1.0"

__all__ = [
    "Graph", "Norm", "SkeletonMatrix", "make_fourier_coin", "make_hadamard_coin",
    "DisorderRealization", "WalkState", "apply_U", "mc_expectation",
    "build_class_table", "exact_S_n", "zero_class_census",
]
