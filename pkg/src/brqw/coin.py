"""Skeleton (coin) matrices in U(2d).

Rows and columns follow the letter ordering of :mod:`brqw.graph`, i.e.
``a_1, ..., a_d, a_1^{-1}, ..., a_d^{-1}``.  Entry ``C[tau, sigma]`` is the
amplitude for coin state ``sigma`` to be sent along ``tau``.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SkeletonMatrix:
    matrix: np.ndarray
    name: str = "custom"
    _sign_bits: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ValueError(f"skeleton must be square of even size, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.is_balanced():
            scaled = m * math.sqrt(m.shape[0])
            if np.all(np.abs(scaled.imag) < TOL) and np.all(np.abs(np.abs(scaled.real) - 1) < TOL):
                bits = (scaled.real < 0).astype(np.int8)
                bits.setflags(write=False)
                object.__setattr__(self, "_sign_bits", bits)

    @property
    def d(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def unitarity_residual(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m @ m.conj().T - np.eye(self.size))))

    def is_unitary(self, tol: float = TOL) -> bool:
        return self.unitarity_residual() < tol

    def balance_residual(self) -> float:
        return float(np.max(np.abs(np.abs(self.matrix) - 1 / math.sqrt(self.size))))

    def is_balanced(self, tol: float = TOL) -> bool:
        return self.balance_residual() < tol

    @property
    def is_sign_coin(self) -> bool:
        """True when every entry is exactly +-1/sqrt(2d) (phases in {0, pi})."""
        return self._sign_bits is not None

    @property
    def sign_bits(self) -> np.ndarray:
        """0/1 matrix marking the entries whose phase is pi."""
        if self._sign_bits is None:
            raise ValueError(f"coin {self.name!r} is not a real +-1/sqrt(2d) matrix")
        return self._sign_bits

    def phase(self, tau: int, sigma: int) -> float:
        """Phase alpha_{tau,sigma} in (-pi, pi] of a balanced entry."""
        if not self.is_balanced():
            raise ValueError(f"coin {self.name!r} is not balanced")
        return float(np.angle(self.matrix[tau, sigma]))

    def phases(self) -> np.ndarray:
        if not self.is_balanced():
            raise ValueError(f"coin {self.name!r} is not balanced")
        return np.angle(self.matrix)

    def fingerprint(self) -> str:
        return hashlib.blake2b(self.matrix.tobytes(), digest_size=8).hexdigest()

    def __eq__(self, other):
        return isinstance(other, SkeletonMatrix) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


def phase_of_entry(c: SkeletonMatrix, tau: int, sigma: int) -> float:
    return c.phase(tau, sigma)


def make_fourier_coin(d: int) -> SkeletonMatrix:
    """Discrete Fourier matrix C_{jk} = exp(-i pi j k / d) / sqrt(2d)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    j = np.arange(2 * d)
    m = np.exp(-1j * np.pi * np.outer(j, j) / d) / math.sqrt(2 * d)
    # exp() leaves ~1e-16 imaginary dust on real entries; snap exact lattice points
    m.real[np.abs(m.real) < 1e-15] = 0.0
    m.imag[np.abs(m.imag) < 1e-15] = 0.0
    return SkeletonMatrix(m, name="fourier")


def make_hadamard_coin(d: int) -> SkeletonMatrix:
    """Real Hadamard skeleton of size 2d.

    ``d == 2`` gives ``(J - 2I)/2`` (-1 on the diagonal, +1 elsewhere), which
    flips sign exactly when a path keeps its direction.  Other sizes use
    Sylvester's construction and need ``2d`` to be a power of two.
    """
    n = 2 * d
    if d < 1 or n & (n - 1):
        raise ValueError(f"no Hadamard construction for size 2d={n}; d must be a power of two")
    if d == 2:
        h = np.ones((4, 4)) - 2 * np.eye(4)
    else:
        h = np.ones((1, 1))
        while h.shape[0] < n:
            h = np.block([[h, h], [h, -h]])
    return SkeletonMatrix(h / math.sqrt(n), name="hadamard")


def load_coin_csv(path: str | Path, tol: float = TOL) -> SkeletonMatrix:
    """Read a 2d x 2d matrix stored as rows of ``re,im`` pairs."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            rec = [x.strip() for x in rec if x.strip()]
            if not rec or rec[0].startswith("#"):
                continue
            if len(rec) % 2:
                raise ValueError(f"{path}: row {len(rows) + 1} has an odd number of fields")
            vals = [float(x) for x in rec]
            rows.append([complex(vals[i], vals[i + 1]) for i in range(0, len(vals), 2)])
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ValueError(f"{path}: expected a square matrix, got {len(rows)} rows")
    coin = SkeletonMatrix(np.array(rows), name=Path(path).stem)
    res = coin.unitarity_residual()
    if res >= tol:
        raise ValueError(f"{path}: matrix is not unitary (residual {res:.3g})")
    return coin


def save_coin_csv(coin: SkeletonMatrix, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in coin.matrix:
            w.writerow([repr(float(v)) for z in row for v in (z.real, z.imag)])


def coin_from_name(name: str, d: int) -> SkeletonMatrix:
    """``fourier``, ``hadamard`` or a path to a CSV matrix file."""
    if name == "fourier":
        return make_fourier_coin(d)
    if name == "hadamard":
        return make_hadamard_coin(d)
    coin = load_coin_csv(name)
    if coin.d != d:
        raise ValueError(f"coin file {name} has size {coin.size}, expected {2 * d}")
    return coin
