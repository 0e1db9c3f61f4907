"""SAW two-point function, plane generating function and the mass (inverse correlation length).

All quantities are partial sums of positive series truncated at ``n_max``
steps.  The truncated G_L under-estimates G_L, so every per-plane value
(-ln G_L)/L, and their supremum, over-estimates the true mass.  The estimate
is therefore a diagnostic, not a certified bound.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .graph import Graph, Norm, Vertex
from .polymer import PathFamily, SeriesEstimate, saw_endpoints, susceptibility

DEFAULT_L_MAX = 4
DEFAULT_N_MAX = 12
UNCONDITIONAL_BOUND = 1.0 / math.log(2)


def _series(terms: list[float], n_max: int, diagnostic: str = "") -> SeriesEstimate:
    partial, s = [], 0.0
    for t in terms:
        s += t
        partial.append(s)
    monotone = all(b >= a for a, b in zip(partial, partial[1:]))
    return SeriesEstimate(math.fsum(terms), n_max, terms[-1] if terms else 0.0, monotone,
                          tuple(partial), diagnostic)


def saws_ending_at(graph: Graph, x: Vertex, n_max: int) -> list[int]:
    """Number of SAWs of each length 0..n_max from the root to ``x``.

    Depth-first search pruned by graph distance to ``x``; a SAW that reaches
    ``x`` cannot come back to it, so the branch stops there.
    """
    counts = [0] * (n_max + 1)
    origin = graph.origin
    if x == origin:
        counts[0] = 1
        return counts
    dist = graph.distance
    step = graph.step
    visited = {origin}

    def rec(y, depth):
        if y == x:
            counts[depth] += 1
            return
        if depth == n_max:
            return
        for letter in graph.letters:
            w = step(y, letter)
            if w in visited or dist(w, x) > n_max - depth - 1:
                continue
            visited.add(w)
            rec(w, depth + 1)
            visited.discard(w)

    rec(origin, 0)
    return counts


def two_point(graph: Graph, z: float, x: Vertex, alpha: float = 0.0, n_max: int = DEFAULT_N_MAX,
              norm: Norm | None = None) -> SeriesEstimate:
    """Partial sum of G_alpha(z, x) = sum_n z^n #{SAW_n ending at x} e^(alpha |x|)."""
    if z < 0:
        raise ValueError("z must be >= 0")
    weight = math.exp(alpha * graph.norm(x, norm))
    counts = saws_ending_at(graph, x, n_max)
    return _series([c * z ** n * weight if c else 0.0 for n, c in enumerate(counts)], n_max)


def plane_counts(d: int, L: int, n_max: int, workers: int = 1) -> list[int]:
    """Number of SAWs of each length in Z^d ending on the plane {x_1 = L}."""
    ends = saw_endpoints(Graph.lattice(d), n_max, workers)
    return [sum(c for x, c in e.items() if x[0] == L) for e in ends]


def plane_generating(d: int, z: float, L: int, n_max: int = DEFAULT_N_MAX,
                     workers: int = 1) -> SeriesEstimate:
    """Partial sum of G_L(z) = sum_n z^n #{SAW_n ending on {x_1 = L}}."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if z < 0:
        raise ValueError("z must be >= 0")
    counts = plane_counts(d, L, n_max, workers)
    return _series([c * z ** n if c else 0.0 for n, c in enumerate(counts)], n_max)


def chi0(d: int, z: float, n_max: int = DEFAULT_N_MAX, workers: int = 1) -> SeriesEstimate:
    return susceptibility(PathFamily("SAW", Graph.lattice(d)), 0.0, z, n_max, workers=workers)


@dataclass(frozen=True)
class MassEstimate:
    z: float
    per_L: tuple[float, ...]         # (-ln G_L)/L for L = 1..L_max
    sup_estimate: float
    n_max: int
    L_max: int
    G_L: tuple[float, ...] = ()
    sandwich: tuple[bool, ...] = ()  # per-L check of e^{-mL} <= G_L <= chi0^2 e^{-m L (1-slack)}
    caveats: tuple[str, ...] = field(default=())


def mass_estimate(d: int, z: float, L_max: int = DEFAULT_L_MAX, n_max: int = DEFAULT_N_MAX,
                  slack: float = 0.0, workers: int = 1) -> MassEstimate:
    """sup_{1<=L<=L_max} of (-ln G_L(z))/L from truncated plane generating functions."""
    if z <= 0:
        raise ValueError("z must be > 0")
    if L_max < 1:
        raise ValueError("L_max must be >= 1")
    G = [plane_generating(d, z, L, n_max, workers).value for L in range(1, L_max + 1)]
    per_L = tuple(-math.log(g) / L if g > 0 else math.inf for L, g in enumerate(G, start=1))
    m = max(per_L)
    chi = chi0(d, z, n_max, workers).value
    sandwich = []
    for L, g in enumerate(G, start=1):
        lower_ok = math.exp(-m * L) <= g * (1 + 1e-12)
        upper_ok = g <= chi * chi * math.exp(-m * L * (1 - slack)) * (1 + 1e-12)
        sandwich.append(lower_ok and upper_ok)
    caveats = [f"non-certified: truncation at n_max={n_max} under-estimates G_L, "
               "so the mass is over-estimated"]
    if d < 5:
        caveats.append(f"d={d} < 5: below d = 5, where the plane decay estimate is established")
    return MassEstimate(z, per_L, m, n_max, L_max, tuple(G), tuple(sandwich), tuple(caveats))


@dataclass(frozen=True)
class LocalisationBound:
    xi_hat: float
    L_bound: float
    unconditional: float
    mass: MassEstimate

    @property
    def best(self) -> float:
        return max(self.L_bound, self.unconditional)

    @property
    def best_source(self) -> str:
        return "correlation-length" if self.L_bound > self.unconditional else "unconditional 1/ln2"


def localisation_length_bound(d: int, L_max: int = DEFAULT_L_MAX, n_max: int = DEFAULT_N_MAX,
                              workers: int = 1) -> LocalisationBound:
    """Correlation length 1/m at z = 1/(2d), next to the unconditional bound 1/ln 2."""
    if d < 2:
        raise ValueError("d must be >= 2")
    m = mass_estimate(d, 1.0 / (2 * d), L_max, n_max, workers=workers)
    xi = 1.0 / m.sup_estimate if m.sup_estimate > 0 else math.inf
    return LocalisationBound(xi, xi, UNCONDITIONAL_BOUND, m)


def endpoint_histogram(d: int, n_max: int) -> list[Counter]:
    """SAW endpoint counts per length (exposed for the susceptibility double-count check)."""
    return list(saw_endpoints(Graph.lattice(d), n_max))
