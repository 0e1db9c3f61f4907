"""Partition functions of self-avoiding and single-path walks, and the bounds built on them.

Z_{X_n}(alpha) = sum over paths of family X with n steps of exp(alpha |x_n|),
X in {SAW, SP}.  Free energies Lambda_X are limits (= infima, by
subadditivity) of ln Z_n / n, so finite ``n_max`` only yields one-sided
information; everything here is reported as an interval or a partial sum with
its truncation order.

SAWs are enumerated by a pruned depth-first search with an occupied-vertex
set, independently of the exhaustive class enumeration in :mod:`brqw.paths`
(which supplies SP).  On the tree a SAW is a non-backtracking word, so its
counts come from a transfer recursion over the last letter instead.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Iterator

from scipy.optimize import brentq

from .errors import BudgetExceeded, InvariantViolation
from .graph import Graph, Norm, Vertex
from . import paths

DEFAULT_SAW_BUDGET = 10 ** 8


@dataclass(frozen=True)
class PathFamily:
    tag: str
    graph: Graph

    def __post_init__(self):
        tag = self.tag.upper()
        if tag not in ("SAW", "SP"):
            raise ValueError(f"unknown path family {self.tag!r}")
        object.__setattr__(self, "tag", tag)

    @property
    def d(self) -> int:
        return self.graph.d


@dataclass(frozen=True)
class SeriesEstimate:
    """Partial sum of a positive series (or a running bound) at truncation order ``n_max``."""

    value: float
    n_max: int
    last_term: float
    monotone: bool
    partial_sums: tuple = field(default=(), repr=False)
    diagnostic: str = ""


# -- SAW enumeration ----------------------------------------------------------------

def _saw_node_bound(graph: Graph, n_max: int) -> int:
    q = graph.coordination
    return 1 + sum(q * (q - 1) ** (k - 1) for k in range(1, n_max + 1))


def _saw_shard(graph: Graph, n_max: int, first: int) -> list[Counter]:
    step = graph.step
    letters = list(graph.letters)
    out = [Counter() for _ in range(n_max + 1)]
    x0 = graph.origin
    x1 = step(x0, first)
    visited = {x0, x1}

    def rec(x, depth):
        out[depth][x] += 1
        if depth == n_max:
            return
        for letter in letters:
            y = step(x, letter)
            if y in visited:
                continue
            visited.add(y)
            rec(y, depth + 1)
            visited.discard(y)

    rec(x1, 1)
    return out


_SAW_CACHE: dict = {}


def saw_endpoints(graph: Graph, n_max: int, workers: int = 1,
                  budget: int = DEFAULT_SAW_BUDGET) -> tuple[Counter, ...]:
    """Counts of SAWs of each length 0..n_max, keyed by endpoint.

    The deepest table computed so far for each graph is kept and sliced.
    Callers must not mutate the returned counters.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    cached = _SAW_CACHE.get(graph)
    if cached is None or len(cached) <= n_max:
        cached = _SAW_CACHE[graph] = _saw_endpoints(graph, n_max, workers, budget)
    return cached[:n_max + 1]


def _saw_endpoints(graph: Graph, n_max: int, workers: int, budget: int) -> tuple[Counter, ...]:
    bound = _saw_node_bound(graph, n_max)
    if bound > budget:
        raise BudgetExceeded(f"SAW search up to n={n_max} on {graph} may visit {bound} nodes "
                             f"(budget {budget})")
    out = [Counter() for _ in range(n_max + 1)]
    out[0][graph.origin] = 1
    if n_max == 0:
        return tuple(out)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_saw_shard, graph, n_max, t) for t in graph.letters]
            parts = [f.result() for f in futures]
    else:
        parts = [_saw_shard(graph, n_max, t) for t in graph.letters]
    for part in parts:
        for n, c in enumerate(part):
            out[n].update(c)
    return tuple(out)


def _tree_saw_counts(graph: Graph, n_max: int) -> list[int]:
    """Non-backtracking word counts by length, via a transfer recursion on the last letter."""
    q = graph.coordination
    counts = [1]
    by_last = [1] * q
    if n_max >= 1:
        counts.append(q)
    for _ in range(2, n_max + 1):
        total = sum(by_last)
        by_last = [total - by_last[graph.inverse(t)] for t in graph.letters]
        counts.append(sum(by_last))
    return counts[:n_max + 1]


@lru_cache(maxsize=64)
def saw_norm_counts(graph: Graph, n_max: int, norm: Norm | None = None,
                    workers: int = 1) -> tuple[Counter, ...]:
    """Counts of SAWs of each length keyed by the endpoint norm."""
    if graph.is_tree:
        graph.norm(graph.origin, norm)  # reject lattice norms on the tree
        return tuple(Counter({n: c}) for n, c in enumerate(_tree_saw_counts(graph, n_max)))
    ends = saw_endpoints(graph, n_max, workers)
    return tuple(Counter({r: c for r, c in _group_norms(graph, e, norm).items()}) for e in ends)


def _group_norms(graph: Graph, counter: Counter, norm: Norm | None) -> Counter:
    out = Counter()
    for x, c in counter.items():
        out[graph.norm(x, norm)] += c
    return out


def saw_count(graph: Graph, n: int) -> int:
    return sum(saw_norm_counts(graph, n, None)[n].values())


@lru_cache(maxsize=32)
def bridge_counts(graph: Graph, n_max: int, budget: int = DEFAULT_SAW_BUDGET) -> tuple[int, ...]:
    """Lattice bridges: SAWs with 0 < x_1(i) <= x_1(n) for all 1 <= i <= n."""
    if graph.is_tree:
        raise ValueError("bridges are defined on the lattice only")
    if _saw_node_bound(graph, n_max) > budget:
        raise BudgetExceeded(f"bridge search up to n={n_max} on {graph} exceeds the budget")
    step = graph.step
    out = [0] * (n_max + 1)
    out[0] = 1
    visited = {graph.origin}

    def rec(x, depth, top):
        if x[0] == top:
            out[depth] += 1
        if depth == n_max:
            return
        for letter in graph.letters:
            y = step(x, letter)
            if y[0] <= 0 or y in visited:
                continue
            visited.add(y)
            rec(y, depth + 1, max(top, y[0]))
            visited.discard(y)

    if n_max >= 1:
        x1 = step(graph.origin, 0)
        visited.add(x1)
        rec(x1, 1, 1)
    return tuple(out)


# -- partition functions --------------------------------------------------------

def family_norm_counts(family: PathFamily, n: int, norm: Norm | None = None,
                       workers: int = 1) -> Counter:
    g = family.graph
    if family.tag == "SAW":
        return saw_norm_counts(g, n, norm, workers)[n]
    table = paths._cached_table(g, n, 0, None, workers, paths.DEFAULT_PATH_BUDGET)
    return table.single_path_norms(norm)


def _weighted(counts: Counter, alpha: float) -> float:
    return math.fsum(c * math.exp(alpha * r) for r, c in counts.items())


def partition_function(family: PathFamily, n: int, alpha: float, norm: Norm | None = None,
                       workers: int = 1) -> float:
    """Z_{X_n}(alpha) = sum over the family's n-step paths of exp(alpha |x_n|)."""
    return _weighted(family_norm_counts(family, n, norm, workers), alpha)


def path_count(family: PathFamily, n: int, workers: int = 1) -> int:
    return sum(family_norm_counts(family, n, None, workers).values())


def lambda_lower(graph: Graph, alpha: float, norm: Norm | None = None) -> float:
    """Closed-form lower bound on Lambda(alpha), valid for SAW and hence for SP.

    Tree: ln(2d - 1) + alpha (exact for SAW).  Lattice: the d^n walks using
    only positive steps end at l1 distance n, which gives ln d + alpha for l1
    and ln d + alpha d^(1/p - 1) for l^p via norm equivalence.
    """
    norm = graph.default_norm if norm is None else norm
    if graph.is_tree:
        graph.norm(graph.origin, norm)
        return math.log(2 * graph.d - 1) + alpha
    d = graph.d
    if norm.kind == "l1":
        factor = 1.0
    elif norm.kind == "linf":
        factor = 1.0 / d
    elif norm.kind == "lp":
        factor = d ** (1.0 / norm.p - 1.0)
    else:
        raise ValueError(f"norm {norm} is not a lattice norm")
    return math.log(d) + alpha * factor


def lambda_upper(family: PathFamily, alpha: float, n_max: int, norm: Norm | None = None,
                 workers: int = 1) -> SeriesEstimate:
    """min_{1<=n<=n_max} ln Z_n(alpha) / n, an upper bound since Lambda = inf_n."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    vals = [math.log(partition_function(family, n, alpha, norm, workers)) / n
            for n in range(1, n_max + 1)]
    running = [min(vals[:k + 1]) for k in range(len(vals))]
    monotone = all(b <= a for a, b in zip(vals, vals[1:]))
    return SeriesEstimate(running[-1], n_max, vals[-1], monotone, tuple(running))


def lambda_bounds(family: PathFamily, alpha: float, n_max: int, norm: Norm | None = None,
                  workers: int = 1) -> tuple[SeriesEstimate, float]:
    """(upper, lower) bounds on the free energy Lambda_X(alpha)."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    upper = lambda_upper(family, alpha, n_max, norm, workers)
    lower = lambda_lower(family.graph, alpha, norm)
    if lower > upper.value + 1e-12:
        raise InvariantViolation(f"Lambda lower bound {lower} exceeds upper bound {upper.value}")
    return upper, lower


def connective_estimate(family: PathFamily, n_max: int, workers: int = 1) -> tuple[float, float]:
    """Interval containing the connective constant exp(Lambda_X(0)).

    Upper end: min_n c_n^(1/n) (submultiplicativity).  Lower end: 2d - 1 on
    the tree; on the lattice max(d, max_n b_n^(1/n)) with b_n the bridge
    counts, which are supermultiplicative and bounded by c_n.
    """
    g = family.graph
    upper = min(path_count(family, n, workers) ** (1.0 / n) for n in range(1, n_max + 1))
    if g.is_tree:
        lower = float(2 * g.d - 1)
    else:
        b = bridge_counts(g, n_max)
        lower = max(float(g.d), max(b[n] ** (1.0 / n) for n in range(1, n_max + 1)))
    return lower, upper


def susceptibility(family: PathFamily, alpha: float, z: float, n_max: int, norm: Norm | None = None,
                   workers: int = 1) -> SeriesEstimate:
    """Partial sum of chi_alpha(z) = sum_{n>=0} z^n Z_{X_n}(alpha), with Z_0 = 1."""
    if z < 0:
        raise ValueError("z must be >= 0")
    terms = [1.0]
    for n in range(1, n_max + 1):
        terms.append(z ** n * partition_function(family, n, alpha, norm, workers) if z else 0.0)
    partial = []
    s = 0.0
    for t in terms:
        s += t
        partial.append(s)
    diag = ""
    if n_max >= 1 and z > 0:
        upper, lower = lambda_bounds(family, alpha, n_max, norm, workers)
        zc_lo, zc_hi = math.exp(-upper.value), math.exp(-lower)
        if z < zc_lo:
            diag = f"convergent: z < {zc_lo:.6g} <= z_c"
        elif z > zc_hi:
            diag = f"divergent: z > {zc_hi:.6g} >= z_c"
        else:
            diag = f"undetermined: z_c in [{zc_lo:.6g}, {zc_hi:.6g}]"
    monotone = all(b >= a for a, b in zip(partial, partial[1:]))
    return SeriesEstimate(math.fsum(terms), n_max, terms[-1], monotone, tuple(partial), diag)


def tree_susceptibility_closed_form(d: int, alpha: float, z: float) -> float:
    """2d / ((2d - 1)(1 - z (2d - 1) e^alpha)) for 0 < z < e^-alpha / (2d - 1)."""
    q = z * (2 * d - 1) * math.exp(alpha)
    if not 0 <= q < 1:
        raise ValueError("closed form needs z (2d-1) e^alpha < 1")
    return 2 * d / ((2 * d - 1) * (1 - q))


def tree_partition_closed_form(d: int, n: int, alpha: float) -> float:
    return 2 * d / (2 * d - 1) * ((2 * d - 1) * math.exp(alpha)) ** n


# -- critical exponent alpha_c ---------------------------------------------------

def alpha_c_upper(graph: Graph, family: str = "SAW") -> float:
    """Best available closed-form upper bound on alpha_c for the family.

    Tree, SAW: ln(2d/(2d-1)), which is the SAW value itself.  Tree, SP: the
    decorated-path threshold (smaller for d >= 2).  Lattice with the l1 norm:
    ln 2, for every d.
    """
    fam = family.upper()
    if graph.is_tree:
        saw = math.log(2 * graph.d / (2 * graph.d - 1))
        if fam == "SP" and graph.d >= 2:
            return min(saw, decorated_tree_bound(graph.d)[0])
        return saw
    return math.log(2)


def alpha_c_bracket(graph: Graph, n_max: int, family: str = "SAW",
                    workers: int = 1) -> tuple[float, float]:
    """(alpha_lower, alpha_upper) for the family's critical alpha, default norm.

    alpha_lower solves min_{n<=n_max} ln Z_n(alpha)/n = ln 2d; that function
    dominates Lambda and increases with alpha, so its root lies below alpha_c.
    """
    fam = PathFamily(family, graph)
    target = math.log(graph.coordination)

    def f(alpha):
        return lambda_upper(fam, alpha, n_max, None, workers).value - target

    hi = target
    f0, f1 = f(0.0), f(hi)
    if f0 >= 0:
        lo = 0.0
    elif f1 < 0:
        raise InvariantViolation("Lambda upper bound below ln 2d at alpha = ln 2d")
    else:
        lo = brentq(f, 0.0, hi, xtol=1e-14, rtol=4 * 2.0 ** -52)
    up = alpha_c_upper(graph, fam.tag)
    if lo > up + 1e-12:
        raise InvariantViolation(f"alpha_c bracket inverted: {lo} > {up}")
    return lo, up


# -- decorated paths on the tree ------------------------------------------------

def divergence_threshold(d: int, z: float) -> float:
    """ln of the smallest e^alpha making the decorated-path susceptibility bound diverge."""
    q = 2 * d - 1
    return math.log((1 - z * z * q) / ((1 - z * z) * z * q))


def threshold_power_form(d: int) -> float:
    """The same threshold at z = 1/(2d), written in powers of 1/(2d)."""
    u = 1.0 / (2 * d)
    return math.log((1 - u + u * u) / ((1 - u) * (1 - u * u)))


def decorated_tree_bound(d: int) -> tuple[float, float]:
    """(alpha_threshold, alpha_threshold * 2 d^2) at z = 1/(2d)."""
    if d < 2:
        raise ValueError("the decorated-path bound needs d >= 2")
    t = divergence_threshold(d, 1.0 / (2 * d))
    return t, t * 2 * d * d


def decorated_conditions(d: int, z: float, alpha: float) -> tuple[bool, bool]:
    """The two convergence conditions z^2 (2d-1) < 1 and z e^alpha (2d-1) < 1."""
    q = 2 * d - 1
    return z * z * q < 1, z * math.exp(alpha) * q < 1


def decorated_path_census(d: int, n: int) -> int:
    """Number of decorated SAWs of total length n counted by the tree construction.

    Sum over n = k + 2 rho, k, rho >= 1, 1 <= j <= k + 1 of
    2d (2d-1)^(k-1) * C(k+1, j) * C(rho-1, j-1) * (2(d-1))^j (2d-1)^(rho-j).
    """
    if d < 1 or n < 0:
        raise ValueError("need d >= 1 and n >= 0")
    q = 2 * d - 1
    total = 0
    for rho in range(1, (n - 1) // 2 + 1):
        k = n - 2 * rho
        if k < 1:
            continue
        for j in range(1, min(k + 1, rho) + 1):
            total += (2 * d * q ** (k - 1) * math.comb(k + 1, j) * math.comb(rho - 1, j - 1)
                      * (2 * (d - 1)) ** j * q ** (rho - j))
    return total


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _non_backtracking(graph: Graph, length: int, first_choices) -> Iterator[tuple[int, ...]]:
    def rec(word):
        if len(word) == length:
            yield tuple(word)
            return
        inv_last = graph.inverse(word[-1])
        for letter in graph.letters:
            if letter != inv_last:
                word.append(letter)
                yield from rec(word)
                word.pop()

    for first in first_choices:
        yield from rec([first])


def decorated_paths(d: int, n: int) -> Iterator[tuple[int, ...]]:
    """Render every configuration counted by :func:`decorated_path_census` as a letter sequence.

    A SAW backbone of length k gets out-and-back decorations at j of its k + 1
    sites, run in order along the backbone.  A decoration's first letter avoids
    the two backbone directions at its site (at an endpoint: the backbone
    direction and its inverse), leaving 2(d - 1) choices.
    """
    g = Graph.tree(d)
    for rho in range(1, (n - 1) // 2 + 1):
        k = n - 2 * rho
        if k < 1:
            continue
        for backbone in _non_backtracking(g, k, g.letters):
            blocked = []
            for i in range(k + 1):
                if i == 0:
                    ban = {backbone[0], g.inverse(backbone[0])}
                elif i == k:
                    ban = {backbone[k - 1], g.inverse(backbone[k - 1])}
                else:
                    ban = {backbone[i], g.inverse(backbone[i - 1])}
                blocked.append([t for t in g.letters if t not in ban])
            for j in range(1, min(k + 1, rho) + 1):
                for sites in combinations(range(k + 1), j):
                    for lengths in _compositions(rho, j):
                        yield from _attach(g, backbone, sites, lengths, blocked)


def _attach(g: Graph, backbone, sites, lengths, blocked):
    decos = [list(_non_backtracking(g, r, blocked[s])) for s, r in zip(sites, lengths)]

    def rec(idx, chosen):
        if idx == len(sites):
            word = []
            at = dict(zip(sites, chosen))
            for i in range(len(backbone) + 1):
                if i in at:
                    out = at[i]
                    word.extend(out)
                    word.extend(g.inverse(t) for t in reversed(out))
                if i < len(backbone):
                    word.append(backbone[i])
            yield tuple(word)
            return
        for deco in decos[idx]:
            yield from rec(idx + 1, chosen + [deco])

    yield from rec(0, [])


# -- dimensional recursion on the lattice ----------------------------------------

def lattice_lift_check(d: int, n: int, L: int, workers: int = 1) -> tuple[int, int]:
    """(#SAW_n in Z^d ending on {x_1 = L}, C(n, |L|) * #SAW_{n-|L|} in Z^(d-1))."""
    if d < 2:
        raise ValueError("lattice_lift_check needs d >= 2")
    if abs(L) > n:
        raise ValueError("|L| must not exceed n")
    ends = saw_endpoints(Graph.lattice(d), n, workers)[n]
    lhs = sum(c for x, c in ends.items() if x[0] == L)
    rhs = math.comb(n, abs(L)) * saw_count(Graph.lattice(d - 1), n - abs(L))
    if lhs < rhs:
        raise InvariantViolation(f"lift inequality fails for d={d}, n={n}, L={L}: {lhs} < {rhs}")
    return lhs, rhs


def lift_lower_bound(d: int, n: int, alpha: float) -> float:
    """sum_L e^(alpha|L|) C(n, |L|) Z^(d-1)_{n-|L|}(alpha), a lower bound on Z^(d)_n(alpha) (l1)."""
    lower = Graph.lattice(d - 1)
    fam = PathFamily("SAW", lower)
    terms = []
    for L in range(-n, n + 1):
        terms.append(math.exp(alpha * abs(L)) * math.comb(n, abs(L))
                      * partition_function(fam, n - abs(L), alpha))
    return math.fsum(terms)


def linf_alpha_bound(d: int, mu_lower_dim: float) -> float:
    """ln(2d - mu(d-1)): the l-infinity analogue, given a connective-constant estimate."""
    if not 0 < mu_lower_dim < 2 * d:
        raise ValueError("need 0 < mu(d-1) < 2d")
    return math.log(2 * d - mu_lower_dim)
