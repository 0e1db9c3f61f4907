"""Path classes by phase content and the exact disorder average S_n(alpha).

Two paths from the root are equivalent when they cross every oriented edge
the same number of times.  Averaging over i.i.d. uniform edge phases kills
every cross term between inequivalent paths, so the disorder-averaged moment
is a sum over classes of |class amplitude|^2.

The enumeration is an exhaustive depth-first search over all (2d)^n letter
sequences, updating the edge multiset one edge at a time.  It can be split by
letter prefix across worker processes; shard tables merge by class key and
every merged quantity is order-independent (integers, or floating sums kept
as exact Shewchuk partials), so results do not depend on the shard layout.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

from .coin import SkeletonMatrix
from .errors import BudgetExceeded, InvariantViolation
from .graph import Graph, Norm, Vertex

DEFAULT_PATH_BUDGET = 10 ** 8
ZERO_TOL = 1e-9

Edge = tuple[Vertex, Vertex]


@dataclass(frozen=True)
class Path:
    """A path from the root given by its letters; ``tau0`` is the initial coin state."""

    graph: Graph
    letters: tuple[int, ...]
    tau0: int = 0

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def vertices(self) -> list[Vertex]:
        return self.graph.walk(self.letters)

    @property
    def endpoint(self) -> Vertex:
        return self.vertices[-1]

    def edges(self) -> list[Edge]:
        """Oriented edges (x_k, x_{k-1}) in traversal order."""
        xs = self.vertices
        return [(xs[k], xs[k - 1]) for k in range(1, len(xs))]

    def is_self_avoiding(self) -> bool:
        xs = self.vertices
        return len(set(xs)) == len(xs)

    def __str__(self):
        return " ".join(self.graph.letter_name(x) for x in self.letters) or "(empty)"


@dataclass(frozen=True)
class PhaseContent:
    """Multiset of oriented edges, stored sorted as ((arrival, departure), multiplicity)."""

    items: tuple[tuple[Edge, int], ...]

    @classmethod
    def from_counts(cls, counts) -> "PhaseContent":
        return cls(tuple(sorted((e, m) for e, m in counts.items() if m)))

    @property
    def total(self) -> int:
        return sum(m for _, m in self.items)

    def multiplicity(self, arrival: Vertex, departure: Vertex) -> int:
        return dict(self.items).get((arrival, departure), 0)

    def as_counter(self) -> Counter:
        return Counter(dict(self.items))

    def encode(self) -> bytes:
        return repr(self.items).encode()


def phase_content(p: Path) -> PhaseContent:
    return PhaseContent.from_counts(Counter(p.edges()))


def class_size(p: Path, limit: int | None = None) -> int:
    """Number of paths sharing ``p``'s phase content, found by counting edge-exact trails.

    Independent of the exhaustive class table: it walks only the edges of the
    content.  Stops early once ``limit`` trails are found.
    """
    g = p.graph
    remaining = Counter(p.edges())
    n = p.n
    found = 0

    def rec(x, depth):
        nonlocal found
        if depth == n:
            found += 1
            return limit is not None and found >= limit
        for letter in g.letters:
            y = g.step(x, letter)
            e = (y, x)
            if remaining[e]:
                remaining[e] -= 1
                stop = rec(y, depth + 1)
                remaining[e] += 1
                if stop:
                    return True
        return False

    rec(g.origin, 0)
    return found


def is_single_path(p: Path) -> bool:
    return class_size(p, limit=2) == 1


# -- exact complex accumulation -------------------------------------------------

def _grow(partials: list, x: float) -> None:
    """Add ``x`` to a list of non-overlapping partials, exactly (Shewchuk)."""
    i = 0
    for y in partials:
        if abs(x) < abs(y):
            x, y = y, x
        hi = x + y
        lo = y - (hi - x)
        if lo:
            partials[i] = lo
            i += 1
        x = hi
    partials[i:] = [x]


class ExactComplex:
    """A complex sum whose value is independent of the order of its terms."""

    __slots__ = ("re", "im")

    def __init__(self):
        self.re: list = []
        self.im: list = []

    def add(self, z: complex) -> None:
        _grow(self.re, z.real)
        _grow(self.im, z.imag)

    def merge(self, other: "ExactComplex") -> None:
        for x in other.re:
            _grow(self.re, x)
        for x in other.im:
            _grow(self.im, x)

    @property
    def value(self) -> complex:
        return complex(math.fsum(self.re), math.fsum(self.im))


# -- class tables -----------------------------------------------------------------

@dataclass
class ClassEntry:
    endpoint: Vertex
    count: int
    representative: tuple[int, ...]
    amplitude: dict = field(default_factory=dict)   # last letter -> int or ExactComplex

    def amplitudes(self) -> dict[int, complex | int]:
        return {t: (a.value if isinstance(a, ExactComplex) else a)
                for t, a in sorted(self.amplitude.items())}

    def weight(self) -> float | int:
        """sum over last letters of |amplitude|^2."""
        vals = self.amplitudes().values()
        if all(isinstance(v, int) for v in vals):
            return sum(v * v for v in vals)
        return math.fsum(abs(v) ** 2 for v in vals)

    def is_zero(self) -> bool:
        for v in self.amplitudes().values():
            if isinstance(v, int):
                if v:
                    return False
            elif abs(v) >= ZERO_TOL * self.count:
                return False
        return True

    def merge(self, other: "ClassEntry") -> None:
        if other.endpoint != self.endpoint:
            raise InvariantViolation(
                f"paths {self.representative} and {other.representative} share a phase "
                f"content but end at {self.endpoint} and {other.endpoint}")
        self.count += other.count
        self.representative = min(self.representative, other.representative)
        for t, a in other.amplitude.items():
            mine = self.amplitude.get(t)
            if mine is None:
                self.amplitude[t] = a
            elif isinstance(a, ExactComplex):
                mine.merge(a)
            else:
                self.amplitude[t] = mine + a


@dataclass
class ClassTable:
    """Phase-content classes of all length-``n`` paths with their amplitudes.

    ``mode`` is ``"sign"`` (real +-1 coins, integer amplitudes), ``"phase"``
    (general balanced coins, complex amplitudes) or ``"count"`` (no coin).
    Amplitudes omit the common factor (2d)^{-n/2}.
    """

    graph: Graph
    n: int
    tau0: int
    mode: str
    classes: dict

    @property
    def class_count(self) -> int:
        return len(self.classes)

    @property
    def total_paths(self) -> int:
        return sum(e.count for e in self.classes.values())

    def sorted_items(self):
        return sorted(self.classes.items())

    def s_n(self, alpha: float, norm: Norm | None = None, max_norm: float | None = None) -> float:
        """Disorder-averaged exponential moment; optionally only endpoints with |x| <= max_norm."""
        if self.mode == "count":
            raise ValueError("a count-only table carries no amplitudes")
        g = self.graph
        by_norm: dict = {}
        for e in self.classes.values():
            r = g.norm(e.endpoint, norm)
            if max_norm is not None and r > max_norm:
                continue
            by_norm.setdefault(r, []).append(e.weight())
        scale = float(g.coordination) ** self.n
        terms = []
        for r, ws in by_norm.items():
            w = sum(ws) if self.mode == "sign" else math.fsum(ws)
            terms.append(w * math.exp(alpha * r))
        return math.fsum(terms) / scale

    def zero_census(self) -> tuple[int, int, int]:
        """(class count, classes with vanishing amplitude, paths in those classes)."""
        if self.mode == "count":
            raise ValueError("a count-only table carries no amplitudes")
        zero = [e for e in self.classes.values() if e.is_zero()]
        return self.class_count, len(zero), sum(e.count for e in zero)

    def single_paths(self) -> list[tuple[int, ...]]:
        return sorted(e.representative for e in self.classes.values() if e.count == 1)

    def single_path_norms(self, norm: Norm | None = None) -> Counter:
        return Counter(self.graph.norm(e.endpoint, norm)
                       for e in self.classes.values() if e.count == 1)

    def class_of(self, letters) -> ClassEntry:
        return self.classes[phase_content(Path(self.graph, tuple(letters), self.tau0)).items]

    def dump(self) -> list[dict]:
        g = self.graph
        out = []
        for key, e in self.sorted_items():
            amps = {}
            for t, v in e.amplitudes().items():
                amps[g.letter_name(t)] = v if isinstance(v, int) else [v.real, v.imag]
            out.append({
                "content": [[g.format_vertex(a), g.format_vertex(b), m] for (a, b), m in key],
                "cardinality": e.count,
                "endpoint": g.format_vertex(e.endpoint),
                "representative": [g.letter_name(t) for t in e.representative],
                "amplitude": amps,
            })
        return out


def _coin_mode(coin: SkeletonMatrix | None) -> tuple[str, list | None]:
    if coin is None:
        return "count", None
    if not coin.is_balanced():
        raise ValueError(f"coin {coin.name!r} is not balanced")
    if coin.is_sign_coin:
        return "sign", coin.sign_bits.astype(int).tolist()
    return "phase", coin.phases().tolist()


def _enumerate_shard(graph: Graph, n: int, tau0: int, mode: str, weights, prefix: tuple) -> dict:
    step = graph.step
    letters = list(graph.letters)
    counts: dict = {}
    classes: dict = {}
    path = list(prefix)

    x = graph.origin
    prev = tau0
    acc = 0 if mode != "phase" else 0.0
    for letter in prefix:
        y = step(x, letter)
        counts[(y, x)] = counts.get((y, x), 0) + 1
        if weights is not None:
            acc += weights[letter][prev]
        x, prev = y, letter

    def leaf(y, last, acc):
        key = tuple(sorted(counts.items()))
        entry = classes.get(key)
        if entry is None:
            entry = classes[key] = ClassEntry(y, 0, tuple(path))
        elif entry.endpoint != y:
            raise InvariantViolation(
                f"paths {entry.representative} and {tuple(path)} share a phase content "
                f"but end at {entry.endpoint} and {y}")
        entry.count += 1
        if mode == "sign":
            entry.amplitude[last] = entry.amplitude.get(last, 0) + (1 - 2 * (acc & 1))
        elif mode == "phase":
            slot = entry.amplitude.get(last)
            if slot is None:
                slot = entry.amplitude[last] = ExactComplex()
            slot.add(complex(math.cos(acc), math.sin(acc)))

    def rec(depth, x, prev, acc):
        if depth == n:
            leaf(x, prev, acc)
            return
        for letter in letters:
            y = step(x, letter)
            e = (y, x)
            counts[e] = counts.get(e, 0) + 1
            path.append(letter)
            rec(depth + 1, y, letter, acc + weights[letter][prev] if weights is not None else acc)
            path.pop()
            m = counts[e] - 1
            if m:
                counts[e] = m
            else:
                del counts[e]

    rec(len(prefix), x, prev, acc)
    return classes


def shard_prefixes(graph: Graph, n: int, workers: int) -> list[tuple]:
    """Letter prefixes of length ceil(log_{2d} workers), capped at n."""
    if workers <= 1 or n == 0:
        return [()]
    q = graph.coordination
    depth = min(n, max(1, math.ceil(math.log(workers, q))))
    prefixes = [()]
    for _ in range(depth):
        prefixes = [p + (letter,) for p in prefixes for letter in range(q)]
    return prefixes


def build_class_table(graph: Graph, n: int, tau0: int = 0, coin: SkeletonMatrix | None = None,
                      workers: int = 1, budget: int = DEFAULT_PATH_BUDGET) -> ClassTable:
    """Group all (2d)^n paths of length ``n`` by phase content."""
    if n < 0:
        raise ValueError("n must be >= 0")
    graph.inverse(tau0)
    if coin is not None and coin.d != graph.d:
        raise ValueError(f"coin of size {coin.size} does not match d={graph.d}")
    total = graph.coordination ** n
    if total > budget:
        raise BudgetExceeded(f"{total} paths of length {n} on {graph} exceed the budget {budget}")
    mode, weights = _coin_mode(coin)
    prefixes = shard_prefixes(graph, n, workers)
    if len(prefixes) == 1:
        parts = [_enumerate_shard(graph, n, tau0, mode, weights, prefixes[0])]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_enumerate_shard, graph, n, tau0, mode, weights, p) for p in prefixes]
            parts = [f.result() for f in futures]
    classes = parts[0]
    for part in parts[1:]:
        for key, entry in part.items():
            mine = classes.get(key)
            if mine is None:
                classes[key] = entry
            else:
                mine.merge(entry)
    table = ClassTable(graph, n, tau0, mode, classes)
    if table.total_paths != total:
        raise InvariantViolation(f"enumerated {table.total_paths} paths, expected {total}")
    return table


@lru_cache(maxsize=64)
def _cached_table(graph: Graph, n: int, tau0: int, coin, workers: int, budget: int) -> ClassTable:
    return build_class_table(graph, n, tau0, coin, workers, budget)


def exact_S_n(graph: Graph, n: int, coin: SkeletonMatrix, alpha: float, tau0: int = 0,
              norm: Norm | None = None, workers: int = 1, budget: int = DEFAULT_PATH_BUDGET) -> float:
    """Exact disorder average E ||exp(alpha|X|/2) U^n e(x)tau0||^2 by class enumeration."""
    return _cached_table(graph, n, tau0, coin, workers, budget).s_n(alpha, norm)


def exact_S_n_tau_averaged(graph: Graph, n: int, coin: SkeletonMatrix, alpha: float,
                           norm: Norm | None = None, workers: int = 1,
                           budget: int = DEFAULT_PATH_BUDGET) -> float:
    vals = [exact_S_n(graph, n, coin, alpha, t, norm, workers, budget) for t in graph.letters]
    return math.fsum(vals) / graph.coordination


def single_path_classes(graph: Graph, n: int, workers: int = 1,
                        budget: int = DEFAULT_PATH_BUDGET) -> frozenset:
    """SP_n: the paths that are alone in their phase-content class."""
    table = _cached_table(graph, n, 0, None, workers, budget)
    return frozenset(Path(graph, p) for p in table.single_paths())


def zero_class_census(graph: Graph, n: int, coin: SkeletonMatrix, tau0: int = 0,
                      workers: int = 1, budget: int = DEFAULT_PATH_BUDGET) -> tuple[int, int, int]:
    return _cached_table(graph, n, tau0, coin, workers, budget).zero_census()
