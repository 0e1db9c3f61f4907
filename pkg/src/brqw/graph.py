"""The two underlying graphs: the cubic lattice Z^d and the tree T_{2d}.

Letters are integers ``0 .. 2d-1`` encoding the ordered alphabet
``a_1, ..., a_d, a_1^{-1}, ..., a_d^{-1}``; the inverse of letter ``j`` is
``(j + d) mod 2d``.  This ordering is used everywhere (coin rows and columns
included).

Vertices are plain tuples of ints.  On the lattice a vertex is its coordinate
vector; on the tree it is a reduced word of letters (the root is ``()``).  The
:class:`Graph` carries the kind, so the same tuple type serves both graphs and
all path code stays graph-generic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator

Vertex = tuple[int, ...]
Letter = int


class GraphKind(str, Enum):
    LATTICE = "lattice"
    TREE = "tree"


@dataclass(frozen=True)
class Norm:
    """A vertex norm: ``depth`` (tree), ``l1``, ``linf`` or ``lp`` with exponent ``p``."""

    kind: str
    p: float | None = None

    def __post_init__(self):
        if self.kind not in ("depth", "l1", "linf", "lp"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.kind == "lp" and (self.p is None or self.p < 1):
            raise ValueError("lp norm needs an exponent p >= 1")

    @classmethod
    def parse(cls, text: str) -> "Norm":
        """Parse ``depth``, ``l1``, ``linf``/``inf`` or ``lp:<p>`` / ``l<p>``."""
        t = text.strip().lower()
        if t in ("depth", "tree", "treedepth"):
            return cls("depth")
        if t in ("l1", "1"):
            return cls("l1")
        if t in ("linf", "inf", "l_inf"):
            return cls("linf")
        if t.startswith("lp:"):
            return cls("lp", float(t[3:]))
        if t.startswith("l"):
            try:
                return cls("lp", float(t[1:]))
            except ValueError:
                pass
        raise ValueError(f"cannot parse norm {text!r}")

    def __str__(self):
        return f"lp:{self.p:g}" if self.kind == "lp" else self.kind


DEPTH = Norm("depth")
L1 = Norm("l1")
LINF = Norm("linf")


@dataclass(frozen=True)
class Graph:
    kind: GraphKind
    d: int

    def __post_init__(self):
        object.__setattr__(self, "kind", GraphKind(self.kind))
        if not isinstance(self.d, int) or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")

    @classmethod
    def lattice(cls, d: int) -> "Graph":
        return cls(GraphKind.LATTICE, d)

    @classmethod
    def tree(cls, d: int) -> "Graph":
        return cls(GraphKind.TREE, d)

    @property
    def is_tree(self) -> bool:
        return self.kind is GraphKind.TREE

    @property
    def coordination(self) -> int:
        return 2 * self.d

    @property
    def letters(self) -> range:
        return range(2 * self.d)

    @property
    def origin(self) -> Vertex:
        return () if self.is_tree else (0,) * self.d

    @property
    def default_norm(self) -> Norm:
        return DEPTH if self.is_tree else L1

    def inverse(self, letter: Letter) -> Letter:
        self._check_letter(letter)
        return (letter + self.d) % (2 * self.d)

    def _check_letter(self, letter: Letter) -> None:
        if not 0 <= letter < 2 * self.d:
            raise ValueError(f"letter {letter} out of range for d={self.d}")

    def step(self, v: Vertex, letter: Letter) -> Vertex:
        """The neighbour of ``v`` reached by ``letter``."""
        d = self.d
        if not 0 <= letter < 2 * d:
            raise ValueError(f"letter {letter} out of range for d={d}")
        if self.is_tree:
            if v and v[-1] == (letter + d) % (2 * d):
                return v[:-1]
            return v + (letter,)
        if letter < d:
            return v[:letter] + (v[letter] + 1,) + v[letter + 1:]
        j = letter - d
        return v[:j] + (v[j] - 1,) + v[j + 1:]

    def walk(self, letters, start: Vertex | None = None) -> list[Vertex]:
        """Vertices ``x_0, ..., x_n`` visited by a letter sequence."""
        x = self.origin if start is None else start
        out = [x]
        for letter in letters:
            x = self.step(x, letter)
            out.append(x)
        return out

    def neighbours(self, v: Vertex) -> Iterator[tuple[Letter, Vertex]]:
        for letter in self.letters:
            yield letter, self.step(v, letter)

    def norm(self, v: Vertex, norm: Norm | None = None) -> float:
        norm = self.default_norm if norm is None else norm
        if self.is_tree:
            if norm.kind != "depth":
                raise ValueError(f"norm {norm} is not defined on the tree")
            return len(v)
        if norm.kind == "depth":
            raise ValueError("tree depth is not a lattice norm")
        if norm.kind == "l1":
            return sum(abs(c) for c in v)
        if norm.kind == "linf":
            return max((abs(c) for c in v), default=0)
        return sum(abs(c) ** norm.p for c in v) ** (1.0 / norm.p)

    def distance(self, u: Vertex, v: Vertex) -> int:
        """Graph distance (L1 on the lattice, word distance on the tree)."""
        if self.is_tree:
            k = 0
            for a, b in zip(u, v):
                if a != b:
                    break
                k += 1
            return len(u) + len(v) - 2 * k
        return sum(abs(a - b) for a, b in zip(u, v))

    def ball_size(self, radius: int) -> int:
        """Number of vertices within graph distance ``radius`` of the origin."""
        if self.is_tree:
            if self.d == 1:
                return 2 * radius + 1
            q = 2 * self.d - 1
            return 1 + 2 * self.d * (q ** radius - 1) // (q - 1)
        # lattice L1 ball: sum_k 2^k C(d,k) C(radius,k)
        return sum(2 ** k * math.comb(self.d, k) * math.comb(radius, k)
                   for k in range(min(self.d, radius) + 1))

    def ball(self, radius: int) -> list[Vertex]:
        """Vertices within graph distance ``radius``, in breadth-first order."""
        seen = {self.origin}
        layer = [self.origin]
        out = [self.origin]
        for _ in range(radius):
            nxt = []
            for v in layer:
                for _, w in self.neighbours(v):
                    if w not in seen:
                        seen.add(w)
                        nxt.append(w)
            nxt.sort()
            out.extend(nxt)
            layer = nxt
        return out

    def letter_name(self, letter: Letter) -> str:
        self._check_letter(letter)
        if letter < self.d:
            return f"a{letter + 1}"
        return f"a{letter - self.d + 1}^-1"

    def parse_letter(self, text: str) -> Letter:
        t = text.strip()
        if t.lstrip("-").isdigit():
            letter = int(t)
        else:
            inv = t.endswith("^-1")
            core = t[:-3] if inv else t
            if not core.startswith("a") or not core[1:].isdigit():
                raise ValueError(f"cannot parse letter {text!r}")
            j = int(core[1:]) - 1
            if not 0 <= j < self.d:
                raise ValueError(f"letter {text!r} out of range for d={self.d}")
            letter = j + self.d if inv else j
        self._check_letter(letter)
        return letter

    def format_vertex(self, v: Vertex) -> str:
        if self.is_tree:
            return " ".join(self.letter_name(x) for x in v) or "e"
        return "(" + ",".join(str(c) for c in v) + ")"

    def __str__(self):
        return f"Z^{self.d}" if not self.is_tree else f"T_{2 * self.d}"
