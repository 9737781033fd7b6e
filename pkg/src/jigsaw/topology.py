"""Puzzle-graph families.

Every family has vertices ``0..N-1``.  Coordinates are a derived view
obtained by mixed-radix decoding with the first coordinate varying fastest,
so ``Torus(n, 2)`` maps ``(x, y)`` to ``x + n*y``.  Neighbour lists are
generated on the fly; :meth:`Topology.csr` materialises them once for the
simulation kernels.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

FAMILIES = ("ring", "torus", "range", "hypercube", "hamming", "kxring", "complete")

# parameter names accepted in the family spec string, in print order
_SPEC_KEYS = {
    "ring": ("n",),
    "torus": ("n", "d"),
    "range": ("n", "r"),
    "hypercube": ("n",),
    "hamming": ("n", "d"),
    "kxring": ("n", "m"),
    "complete": ("n",),
}


class TopologyError(ValueError):
    """Invalid family parameters or out-of-range vertex."""


@dataclass(frozen=True)
class Topology:
    family: str
    n: int
    d: int = 1
    r: int = 0
    m: int = 0
    _csr: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        f, n = self.family, self.n
        if f not in FAMILIES:
            raise TopologyError(f"unknown family {f!r}")
        if f in ("ring", "torus", "hamming") and n < 3:
            raise TopologyError(f"{f} requires n >= 3 (got {n})")
        if f in ("torus", "hamming") and self.d < 1:
            raise TopologyError("dimension d must be >= 1")
        if f == "range":
            if self.r < 1:
                raise TopologyError("range requires r >= 1")
            if n < max(3, 2 * self.r + 1):
                raise TopologyError("range requires n >= max(3, 2r+1)")
        if f == "hypercube" and not 1 <= n <= 30:
            raise TopologyError("hypercube requires 1 <= n <= 30")
        if f == "kxring":
            if n < 1 or self.m < 3:
                raise TopologyError("kxring requires n >= 1 and m >= 3")
        if f == "complete" and n < 1:
            raise TopologyError("complete requires n >= 1")

    # ------------------------------------------------------------------ shape
    @property
    def radices(self) -> tuple[int, ...]:
        f = self.family
        if f in ("ring", "complete"):
            return (self.n,)
        if f in ("torus", "hamming"):
            return (self.n,) * self.d
        if f == "range":
            return (self.n, self.n)
        if f == "hypercube":
            return (2,) * self.n
        return (self.n, self.m)  # kxring: (clique index, ring position)

    @property
    def N(self) -> int:
        out = 1
        for b in self.radices:
            out *= b
        return out

    @property
    def degree(self) -> int:
        """Closed-form degree (all families are regular)."""
        f = self.family
        if f == "ring":
            return 2
        if f == "torus":
            return 2 * self.d
        if f == "range":
            return (2 * self.r + 1) ** 2 - 1
        if f == "hypercube":
            return self.n
        if f == "hamming":
            return self.d * (self.n - 1)
        if f == "kxring":
            return self.n - 1 + 2
        return self.n - 1

    @property
    def spec(self) -> str:
        vals = {"n": self.n, "d": self.d, "r": self.r, "m": self.m}
        body = ",".join(f"{k}={vals[k]}" for k in _SPEC_KEYS[self.family])
        return f"{self.family}:{body}"

    def __str__(self):
        return self.spec

    # ------------------------------------------------------------ coordinates
    def coords(self, v: int) -> tuple[int, ...]:
        self._check(v)
        out = []
        for b in self.radices:
            v, x = divmod(v, b)
            out.append(x)
        return tuple(out)

    def index(self, coords: Iterable[int]) -> int:
        coords = tuple(coords)
        rad = self.radices
        if len(coords) != len(rad):
            raise TopologyError(f"expected {len(rad)} coordinates")
        v, mul = 0, 1
        for x, b in zip(coords, rad):
            v += (x % b) * mul
            mul *= b
        return v

    def _check(self, v: int) -> None:
        if not 0 <= v < self.N:
            raise TopologyError(f"vertex {v} out of range [0, {self.N})")

    # -------------------------------------------------------------- adjacency
    def neighbors(self, v: int) -> list[int]:
        """Puzzle neighbours of ``v`` in ascending index order."""
        self._check(v)
        f, n = self.family, self.n
        if f == "complete":
            return [u for u in range(n) if u != v]
        if f == "hypercube":
            return sorted(v ^ (1 << i) for i in range(n))
        c = self.coords(v)
        out: set[int] = set()
        if f in ("ring", "torus"):
            for i in range(len(c)):
                for s in (-1, 1):
                    cc = list(c)
                    cc[i] += s
                    out.add(self.index(cc))
        elif f == "range":
            r = self.r
            for dx in range(-r, r + 1):
                for dy in range(-r, r + 1):
                    if dx or dy:
                        out.add(self.index((c[0] + dx, c[1] + dy)))
        elif f == "hamming":
            for i in range(len(c)):
                for x in range(n):
                    if x != c[i]:
                        cc = list(c)
                        cc[i] = x
                        out.add(self.index(cc))
        else:  # kxring
            a, b = c
            for x in range(n):
                if x != a:
                    out.add(self.index((x, b)))
            out.add(self.index((a, b + 1)))
            out.add(self.index((a, b - 1)))
        return sorted(out)

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` int32 adjacency, rows sorted ascending. Cached."""
        if "full" not in self._csr:
            table = self._neighbor_table()
            N, D = table.shape
            indptr = np.arange(0, (N + 1) * D, D, dtype=np.int32) if D else np.zeros(N + 1, np.int32)
            self._csr["full"] = (indptr, table.reshape(-1).astype(np.int32))
        return self._csr["full"]

    def _neighbor_table(self) -> np.ndarray:
        f, n, N = self.family, self.n, self.N
        idx = np.arange(N, dtype=np.int64)
        if f == "complete":
            if n == 1:
                return np.zeros((1, 0), dtype=np.int64)
            full = np.broadcast_to(np.arange(n - 1), (n, n - 1))
            return full + (full >= idx[:, None])
        if f == "hypercube":
            cols = [idx ^ (1 << i) for i in range(n)]
        else:
            rad = self.radices
            digits = []
            rem = idx.copy()
            for b in rad:
                digits.append(rem % b)
                rem //= b
            mults = np.cumprod((1,) + rad[:-1])

            def shifted(i, delta):
                return idx + (((digits[i] + delta) % rad[i]) - digits[i]) * mults[i]

            cols = []
            if f in ("ring", "torus"):
                for i in range(len(rad)):
                    cols += [shifted(i, -1), shifted(i, 1)]
            elif f == "range":
                for dx, dy in itertools.product(range(-self.r, self.r + 1), repeat=2):
                    if dx or dy:
                        x = (digits[0] + dx) % n
                        y = (digits[1] + dy) % n
                        cols.append(x + n * y)
            elif f == "hamming":
                for i in range(len(rad)):
                    cols += [shifted(i, s) for s in range(1, n)]
            else:  # kxring
                cols += [shifted(0, s) for s in range(1, n)]
                cols += [shifted(1, -1), shifted(1, 1)]
        table = np.stack(cols, axis=1)
        table.sort(axis=1)
        return table

    def induced(self, A: Iterable[int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Induced subgraph on ``A``: ``(indptr, indices, gid)`` with local ids.

        ``gid[i]`` is the global vertex of local vertex ``i``; ``A`` is sorted.
        """
        gid = np.unique(np.fromiter(A, dtype=np.int64))
        if gid.size and (gid[0] < 0 or gid[-1] >= self.N):
            raise TopologyError("vertex out of range in induced set")
        indptr, indices = self.csr()
        local = np.full(self.N, -1, dtype=np.int64)
        local[gid] = np.arange(gid.size)
        rows = []
        ptr = [0]
        for g in gid:
            nb = local[indices[indptr[g]:indptr[g + 1]]]
            nb = nb[nb >= 0]
            rows.append(nb)
            ptr.append(ptr[-1] + nb.size)
        flat = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        return np.asarray(ptr, dtype=np.int32), flat.astype(np.int32), gid

    def is_connected(self) -> bool:
        indptr, indices = self.csr()
        seen = np.zeros(self.N, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            v = stack.pop()
            for u in indices[indptr[v]:indptr[v + 1]]:
                if not seen[u]:
                    seen[u] = True
                    stack.append(int(u))
        return bool(seen.all())


# ---------------------------------------------------------------- factories
def ring(n: int) -> Topology:
    return Topology("ring", n)


def torus(n: int, d: int = 2) -> Topology:
    return Topology("torus", n, d=d)


def range_torus(n: int, r: int) -> Topology:
    return Topology("range", n, r=r)


def hypercube(n: int) -> Topology:
    return Topology("hypercube", n)


def hamming(n: int, d: int) -> Topology:
    return Topology("hamming", n, d=d)


def complete_times_ring(n: int, m: int) -> Topology:
    return Topology("kxring", n, m=m)


def complete(n: int) -> Topology:
    return Topology("complete", n)


_SPEC_RE = re.compile(r"^\s*([a-z]+)\s*:\s*(.*?)\s*$")


def parse_topology(spec: str) -> Topology:
    """Parse ``family:key=value,...``, e.g. ``torus:n=400,d=2``."""
    m = _SPEC_RE.match(spec)
    if not m:
        raise TopologyError(f"malformed topology spec {spec!r}")
    family, body = m.groups()
    if family not in _SPEC_KEYS:
        raise TopologyError(f"unknown family {family!r}")
    kw: dict[str, int] = {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        key, eq, val = item.partition("=")
        key = key.strip()
        if not eq or key not in _SPEC_KEYS[family]:
            raise TopologyError(f"bad parameter {item!r} for {family}")
        try:
            kw[key] = int(val)
        except ValueError:
            raise TopologyError(f"parameter {key} must be an integer") from None
    missing = [k for k in _SPEC_KEYS[family] if k not in kw]
    if missing:
        raise TopologyError(f"{family} needs {', '.join(missing)}")
    return Topology(family, **kw)


# ------------------------------------------------------------------ helpers
def neighbors(t: Topology, v: int) -> list[int]:
    return t.neighbors(v)


def cpuzzle(t: Topology, v: int, S) -> int:
    """Number of puzzle neighbours of ``v`` inside ``S`` (``v`` itself never counts)."""
    S = S if isinstance(S, (set, frozenset)) else set(S)
    return sum(1 for u in t.neighbors(v) if u in S)


def coarse_grain_2x2(t: Topology, sampler):
    """Collapse 2x2 blocks of a 2D torus into single vertices.

    Two blocks are people-adjacent in the coarse instance iff some people edge
    joins a vertex of one block to a vertex of the other.  Returns the coarse
    ``Topology`` and an explicit :class:`~jigsaw.randomness.EdgeSampler`.
    """
    from .randomness import EdgeSampler

    if t.family != "torus" or t.d != 2:
        raise TopologyError("coarse graining needs a 2D torus")
    n = t.n
    if n % 2 or n // 2 < 3:
        raise TopologyError("coarse graining needs even n with n/2 >= 3")
    h = n // 2
    coarse = torus(h, 2)
    v = np.arange(t.N, dtype=np.int64)
    block = (v % n) // 2 + h * ((v // n) // 2)
    iu, ju = np.triu_indices(t.N, k=1)
    cross = block[iu] != block[ju]
    iu, ju = iu[cross], ju[cross]
    open_ = sampler.status_many(iu, ju)
    bu, bv = block[iu[open_]], block[ju[open_]]
    edges = set(zip(np.minimum(bu, bv).tolist(), np.maximum(bu, bv).tolist()))
    return coarse, EdgeSampler.explicit(edges, n_vertices=coarse.N)
