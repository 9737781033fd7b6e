"""Lazily sampled Erdos-Renyi people graph.

The status of the unordered pair ``{u, v}`` is a pure function of the
master seed and the canonical pair index ``hi*(hi-1)/2 + lo``::

    s1   = mix64(seed)
    s2   = mix64(s1 ^ SALT)
    bits = mix64(mix64(key ^ s1) ^ s2)
    open = (bits >> 11) < ceil(p * 2**53)

``s2`` must not equal ``mix64(s1)``: that would cancel the inner mix for
``key = 0`` and pin the pair ``{0, 1}`` to one value for every seed.

``mix64`` is the SplitMix64 output function.  Because the comparison is
against a threshold on a fixed uniform, the edge set at ``p1 <= p2`` is a
subset of the edge set at ``p2`` for the same seed.

Per-trial seeds are ``trial_seed(master, i) = mix64((mix64(master) + i) mod 2**64)``,
i.e. the i-th output of a SplitMix64 stream keyed by the master seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
TWO53 = 1 << 53
SALT = 0xD1B54A32D192ED03


def mix64(x: int) -> int:
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def trial_seed(master: int, i: int) -> int:
    return mix64((mix64(master & MASK64) + i) & MASK64)


def parse_seed(text: str) -> int:
    """Decimal or ``0x``-prefixed hex seed."""
    val = int(str(text).strip(), 0)
    if val < 0:
        raise ValueError("seed must be non-negative")
    return val & MASK64


def pair_key(u: int, v: int) -> int:
    if u == v:
        raise ValueError("pair endpoints must differ")
    lo, hi = (u, v) if u < v else (v, u)
    return hi * (hi - 1) // 2 + lo


def unpair_key(key: int) -> tuple[int, int]:
    hi = (1 + math.isqrt(1 + 8 * key)) // 2
    while hi * (hi - 1) // 2 > key:
        hi -= 1
    while (hi + 1) * hi // 2 <= key:
        hi += 1
    return key - hi * (hi - 1) // 2, hi


def p_threshold(p: float) -> int:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    return int(math.ceil(p * TWO53))


@dataclass(frozen=True, eq=False)
class EdgeSampler:
    """People-graph oracle: ``status(u, v)`` is the edge indicator.

    ``mode == "lazy"`` hashes the pair; ``mode == "explicit"`` looks the pair
    up in a fixed edge set (``keys`` holds sorted canonical pair indices).
    """

    seed: int = 0
    p: float = 0.0
    mode: str = "lazy"
    keys: np.ndarray = field(default_factory=lambda: np.zeros(0, np.uint64))

    def __post_init__(self):
        if self.mode not in ("lazy", "explicit"):
            raise ValueError(f"unknown sampler mode {self.mode!r}")
        if self.mode == "lazy":
            p_threshold(self.p)
            object.__setattr__(self, "seed", int(self.seed) & MASK64)

    @classmethod
    def explicit(cls, edges: Iterable[tuple[int, int]], n_vertices: int | None = None) -> "EdgeSampler":
        keys = sorted({pair_key(int(u), int(v)) for u, v in edges})
        if n_vertices is not None and keys:
            if unpair_key(keys[-1])[1] >= n_vertices:
                raise ValueError("edge endpoint out of range")
        return cls(mode="explicit", p=float("nan"), keys=np.asarray(keys, dtype=np.uint64))

    def with_p(self, p: float) -> "EdgeSampler":
        if self.mode != "lazy":
            raise ValueError("explicit samplers have no p")
        return EdgeSampler(self.seed, p)

    @property
    def _salts(self) -> tuple[int, int]:
        s1 = mix64(self.seed)
        return s1, mix64(s1 ^ SALT)

    def uniform(self, u: int, v: int) -> float:
        s1, s2 = self._salts
        bits = mix64(mix64(pair_key(u, v) ^ s1) ^ s2)
        return (bits >> 11) / TWO53

    def status(self, u: int, v: int) -> bool:
        if self.mode == "explicit":
            k = pair_key(u, v)
            i = int(np.searchsorted(self.keys, np.uint64(k)))
            return i < self.keys.size and int(self.keys[i]) == k
        s1, s2 = self._salts
        bits = mix64(mix64(pair_key(u, v) ^ s1) ^ s2)
        return (bits >> 11) < p_threshold(self.p)

    def status_many(self, us: Sequence[int], vs: Sequence[int]) -> np.ndarray:
        """Vectorised :meth:`status` over paired arrays."""
        us = np.asarray(us, dtype=np.uint64)
        vs = np.asarray(vs, dtype=np.uint64)
        if np.any(us == vs):
            raise ValueError("pair endpoints must differ")
        lo, hi = np.minimum(us, vs), np.maximum(us, vs)
        key = hi * (hi - np.uint64(1)) // np.uint64(2) + lo
        if self.mode == "explicit":
            i = np.searchsorted(self.keys, key)
            i = np.minimum(i, max(self.keys.size - 1, 0))
            return (self.keys[i] == key) if self.keys.size else np.zeros(key.shape, bool)
        s1, s2 = (np.uint64(x) for x in self._salts)
        bits = _mix64_np(_mix64_np(key ^ s1) ^ s2)
        return (bits >> np.uint64(11)) < np.uint64(p_threshold(self.p))

    def kernel_args(self):
        """``(mode, s1, s2, thr, keys)`` in the form the numba kernels expect."""
        if self.mode == "explicit":
            return 1, np.uint64(0), np.uint64(0), np.uint64(0), self.keys
        s1, s2 = self._salts
        return (0, np.uint64(s1), np.uint64(s2), np.uint64(p_threshold(self.p)),
                np.zeros(0, np.uint64))

    def __repr__(self):
        if self.mode == "explicit":
            return f"EdgeSampler(explicit, {self.keys.size} edges)"
        return f"EdgeSampler(seed={self.seed:#x}, p={self.p})"


def _mix64_np(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        return z ^ (z >> np.uint64(31))


# ------------------------------------------------------------- exam ledger
class ExamLedger:
    """Decided-pair store with per-vertex first-examination counters."""

    def __init__(self, n_vertices: int):
        self.decided: dict[tuple[int, int], bool] = {}
        self.per_vertex_first_exams = np.zeros(n_vertices, dtype=np.int64)

    def record(self, u: int, v: int, status: bool) -> None:
        pair = (u, v) if u < v else (v, u)
        if pair not in self.decided:
            self.decided[pair] = status
            self.per_vertex_first_exams[u] += 1
            self.per_vertex_first_exams[v] += 1

    def max_exams_per_vertex(self) -> int:
        c = self.per_vertex_first_exams
        return int(c.max()) if c.size else 0


def examine(s: EdgeSampler, led: ExamLedger, u: int, v: int) -> bool:
    if u == v:
        raise ValueError("cannot examine a vertex against itself")
    st = s.status(u, v)
    led.record(u, v, st)
    return st


def find_people_neighbor_in(s: EdgeSampler, led: ExamLedger, v: int, S: Sequence[int]) -> int | None:
    """First ``w`` in ``S`` (in order) people-adjacent to ``v``; examines only up to the hit."""
    for w in S:
        if examine(s, led, v, w):
            return w
    return None


def count_people_neighbors_in(s: EdgeSampler, led: ExamLedger, v: int, S: Iterable[int], cap: int) -> int:
    if cap < 1:
        raise ValueError("cap must be >= 1")
    count = 0
    for w in S:
        if examine(s, led, v, w):
            count += 1
            if count >= cap:
                break
    return count


def max_exams_per_vertex(led: ExamLedger) -> int:
    return led.max_exams_per_vertex()


@dataclass(frozen=True)
class ExamStats:
    """Examination summary of one run (or a merge of several runs)."""

    decided_pairs: int
    max_per_vertex: int
    runs: int = 1

    def merge(self, other: "ExamStats") -> "ExamStats":
        return ExamStats(self.decided_pairs + other.decided_pairs,
                         max(self.max_per_vertex, other.max_per_vertex),
                         self.runs + other.runs)


# ------------------------------------------------------------ numba twins
_U_GOLDEN = np.uint64(GOLDEN)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_U30, _U27, _U31, _U11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_U1, _U2 = np.uint64(1), np.uint64(2)
_FIB = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True, inline="always")
def mix64_nb(x):
    z = x + _U_GOLDEN
    z = (z ^ (z >> _U30)) * _U_M1
    z = (z ^ (z >> _U27)) * _U_M2
    return z ^ (z >> _U31)


@njit(cache=True, inline="always")
def pair_key_nb(gu, gv):
    a = np.uint64(gu)
    b = np.uint64(gv)
    if a < b:
        return b * (b - _U1) // _U2 + a
    return a * (a - _U1) // _U2 + b


@njit(cache=True, inline="always")
def status_nb(key, mode, s1, s2, thr, keys):
    if mode == 0:
        bits = mix64_nb(mix64_nb(key ^ s1) ^ s2)
        return (bits >> _U11) < thr
    i = np.searchsorted(keys, key)
    return i < keys.size and keys[i] == key


@njit(cache=True, inline="always")
def _slot_nb(key, mask):
    x = key * _FIB
    return (x ^ (x >> np.uint64(32))) & mask


@njit(cache=True, inline="always")
def ledger_insert_nb(table, meta, key):
    """Insert ``key`` into the open-addressing set ``table``.

    Returns 1 if new, 0 if already present, -1 if the table is too full
    (``meta[1]`` is then set and the caller must grow and redo).
    """
    cap = table.size
    mask = np.uint64(cap - 1)
    stored = key + _U1
    h = _slot_nb(key, mask)
    while True:
        cur = table[h]
        if cur == stored:
            return 0
        if cur == 0:
            if (meta[0] + 1) * 10 > cap * 7:
                meta[1] = 1
                return -1
            table[h] = stored
            meta[0] += 1
            return 1
        h = (h + _U1) & mask


@njit(cache=True)
def ledger_grow_nb(table):
    new = np.zeros(table.size * 2, dtype=np.uint64)
    mask = np.uint64(new.size - 1)
    for cur in table:
        if cur != 0:
            key = cur - _U1
            h = _slot_nb(key, mask)
            while new[h] != 0:
                h = (h + _U1) & mask
            new[h] = cur
    return new


@njit(cache=True)
def status_array_nb(gus, gvs, mode, s1, s2, thr, keys):
    out = np.empty(gus.size, dtype=np.bool_)
    for i in range(gus.size):
        out[i] = status_nb(pair_key_nb(gus[i], gvs[i]), mode, s1, s2, thr, keys)
    return out
