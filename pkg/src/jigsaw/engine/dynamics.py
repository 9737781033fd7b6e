from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from ..randomness import EdgeSampler, ExamLedger, ExamStats, examine, pair_key
from ..topology import Topology
from . import kernel as K


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class DynamicsParams:
    """Thresholds (sigma, tau, theta) and merge rule.  ``theta=math.inf`` disables J2."""

    sigma: int = 1
    tau: int = 1
    theta: float = math.inf
    rule: str = "threshold"

    def __post_init__(self):
        if self.sigma < 1 or self.tau < 1:
            raise UsageError("sigma and tau must be >= 1")
        if self.rule not in ("threshold", "basic"):
            raise UsageError(f"unknown rule {self.rule!r}")
        if self.theta != math.inf:
            if int(self.theta) != self.theta:
                raise UsageError("theta must be an integer or inf")
            if self.theta < self.tau:
                raise UsageError("theta must be >= tau")
            object.__setattr__(self, "theta", int(self.theta))

    @property
    def theta_k(self) -> int:
        return K.THETA_INF if self.theta == math.inf else int(self.theta)

    @property
    def rule_k(self) -> int:
        return K.RULE_BASIC if self.rule == "basic" else K.RULE_THRESHOLD

    def kernel_args(self):
        return self.sigma, self.tau, self.theta_k, self.rule_k

    @property
    def theta_text(self) -> str:
        return "inf" if self.theta == math.inf else str(self.theta)


AE = DynamicsParams(1, 1, math.inf, "threshold")


class Partition:
    """Immutable snapshot of a partition of ``range(N)``.

    ``labels[v]`` is the smallest member of the cluster containing ``v``.
    """

    __slots__ = ("labels", "generation")

    def __init__(self, labels, generation: int = 0):
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size:
            _, inv = np.unique(labels, return_inverse=True)
            first = np.full(inv.max() + 1, labels.size, dtype=np.int64)
            np.minimum.at(first, inv, np.arange(labels.size))
            labels = first[inv]
        self.labels = labels
        self.labels.setflags(write=False)
        self.generation = generation

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(np.arange(n))

    @classmethod
    def from_clusters(cls, clusters: Iterable[Iterable[int]], n: int) -> "Partition":
        labels = np.full(n, -1, dtype=np.int64)
        for i, W in enumerate(clusters):
            idx = np.fromiter(W, dtype=np.int64)
            if np.any(labels[idx] >= 0):
                raise UsageError("clusters overlap")
            labels[idx] = i
        if np.any(labels < 0):
            raise UsageError("clusters do not cover all vertices")
        return cls(labels)

    @property
    def N(self) -> int:
        return self.labels.size

    @property
    def n_clusters(self) -> int:
        return int(np.count_nonzero(self.labels == np.arange(self.N)))

    def sizes(self) -> np.ndarray:
        """Cluster size of each vertex's cluster, per vertex."""
        return np.bincount(self.labels, minlength=self.N)[self.labels]

    def clusters(self) -> list[frozenset[int]]:
        order = np.argsort(self.labels, kind="stable")
        cuts = np.flatnonzero(np.diff(self.labels[order])) + 1
        return [frozenset(c.tolist()) for c in np.split(order, cuts)] if self.N else []

    def cluster_of(self, v: int) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.labels == self.labels[v]).tolist())

    def refines(self, other: "Partition") -> bool:
        """Every cluster of ``self`` lies inside a cluster of ``other``."""
        return self.meet(other) == self

    def meet(self, other: "Partition") -> "Partition":
        """Common refinement: all nonempty intersections."""
        key = self.labels * (self.N + 1) + other.labels
        return Partition(key)

    def __eq__(self, other):
        return isinstance(other, Partition) and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash(self.labels.tobytes())

    def __repr__(self):
        return f"Partition(N={self.N}, clusters={self.n_clusters})"


@dataclass
class RunResult:
    final: Partition
    t_final: int
    solved: bool
    merge_trace: np.ndarray
    max_size_trace: np.ndarray
    exam_stats: ExamStats
    exam_counts: np.ndarray | None = field(default=None, repr=False)


# -------------------------------------------------------------- process
_POLICIES = {"sync": K.POLICY_SYNC, "one_edge": K.POLICY_ONE_EDGE, "random_subset": K.POLICY_RANDOM_SUBSET}


def _local_graph(topology: Topology, vertices):
    if vertices is None:
        indptr, indices = topology.csr()
        return indptr, indices, np.arange(topology.N, dtype=np.int64)
    return topology.induced(vertices)


class JigsawProcess:
    """Stepwise driver around the numba kernel.

    ``vertices`` restricts the run to the induced puzzle and people graphs on
    that set (local vertex ``i`` is global vertex ``gid[i]``).
    """

    def __init__(self, topology: Topology, params: DynamicsParams, sampler: EdgeSampler,
                 initial: Partition | np.ndarray | None = None, policy: str = "sync",
                 policy_seed: int = 0, track: bool = True, vertices=None):
        if policy not in _POLICIES:
            raise UsageError(f"unknown policy {policy!r}")
        self.topology, self.params, self.sampler = topology, params, sampler
        self.indptr, self.indices, self.gid = _local_graph(topology, vertices)
        n = self.gid.size
        if n == 0:
            raise UsageError("empty vertex set")
        if initial is None:
            labels = np.arange(n, dtype=np.int64)
        else:
            lab = initial.labels if isinstance(initial, Partition) else np.asarray(initial)
            if lab.size != n:
                raise UsageError("initial partition has wrong size")
            labels = np.unique(lab, return_inverse=True)[1].astype(np.int64)
        self.policy = _POLICIES[policy]
        self.track = track
        self.st, self.meta = K.init_state(labels, n)
        K.build_boundary(self.st, self.indptr)
        self.meta[K.M_RNG] = np.int64(np.uint64(policy_seed & ((1 << 64) - 1)).view(np.int64))
        self.cand = np.empty(2 * self.indices.size + 8, dtype=np.int64)
        self.table = np.zeros(_table_cap(n) if track else 1, dtype=np.uint64)
        self.counts = np.zeros(n, dtype=np.int32)
        self.merges = np.zeros(max(n, 1), dtype=np.int32)
        self.maxsizes = np.zeros(max(n, 1), dtype=np.int32)

    def _advance(self, max_steps: int) -> None:
        sk = self.sampler.kernel_args()
        self.table = K.advance(self.st, self.meta, self.indptr, self.indices, self.gid, self.cand,
                               *self.params.kernel_args(), self.policy, *sk, self.table, self.counts,
                               self.track, self.merges, self.maxsizes, max_steps)

    @property
    def t(self) -> int:
        return int(self.meta[K.M_T])

    @property
    def done(self) -> bool:
        return bool(self.meta[K.M_DONE])

    @property
    def labels(self) -> np.ndarray:
        return self.st[K.LABEL].copy()

    @property
    def partition(self) -> Partition:
        return Partition(self.st[K.LABEL], generation=self.t)

    def step(self) -> bool:
        """Advance one step; ``False`` once the partition is inert."""
        t0 = self.t
        self._advance(1)
        return self.t > t0

    def run(self, on_step: Callable[["JigsawProcess"], None] | None = None) -> RunResult:
        if on_step is None:
            self._advance(-1)
        else:
            while self.step():
                on_step(self)
        return self.result()

    def result(self) -> RunResult:
        t = self.t
        counts = self.counts.copy()
        stats = ExamStats(int(self.meta[K.M_LEDGER]), int(counts.max()) if counts.size else 0)
        return RunResult(
            final=self.partition,
            t_final=t,
            solved=int(self.meta[K.M_NCLUST]) == 1,
            merge_trace=self.merges[:t].copy(),
            max_size_trace=self.maxsizes[:t].copy(),
            exam_stats=stats,
            exam_counts=counts if self.track else None,
        )


def _table_cap(n: int) -> int:
    cap = 1024
    while cap < 4 * n:
        cap *= 2
    return cap


# ------------------------------------------------------------------ runs
def run(topology: Topology, params: DynamicsParams, sampler: EdgeSampler, initial=None,
        track: bool = True, vertices=None) -> RunResult:
    """Synchronous dynamics from singletons (or ``initial``) to the final inert partition."""
    if initial is None and vertices is None:
        indptr, indices = topology.csr()
        gid = np.arange(topology.N, dtype=np.int64)
        labels, t, ncl, merges, maxs, ledger, counts = K.run_kernel(
            gid, indptr, indices, gid, *params.kernel_args(), K.POLICY_SYNC, 0,
            *sampler.kernel_args(), track, _table_cap(topology.N))
        return RunResult(
            final=Partition(labels, generation=int(t)),
            t_final=int(t),
            solved=int(ncl) == 1,
            merge_trace=merges,
            max_size_trace=maxs,
            exam_stats=ExamStats(int(ledger), int(counts.max()) if counts.size else 0),
            exam_counts=counts if track else None,
        )
    return JigsawProcess(topology, params, sampler, initial=initial, track=track, vertices=vertices).run()


def run_slowed(topology: Topology, params: DynamicsParams, sampler: EdgeSampler,
               policy: str = "one_edge", seed: int = 0, initial=None) -> RunResult:
    """Slowed-down dynamics: each step merges along a nonempty subset of cluster-graph edges.

    ``one_edge`` merges exactly one uniformly chosen pair; ``random_subset``
    keeps each edge with probability 1/2 (at least one).
    """
    if policy not in ("one_edge", "random_subset"):
        raise UsageError(f"unknown slowed policy {policy!r}")
    return JigsawProcess(topology, params, sampler, initial=initial, policy=policy,
                         policy_seed=seed).run()


def step(process: JigsawProcess) -> tuple[Partition, bool]:
    merged = process.step()
    return process.partition, merged


def solve_explicit_batch(topology: Topology, params: DynamicsParams, pairs, masks,
                         vertices=None) -> np.ndarray:
    """Solve indicators for many explicit people graphs.

    ``pairs`` lists candidate edges (global ids); bit ``i`` of each mask
    switches ``pairs[i]`` on.  Used by exhaustive enumeration.
    """
    indptr, indices, gid = _local_graph(topology, vertices)
    keys = np.array([pair_key(int(u), int(v)) for u, v in pairs], dtype=np.uint64)
    order = np.argsort(keys)
    if len(pairs) > 62:
        raise UsageError("at most 62 candidate pairs")
    # remap mask bits to sorted key order
    masks = np.asarray(masks, dtype=np.int64)
    remapped = np.zeros_like(masks)
    for new_bit, old_bit in enumerate(order):
        remapped |= ((masks >> old_bit) & 1) << new_bit
    return K.solve_batch_explicit(indptr, indices, gid, keys[order], remapped, *params.kernel_args())


# ------------------------------------------------------------ predicates
def is_internally_solved(topology: Topology, params: DynamicsParams, sampler: EdgeSampler, A) -> bool:
    """Dynamics on the puzzle and people graphs induced by ``A`` solves ``A``."""
    A = sorted(set(int(a) for a in A))
    if not A:
        raise UsageError("A must be nonempty")
    if len(A) == 1:
        return True
    return run(topology, params, sampler, vertices=A, track=False).solved


def is_unstoppable(topology: Topology, params: DynamicsParams, sampler: EdgeSampler, A) -> bool:
    """Every vertex outside ``A`` has at least ``sigma`` people neighbours in ``A``."""
    A = np.unique(np.fromiter((int(a) for a in A), dtype=np.int64))
    outside = np.setdiff1d(np.arange(topology.N), A)
    if outside.size == 0:
        return True
    if A.size < params.sigma:
        return False
    for v in outside:
        if np.count_nonzero(sampler.status_many(np.full(A.size, v), A)) < params.sigma:
            return False
    return True


def _check_connected(topology: Topology, W: frozenset[int]) -> None:
    start = next(iter(W))
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for u in topology.neighbors(v):
            if u in W and u not in seen:
                seen.add(u)
                stack.append(u)
    if len(seen) != len(W):
        raise UsageError("cluster is not puzzle-connected")


def is_inert(topology: Topology, params: DynamicsParams, sampler: EdgeSampler, P: Partition,
             check_connected: bool = True) -> bool:
    """No merge condition fires for ``P``.

    Threshold rule: for every cluster ``W`` and every ``v`` on its outer
    boundary, ``v`` is not doubly connected into ``W``, ``cpuzzle(v, W) < theta``
    and not (``cpeople(v, W) >= sigma`` and ``cpuzzle(v, W) >= tau``).
    Basic rule: no people edge joins two puzzle-adjacent clusters.
    """
    labels = P.labels
    clusters = P.clusters()
    if check_connected:
        for W in clusters:
            _check_connected(topology, W)
    for W in clusters:
        lab = labels[next(iter(W))]
        boundary = {u for w in W for u in topology.neighbors(w) if labels[u] != lab}
        Wl = np.fromiter(W, dtype=np.int64)
        for v in boundary:
            inside = [u for u in topology.neighbors(v) if labels[u] == lab]
            cpz = len(inside)
            if params.rule == "basic":
                if labels[v] != lab and _any_people(sampler, v, Wl, labels, lab):
                    return False
                continue
            if any(sampler.status(v, u) for u in inside):
                return False
            if cpz >= params.theta:
                return False
            if cpz >= params.tau and np.count_nonzero(sampler.status_many(np.full(Wl.size, v), Wl)) >= params.sigma:
                return False
    return True


def _any_people(sampler, v, Wl, labels, lab):
    # J5 for the pair (cluster of v, W): any people edge between the two clusters
    other = np.flatnonzero(labels == labels[v])
    us = np.repeat(other, Wl.size)
    ws = np.tile(Wl, other.size)
    return bool(np.any(sampler.status_many(us, ws)))


def cluster_edge_exists(topology: Topology, params: DynamicsParams, sampler: EdgeSampler,
                        Wi, Wj, ledger: ExamLedger | None = None) -> bool:
    """Edge of the cluster graph between disjoint clusters ``Wi`` and ``Wj``.

    Only vertices incident to puzzle edges crossing between the two clusters
    are inspected.  Threshold rule checks J1-J3 in both orientations; basic
    rule needs a crossing people edge and a crossing puzzle edge.
    """
    Wi, Wj = frozenset(Wi), frozenset(Wj)
    if not Wi or not Wj or Wi & Wj:
        raise UsageError("clusters must be nonempty and disjoint")
    ledger = ledger if ledger is not None else ExamLedger(topology.N)
    crossing = [(a, b) for a in sorted(Wi) for b in topology.neighbors(a) if b in Wj]
    if not crossing:
        return False
    if params.rule == "basic":
        return any(examine(sampler, ledger, a, b) for a in sorted(Wi) for b in sorted(Wj))
    for src, dst, cand in ((Wi, Wj, sorted({a for a, _ in crossing})),
                           (Wj, Wi, sorted({b for _, b in crossing}))):
        dst_sorted = sorted(dst)
        for v in cand:
            inside = [u for u in topology.neighbors(v) if u in dst]
            if len(inside) >= params.theta:
                return True
            if any(examine(sampler, ledger, v, u) for u in inside):
                return True
            if len(inside) >= params.tau:
                cnt = 0
                for w in dst_sorted:
                    if examine(sampler, ledger, v, w):
                        cnt += 1
                        if cnt >= params.sigma:
                            return True
    return False
