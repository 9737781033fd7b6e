"""Local growth from a centre cell, and the square-completion edge process."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..randomness import EdgeSampler, pair_key_nb, status_nb
from ..topology import Topology
from .dynamics import DynamicsParams, Partition, UsageError


@njit(cache=True)
def _grow_kernel(L, sigma, tau, theta, mode, s1, s2, thr, keys, stop_on_reach):
    N = L * L
    inside = np.zeros(N, dtype=np.bool_)
    cpz = np.zeros(N, dtype=np.int32)
    cpl = np.zeros(N, dtype=np.int32)    # people neighbours found so far in the cluster
    ptr = np.zeros(N, dtype=np.int32)    # members already examined against z
    pending = np.zeros(N, dtype=np.bool_)
    members = np.empty(N, dtype=np.int64)
    Q = 5 * N + 8                        # ring buffer: <= 4 pushes per join plus one per pending cell
    queue = np.empty(Q, dtype=np.int64)
    plist = np.empty(N, dtype=np.int64)
    np_ = 0
    members[0] = 0
    inside[0] = True
    nm = 1
    reached = L == 1
    qh = 0
    qt = 0
    # seed queue with neighbours of the centre
    for z in (1, L):
        if z < N:
            cpz[z] += 1
            queue[qt % Q] = z
            qt += 1
    dx = np.array([1, -1, 0, 0])
    dy = np.array([0, 0, 1, -1])
    while True:
        while qh < qt:
            z = queue[qh % Q]
            qh += 1
            if inside[z]:
                continue
            join = cpz[z] >= theta
            if not join:
                # double connection to a puzzle neighbour in the cluster
                zx = z % L
                zy = z // L
                for d in range(4):
                    x = zx + dx[d]
                    y = zy + dy[d]
                    if 0 <= x < L and 0 <= y < L:
                        u = x + L * y
                        if inside[u] and status_nb(pair_key_nb(z, u), mode, s1, s2, thr, keys):
                            join = True
                            break
            if not join and cpz[z] >= tau:
                while ptr[z] < nm and cpl[z] < sigma:
                    if status_nb(pair_key_nb(z, members[ptr[z]]), mode, s1, s2, thr, keys):
                        cpl[z] += 1
                    ptr[z] += 1
                join = cpl[z] >= sigma
                if not join and not pending[z]:
                    pending[z] = True
                    plist[np_] = z
                    np_ += 1
            if join:
                inside[z] = True
                members[nm] = z
                nm += 1
                zx = z % L
                zy = z // L
                if zx == L - 1 or zy == L - 1:
                    reached = True
                    if stop_on_reach:
                        return reached, members[:nm].copy()
                for d in range(4):
                    x = zx + dx[d]
                    y = zy + dy[d]
                    if 0 <= x < L and 0 <= y < L:
                        u = x + L * y
                        if not inside[u]:
                            cpz[u] += 1
                            queue[qt % Q] = u
                            qt += 1
        # re-check pending cells against members added since their last scan
        progressed = False
        k = 0
        for i in range(np_):
            z = plist[i]
            if inside[z]:
                pending[z] = False
            elif ptr[z] < nm:
                pending[z] = False
                queue[qt % Q] = z
                qt += 1
                progressed = True
            else:
                plist[k] = z
                k += 1
        np_ = k
        if not progressed:
            break
    return reached, members[:nm].copy()


def local_grow(params: DynamicsParams, p: float, seed: int, L: int,
               stop_on_reach: bool = False) -> tuple[bool, np.ndarray]:
    """Grow a cluster from the corner cell of the box ``[0, L)^2``.

    A cell joins when it is doubly connected to the cluster, has at least
    ``theta`` puzzle neighbours in it, or has ``tau`` puzzle and ``sigma``
    people neighbours in it.  ``reached`` means the cluster touches the far
    sides ``x = L-1`` or ``y = L-1``; the box stands in for the quadrant.
    Cell ``(x, y)`` has index ``x + L*y`` (also its people-graph label).
    """
    if L < 2:
        raise UsageError("L must be >= 2")
    if params.rule != "threshold":
        raise UsageError("local growth uses the threshold rule")
    sampler = EdgeSampler(seed, p)
    reached, members = _grow_kernel(L, params.sigma, params.tau, params.theta_k,
                                    *sampler.kernel_args(), stop_on_reach)
    return bool(reached), np.sort(members)


# ------------------------------------------------------------ square completion
@dataclass(frozen=True)
class EdgeSet:
    """Occupied puzzle edges of a 2D torus.

    ``h[x, y]`` is the edge ``(x, y)-(x+1, y)``, ``v[x, y]`` is ``(x, y)-(x, y+1)``
    (coordinates mod n).
    """

    n: int
    h: np.ndarray
    v: np.ndarray

    def edges(self) -> set[tuple[int, int]]:
        n = self.n
        out = set()
        for x, y in zip(*np.nonzero(self.h)):
            a, b = x + n * y, (x + 1) % n + n * y
            out.add((min(a, b), max(a, b)))
        for x, y in zip(*np.nonzero(self.v)):
            a, b = x + n * y, x + n * ((y + 1) % n)
            out.add((min(a, b), max(a, b)))
        return out

    def components(self) -> Partition:
        """Clusters spanned by the occupied edges; uncovered vertices stay singletons."""
        n = self.n
        parent = np.arange(n * n)

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for a, b in self.edges():
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        return Partition(np.array([find(a) for a in range(n * n)]))


def square_completion_run(topology: Topology, sampler: EdgeSampler) -> EdgeSet:
    """Edge growth on the torus: start from doubly connected puzzle edges and,
    whenever two occupied edges meet at a right angle inside a unit square,
    occupy the other two sides of that square.  Runs to a fixed point.
    """
    if topology.family != "torus" or topology.d != 2:
        raise UsageError("square completion needs a 2D torus")
    n = topology.n
    x, y = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    here = (x + n * y).ravel()
    right = ((x + 1) % n + n * y).ravel()
    up = (x + n * ((y + 1) % n)).ravel()
    h = sampler.status_many(here, right).reshape(n, n)
    v = sampler.status_many(here, up).reshape(n, n)
    while True:
        # square with lower-left corner (x, y): sides h[x,y], h[x,y+1], v[x,y], v[x+1,y]
        bottom, top = h, np.roll(h, -1, axis=1)
        left, rightside = v, np.roll(v, -1, axis=0)
        fill = (bottom & left) | (bottom & rightside) | (top & left) | (top & rightside)
        nh = h | fill | np.roll(fill, 1, axis=1)
        nv = v | fill | np.roll(fill, 1, axis=0)
        if np.array_equal(nh, h) and np.array_equal(nv, v):
            return EdgeSet(n, h, v)
        h, v = nh, nv
