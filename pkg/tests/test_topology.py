from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jigsaw.randomness import EdgeSampler
from jigsaw.topology import (Topology, TopologyError, coarse_grain_2x2, complete, complete_times_ring,
                             cpuzzle, hamming, hypercube, parse_topology, range_torus, ring, torus)

SMALL = [ring(3), ring(7), torus(3, 2), torus(4, 3), range_torus(7, 2), hypercube(1), hypercube(4),
         hamming(3, 2), hamming(4, 3), complete_times_ring(3, 5), complete(1), complete(5)]

CLOSED_DEGREE = {
    "ring": lambda t: 2,
    "torus": lambda t: 2 * t.d,
    "range": lambda t: (2 * t.r + 1) ** 2 - 1,
    "hypercube": lambda t: t.n,
    "hamming": lambda t: t.d * (t.n - 1),
    "kxring": lambda t: t.n - 1 + 2,
    "complete": lambda t: t.n - 1,
}


def test_neighbor_examples():
    assert ring(4).neighbors(0) == [1, 3]
    t = torus(3, 2)
    assert t.neighbors(0) == sorted(t.index(c) for c in [(1, 0), (2, 0), (0, 1), (0, 2)])
    assert hypercube(3).neighbors(0) == [1, 2, 4]


def test_cpuzzle_examples():
    assert cpuzzle(ring(5), 2, {1, 3}) == 2
    assert cpuzzle(ring(5), 2, {2}) == 0
    t = torus(4, 2)
    S = {t.index((1, 0)), t.index((0, 3)), t.index((2, 2))}
    assert cpuzzle(t, t.index((0, 0)), S) == 2


@pytest.mark.parametrize("t", SMALL, ids=str)
def test_neighbor_lists_are_simple_symmetric_and_regular(t: Topology):
    for v in range(t.N):
        nb = t.neighbors(v)
        assert nb == sorted(set(nb))
        assert v not in nb
        assert len(nb) == t.degree == CLOSED_DEGREE[t.family](t)
        for u in nb:
            assert v in t.neighbors(u)


@pytest.mark.parametrize("t", SMALL, ids=str)
def test_csr_matches_neighbors_and_graph_is_connected(t: Topology):
    indptr, indices = t.csr()
    for v in range(t.N):
        assert indices[indptr[v]:indptr[v + 1]].tolist() == t.neighbors(v)
    assert t.is_connected()


@given(n=st.integers(3, 9), d=st.integers(1, 3), data=st.data())
@settings(max_examples=60, deadline=None)
def test_coordinates_round_trip(n, d, data):
    t = torus(n, d)
    v = data.draw(st.integers(0, t.N - 1))
    assert t.index(t.coords(v)) == v


@pytest.mark.parametrize("bad", [lambda: ring(2), lambda: torus(2, 2), lambda: hamming(2, 2),
                                 lambda: hypercube(0), lambda: hypercube(31), lambda: range_torus(4, 2),
                                 lambda: complete_times_ring(2, 2)])
def test_small_size_guards(bad):
    with pytest.raises(TopologyError):
        bad()


def test_out_of_range_vertex_rejected():
    with pytest.raises(TopologyError):
        ring(5).neighbors(5)


@pytest.mark.parametrize("spec", ["ring:n=1024", "torus:n=400,d=2", "range:n=400,r=3", "hypercube:n=16",
                                  "hamming:n=50,d=3", "kxring:n=64,m=9", "complete:n=100"])
def test_spec_strings_round_trip(spec):
    assert parse_topology(spec).spec == spec


@pytest.mark.parametrize("spec", ["ring", "ring:m=3", "torus:n=4", "blob:n=3", "ring:n=x"])
def test_malformed_spec_strings(spec):
    with pytest.raises(TopologyError):
        parse_topology(spec)


def test_coarse_grain_examples():
    t = torus(6, 2)
    coarse, s = coarse_grain_2x2(t, EdgeSampler.explicit([]))
    assert coarse.n == 3 and s.keys.size == 0
    _, s = coarse_grain_2x2(t, EdgeSampler.explicit([(t.index((0, 0)), t.index((1, 1)))]))
    assert s.keys.size == 0
    _, s = coarse_grain_2x2(t, EdgeSampler.explicit([(t.index((0, 0)), t.index((2, 0)))]))
    assert s.status(coarse.index((0, 0)), coarse.index((1, 0)))
    assert s.keys.size == 1


def test_coarse_grain_matches_block_rule_at_random():
    t = torus(6, 2)
    samp = EdgeSampler(11, 0.05)
    coarse, s = coarse_grain_2x2(t, samp)
    block = lambda v: coarse.index(((v % 6) // 2, (v // 6) // 2))  # noqa: E731
    for a in range(coarse.N):
        for b in range(a + 1, coarse.N):
            want = any(samp.status(u, v) for u in range(t.N) for v in range(t.N)
                       if u < v and {block(u), block(v)} == {a, b})
            assert s.status(a, b) == want


def test_coarse_grain_needs_even_side():
    with pytest.raises(TopologyError):
        coarse_grain_2x2(torus(7, 2), EdgeSampler(0, 0.1))
    with pytest.raises(TopologyError):
        coarse_grain_2x2(ring(8), EdgeSampler(0, 0.1))


def test_induced_path_on_ring():
    indptr, indices, gid = ring(6).induced([3, 1, 2])
    assert gid.tolist() == [1, 2, 3]
    adj = [indices[indptr[i]:indptr[i + 1]].tolist() for i in range(3)]
    assert adj == [[1], [0, 2], [1]]
    assert np.all(np.diff(indptr) >= 0)
