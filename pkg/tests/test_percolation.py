from collections import deque
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perctopo.geometry import ball
from perctopo.groups import DomainError, GroupElement
from perctopo.percolation import (ParameterError, UnionFind, batch_labels, batch_states,
                                  classify_edge_event, clusters, largest_cluster,
                                  resample_edge, sample_configuration, tau_lower_bound,
                                  word_length)

from .conftest import ALL_MODELS


def _bfs_components(n, edges, mask):
    adj = [[] for _ in range(n)]
    for (u, v), o in zip(edges, mask):
        if o:
            adj[u].append(v)
            adj[v].append(u)
    seen = [False] * n
    count = 0
    for s in range(n):
        if seen[s]:
            continue
        count += 1
        seen[s] = True
        q = deque([s])
        while q:
            x = q.popleft()
            for y in adj[x]:
                if not seen[y]:
                    seen[y] = True
                    q.append(y)
    return count


def test_same_seed_same_states(z2):
    U = ball(z2, 5).edges
    a = sample_configuration(0.5, 17).states(U)
    b = sample_configuration(0.5, 17).states(U)
    c = sample_configuration(0.5, 18).states(U)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_states_consistent_across_windows(z2):
    omega = sample_configuration(0.4, 3)
    small, big = ball(z2, 3).edges, ball(z2, 6).edges
    s_small, s_big = omega.states(small), omega.states(big)
    for k in range(len(small)):
        assert s_small[k] == s_big[big.edge_id(small.endpoints(k))]
        assert s_small[k] == omega.state(small.endpoints(k))


@pytest.mark.parametrize("p", [0, 1, -0.1, 1.5])
def test_invalid_p(p):
    with pytest.raises(ParameterError):
        sample_configuration(p, 0)


def test_tiny_p_mostly_closed(z2):
    U = ball(z2, 20).edges
    assert not sample_configuration(2.0**-30, 1).states(U).any()


def test_open_fraction_binomial(z2):
    U = ball(z2, 30).edges
    n = len(U)
    for p in (0.2, 0.5, 0.8):
        k = int(sample_configuration(p, 99).states(U).sum())
        assert abs(k - n * p) <= 3 * np.sqrt(n * p * (1 - p))


def test_resample_edge(z2):
    U = ball(z2, 2).edges
    omega = sample_configuration(0.5, 4, universe=U)
    e = U.endpoints(0)
    other = omega.states(U)[1:]
    opens = 0
    for aux in range(2000):
        w = resample_edge(omega, e, aux)
        assert np.array_equal(w.states(U)[1:], other)
        opens += w.state(e)
    assert abs(opens - 1000) <= 3 * np.sqrt(500)
    assert resample_edge(omega, e, 5).state(e) == resample_edge(omega, e, 5).state(e)


def test_resample_edge_outside_universe(z2):
    U = ball(z2, 2).edges
    omega = sample_configuration(0.5, 4, universe=U)
    with pytest.raises(DomainError):
        resample_edge(omega, (GroupElement((10, 0)), GroupElement((11, 0))), 1)


def test_with_state_forces_only_that_edge(z2):
    U = ball(z2, 3).edges
    omega = sample_configuration(0.5, 8)
    base = omega.states(U)
    for k in (0, 7, 20):
        e = U.endpoints(k)
        for bit in (True, False):
            s = omega.with_state(e, bit).states(U)
            assert s[k] == bit
            assert np.array_equal(np.delete(s, k), np.delete(base, k))


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.name)
def test_translation_moves_states(model):
    omega = sample_configuration(0.5, 12)
    u = model.generators[0]
    moved = omega.translated(model, u)
    U = ball(model, 2).edges
    for e in [U.endpoints(k) for k in range(min(10, len(U)))]:
        ue = (model.multiply(u, e[0]), model.multiply(u, e[1]))
        assert moved.state(ue) == omega.state(e)


def test_union_find():
    uf = UnionFind(5)
    assert uf.union(0, 1) and uf.union(3, 4)
    assert not uf.union(1, 0)
    assert uf.find(0) == uf.find(1) != uf.find(3)


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.name)
def test_cluster_count_oracle(model):
    A = ball(model, 4)
    U = A.edges
    for seed in range(20):
        omega = sample_configuration(0.5, seed)
        part = clusters(omega, A)
        mask = omega.states(U)
        assert part.count_K == _bfs_components(len(A), U.edges, mask)
        assert part.inverse_size_sum() == part.count_K
        assert sum(part.sizes) == len(A)
        assert largest_cluster(part) == max(part.sizes)


def test_extreme_cluster_counts(z2):
    A = ball(z2, 3)
    U = A.edges
    part = clusters(sample_configuration(2.0**-40, 0), A)
    assert part.count_K == len(A)
    part = clusters(sample_configuration(1 - 2.0**-40, 0), A)
    assert part.count_K == 1
    labels, counts = batch_labels(U, np.ones((2, len(U)), dtype=bool))
    assert counts.tolist() == [1, 1]


def test_batch_labels_agree(heis):
    A = ball(heis, 3)
    U = A.edges
    seeds = list(range(30))
    S = batch_states(0.45, seeds, U)
    labels, counts = batch_labels(U, S)
    for i, s in enumerate(seeds):
        part = clusters(sample_configuration(0.45, s), A)
        assert counts[i] == part.count_K
        # same partition up to relabelling
        pairs = set(zip(labels[i].tolist(), part.component_id))
        assert len(pairs) == part.count_K


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.05, 0.9))
def test_cluster_count_monotone_in_p(seed, p):
    from perctopo.groups import GroupModel

    z2 = GroupModel.Zd(2)
    A = ball(z2, 3)
    lo = clusters(sample_configuration(p, seed), A).count_K
    hi = clusters(sample_configuration(min(p + 0.05, 0.99), seed), A).count_K
    assert hi <= lo


def test_word_length_matches_ball(heis, zc2, z2):
    for model in (heis, zc2, z2):
        B = ball(model, 4)
        for g, d in zip(B.vertices, B.distances):
            assert word_length(model, g) == d


def _edge(*a):
    return tuple(GroupElement(x) for x in a)


def _closed_around(model, r):
    omega = sample_configuration(0.5, 0)
    U = ball(model, r).edges
    for k in range(len(U)):
        omega = omega.with_state(U.endpoints(k), False)
    return omega


def test_event_disjoint_both_reach(z2):
    e = _edge((0, 0), (1, 0))
    omega = _closed_around(z2, 3)
    for f in [_edge((0, 0), (-1, 0)), _edge((-1, 0), (-2, 0)),
              _edge((1, 0), (1, 1)), _edge((1, 1), (0, 1))]:
        omega = omega.with_state(f, True)
    ev = classify_edge_event(omega, e, 2, z2)
    assert ev.value == "D"
    assert ev.x1 == GroupElement((0, 0))


def test_event_z1_never_disjoint(z1):
    # the far endpoint cannot reach distance m inside the ball around the near one
    e = _edge((0,), (1,))
    omega = sample_configuration(0.5, 0)
    for k in range(-4, 6):
        omega = omega.with_state(_edge((k,), (k + 1,)), True)
    assert classify_edge_event(omega, e, 2, z1).value == "U"


def test_event_disjoint_unreached(z1):
    e = _edge((0,), (1,))
    omega = sample_configuration(0.5, 0)
    for k in range(-4, 6):
        omega = omega.with_state(_edge((k,), (k + 1,)), False)
    assert classify_edge_event(omega, e, 2, z1).value == "U"


def test_event_cycle_joins(z2):
    # a closed square around e makes the endpoints joined without e
    e = _edge((0, 0), (1, 0))
    omega = sample_configuration(0.5, 0)
    for f in [_edge((0, 0), (0, 1)), _edge((0, 1), (1, 1)), _edge((1, 1), (1, 0))]:
        omega = omega.with_state(f, True)
    ev = classify_edge_event(omega, e, 2, z2)
    assert ev.value == "J"


def test_event_rejects_m0(z2):
    with pytest.raises(ValueError):
        classify_edge_event(sample_configuration(0.5, 0), _edge((0, 0), (1, 0)), 0, z2)


def test_tau_exact_z2(z2):
    rec = tau_lower_bound(z2, Fraction(1, 2))
    assert rec.tau == Fraction(225, 16384)
    assert rec.c_min == Fraction(15, 16)


def test_variance_of_K_exceeds_tau(z2):
    A = ball(z2, 6)
    U = A.edges
    _, counts = batch_labels(U, batch_states(0.5, range(3000), U))
    tau = float(tau_lower_bound(z2, Fraction(1, 2)).tau)
    assert counts.var(ddof=1) / len(A) >= tau
