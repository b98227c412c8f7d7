"""H-invariant orders on vertices and edges, fundamental edges, canonical translations."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property

from .geometry import Ball, induced_edges
from .groups import GroupElement, GroupModel


class OrderingInconsistencyError(RuntimeError):
    pass


@dataclass(frozen=True)
class FundamentalEntry:
    coset: int  # 1-based
    generator: GroupElement
    edge: tuple[GroupElement, GroupElement]


@dataclass
class FundamentalEdgeSet:
    entries: list[FundamentalEntry]
    orbit_map: list[int]

    def __len__(self) -> int:
        return len(self.entries)


def _positive(coords) -> bool:
    for c in coords:
        if c:
            return c > 0
    return False


@dataclass(frozen=True)
class EdgeOrderContext:
    """Order data for one group model.

    g < g' iff g's coset index is smaller, or the indices agree and
    h^-1 h' lies in the positive cone (first nonzero Mal'cev coordinate > 0).
    """

    model: GroupModel
    tie_break: str = "entry-index-then-malcev"

    def vertex_less(self, g: GroupElement, g2: GroupElement) -> bool:
        m = self.model
        h, i = m.coset_decompose(g)
        h2, j = m.coset_decompose(g2)
        if i != j:
            return i < j
        return _positive(m.malcev_coordinates(m.multiply(m.inverse(h), h2)))

    def vertex_key(self, g: GroupElement):
        """Sort key realising ``vertex_less`` for the built-in Mal'cev bases.

        For these bases the positive-cone order coincides with lexicographic
        order on coordinates; tests check the equivalence.
        """
        h, i = self.model.coset_decompose(g)
        return (i, self.model.malcev_coordinates(h))

    def edge_ends(self, e) -> tuple[GroupElement, GroupElement]:
        a, b = e
        return (a, b) if self.vertex_less(a, b) else (b, a)

    def edge_key(self, e):
        a, b = e
        ka, kb = self.vertex_key(a), self.vertex_key(b)
        return (ka, kb) if ka < kb else (kb, ka)

    def edge_less(self, e, f) -> bool:
        e0, e1 = self.edge_ends(e)
        f0, f1 = self.edge_ends(f)
        if e0 != f0:
            return self.vertex_less(e0, f0)
        if e1 != f1:
            return self.vertex_less(e1, f1)
        return False

    def edge_leq(self, e, f) -> bool:
        return not self.edge_less(f, e)

    def translate_edge(self, h: GroupElement, e):
        mul = self.model.multiply
        return (mul(h, e[0]), mul(h, e[1]))

    # fundamental edges ----------------------------------------------------
    @cached_property
    def fundamental(self) -> FundamentalEdgeSet:
        return fundamental_set(self, verify_radius=None)

    def canonicalize(self, e) -> tuple[GroupElement, int]:
        """``(h, k)`` with h in H translating ``e`` onto entry k's edge.

        Of the two preimages of ``e`` the one with the smaller entry index
        wins, then the smaller Mal'cev vector of ``h``. Both preimages of an
        edge are shared by its whole H-orbit, so the chosen entry is an orbit
        invariant.
        """
        m = self.model
        lookup = self._entry_lookup
        best = None
        for a, b in (e, (e[1], e[0])):
            h, i = m.coset_decompose(a)
            s = m.multiply(m.inverse(a), b)
            k = lookup[(i, s)]
            t = m.inverse(h)
            cand = (k, m.malcev_coordinates(t), t)
            if best is None or cand[:2] < best[:2]:
                best = cand
        return best[2], best[0]

    @cached_property
    def _entry_lookup(self) -> dict:
        return {(ent.coset, ent.generator): k for k, ent in enumerate(self.fundamental.entries)}


def fundamental_set(ctx: EdgeOrderContext, verify_radius: int | None = 6) -> FundamentalEdgeSet:
    """The edges ``{x_i, x_i s}`` for every coset representative and generator."""
    m = ctx.model
    entries = []
    for i, x in enumerate(m.coset_reps, start=1):
        for s in m.generators:
            entries.append(FundamentalEntry(i, s, (x, m.multiply(x, s))))
    # two entries share an orbit iff they are the two preimages of one edge
    orbit_map = []
    for i, x in enumerate(m.coset_reps, start=1):
        for s in m.generators:
            y = m.multiply(x, s)
            _, j = m.coset_decompose(y)
            a = (i, s)
            b = (j, m.inverse(s))
            rep = min(a, b, key=lambda t: _entry_position(m, t))
            orbit_map.append(_entry_position(m, rep))
    fs = FundamentalEdgeSet(entries, orbit_map)
    if verify_radius is not None:
        from .geometry import ball

        counts = preimage_counts(m, ball(m, verify_radius))
        bad = [e for e, c in counts.items() if c != 2]
        if bad:
            raise OrderingInconsistencyError(f"edge {bad[0]} has {counts[bad[0]]} preimages")
    return fs


def _entry_position(m: GroupModel, t) -> int:
    i, s = t
    return (i - 1) * len(m.generators) + m.generators.index(s)


def preimage_counts(model: GroupModel, A: Ball) -> dict:
    """Number of (h, i, s) with phi(h, x_i, s) equal to each edge of E(A)."""
    members = A.index
    counts: dict = {}
    for a in A.vertices:
        h, i = model.coset_decompose(a)
        # phi(h, x_i, s) = {h x_i, h x_i s} = {a, a s}
        for s in model.generators:
            b = model.multiply(a, s)
            if b not in members:
                continue
            key = (a, b) if (a.coords, a.finite_part) < (b.coords, b.finite_part) else (b, a)
            counts[key] = counts.get(key, 0) + 1
    return counts


def sort_edges(ctx: EdgeOrderContext, edges) -> list:
    return sorted(edges, key=ctx.edge_key)


def connected_prefix_order(model: GroupModel, B: Ball, ctx: EdgeOrderContext | None = None) -> list[int]:
    """Edge indices of E(B) such that every prefix spans a connected subgraph.

    Greedy search from the center: at each step take the smallest edge (in
    the H-invariant order) touching the vertices reached so far.
    """
    ctx = ctx or EdgeOrderContext(model)
    U = B.edges if isinstance(B, Ball) else induced_edges(model, B)
    keys = [ctx.edge_key(U.endpoints(k)) for k in range(len(U))]
    start = U.index[B.center] if isinstance(B, Ball) else 0
    reached = {start}
    used = [False] * len(U)
    heap = [(keys[k], k) for k in U.incident[start]]
    heapq.heapify(heap)
    order = []
    while heap:
        _, k = heapq.heappop(heap)
        if used[k]:
            continue
        used[k] = True
        order.append(k)
        for w in U.edges[k]:
            if w not in reached:
                reached.add(w)
                for k2 in U.incident[w]:
                    if not used[k2]:
                        heapq.heappush(heap, (keys[k2], k2))
    return order
