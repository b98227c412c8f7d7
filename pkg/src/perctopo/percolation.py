"""Seeded Bernoulli bond configurations, clusters and single-edge events."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import rng
from .geometry import Ball, EdgeUniverse, SizeLimitError, ball
from .groups import DomainError, GroupElement, GroupModel


class ParameterError(ValueError):
    pass


def check_p(p) -> float:
    pf = float(p)
    if not 0.0 < pf < 1.0:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    return pf


@dataclass(frozen=True)
class Configuration:
    """Edge states as a pure function of ``(seed, edge key, overrides)``.

    ``shift`` translates the whole configuration: the state of ``e`` is the
    base state of ``shift^-1 e``. Overrides are keyed by absolute edge hash.
    """

    p: float
    seed: int
    universe: EdgeUniverse | None = field(default=None, compare=False, repr=False)
    overrides: tuple[tuple[int, bool], ...] = ()
    shift: GroupElement | None = None
    model: GroupModel | None = field(default=None, compare=False, repr=False)

    @property
    def override_map(self) -> dict[int, bool]:
        return dict(self.overrides)

    def _base_key(self, a: GroupElement, b: GroupElement) -> int:
        if self.shift is not None:
            inv = self.model.inverse(self.shift)
            a, b = self.model.multiply(inv, a), self.model.multiply(inv, b)
        return rng.edge_key_hash(a, b)

    def state(self, e) -> bool:
        a, b = e
        key = rng.edge_key_hash(a, b)
        ov = self.override_map
        if key in ov:
            return ov[key]
        return rng.uniform(self.seed, self._base_key(a, b)) < self.p

    def states(self, universe: EdgeUniverse | None = None) -> np.ndarray:
        """Boolean open/closed vector over the edges of ``universe``."""
        U = universe if universe is not None else self.universe
        if self.shift is None:
            keys = U.edge_key_hashes()
        else:
            keys = np.array(
                [self._base_key(*U.endpoints(k)) for k in range(len(U))], dtype=np.uint64
            )
        out = rng.uniforms(self.seed, keys) < self.p
        if self.overrides:
            ov = self.override_map
            abs_keys = U.edge_key_hashes()
            for k, key in enumerate(abs_keys.tolist()):
                if key in ov:
                    out[k] = ov[key]
        return out

    def with_state(self, e, bit: bool) -> "Configuration":
        """Deterministic flip variant: force the state of ``e``."""
        key = rng.edge_key_hash(*e)
        ov = self.override_map
        ov[key] = bool(bit)
        return Configuration(self.p, self.seed, self.universe, tuple(sorted(ov.items())),
                             self.shift, self.model)

    def translated(self, model: GroupModel, u: GroupElement) -> "Configuration":
        """The configuration ``omega o phi_{u^-1}``: edge ``u e`` inherits the state of ``e``."""
        if self.overrides:
            raise NotImplementedError("translate before applying overrides")
        shift = u if self.shift is None else model.multiply(u, self.shift)
        return Configuration(self.p, self.seed, None, (), shift, model)


def sample_configuration(p, seed: int, universe: EdgeUniverse | None = None,
                         model: GroupModel | None = None) -> Configuration:
    """Each edge open independently with probability ``p``, keyed by (seed, edge)."""
    return Configuration(check_p(p), int(seed), universe, (), None, model)


def resample_edge(omega: Configuration, e, aux: int) -> Configuration:
    """omega^e: the state at ``e`` replaced by an independent draw keyed by ``(aux, e)``."""
    if omega.universe is not None:
        try:
            omega.universe.edge_id(e)
        except KeyError:
            raise DomainError(f"edge {e} not in universe") from None
    key = rng.edge_key_hash(*e)
    bit = rng.uniform(aux, rng.mix(0xA0C5, key)) < omega.p
    return omega.with_state(e, bit)


# -- clusters -------------------------------------------------------------------


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


@dataclass
class ClusterPartition:
    component_id: list[int]
    sizes: list[int]

    @property
    def count_K(self) -> int:
        return len(self.sizes)

    def inverse_size_sum(self) -> Fraction:
        """sum over vertices of 1/|C(x)|, which equals K exactly."""
        return sum((Fraction(1, self.sizes[c]) for c in self.component_id), Fraction(0))

    def members(self, c: int) -> list[int]:
        return [v for v, k in enumerate(self.component_id) if k == c]


def partition_from_open(n_vertices: int, edges, open_mask) -> ClusterPartition:
    uf = UnionFind(n_vertices)
    for (u, v), o in zip(edges, open_mask):
        if o:
            uf.union(u, v)
    relabel: dict[int, int] = {}
    comp = []
    sizes: list[int] = []
    for v in range(n_vertices):
        r = uf.find(v)
        c = relabel.get(r)
        if c is None:
            c = relabel[r] = len(sizes)
            sizes.append(0)
        sizes[c] += 1
        comp.append(c)
    return ClusterPartition(comp, sizes)


def clusters(omega: Configuration, A: Ball) -> ClusterPartition:
    """Union-find over the open edges of E(A)."""
    U = A.edges
    return partition_from_open(len(U.vertices), U.edges, omega.states(U))


def largest_cluster(part: ClusterPartition) -> int:
    return max(part.sizes) if part.sizes else 0


# -- batched evaluation ----------------------------------------------------------


def batch_states(p, seeds, universe: EdgeUniverse) -> np.ndarray:
    """(N, b) open/closed matrix, one row per stream seed."""
    pf = check_p(p)
    keys = universe.edge_key_hashes()
    return np.stack([rng.uniforms(s, keys) < pf for s in seeds]) if len(seeds) else np.zeros(
        (0, len(keys)), dtype=bool)


def batch_labels(universe: EdgeUniverse, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Component labels (N, V) and counts (N,) for a stack of configurations."""
    states = np.atleast_2d(states)
    N = states.shape[0]
    V = len(universe.vertices)
    eu, ev = universe.edge_u, universe.edge_v
    rows, cols = np.nonzero(states)
    src = rows * V + eu[cols]
    dst = rows * V + ev[cols]
    graph = coo_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(N * V, N * V))
    _, labels = connected_components(graph, directed=False)
    labels = labels.reshape(N, V)
    # labels are assigned in node order, so each row's labels are a contiguous range
    counts = labels.max(axis=1) - labels.min(axis=1) + 1 if V else np.zeros(N, dtype=np.int64)
    return labels - labels.min(axis=1, keepdims=True), counts


# -- single-edge events ------------------------------------------------------------


def word_length(model: GroupModel, g: GroupElement) -> int:
    if model.kind == "Zd":
        return sum(abs(c) for c in g.coords)
    if model.kind == "ZdTimesCyclic":
        f = g.finite_part
        step = 1 if model.m == 2 else min(f, model.m - f)
        return sum(abs(c) for c in g.coords) + (step if f else 0)
    return _heisenberg_lengths(g)


def _heisenberg_lengths(g: GroupElement) -> int:
    a, b, c = g.coords
    r = abs(a) + abs(b)
    while True:
        table = _heisenberg_table(r)
        if g in table:
            return table[g]
        r += 2


@lru_cache(maxsize=8)
def _heisenberg_table(r: int) -> dict:
    B = ball(GroupModel.Heisenberg(), r)
    return dict(zip(B.vertices, B.distances))


@dataclass
class EdgeEventClass:
    value: str  # "D", "J" or "U"
    m: int
    restricted_clusters: tuple[frozenset, frozenset]
    x1: GroupElement
    x2: GroupElement


def classify_edge_event(omega: Configuration, e, m: int, model: GroupModel,
                        ctx=None) -> EdgeEventClass:
    """Classify the edge ``e`` into the events D, J, U at probe radius ``m``.

    The restricted clusters live in ``B_m(x1)`` and use open edges other
    than ``e``. J: they meet. D: disjoint and each contains a vertex at
    distance exactly ``m`` from its own endpoint. U: everything else.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    a, b = e
    da, db = word_length(model, a), word_length(model, b)
    if da != db:
        x1, x2 = (a, b) if da < db else (b, a)
    else:
        from .ordering import EdgeOrderContext

        ctx = ctx or EdgeOrderContext(model)
        x1, x2 = (a, b) if ctx.vertex_less(a, b) else (b, a)
    local = ball(model, m, center=x1)
    if omega.universe is not None:
        missing = [v for v in local.vertices if v not in omega.universe.index]
        if missing:
            raise SizeLimitError(m, len(local), len(omega.universe.vertices))
    skip = rng.edge_key_hash(a, b)
    mul = model.multiply

    def restricted(start):
        seen = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for s in model.generators:
                w = mul(v, s)
                if w in seen or w not in local.index:
                    continue
                if rng.edge_key_hash(v, w) == skip or not omega.state((v, w)):
                    continue
                seen.add(w)
                queue.append(w)
        return frozenset(seen)

    c1, c2 = restricted(x1), restricted(x2)
    if c1 & c2:
        value = "J"
    else:
        inv1, inv2 = model.inverse(x1), model.inverse(x2)
        reach1 = any(word_length(model, mul(inv1, u)) == m for u in c1)
        reach2 = any(word_length(model, mul(inv2, v)) == m for v in c2)
        value = "D" if reach1 and reach2 else "U"
    return EdgeEventClass(value, m, (c1, c2), x1, x2)


@dataclass
class DiagnosticsRecord:
    tau: Fraction
    c_min: Fraction
    d_max: int


def tau_lower_bound(model: GroupModel, p) -> DiagnosticsRecord:
    """Variance lower bound Var(K_r) >= tau(p) |B_r| for vertex-transitive models."""
    pf = Fraction(p) if not isinstance(p, str) else Fraction(p)
    if not 0 < pf < 1:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    d = model.degree
    q = 1 - pf
    c_min = 1 - q**d
    return DiagnosticsRecord(Fraction(1, 4) * c_min**2 * q**d, c_min, d)
