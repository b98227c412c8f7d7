"""Balls, induced edge sets, boundaries and growth tables on Cayley graphs."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt

import numpy as np

from .groups import GroupElement, GroupModel

MAX_BALL_VERTICES = 5_000_000


class SizeLimitError(RuntimeError):
    def __init__(self, radius: int, size: int, cap: int):
        super().__init__(f"ball of radius {radius} exceeds {cap} vertices (reached {size})")
        self.radius = radius
        self.size = size
        self.cap = cap


def _sort_key(g: GroupElement):
    return (g.coords, g.finite_part)


@dataclass
class Ball:
    """Closed ball ``center * B_r`` listed in BFS layer order."""

    model: GroupModel
    radius: int
    vertices: list[GroupElement]
    distances: list[int]
    center: GroupElement
    index: dict[GroupElement, int] = field(default_factory=dict, repr=False)
    _edges: "EdgeUniverse | None" = field(default=None, repr=False)

    def __post_init__(self):
        if not self.index:
            self.index = {v: i for i, v in enumerate(self.vertices)}

    def __len__(self) -> int:
        return len(self.vertices)

    def __contains__(self, g) -> bool:
        return g in self.index

    def translate(self, x: GroupElement) -> "Ball":
        """The ball ``x * self`` (left translation is a graph automorphism)."""
        mul = self.model.multiply
        return Ball(
            self.model,
            self.radius,
            [mul(x, v) for v in self.vertices],
            list(self.distances),
            mul(x, self.center),
        )

    def subball(self, r: int) -> "Ball":
        """Vertices within distance ``r`` of the center, same ordering prefix."""
        k = sum(1 for d in self.distances if d <= r)
        return Ball(self.model, r, self.vertices[:k], self.distances[:k], self.center)

    @property
    def edges(self) -> "EdgeUniverse":
        if self._edges is None:
            self._edges = induced_edges(self.model, self)
        return self._edges


def ball(model: GroupModel, r: int, center: GroupElement | None = None,
         max_vertices: int = MAX_BALL_VERTICES) -> Ball:
    """Breadth-first expansion of the identity (or ``center``) by the generators."""
    if r < 0:
        raise ValueError("radius must be >= 0")
    start = model.identity
    seen = {start}
    layer = [start]
    vertices = [start]
    distances = [0]
    mul = model.multiply
    gens = model.generators
    for dist in range(1, r + 1):
        nxt = set()
        for g in layer:
            for s in gens:
                h = mul(g, s)
                if h not in seen:
                    nxt.add(h)
        seen.update(nxt)
        layer = sorted(nxt, key=_sort_key)
        vertices.extend(layer)
        distances.extend([dist] * len(layer))
        if len(vertices) > max_vertices:
            raise SizeLimitError(dist, len(vertices), max_vertices)
        if not layer:
            break
    b = Ball(model, r, vertices, distances, start)
    if center is not None and center != start:
        b = b.translate(center)
    return b


@dataclass
class EdgeUniverse:
    """Edges of the induced subgraph on a vertex set, as index pairs ``u < v``."""

    vertices: list[GroupElement]
    index: dict[GroupElement, int]
    edges: list[tuple[int, int]]
    edge_index: dict[tuple[int, int], int]
    incident: list[list[int]]
    _keys: np.ndarray | None = field(default=None, repr=False)

    @property
    def count_b(self) -> int:
        return len(self.edges)

    def __len__(self) -> int:
        return len(self.edges)

    def endpoints(self, k: int) -> tuple[GroupElement, GroupElement]:
        u, v = self.edges[k]
        return self.vertices[u], self.vertices[v]

    def edge_id(self, e) -> int:
        """Index of an edge given as a pair of group elements or of vertex indices."""
        a, b = e
        if isinstance(a, GroupElement):
            a, b = self.index[a], self.index[b]
        return self.edge_index[(a, b) if a < b else (b, a)]

    def edge_key_hashes(self) -> np.ndarray:
        if self._keys is None:
            from .rng import edge_key_hash

            self._keys = np.array(
                [edge_key_hash(self.vertices[u], self.vertices[v]) for u, v in self.edges],
                dtype=np.uint64,
            )
        return self._keys

    @property
    def edge_u(self) -> np.ndarray:
        return np.array([u for u, _ in self.edges], dtype=np.int64)

    @property
    def edge_v(self) -> np.ndarray:
        return np.array([v for _, v in self.edges], dtype=np.int64)


def induced_edges(model: GroupModel, A) -> EdgeUniverse:
    """Every unordered pair ``{u, us}`` with both endpoints in ``A``, listed once."""
    vertices = list(A.vertices) if hasattr(A, "vertices") else list(A)
    index = A.index if hasattr(A, "index") else {v: i for i, v in enumerate(vertices)}
    edges = []
    edge_index = {}
    incident: list[list[int]] = [[] for _ in vertices]
    mul = model.multiply
    for i, g in enumerate(vertices):
        for s in model.generators:
            j = index.get(mul(g, s))
            if j is None or j == i:
                continue
            key = (i, j) if i < j else (j, i)
            if key in edge_index:
                continue
            edge_index[key] = len(edges)
            incident[i].append(len(edges))
            incident[j].append(len(edges))
            edges.append(key)
    return EdgeUniverse(vertices, index, edges, edge_index, incident)


def boundaries(model: GroupModel, A) -> tuple[set[GroupElement], int]:
    """Inner vertex boundary and the number of edges leaving ``A``."""
    members = A.index if hasattr(A, "index") else set(A)
    vb = set()
    eb = 0
    for g in (A.vertices if hasattr(A, "vertices") else A):
        out = sum(1 for s in model.generators if model.multiply(g, s) not in members)
        if out:
            vb.add(g)
            eb += out
    return vb, eb


# -- growth tables ------------------------------------------------------------


def _encoder(model: GroupModel, r_max: int):
    bounds = [r_max + 2] * model.rank
    if model.kind == "Heisenberg":
        bounds[2] = r_max * r_max + 2
    widths = [2 * b + 1 for b in bounds] + [max(model.m, 1)]
    offsets = np.array(bounds + [0], dtype=np.int64)
    mult = np.ones(len(widths), dtype=np.int64)
    for k in range(1, len(widths)):
        mult[k] = mult[k - 1] * widths[k - 1]
    if float(np.prod(np.array(widths, dtype=float))) >= 2**62:
        raise SizeLimitError(r_max, 0, 2**62)

    def encode(rows: np.ndarray) -> np.ndarray:
        return ((rows + offsets) * mult).sum(axis=1)

    return encode


def bfs_layers(model: GroupModel, r_max: int, max_vertices: int = MAX_BALL_VERTICES):
    """Vectorised BFS returning one row array per layer ``0..r_max``."""
    encode = _encoder(model, r_max + 1)
    start = np.zeros((1, model.rank + 1), dtype=np.int64)
    layers = [start]
    prev_keys = np.empty(0, dtype=np.int64)
    cur_keys = encode(start)
    total = 1
    for dist in range(1, r_max + 1):
        cand = np.concatenate([model.right_multiply_array(layers[-1], s) for s in model.generators])
        keys = encode(cand)
        keys, first = np.unique(keys, return_index=True)
        cand = cand[first]
        keep = ~np.isin(keys, cur_keys, assume_unique=True) & ~np.isin(keys, prev_keys, assume_unique=True)
        layers.append(cand[keep])
        prev_keys, cur_keys = cur_keys, keys[keep]
        total += int(keep.sum())
        if total > max_vertices:
            raise SizeLimitError(dist, total, max_vertices)
    return layers, encode


@dataclass
class GrowthTable:
    model_name: str
    r_max: int
    f: list[int]
    nabla: list[Fraction | None]
    M: list[Fraction | None]
    g: list[int]
    c_base: int
    folner_deficiency: list[Fraction]
    vertex_boundary: list[int]
    edge_boundary: list[int]
    partial: bool
    tail_window: tuple[int, int]

    def rows(self):
        for r in range(self.r_max + 1):
            yield {
                "r": r,
                "f": self.f[r],
                "nabla": self.nabla[r],
                "M": self.M[r],
                "g": self.g[r],
                "folner_deficiency": self.folner_deficiency[r],
            }


def floor_quarter_log(r: int, c: int) -> int:
    """Largest k with c**(4k) <= r, computed with integers only."""
    k = 0
    while c ** (4 * (k + 1)) <= r:
        k += 1
    return k


def floor_inv_sqrt(x: Fraction) -> int:
    """floor(x ** -1/2) for a positive rational x."""
    return isqrt(x.denominator // x.numerator)


def growth_profile(model: GroupModel, r_max: int) -> GrowthTable:
    """Growth function, relative growth rate, truncated tail sup and the scale g(r).

    ``M(R)`` is the maximum of the relative growth rate over ``R..r_max``; the
    true supremum runs over an infinite tail, so the table records its window.
    """
    if r_max < 2:
        raise ValueError("r_max must be >= 2")
    layers, encode = bfs_layers(model, r_max + 1)
    sizes = [len(layer) for layer in layers]
    f = list(np.cumsum(sizes[: r_max + 1]).tolist())

    vb, eb = [], []
    for r in range(r_max + 1):
        outer = encode(layers[r + 1])
        hits = np.zeros(len(layers[r]), dtype=np.int64)
        for s in model.generators:
            hits += np.isin(encode(model.right_multiply_array(layers[r], s)), outer)
        vb.append(int((hits > 0).sum()))
        eb.append(int(hits.sum()))

    nabla: list[Fraction | None] = [None] + [
        Fraction(f[r] - f[r - 1], f[r - 1]) for r in range(1, r_max + 1)
    ]
    M: list[Fraction | None] = [None] * (r_max + 1)
    running = Fraction(0)
    for R in range(r_max, 0, -1):
        running = max(running, nabla[R])
        M[R] = running
    c = max(2, model.degree)
    g = [0] * (r_max + 1)
    for r in range(2, r_max + 1):
        m_half = M[r // 2]
        cap = floor_inv_sqrt(m_half) if m_half > 0 else r // 2
        g[r] = min(r // 2, floor_quarter_log(r, c), cap)
    defic = [Fraction(vb[r], f[r]) for r in range(r_max + 1)]
    return GrowthTable(
        model.name, r_max, f, nabla, M, g, c, defic, vb, eb,
        partial=r_max < 4, tail_window=(1, r_max),
    )


def lemma_ratio_holds(table: GrowthTable, r: int) -> bool:
    """Exact check of (f(r) - f(r - g(r))) / f(r) <= M(floor(r/2)) ** 1/2."""
    g = table.g[r]
    lhs = Fraction(table.f[r] - table.f[r - g], table.f[r])
    return lhs * lhs <= table.M[r // 2]


def coset_window(model: GroupModel, i: int, s: GroupElement, A) -> set[GroupElement]:
    """``{h in H : h x_i in A and h x_i s in A}`` with ``i`` 1-based."""
    members = A.index if hasattr(A, "index") else set(A)
    out = set()
    for a in (A.vertices if hasattr(A, "vertices") else A):
        h, j = model.coset_decompose(a)
        if j == i and model.multiply(a, s) in members:
            out.add(h)
    return out
