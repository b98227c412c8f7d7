"""Graph-generated simplicial complexes: clique, neighbor and path_k rules."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import combinations

from .geometry import Ball, ball
from .groups import GroupModel
from .percolation import Configuration, UnionFind, sample_configuration, word_length

MAX_SIMPLICES = 2_000_000


class ComplexSizeError(RuntimeError):
    pass


@dataclass(frozen=True)
class RuleDescriptor:
    kind: str  # "clique", "neighbor" or "path"
    dim_cap: int = 2
    k: int = 2

    def __post_init__(self):
        if self.kind not in ("clique", "neighbor", "path"):
            raise ValueError(f"unknown rule {self.kind!r}")
        if self.dim_cap < 0:
            raise ValueError("dim_cap must be >= 0")
        if self.kind == "path" and self.k < 1:
            raise ValueError("path rule needs k >= 1")

    @property
    def basic_diameter_T(self) -> int:
        return {"clique": 1, "neighbor": 2}.get(self.kind, self.k)

    def with_cap(self, dim_cap: int) -> "RuleDescriptor":
        return RuleDescriptor(self.kind, dim_cap, self.k)

    @classmethod
    def parse(cls, name: str, dim_cap: int = 2) -> "RuleDescriptor":
        """``"clique"``, ``"neighbor"`` or ``"path_K"``."""
        if name.startswith("path"):
            k = int(name.split("_", 1)[1]) if "_" in name else 2
            return cls("path", dim_cap, k)
        return cls(name, dim_cap)

    @property
    def label(self) -> str:
        return f"path_{self.k}" if self.kind == "path" else self.kind


@dataclass
class SimplicialComplex:
    """Simplices as sorted vertex tuples, grouped by dimension."""

    by_dim: list[list[tuple[int, ...]]]
    dim_cap: int
    index: list[dict[tuple[int, ...], int]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.index:
            self.index = [{s: i for i, s in enumerate(level)} for level in self.by_dim]

    @property
    def max_dim(self) -> int:
        return len(self.by_dim) - 1

    def count(self, n: int) -> int:
        return len(self.by_dim[n]) if 0 <= n < len(self.by_dim) else 0

    def counts(self) -> list[int]:
        return [len(level) for level in self.by_dim]

    def simplices(self):
        for level in self.by_dim:
            yield from level

    def __contains__(self, s) -> bool:
        s = tuple(s)
        d = len(s) - 1
        return 0 <= d < len(self.index) and s in self.index[d]

    def as_set(self) -> set[tuple[int, ...]]:
        return set(self.simplices())

    def restrict(self, vertices) -> "SimplicialComplex":
        """Induced subcomplex on a vertex subset."""
        keep = set(vertices)
        return SimplicialComplex(
            [[s for s in level if keep.issuperset(s)] for level in self.by_dim], self.dim_cap
        )

    def euler(self) -> int:
        return sum((-1) ** d * len(level) for d, level in enumerate(self.by_dim))


def _from_sets(sets, n_vertices: int, dim_cap: int) -> SimplicialComplex:
    by_dim: list[set] = [set() for _ in range(dim_cap + 1)]
    by_dim[0] = {(v,) for v in range(n_vertices)}
    for s in sets:
        by_dim[len(s) - 1].add(s)
    while len(by_dim) > 1 and not by_dim[-1]:
        by_dim.pop()
    return SimplicialComplex([sorted(level) for level in by_dim], dim_cap)


def _adjacency(n_vertices: int, open_edges) -> list[set[int]]:
    adj: list[set[int]] = [set() for _ in range(n_vertices)]
    for u, v in open_edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def build_from_graph(rule: RuleDescriptor, n_vertices: int, open_edges,
                     max_simplices: int = MAX_SIMPLICES) -> SimplicialComplex:
    """Apply ``rule`` to the graph on ``range(n_vertices)`` with the given edges."""
    adj = _adjacency(n_vertices, open_edges)
    cap = rule.dim_cap
    out: set[tuple[int, ...]] = set()

    def add(s):
        out.add(s)
        if len(out) > max_simplices:
            raise ComplexSizeError(f"more than {max_simplices} simplices")

    if rule.kind == "clique":
        def extend(clique, cands):
            add(clique)
            if len(clique) == cap + 1:
                return
            for w in sorted(cands):
                if w > clique[-1]:
                    extend(clique + (w,), cands & adj[w])

        for v in range(n_vertices):
            extend((v,), adj[v])
    elif rule.kind == "neighbor":
        for v in range(n_vertices):
            closed = sorted(adj[v] | {v})
            for size in range(2, min(cap + 1, len(closed)) + 1):
                for s in combinations(closed, size):
                    add(s)
    else:
        k = rule.k
        seen_sets = set()

        def walk(path, members):
            key = frozenset(members)
            if key not in seen_sets:
                seen_sets.add(key)
                verts = tuple(sorted(members))
                for size in range(2, min(cap + 1, len(verts)) + 1):
                    for s in combinations(verts, size):
                        add(s)
            if len(path) - 1 == k:
                return
            for w in adj[path[-1]]:
                if w not in members:
                    members.add(w)
                    path.append(w)
                    walk(path, members)
                    path.pop()
                    members.discard(w)

        for v in range(n_vertices):
            walk([v], {v})
    return _from_sets(out, n_vertices, cap)


def open_edges_of(omega: Configuration, A: Ball) -> list[tuple[int, int]]:
    U = A.edges
    mask = omega.states(U)
    return [e for e, o in zip(U.edges, mask) if o]


def build(rule: RuleDescriptor, omega: Configuration, A: Ball) -> SimplicialComplex:
    """Complex of the open subgraph G(omega; A), vertices indexed as in ``A``."""
    return build_from_graph(rule, len(A), open_edges_of(omega, A))


def is_downward_closed(cx: SimplicialComplex) -> bool:
    for d in range(1, len(cx.by_dim)):
        below = cx.index[d - 1]
        for s in cx.by_dim[d]:
            if any(f not in below for f in combinations(s, d)):
                return False
    return True


def simplices_connected(cx: SimplicialComplex, n_vertices: int, open_edges) -> bool:
    uf = UnionFind(n_vertices)
    for u, v in open_edges:
        uf.union(u, v)
    return all(len({uf.find(v) for v in s}) == 1 for s in cx.simplices())


# -- audits ------------------------------------------------------------------------


@dataclass
class LocalityReport:
    rule: str
    trials: int
    monotone: bool = True
    connected: bool = True
    measured_T: int = 0
    declared_T: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.monotone and self.connected and self.measured_T <= self.declared_T and not self.failures


def _witnesses(rule: RuleDescriptor, simplex, adj):
    """Vertex sets of the minimal subgraphs that can generate ``simplex``.

    Every generating subgraph contains one of these, so the smallest
    diameter among them is the smallest achievable.
    """
    s = set(simplex)
    if len(simplex) == 1:
        yield (simplex, [])
        return
    if rule.kind == "clique":
        yield (simplex, list(combinations(simplex, 2)))
    elif rule.kind == "neighbor":
        for w in range(len(adj)):
            if s <= adj[w] | {w}:
                yield (tuple(sorted(s | {w})), [(w, x) for x in s if x != w])
    else:
        k = rule.k

        def walk(path, members):
            if s <= members:
                yield (tuple(sorted(members)), list(zip(path, path[1:])))
                return
            if len(path) - 1 == k:
                return
            for w in adj[path[-1]]:
                if w not in members:
                    members.add(w)
                    path.append(w)
                    yield from walk(path, members)
                    path.pop()
                    members.discard(w)

        for v in simplex:
            yield from walk([v], {v})


def locality_audit(rule: RuleDescriptor, trials: int, seed: int,
                   model: GroupModel | None = None, radius: int = 2) -> LocalityReport:
    """Check monotonicity, connectivity and confinement on random nested subgraphs."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    model = model or GroupModel.Zd(2)
    A = ball(model, radius)
    U = A.edges
    verts = A.vertices
    dist = {}

    def d_G(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in dist:
            dist[key] = word_length(model, model.multiply(model.inverse(verts[a]), verts[b]))
        return dist[key]

    report = LocalityReport(rule.label, trials, declared_T=rule.basic_diameter_T)
    rnd = random.Random(seed)
    for t in range(trials):
        pk = rnd.uniform(0.3, 0.95)
        K = [e for e in U.edges if rnd.random() < pk]
        H = [e for e in K if rnd.random() < 0.7]
        cx_K = build_from_graph(rule, len(A), K)
        cx_H = build_from_graph(rule, len(A), H)
        missing = cx_H.as_set() - cx_K.as_set()
        if missing:
            report.monotone = False
            report.failures.append(f"trial {t}: {sorted(missing)[0]} in D(H) but not D(K)")
        if not simplices_connected(cx_K, len(A), K):
            report.connected = False
            report.failures.append(f"trial {t}: simplex spans two components")
        adj = _adjacency(len(A), K)
        for s in cx_K.simplices():
            best = None
            for vs, wedges in _witnesses(rule, s, adj):
                diam = max((d_G(a, b) for a, b in combinations(vs, 2)), default=0)
                if best is not None and diam >= best:
                    continue
                # witness must actually generate the simplex
                relabel = {v: i for i, v in enumerate(vs)}
                sub = build_from_graph(rule.with_cap(len(s) - 1), len(vs),
                                       [(relabel[a], relabel[b]) for a, b in wedges])
                if tuple(relabel[v] for v in s) in sub:
                    best = diam
            if best is None:
                report.failures.append(f"trial {t}: no witness for {s}")
                continue
            report.measured_T = max(report.measured_T, best)
    return report


@dataclass
class EquivarianceReport:
    passed: bool
    trials: int
    witness: str | None = None


def element_complex(cx: SimplicialComplex, A: Ball) -> set[frozenset]:
    return {frozenset(A.vertices[v] for v in s) for s in cx.simplices()}


def equivariance_check(rule: RuleDescriptor, model: GroupModel, trials: int,
                       seed: int = 0, p: float = 0.6, radius: int = 3,
                       translations=None) -> EquivarianceReport:
    """Delta(u G) == u Delta(G) for random translations u of a seeded configuration."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rnd = random.Random(seed)
    A = ball(model, radius)
    omega = sample_configuration(p, seed, model=model)
    base = build(rule, omega, A)
    base_set = element_complex(base, A)
    for t in range(trials):
        if translations is not None:
            u = translations[t % len(translations)]
        else:
            word = [rnd.randrange(model.degree) for _ in range(rnd.randint(0, 8))]
            u = model.word_to_element(word)
        uA = A.translate(u)
        moved = build(rule, omega.translated(model, u), uA)
        expect = {frozenset(model.multiply(u, g) for g in s) for s in base_set}
        got = element_complex(moved, uA)
        if got != expect or moved.counts() != base.counts():
            diff = sorted(map(sorted, got ^ expect))
            return EquivarianceReport(False, t + 1, f"translation {u}: {diff[:1]}")
    return EquivarianceReport(True, trials)
