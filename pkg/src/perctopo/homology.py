"""Boundary matrices, exact ranks, Betti numbers and single-edge Betti deltas."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np

from .complexes import RuleDescriptor, SimplicialComplex, build_from_graph
from .geometry import Ball, ball
from .percolation import (ClusterPartition, Configuration, UnionFind, resample_edge)

PRIME = (1 << 61) - 1


class ContractError(ValueError):
    pass


@dataclass
class BoundaryMatrix:
    """Sparse signed incidence: ``columns[j]`` maps face row -> +-1."""

    n_rows: int
    columns: list[dict[int, int]]

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, len(self.columns)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.int64)
        for j, col in enumerate(self.columns):
            for i, v in col.items():
                out[i, j] = v
        return out


def boundary_matrix(cx: SimplicialComplex, n: int) -> BoundaryMatrix:
    """Column of [v_0..v_n] has (-1)^i at the face omitting v_i."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return BoundaryMatrix(0, [{} for _ in range(cx.count(0))])
    if n >= len(cx.by_dim):
        return BoundaryMatrix(cx.count(n - 1), [])
    faces = cx.index[n - 1]
    cols = []
    for s in cx.by_dim[n]:
        col = {}
        for i in range(n + 1):
            col[faces[s[:i] + s[i + 1:]]] = -1 if i % 2 else 1
        cols.append(col)
    return BoundaryMatrix(len(cx.by_dim[n - 1]), cols)


def matrix_from_dense(a) -> BoundaryMatrix:
    a = np.asarray(a)
    cols = [{int(i): int(a[i, j]) for i in np.nonzero(a[:, j])[0]} for j in range(a.shape[1])]
    return BoundaryMatrix(a.shape[0], cols)


# -- ranks -----------------------------------------------------------------------------


class ColumnReducer:
    """Incremental column elimination keyed by lowest nonzero row.

    ``exact=True`` works over the integers with gcd normalisation, which
    gives the rank over Q. Otherwise arithmetic is modulo a 61-bit prime.
    """

    def __init__(self, exact: bool = True):
        self.exact = exact
        self.pivots: dict[int, dict[int, int]] = {}

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def add(self, column: dict[int, int]) -> bool:
        """Reduce ``column`` against stored pivots; return True if it raised the rank."""
        col = {i: v for i, v in column.items() if v}
        if not self.exact:
            col = {i: v % PRIME for i, v in col.items() if v % PRIME}
        pivots = self.pivots
        while col:
            low = max(col)
            piv = pivots.get(low)
            if piv is None:
                if self.exact:
                    g = 0
                    for v in col.values():
                        g = gcd(g, v)
                    if g > 1:
                        col = {i: v // g for i, v in col.items()}
                else:
                    inv = pow(col[low], PRIME - 2, PRIME)
                    col = {i: v * inv % PRIME for i, v in col.items()}
                pivots[low] = col
                return True
            c = col[low]
            if self.exact:
                a = piv[low]
                g = gcd(a, c)
                fa, fc = a // g, c // g
                new = {i: v * fa for i, v in col.items()}
                for i, v in piv.items():
                    new[i] = new.get(i, 0) - fc * v
                col = {i: v for i, v in new.items() if v}
            else:
                for i, v in piv.items():
                    col[i] = (col.get(i, 0) - c * v) % PRIME
                col = {i: v for i, v in col.items() if v}
        return False


def rank(matrix: BoundaryMatrix, method: str = "exact") -> int:
    """Rank over Q (``"exact"``) or modulo a large prime (``"modp"``)."""
    if method not in ("exact", "modp"):
        raise ValueError(f"unknown rank method {method!r}")
    red = ColumnReducer(exact=method == "exact")
    for col in matrix.columns:
        red.add(col)
    return red.rank


# -- Betti numbers -------------------------------------------------------------------


def betti(cx: SimplicialComplex, n: int, method: str = "exact") -> int:
    if n < 0:
        raise ValueError("n must be >= 0")
    if cx.dim_cap < n + 1:
        raise ContractError(f"complex built with dim_cap {cx.dim_cap}; beta_{n} needs {n + 1}")
    cn = cx.count(n)
    if cn == 0:
        return 0
    return cn - rank(boundary_matrix(cx, n), method) - rank(boundary_matrix(cx, n + 1), method)


@dataclass
class BettiVector:
    beta: list[int]
    euler: int


def betti_vector(cx: SimplicialComplex, method: str = "exact") -> BettiVector:
    """Betti numbers of every stored dimension (the top one uses a zero d_{top+1})."""
    ranks = [0] + [rank(boundary_matrix(cx, d), method) for d in range(1, len(cx.by_dim))] + [0]
    beta = [cx.count(d) - ranks[d] - ranks[d + 1] for d in range(len(cx.by_dim))]
    return BettiVector(beta, cx.euler())


def chain_complex_ok(cx: SimplicialComplex) -> bool:
    """d_n o d_{n+1} == 0 for every consecutive pair, checked exactly."""
    for n in range(1, len(cx.by_dim) - 1):
        lo, hi = boundary_matrix(cx, n), boundary_matrix(cx, n + 1)
        for col in hi.columns:
            acc: dict[int, int] = {}
            for face, sign in col.items():
                for i, v in lo.columns[face].items():
                    acc[i] = acc.get(i, 0) + sign * v
            if any(acc.values()):
                return False
    return True


def euler_ok(cx: SimplicialComplex) -> bool:
    bv = betti_vector(cx)
    return sum((-1) ** d * b for d, b in enumerate(bv.beta)) == bv.euler


# -- components -------------------------------------------------------------------------


@dataclass
class AdditivityReport:
    passed: bool
    total: int
    parts: list[int]
    witness: int | None = None


def component_additivity_check(cx: SimplicialComplex, partition: ClusterPartition,
                               n: int) -> AdditivityReport:
    """beta_n of the complex equals the sum over cluster-induced subcomplexes."""
    total = betti(cx, n)
    groups: dict[int, list[int]] = {}
    for v, c in enumerate(partition.component_id):
        groups.setdefault(c, []).append(v)
    parts = []
    for c in sorted(groups):
        sub = _reindexed(cx.restrict(groups[c]))
        parts.append(betti(sub, n))
    ok = total == sum(parts)
    witness = None
    if not ok:
        witness = max(range(len(parts)), key=lambda i: parts[i])
    return AdditivityReport(ok, total, parts, witness)


def _reindexed(cx: SimplicialComplex) -> SimplicialComplex:
    verts = sorted(v for (v,) in cx.by_dim[0]) if cx.by_dim else []
    relabel = {v: i for i, v in enumerate(verts)}
    by_dim = [sorted(tuple(relabel[v] for v in s) for s in level) for level in cx.by_dim]
    return SimplicialComplex(by_dim, cx.dim_cap)


# -- single-edge perturbations ----------------------------------------------------------


@dataclass
class PerturbationDelta:
    edge: tuple
    degree_n: int
    delta: int
    stabilized: bool = False
    R_stab: int | None = None
    bound: int | None = None
    localized_delta: int | None = None
    history: list = field(default_factory=list)

    @property
    def paths_agree(self) -> bool:
        return self.localized_delta is None or self.localized_delta == self.delta


def _rank_increment(old_cols, new_cols) -> int:
    red = ColumnReducer(exact=True)
    for c in old_cols:
        red.add(c)
    before = red.rank
    for c in new_cols:
        red.add(c)
    return red.rank - before


def _columns(cx: SimplicialComplex, n: int, faces_index: dict, simplices) -> list[dict[int, int]]:
    cols = []
    for s in simplices:
        cols.append({faces_index[s[:i] + s[i + 1:]]: (-1 if i % 2 else 1) for i in range(n + 1)})
    return cols


def relative_pair_bound(X: SimplicialComplex, Xt: SimplicialComplex, support, n: int) -> tuple[int, list]:
    """dim H_n(L, L~) + dim H_{n+1}(L, L~) for the induced pair on ``support``.

    Returns the bound and the relative generators (simplices of L not in L~).
    """
    L = X.restrict(support)
    Lt = Xt.restrict(support)
    new = [[s for s in L.by_dim[d] if s not in Lt.index[d]] if d < len(Lt.by_dim) else list(L.by_dim[d])
           for d in range(len(L.by_dim))]

    def rel_rank(k):
        if k < 1 or k >= len(new) or not new[k]:
            return 0
        rows = {s: i for i, s in enumerate(new[k - 1])}
        cols = []
        for s in new[k]:
            col = {}
            for i in range(k + 1):
                f = s[:i] + s[i + 1:]
                if f in rows:
                    col[rows[f]] = -1 if i % 2 else 1
            cols.append(col)
        return rank(BoundaryMatrix(len(rows), cols))

    def rel_dim(k):
        if k >= len(new):
            return 0
        return len(new[k]) - rel_rank(k) - rel_rank(k + 1)

    return rel_dim(n) + rel_dim(n + 1), new


def _localized_delta(rule: RuleDescriptor, n_vertices: int, open_with_e, e_idx, n: int,
                     support) -> tuple[int, int]:
    """(beta_n(X) - beta_n(X~), bound) from the cluster of ``e`` and the relative pair.

    X has ``e`` open, X~ has it closed. Only the cluster containing ``e``
    can change, and there the Betti change is the number of new n-simplices
    minus the rank increments of d_n and d_{n+1} caused by the new simplices.
    """
    u, v = e_idx
    uf = UnionFind(n_vertices)
    for a, b in open_with_e:
        uf.union(a, b)
    root = uf.find(u)
    W = [w for w in range(n_vertices) if uf.find(w) == root]
    relabel = {w: i for i, w in enumerate(W)}
    edges_W = [(relabel[a], relabel[b]) for a, b in open_with_e if a in relabel]
    eW = (relabel[u], relabel[v]) if relabel[u] < relabel[v] else (relabel[v], relabel[u])
    X = build_from_graph(rule, len(W), edges_W)
    Xt = build_from_graph(rule, len(W), [x for x in edges_W if x != eW])
    bound, new = relative_pair_bound(X, Xt, [relabel[w] for w in support if w in relabel], n)
    new_count = len(new[n]) if n < len(new) else 0
    # every new simplex must lie inside the support: that is the locality claim
    all_new = [s for d in range(len(X.by_dim)) for s in X.by_dim[d]
               if d >= len(Xt.by_dim) or s not in Xt.index[d]]
    if sum(len(level) for level in new) != len(all_new):
        raise AssertionError("relative generators escape the local support")
    incr = []
    for k in (n, n + 1):
        if k == 0 or k >= len(X.by_dim):
            incr.append(0)
            continue
        faces = X.index[k - 1]
        old = [s for s in Xt.by_dim[k]] if k < len(Xt.by_dim) else []
        added = [s for s in X.by_dim[k] if k >= len(Xt.by_dim) or s not in Xt.index[k]]
        incr.append(_rank_increment(_columns(X, k, faces, old), _columns(X, k, faces, added)))
    return new_count - incr[0] - incr[1], bound


def edge_delta_betti(rule: RuleDescriptor, omega: Configuration, e, A: Ball, n: int,
                     aux: int, localized: bool = True, omega_e: Configuration | None = None
                     ) -> PerturbationDelta:
    """beta_n(D(G(omega;A))) - beta_n(D(G(omega^e;A))), globally and locally."""
    rule = rule.with_cap(max(rule.dim_cap, n + 2))
    U = A.edges
    k = U.edge_id(e)
    omega_e = omega_e if omega_e is not None else resample_edge(omega, U.endpoints(k), aux)
    s0 = omega.states(U)
    s1 = omega_e.states(U)
    open0 = [x for x, o in zip(U.edges, s0) if o]
    open1 = [x for x, o in zip(U.edges, s1) if o]
    delta = betti(build_from_graph(rule, len(A), open0), n) - betti(build_from_graph(rule, len(A), open1), n)
    out = PerturbationDelta(U.endpoints(k), n, delta)
    if localized:
        e_idx = U.edges[k]
        with_e = [x for x in open0 if x != e_idx] + [e_idx]
        T = rule.basic_diameter_T
        center = U.vertices[e_idx[0]]
        local = ball(A.model, T, center=center)
        support = [U.index[g] for g in local.vertices if g in U.index]
        diff, bound = _localized_delta(rule, len(A), with_e, e_idx, n, support)
        sign = 0 if s0[k] == s1[k] else (1 if s0[k] else -1)
        out.localized_delta = sign * diff
        out.bound = bound
    return out


def stabilization_scan_betti(rule: RuleDescriptor, omega: Configuration, e, n: int,
                             radii, aux: int, center=None, tail: int = 2,
                             localized: bool = True) -> PerturbationDelta:
    """Evaluate the Betti delta on growing balls sharing one per-edge randomness.

    ``R_stab`` is the first radius from which the delta stays constant over
    every remaining computed radius; the scan counts as stabilized when that
    constant run covers at least ``tail`` radii.
    """
    radii = list(radii)
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be increasing")
    model = omega.model
    big = ball(model, radii[-1], center=center)
    history = []
    e = tuple(e)
    omega_e = resample_edge(omega, e, aux)
    for r in radii:
        A = big.subball(r)
        if e[0] not in A.index or e[1] not in A.index:
            continue
        pd = edge_delta_betti(rule, omega, e, A, n, aux, localized=localized, omega_e=omega_e)
        history.append((r, pd.delta, pd.localized_delta, pd.bound))
    return _summarise(e, n, history, tail)


def _summarise(e, n, history, tail) -> PerturbationDelta:
    if not history:
        return PerturbationDelta(e, n, 0, False, None, history=history)
    vals = [h[1] for h in history]
    j = len(vals) - 1
    while j > 0 and vals[j - 1] == vals[-1]:
        j -= 1
    stabilized = len(vals) - j >= tail
    last = history[-1]
    return PerturbationDelta(e, n, vals[-1], stabilized, history[j][0], last[3], last[2], history)
