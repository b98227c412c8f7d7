"""Stationary functionals, difference operators, the sigma^2 estimator and the CLT harness."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import ndtr

from . import rng
from .complexes import RuleDescriptor, build_from_graph
from .geometry import Ball, EdgeUniverse, ball, boundaries
from .groups import GroupElement, GroupModel
from .homology import ContractError, betti
from .ordering import EdgeOrderContext
from .percolation import (Configuration, batch_labels, check_p, clusters, resample_edge,
                          sample_configuration)

KINDS = ("ClusterCount", "IsolatedVertices", "TotalPerimeter", "Betti", "OpenEdgeCount", "Constant")


@dataclass(frozen=True)
class FunctionalSpec:
    """``OpenEdgeCount`` and ``Constant`` are control functionals with known laws."""

    kind: str
    rule: RuleDescriptor | None = None
    n: int = 0
    value: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown functional {self.kind!r}")
        if self.kind == "Betti" and self.rule is None:
            raise ValueError("Betti functional needs a rule")

    @classmethod
    def betti(cls, rule: RuleDescriptor, n: int) -> "FunctionalSpec":
        return cls("Betti", rule.with_cap(max(rule.dim_cap, n + 1)), n)

    @property
    def label(self) -> str:
        if self.kind == "Betti":
            return f"Betti({self.rule.label},{self.n})"
        return self.kind


# -- evaluation -----------------------------------------------------------------


def evaluate_states(F: FunctionalSpec, U: EdgeUniverse, states: np.ndarray) -> np.ndarray:
    """F for every row of an (N, b) open/closed matrix over ``U``."""
    states = np.atleast_2d(np.asarray(states, dtype=bool))
    N = states.shape[0]
    V = len(U.vertices)
    if F.kind == "Constant":
        return np.full(N, F.value, dtype=np.int64)
    if F.kind == "OpenEdgeCount":
        return states.sum(axis=1).astype(np.int64)
    if F.kind == "IsolatedVertices":
        deg = np.zeros((N, V), dtype=np.int64)
        eu, ev = U.edge_u, U.edge_v
        deg += _scatter(states, eu, V)
        deg += _scatter(states, ev, V)
        return (deg == 0).sum(axis=1).astype(np.int64)
    if F.kind == "ClusterCount":
        return batch_labels(U, states)[1].astype(np.int64)
    if F.kind == "TotalPerimeter":
        labels, _ = batch_labels(U, states)
        same = labels[:, U.edge_u] == labels[:, U.edge_v]
        closed = ~states
        return (closed & same).sum(axis=1) + 2 * (closed & ~same).sum(axis=1)
    out = np.empty(N, dtype=np.int64)
    for i in range(N):
        open_edges = [e for e, o in zip(U.edges, states[i]) if o]
        out[i] = betti(build_from_graph(F.rule, V, open_edges), F.n)
    return out


def _scatter(states: np.ndarray, idx: np.ndarray, V: int) -> np.ndarray:
    out = np.zeros((states.shape[0], V), dtype=np.int64)
    for k, v in enumerate(idx):
        out[:, v] += states[:, k]
    return out


def evaluate(F: FunctionalSpec, omega: Configuration, A: Ball) -> int:
    U = A.edges
    return int(evaluate_states(F, U, omega.states(U)[None, :])[0])


def evaluate_reference(F: FunctionalSpec, omega: Configuration, A: Ball) -> int:
    """Unbatched evaluation through union-find, used to cross-check the batch path."""
    U = A.edges
    mask = omega.states(U)
    if F.kind in ("Constant", "OpenEdgeCount", "Betti"):
        return evaluate(F, omega, A)
    part = clusters(omega, A)
    if F.kind == "ClusterCount":
        return part.count_K
    if F.kind == "IsolatedVertices":
        touched = set()
        for (u, v), o in zip(U.edges, mask):
            if o:
                touched.update((u, v))
        return len(A) - len(touched)
    total = 0
    for (u, v), o in zip(U.edges, mask):
        if not o:
            total += 1 if part.component_id[u] == part.component_id[v] else 2
    return total


def difference(F: FunctionalSpec, omega: Configuration, e, A: Ball, aux: int) -> int:
    """D_e(omega, A) = F(omega, A) - F(omega^e, A)."""
    U = A.edges
    k = U.edge_id(e)
    omega_e = resample_edge(omega, U.endpoints(k), aux)
    both = np.stack([omega.states(U), omega_e.states(U)])
    vals = evaluate_states(F, U, both)
    return int(vals[0] - vals[1])


def flip_difference(F: FunctionalSpec, omega: Configuration, e, A: Ball) -> int:
    """F with ``e`` forced open minus F with ``e`` forced closed."""
    U = A.edges
    k = U.edge_id(e)
    s = omega.states(U)
    both = np.stack([s, s])
    both[0, k], both[1, k] = True, False
    vals = evaluate_states(F, U, both)
    return int(vals[0] - vals[1])


# -- stabilization ----------------------------------------------------------------


@dataclass
class StabilizationResult:
    R_stab: int | None
    value: int | None
    stabilized: bool
    history: list[tuple[int, int]] = field(default_factory=list)


def summarise_scan(history, tail: int = 2) -> StabilizationResult:
    if not history:
        return StabilizationResult(None, None, False, history)
    vals = [v for _, v in history]
    j = len(vals) - 1
    while j > 0 and vals[j - 1] == vals[-1]:
        j -= 1
    return StabilizationResult(history[j][0], vals[-1], len(vals) - j >= tail, history)


def stabilization_scan(F: FunctionalSpec, e, seed: int, radii, p, model: GroupModel,
                       aux: int | None = None, center: GroupElement | None = None,
                       tail: int = 2) -> StabilizationResult:
    """D_e on nested balls ``center * B_r`` sharing one per-edge randomness."""
    radii = list(radii)
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be increasing")
    aux = rng.derive_seed(seed, 0xA) if aux is None else aux
    omega = sample_configuration(p, seed, model=model)
    e = tuple(e)
    omega_e = resample_edge(omega, e, aux)
    big = ball(model, radii[-1], center=center)
    history = []
    for r in radii:
        A = big.subball(r)
        if e[0] not in A.index or e[1] not in A.index:
            continue
        U = A.edges
        vals = evaluate_states(F, U, np.stack([omega.states(U), omega_e.states(U)]))
        history.append((r, int(vals[0] - vals[1])))
    return summarise_scan(history, tail)


def choose_stab_radius(F: FunctionalSpec, p, model: GroupModel, radii, trials: int, seed: int,
                       quantile: float = 0.99, e=None) -> int:
    """Smallest scanned radius by which ``quantile`` of trials had stabilized."""
    e = e or (model.identity, model.generators[0])
    found = []
    for t in range(trials):
        res = stabilization_scan(F, e, rng.derive_seed(seed, t), radii, p, model)
        found.append(res.R_stab if res.stabilized else radii[-1])
    found.sort()
    return found[min(len(found) - 1, math.ceil(quantile * len(found)) - 1)]


# -- asymptotic variance ------------------------------------------------------------


@dataclass
class Sigma2Estimate:
    per_edge: list[tuple[float, float]]
    sigma2: float
    sigma2_se: float
    sigma2_b: float
    sigma2_b_se: float
    window_radius: int
    inner_samples: int
    outer_samples: int
    stabilization_radius_used: int
    entries: list = field(default_factory=list)


def estimate_sigma2(F: FunctionalSpec, p, ctx: EdgeOrderContext, window_radius: int,
                    outer: int, inner: int, stab_radius: int | None = None, seed: int = 0,
                    workers: int = 1) -> Sigma2Estimate:
    """Nested Monte Carlo for sigma^2 = 1/(2n) sum_e E[E[D_e | F_e]^2].

    For each fundamental edge the outer loop fixes the edges preceding or
    equal to ``e``, the inner loop redraws the later edges and the
    independent copy at ``e``. D_e is evaluated on ``B_{stab_radius}``, so
    only edges of that ball can influence it; the window only has to cover it.
    The squared inner mean is debiased by ``s^2 / inner``.
    """
    pf = check_p(p)
    if outer < 1 or inner < 1:
        raise ValueError("outer and inner must be >= 1")
    model = ctx.model
    if stab_radius is None:
        stab_radius = choose_stab_radius(F, pf, model, list(range(1, window_radius + 1)), 100, seed)
    if not 1 <= stab_radius <= window_radius:
        raise ContractError("need 1 <= stab_radius <= window_radius")
    A = ball(model, stab_radius)
    fs = ctx.fundamental
    jobs = []
    for k, entry in enumerate(fs.entries):
        a, b = entry.edge
        if a not in A.index or b not in A.index:
            raise ContractError(f"fundamental edge {entry.edge} not inside B_{stab_radius}")
        jobs.append((F, pf, ctx, A.radius, k, seed, outer, inner))
    results = _run_jobs(_sigma2_entry, jobs, workers)
    n = model.index_n
    S = model.degree
    per_edge = [(m, se) for m, se in results]
    total = sum(m for m, _ in per_edge)
    se_total = math.sqrt(sum(se * se for _, se in per_edge))
    return Sigma2Estimate(
        per_edge,
        total / (2 * n),
        se_total / (2 * n),
        total / (n * S),
        se_total / (n * S),
        window_radius,
        inner,
        outer,
        stab_radius,
        [e.edge for e in fs.entries],
    )


def _sigma2_entry(F, pf, ctx, radius, k, seed, outer, inner):
    model = ctx.model
    A = ball(model, radius)
    U = A.edges
    keys = U.edge_key_hashes()
    e = ctx.fundamental.entries[k].edge
    ke = U.edge_id(e)
    ekey = ctx.edge_key(e)
    past = np.array([ctx.edge_key(U.endpoints(j)) <= ekey for j in range(len(U))])
    future = ~past
    vals = np.empty(outer)
    for j in range(outer):
        sj = rng.derive_seed(seed, k, j)
        base = rng.uniforms(sj, keys) < pf
        inner_seeds = [rng.derive_seed(sj, i) for i in range(inner)]
        draws = rng.uniforms_matrix(inner_seeds, keys) < pf
        omega = np.where(future[None, :], draws, base[None, :])
        copy = rng.uniforms_matrix([rng.derive_seed(sj, i, 0xC0) for i in range(inner)],
                                   keys[ke:ke + 1])[:, 0] < pf
        omega_e = omega.copy()
        omega_e[:, ke] = copy
        d = (evaluate_states(F, U, omega) - evaluate_states(F, U, omega_e)).astype(float)
        m = d.mean()
        vals[j] = m * m - (d.var(ddof=1) / inner if inner > 1 else 0.0)
    se = vals.std(ddof=1) / math.sqrt(outer) if outer > 1 else float("nan")
    return float(vals.mean()), float(se)


def _run_jobs(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *job) for job in jobs]
        return [f.result() for f in futures]


# -- replicate sampling ----------------------------------------------------------------


def sample_functional(F: FunctionalSpec, p, A: Ball, N: int, seed: int, workers: int = 1,
                      chunk: int = 500) -> np.ndarray:
    """F(omega_i, A) for replicates with stream seeds ``seed + i``."""
    starts = list(range(0, N, chunk))
    jobs = [(F, p, A.model, A.radius, A.center, seed, s, min(N, s + chunk)) for s in starts]
    parts = _run_jobs(_sample_chunk, jobs, workers) if workers > 1 else [
        _sample_chunk_on(F, p, A, seed, s, min(N, s + chunk)) for s in starts]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def _sample_chunk(F, p, model, radius, center, seed, lo, hi):
    return _sample_chunk_on(F, p, ball(model, radius, center=center), seed, lo, hi)


def _sample_chunk_on(F, p, A, seed, lo, hi):
    U = A.edges
    states = rng.uniforms_matrix([seed + i for i in range(lo, hi)], U.edge_key_hashes()) < check_p(p)
    return evaluate_states(F, U, states)


@dataclass
class VarianceRow:
    r: int
    volume: int
    b_r: int
    edge_boundary: int
    variance: float
    var_per_volume: float
    var_per_edge: float
    double_count_ok: bool


def variance_scaling(F: FunctionalSpec, p, model: GroupModel, radii, N: int, seed: int,
                     workers: int = 1) -> list[VarianceRow]:
    if N < 2:
        raise ValueError("N must be >= 2")
    rows = []
    big = ball(model, max(radii))
    for r in radii:
        A = big.subball(r)
        vals = sample_functional(F, p, A, N, seed, workers)
        var = float(np.var(vals.astype(float), ddof=1))
        b = A.edges.count_b
        _, eb = boundaries(model, A)
        rows.append(VarianceRow(r, len(A), b, eb, var, var / len(A), var / b if b else float("nan"),
                                2 * b == model.degree * len(A) - eb))
    return rows


# -- CLT ------------------------------------------------------------------------------


@dataclass
class CLTReport:
    N: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    ks_stat: float | None
    normalization: str
    degenerate: bool = False
    raw_mean: float = 0.0
    raw_variance: float = 0.0
    samples: np.ndarray | None = field(default=None, repr=False)


def ks_statistic(z: np.ndarray) -> float:
    """sup |F_n - Phi| for the standard normal."""
    z = np.sort(np.asarray(z, dtype=float))
    n = len(z)
    cdf = ndtr(z)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def standardized_report(values: np.ndarray, normalization: str = "ByEmpiricalStd",
                        scale: float | None = None) -> CLTReport:
    x = np.asarray(values, dtype=float)
    N = len(x)
    mu = x.mean()
    sd = x.std(ddof=1)
    if sd == 0:
        return CLTReport(N, 0.0, 0.0, float("nan"), float("nan"), None, normalization, True,
                         float(mu), 0.0, values)
    denom = sd if normalization == "ByEmpiricalStd" else scale
    z = (x - mu) / denom
    zc = z - z.mean()
    m2 = float(np.mean(zc**2))
    skew = float(np.mean(zc**3) / m2**1.5)
    kurt = float(np.mean(zc**4) / m2**2 - 3.0)
    return CLTReport(N, float(z.mean()), float(z.var(ddof=1)), skew, kurt, ks_statistic(z),
                     normalization, False, float(mu), float(sd * sd), values)


def clt_harness(F: FunctionalSpec, p, model: GroupModel, r: int, N: int, seed: int,
                normalization: str = "ByEmpiricalStd", sigma2: float | None = None,
                workers: int = 1) -> CLTReport:
    """Standardize N independent replicates of F(B_r) and compare with N(0, 1).

    ``ByVolume`` divides by sqrt(sigma2 |B_r|) and ``ByEdges`` by
    sqrt(sigma2 b_r), where ``sigma2`` must be the matching estimate.
    """
    if N < 100:
        raise ValueError("N must be >= 100")
    A = ball(model, r)
    vals = sample_functional(F, p, A, N, seed, workers)
    scale = None
    if normalization == "ByVolume":
        scale = math.sqrt(sigma2 * len(A))
    elif normalization == "ByEdges":
        scale = math.sqrt(sigma2 * A.edges.count_b)
    elif normalization != "ByEmpiricalStd":
        raise ValueError(f"unknown normalization {normalization!r}")
    return standardized_report(vals, normalization, scale)


# -- ergodic averages ---------------------------------------------------------------


class EdgeOpenObservable:
    """Indicator that the edge ``{x, x s}`` is open."""

    def __init__(self, s: GroupElement):
        self.s = s

    def __call__(self, model, omega, x, A):
        y = model.multiply(x, self.s)
        if y not in A.index:
            return None
        return Fraction(int(omega.state((x, y))))


class ConstantObservable:
    def __init__(self, c):
        self.c = Fraction(c)

    def __call__(self, model, omega, x, A):
        return self.c


class InverseLocalClusterSize:
    """1 / |C_m(x)|: the open cluster of x inside B_m(x)."""

    def __init__(self, m: int = 1):
        self.m = m

    def __call__(self, model, omega, x, A):
        local = ball(model, self.m, center=x)
        if any(v not in A.index for v in local.vertices):
            return None
        U = local.edges
        from .percolation import partition_from_open

        part = partition_from_open(len(local), U.edges, omega.states(U))
        return Fraction(1, part.sizes[part.component_id[0]])


@dataclass
class ErgodicResult:
    value: Fraction
    used: int
    skipped: int


def ergodic_average(observable, omega: Configuration, A: Ball) -> ErgodicResult:
    """Average of the translated observable over ``A``; translates leaving ``A`` are skipped."""
    total = Fraction(0)
    used = skipped = 0
    for x in A.vertices:
        v = observable(A.model, omega, x, A)
        if v is None:
            skipped += 1
            continue
        total += v
        used += 1
    return ErgodicResult(total / used if used else Fraction(0), used, skipped)
