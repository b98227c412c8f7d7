"""Command line entry point: config parsing, dispatch, CSV and manifest output."""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, rng
from .complexes import RuleDescriptor, build_from_graph, equivariance_check, locality_audit
from .functionals import (FunctionalSpec, _run_jobs, clt_harness, estimate_sigma2)
from .geometry import SizeLimitError, ball, growth_profile
from .groups import GroupModel
from .homology import betti_vector
from .ordering import EdgeOrderContext, connected_prefix_order, fundamental_set
from .percolation import ParameterError, batch_labels

SUBCOMMANDS = ("geometry", "percolate", "homology", "sigma2", "clt", "audit")
OUTPUT_ENV = "PERCTOPO_OUTPUT_DIR"

SCHEMAS = {
    "geometry": ["r", "f", "nabla", "M", "g", "folner_deficiency"],
    "percolate": ["replicate", "K", "largest_cluster", "open_fraction"],
    "homology": ["replicate", "beta", "euler"],
    "sigma2": ["entry", "coset", "generator", "edge", "mean", "se"],
    "clt": ["replicate", "value", "z"],
    "audit": ["check", "model", "passed", "detail"],
}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ModelConfig:
    name: str = "Zd"
    d: int = 2
    m: int = 2


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    p: float = 0.3
    r: int = 6
    radii: list[int] = field(default_factory=lambda: [2, 4, 6])
    functional: str = "ClusterCount"
    rule: str = "clique"
    n: int = 1
    seed: int = 0
    samples: int = 100
    outer: int = 200
    inner: int = 50
    window: int = 6
    stab_radius: int = 2
    workers: int = 1
    output_dir: str = "out"

    def group(self) -> GroupModel:
        return GroupModel.from_name(self.model.name, self.model.d, self.model.m)

    def rule_descriptor(self) -> RuleDescriptor:
        return RuleDescriptor.parse(self.rule, dim_cap=self.n + 1)

    def functional_spec(self) -> FunctionalSpec:
        if self.functional == "Betti":
            return FunctionalSpec.betti(self.rule_descriptor(), self.n)
        return FunctionalSpec(self.functional)


_INT_RANGES = {
    "r": (0, 10**6), "n": (0, 8), "samples": (1, 10**8), "outer": (1, 10**8),
    "inner": (1, 10**8), "window": (1, 10**4), "stab_radius": (1, 10**4),
    "workers": (1, 1024), "seed": (0, 2**64 - 1),
}


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.model.name.lower() not in ("zd", "z", "zdtimescyclic", "heisenberg"):
        raise ConfigError("model.name", f"unknown model {cfg.model.name!r}")
    if cfg.model.d < 1:
        raise ConfigError("model.d", "must be >= 1")
    if cfg.model.m < 2:
        raise ConfigError("model.m", "must be >= 2")
    if not isinstance(cfg.p, (int, float)) or not 0 < cfg.p < 1:
        raise ConfigError("p", f"must lie in (0, 1), got {cfg.p}")
    for key, (lo, hi) in _INT_RANGES.items():
        v = getattr(cfg, key)
        if not isinstance(v, int) or isinstance(v, bool) or not lo <= v <= hi:
            raise ConfigError(key, f"must be an integer in [{lo}, {hi}], got {v!r}")
    if not isinstance(cfg.radii, list) or not cfg.radii:
        raise ConfigError("radii", "must be a nonempty list")
    if any(not isinstance(x, int) or x < 0 for x in cfg.radii) or sorted(set(cfg.radii)) != cfg.radii:
        raise ConfigError("radii", "must be increasing nonnegative integers")
    try:
        cfg.functional_spec()
    except ValueError as exc:
        raise ConfigError("functional", str(exc)) from None
    try:
        cfg.rule_descriptor()
    except ValueError as exc:
        raise ConfigError("rule", str(exc)) from None
    return cfg


def config_from_dict(data: dict, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    known = {f.name for f in fields(RunConfig)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(key, "unknown key")
        if key == "model":
            if not isinstance(value, dict):
                raise ConfigError("model", "must be an object")
            mk = {f.name for f in fields(ModelConfig)}
            for sub, v in value.items():
                if sub not in mk:
                    raise ConfigError(f"model.{sub}", "unknown key")
                setattr(cfg.model, sub, v)
        else:
            setattr(cfg, key, value)
    return _validate(cfg)


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"malformed JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("<document>", "top level must be an object")
    return config_from_dict(data)


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(asdict(cfg), sort_keys=True, separators=(",", ":"))


def config_hash(cfg: RunConfig) -> str:
    data = asdict(cfg)
    data.pop("output_dir")
    data.pop("workers")
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# -- subcommands ------------------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, Fraction):
        return f"{float(x):.12g}"
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def run_geometry(cfg: RunConfig):
    table = growth_profile(cfg.group(), max(cfg.r, 2))
    rows = [[_fmt(row[c]) for c in SCHEMAS["geometry"]] for row in table.rows()]
    summary = {"r_max": table.r_max, "c_base": table.c_base, "partial": table.partial,
               "tail_window": list(table.tail_window)}
    return rows, summary


def _percolate_chunk(p, model, r, seed, lo, hi):
    A = ball(model, r)
    U = A.edges
    states = rng.uniforms_matrix([seed + i for i in range(lo, hi)], U.edge_key_hashes()) < p
    labels, counts = batch_labels(U, states)
    rows = []
    for k in range(hi - lo):
        sizes = np.bincount(labels[k])
        frac = states[k].mean() if states.shape[1] else 0.0
        rows.append([lo + k, int(counts[k]), int(sizes.max()), _fmt(float(frac))])
    return rows


def _chunks(N, workers, size=250):
    step = max(1, min(size, -(-N // max(workers, 1))))
    return [(lo, min(N, lo + step)) for lo in range(0, N, step)]


def run_percolate(cfg: RunConfig):
    model = cfg.group()
    jobs = [(cfg.p, model, cfg.r, cfg.seed, lo, hi) for lo, hi in _chunks(cfg.samples, cfg.workers)]
    rows = [row for part in _run_jobs(_percolate_chunk, jobs, cfg.workers) for row in part]
    K = np.array([row[1] for row in rows], dtype=float)
    summary = {"mean_K": _fmt(float(K.mean())),
               "var_K": _fmt(float(K.var(ddof=1)) if len(K) > 1 else 0.0)}
    return rows, summary


def _homology_chunk(p, model, r, rule, seed, lo, hi):
    A = ball(model, r)
    U = A.edges
    states = rng.uniforms_matrix([seed + i for i in range(lo, hi)], U.edge_key_hashes()) < p
    rows = []
    for k in range(hi - lo):
        cx = build_from_graph(rule, len(A), [e for e, o in zip(U.edges, states[k]) if o])
        bv = betti_vector(cx)
        rows.append([lo + k, " ".join(map(str, bv.beta[: rule.dim_cap])), bv.euler])
    return rows


def run_homology(cfg: RunConfig):
    model = cfg.group()
    rule = cfg.rule_descriptor()
    jobs = [(cfg.p, model, cfg.r, rule, cfg.seed, lo, hi)
            for lo, hi in _chunks(cfg.samples, cfg.workers, 50)]
    rows = [row for part in _run_jobs(_homology_chunk, jobs, cfg.workers) for row in part]
    return rows, {"rule": rule.label, "degrees": list(range(rule.dim_cap))}


def run_sigma2(cfg: RunConfig):
    model = cfg.group()
    ctx = EdgeOrderContext(model)
    est = estimate_sigma2(cfg.functional_spec(), cfg.p, ctx, cfg.window, cfg.outer, cfg.inner,
                          cfg.stab_radius, cfg.seed, workers=cfg.workers)
    rows = []
    for k, (entry, (m, se)) in enumerate(zip(ctx.fundamental.entries, est.per_edge)):
        rows.append([k, entry.coset, repr(entry.generator), f"{entry.edge[0]!r}-{entry.edge[1]!r}",
                     _fmt(m), _fmt(se)])
    summary = {"sigma2": _fmt(est.sigma2), "sigma2_se": _fmt(est.sigma2_se),
               "sigma2_b": _fmt(est.sigma2_b), "sigma2_b_se": _fmt(est.sigma2_b_se),
               "window_radius": est.window_radius, "stab_radius": est.stabilization_radius_used,
               "outer": est.outer_samples, "inner": est.inner_samples}
    return rows, summary


def run_clt(cfg: RunConfig):
    rep = clt_harness(cfg.functional_spec(), cfg.p, cfg.group(), cfg.r, cfg.samples, cfg.seed,
                      workers=cfg.workers)
    vals = np.asarray(rep.samples, dtype=float)
    sd = np.sqrt(rep.raw_variance)
    z = (vals - rep.raw_mean) / sd if sd > 0 else np.zeros_like(vals)
    rows = [[i, int(v), _fmt(float(zz))] for i, (v, zz) in enumerate(zip(vals, z))]
    summary = {"N": rep.N, "degenerate": rep.degenerate, "ks_stat": _fmt(rep.ks_stat),
               "skewness": _fmt(rep.skewness), "excess_kurtosis": _fmt(rep.excess_kurtosis),
               "normalization": rep.normalization}
    return rows, summary


def audit_rows(seed: int = 0, models=None) -> list[list]:
    from .ordering import preimage_counts

    models = models or [GroupModel.Zd(2), GroupModel.ZdTimesCyclic(1, 2), GroupModel.Heisenberg()]
    rows = []
    rnd = np.random.default_rng(seed)
    for model in models:
        ctx = EdgeOrderContext(model)
        B = ball(model, 3)
        V = B.vertices
        strict = all(not ctx.vertex_less(v, v) for v in V) and all(
            ctx.vertex_less(a, b) != ctx.vertex_less(b, a) for a in V for b in V if a != b)
        rows.append(["vertex_order_strict_total", model.name, strict, f"|B_3|={len(V)}"])
        ok = True
        H = [g for g in ball(model, 4).vertices if model.in_subgroup(g)]
        for _ in range(50):
            h = H[int(rnd.integers(len(H)))]
            a, b = V[int(rnd.integers(len(V)))], V[int(rnd.integers(len(V)))]
            ok &= ctx.vertex_less(a, b) == ctx.vertex_less(model.multiply(h, a), model.multiply(h, b))
        rows.append(["vertex_order_H_invariant", model.name, ok, "50 translations"])
        try:
            fundamental_set(ctx, verify_radius=4)
            phi_ok = True
        except Exception:  # noqa: BLE001 - reported, not raised
            phi_ok = False
        counts = preimage_counts(model, ball(model, 4))
        rows.append(["phi_two_to_one", model.name, phi_ok, f"{len(counts)} edges"])
        order = connected_prefix_order(model, B)
        U = B.edges
        touched = set()
        prefix_ok = sorted(order) == list(range(len(U)))
        for k in order:
            u, v = U.edges[k]
            if touched and u not in touched and v not in touched:
                prefix_ok = False
            touched.update((u, v))
        rows.append(["connected_prefix_order", model.name, prefix_ok, f"{len(order)} edges"])
        for rule in (RuleDescriptor("clique", 2), RuleDescriptor("neighbor", 2), RuleDescriptor("path", 2, 2)):
            rep = equivariance_check(rule, model, 5, seed=seed, radius=2)
            rows.append([f"equivariance_{rule.label}", model.name, rep.passed, rep.witness or ""])
    for rule in (RuleDescriptor("clique", 2), RuleDescriptor("neighbor", 2), RuleDescriptor("path", 2, 2)):
        rep = locality_audit(rule, 5, seed)
        rows.append([f"locality_{rule.label}", "Z^2", rep.passed, f"T={rep.measured_T}"])
    return rows


def run_audit(cfg: RunConfig):
    rows = audit_rows(cfg.seed)
    return rows, {"all_passed": all(r[2] for r in rows)}


RUNNERS = {
    "geometry": run_geometry, "percolate": run_percolate, "homology": run_homology,
    "sigma2": run_sigma2, "clt": run_clt, "audit": run_audit,
}


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_bytes(buf.getvalue().encode("utf-8"))


def run(subcommand: str, cfg: RunConfig) -> int:
    """Write ``results.csv`` and ``manifest.json`` into ``cfg.output_dir``."""
    if subcommand not in RUNNERS:
        raise ConfigError("subcommand", f"unknown subcommand {subcommand!r}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rows, summary = RUNNERS[subcommand](cfg)
    write_csv(out / "results.csv", SCHEMAS[subcommand], rows)
    manifest = {
        "subcommand": subcommand,
        "config": asdict(cfg),
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "version": __version__,
        "duration_s": round(time.perf_counter() - t0, 3),
        "columns": SCHEMAS[subcommand],
        "summary": summary,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    if subcommand == "audit" and not summary["all_passed"]:
        return 1
    return 0


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="perctopo", description=__doc__)
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="JSON config file; flags override its values")
    ap.add_argument("--model")
    ap.add_argument("--d", type=int)
    ap.add_argument("--m", type=int)
    ap.add_argument("--p", type=float)
    ap.add_argument("--r", type=int)
    ap.add_argument("--radii", type=lambda s: [int(x) for x in s.split(",") if x.strip()])
    ap.add_argument("--functional")
    ap.add_argument("--rule")
    ap.add_argument("--n", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--outer", type=int)
    ap.add_argument("--inner", type=int)
    ap.add_argument("--window", type=int)
    ap.add_argument("--stab-radius", dest="stab_radius", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--output-dir", dest="output_dir")
    return ap


def _fail(category: str, message: str, code: int) -> int:
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        data = json.loads(Path(args.config).read_text()) if args.config else {}
        if not isinstance(data, dict):
            raise ConfigError("<document>", "top level must be an object")
        model = dict(data.get("model", {}))
        for key in ("model", "d", "m"):
            v = getattr(args, key)
            if v is not None:
                model["name" if key == "model" else key] = v
        if model:
            data["model"] = model
        if "output_dir" not in data and os.environ.get(OUTPUT_ENV):
            data["output_dir"] = os.environ[OUTPUT_ENV]
        for f in fields(RunConfig):
            if f.name == "model":
                continue
            v = getattr(args, f.name, None)
            if v is not None:
                data[f.name] = v
        cfg = config_from_dict(data)
    except ConfigError as exc:
        return _fail("config", str(exc), 2)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail("config", str(exc), 2)
    try:
        return run(args.subcommand, cfg)
    except SizeLimitError as exc:
        return _fail("resource", str(exc), 3)
    except (ParameterError, ValueError) as exc:
        return _fail("parameter", str(exc), 4)


if __name__ == "__main__":
    sys.exit(main())
