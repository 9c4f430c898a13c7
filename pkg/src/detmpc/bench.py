"""Graph generators and the experiment runner behind the CLI.

Generators own the only PRNG in the package (numpy's PCG64, seeded per
call); every algorithm downstream is deterministic.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .coloring import PaletteMap, color_reduce, default_palettes, format_coloring
from .config import RunConfig
from .errors import InvalidParams
from .graph import Graph, build_graph, empty_graph
from .oracles import VerificationReport, verify_coloring, verify_matching, verify_mis

KINDS = ("gnp", "random_regular", "grid", "tree", "star", "clique", "disjoint_edges", "blowup")
ALGORITHMS = ("matching", "mis", "coloring")


def _need(params: Mapping[str, Any], *names: str) -> list:
    missing = [k for k in names if k not in params]
    if missing:
        raise InvalidParams(f"missing generator parameter(s): {', '.join(missing)}")
    return [params[k] for k in names]


def _count(x, name: str, low: int = 0) -> int:
    try:
        v = int(x)
    except (TypeError, ValueError):
        raise InvalidParams(f"{name} must be an integer") from None
    if v != float(x) or v < low:
        raise InvalidParams(f"{name} must be an integer >= {low}")
    return v


def _prob(x, name: str = "p") -> float:
    v = float(x)
    if not 0.0 <= v <= 1.0:
        raise InvalidParams(f"{name} must lie in [0, 1]")
    return v


def _gnp_pairs(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    return np.stack([iu[keep], ju[keep]], axis=1)


def _random_regular(n: int, d: int, rng: np.random.Generator, tries: int = 1000) -> np.ndarray:
    """Configuration model, rejecting loops and multi-edges."""
    if d >= n or (n * d) % 2:
        raise InvalidParams(f"no {d}-regular graph on {n} nodes")
    stubs = np.repeat(np.arange(n), d)
    for _ in range(tries):
        perm = rng.permutation(stubs).reshape(-1, 2)
        perm.sort(axis=1)
        if (perm[:, 0] == perm[:, 1]).any():
            continue
        if len(np.unique(perm[:, 0] * n + perm[:, 1])) == len(perm):
            return perm
    raise InvalidParams(f"could not sample a simple {d}-regular graph on {n} nodes")


def _random_tree(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform labelled tree from a random Pruefer sequence."""
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    seq = rng.integers(0, n, n - 2).tolist()
    degree = [1] * n
    for x in seq:
        degree[x] += 1
    import heapq

    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    out = []
    for x in seq:
        leaf = heapq.heappop(leaves)
        out.append((leaf, x))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(leaves, x)
    out.append((heapq.heappop(leaves), heapq.heappop(leaves)))
    return np.sort(np.asarray(out, dtype=np.int64), axis=1)


def generate_graph(kind: str, params: Mapping[str, Any] | None = None, gen_seed: int = 0) -> Graph:
    """Build a graph of the given kind; identical (kind, params, seed) give identical graphs.

    gnp: n, p.  random_regular: n, d.  grid: rows, cols.  tree, star, clique: n.
    disjoint_edges: k.  blowup: n, p, t (each node of a gnp base graph becomes
    t independent copies; copies of adjacent nodes are all joined).
    """
    params = dict(params or {})
    rng = np.random.default_rng(_count(gen_seed, "gen_seed"))
    if kind == "gnp":
        n, p = _need(params, "n", "p")
        n = _count(n, "n")
        return build_graph(_gnp_pairs(n, _prob(p), rng), n)
    if kind == "random_regular":
        n, d = _need(params, "n", "d")
        n, d = _count(n, "n"), _count(d, "d")
        return build_graph(_random_regular(n, d, rng) if d else np.zeros((0, 2), np.int64), n)
    if kind == "grid":
        r, c = (_count(x, name, 1) for x, name in zip(_need(params, "rows", "cols"), ("rows", "cols")))
        ids = np.arange(r * c).reshape(r, c)
        e = [np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], 1), np.stack([ids[:-1].ravel(), ids[1:].ravel()], 1)]
        return build_graph(np.concatenate(e), r * c)
    if kind == "tree":
        n = _count(_need(params, "n")[0], "n", 1)
        return build_graph(_random_tree(n, rng), n)
    if kind == "star":
        n = _count(_need(params, "n")[0], "n", 1)
        leaves = np.arange(1, n)
        return build_graph(np.stack([np.zeros_like(leaves), leaves], 1), n)
    if kind == "clique":
        n = _count(_need(params, "n")[0], "n")
        iu, ju = np.triu_indices(n, 1)
        return build_graph(np.stack([iu, ju], 1), n)
    if kind == "disjoint_edges":
        k = _count(_need(params, "k")[0], "k")
        return build_graph(np.arange(2 * k).reshape(-1, 2), 2 * k)
    if kind == "blowup":
        n, p, t = _need(params, "n", "p", "t")
        n, t = _count(n, "n"), _count(t, "t", 1)
        base = _gnp_pairs(n, _prob(p), rng)
        if len(base) == 0:
            return empty_graph(n * t)
        ca, cb = np.meshgrid(np.arange(t), np.arange(t), indexing="ij")
        a = (base[:, 0, None] * t + ca.ravel()[None, :]).ravel()
        b = (base[:, 1, None] * t + cb.ravel()[None, :]).ravel()
        return build_graph(np.stack([a, b], 1), n * t)
    raise InvalidParams(f"unknown graph kind {kind!r}; expected one of {', '.join(KINDS)}")


def parse_params(items) -> dict[str, str]:
    """["n=10", "p=0.5"] -> {"n": "10", "p": "0.5"}."""
    out = {}
    for it in items or ():
        key, eq, val = it.partition("=")
        if not eq or not key:
            raise InvalidParams(f"expected key=value, got {it!r}")
        out[key.strip()] = val.strip()
    return out


# ---------------------------------------------------------------- experiments

@dataclass
class ExperimentConfig:
    algorithm: str
    graph: Graph | None = None
    input: str | None = None
    kind: str | None = None
    params: dict = field(default_factory=dict)
    gen_seed: int = 0
    palettes: str | PaletteMap | None = None
    run: RunConfig = field(default_factory=RunConfig)
    solution_path: str | None = None
    metrics_path: str | None = None
    certificates_path: str | None = None
    summary_path: str | None = None

    def echo(self) -> dict:
        """Every parameter that can change an output byte (thread count cannot)."""
        r = self.run
        return {"algorithm": self.algorithm, "input": self.input, "kind": self.kind,
                "params": {k: str(v) for k, v in sorted(self.params.items())}, "gen_seed": self.gen_seed,
                "delta": str(r.delta), "space": r.space, "machines": r.machines, "zeta": str(r.zeta),
                "k_select": r.k_select, "k_conc": r.k_conc, "field_p": r.field_p, "field_floor": r.field_floor,
                "cap": r.cap, "work_cap": r.work_cap, "sequence_budget": r.sequence_budget,
                "color_bins": r.color_bins, "color_reserve": r.color_reserve}


@dataclass
class ExperimentOutcome:
    report: VerificationReport
    solution: str
    metrics: str
    certificates: str
    summary: dict
    result: Any = None

    @property
    def ok(self) -> bool:
        return self.report.ok

    @property
    def summary_json(self) -> str:
        return json.dumps(self.summary, indent=1, sort_keys=True) + "\n"


def _metrics_csv(rows: list[dict], echo: dict) -> str:
    buf = io.StringIO()
    for k, v in echo.items():
        buf.write(f"# {k}={json.dumps(v, sort_keys=True)}\n")
    keys: list[str] = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    if keys:
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def load_graph(cfg: ExperimentConfig) -> Graph:
    from .graph import read_edge_list

    if cfg.graph is not None:
        return cfg.graph
    if cfg.input is not None:
        return read_edge_list(cfg.input)
    if cfg.kind is not None:
        return generate_graph(cfg.kind, cfg.params, cfg.gen_seed)
    raise InvalidParams("need a graph, an input file or a generator kind")


def run_experiment(cfg: ExperimentConfig) -> ExperimentOutcome:
    """Run, verify, then write whichever output files were requested."""
    from .coloring import read_palettes
    from .lowdeg import dispatch_matching, dispatch_mis

    if cfg.algorithm not in ALGORITHMS:
        raise InvalidParams(f"unknown algorithm {cfg.algorithm!r}")
    g = load_graph(cfg)
    run = cfg.run
    if cfg.algorithm == "matching":
        res = dispatch_matching(g, run)
        report = verify_matching(g, res.matching)
        solution = "".join(f"{u} {v}\n" for u, v in res.matching.tolist())
        rows, certs, iterations = res.metrics, res.certificates, res.iterations
    elif cfg.algorithm == "mis":
        res = dispatch_mis(g, run)
        report = verify_mis(g, res.nodes)
        solution = "".join(f"{v}\n" for v in np.asarray(res.nodes).tolist())
        rows, certs, iterations = res.metrics, res.certificates, res.iterations
    else:
        if cfg.palettes is None:
            pal = default_palettes(g)
        elif isinstance(cfg.palettes, PaletteMap):
            pal = cfg.palettes
        else:
            pal = read_palettes(cfg.palettes, g.node_count)
        res = color_reduce(g, pal, run)
        report = verify_coloring(g, pal, res.colors)
        solution = format_coloring(res.colors)
        rows, certs, iterations = res.trace, res.certificates, len(res.trace)
    echo = cfg.echo()
    cluster = res.cluster
    summary = {"config": echo, "n": g.node_count, "m": g.m, "rounds": cluster.rounds, "iterations": iterations,
               "max_load": cluster.peak_load, "certificates": len(certs),
               "certificates_hold": all(c.holds for c in certs),
               "verifier": "pass" if report.ok else "fail",
               "witness": None if report.ok else list(report.witness or ())}
    if cfg.algorithm != "coloring":
        summary["route"] = res.extra.get("route", "")
    if cfg.algorithm == "coloring":
        summary["depth"] = res.depth
        summary["repairs"] = [list(r) for r in res.repairs]
        summary["fallbacks"] = [list(f) for f in res.fallbacks]
    out = ExperimentOutcome(report, solution, _metrics_csv(rows, echo),
                            json.dumps([c.to_json() for c in certs], indent=1, sort_keys=True) + "\n", summary, res)
    # files are only finalised for verified solutions
    if report.ok:
        for path, text in ((cfg.solution_path, out.solution), (cfg.metrics_path, out.metrics),
                           (cfg.certificates_path, out.certificates), (cfg.summary_path, out.summary_json)):
            if path:
                Path(path).write_text(text)
    return out
