"""(deg+1)-list colouring.

Low-degree instances go through a reduction to MIS: every node becomes a
clique over its palette entries, and entries carrying the same colour on
adjacent nodes are joined.  Larger instances are split by two derandomized
hash functions (nodes into bins, colours into bins) and colour-reduced
recursively.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .config import RunConfig
from .derand import ProgressCertificate, verified_greedy_search
from .errors import DegreeTooHigh, PaletteDeficit, PaletteTooSmall
from .graph import Graph, build_graph, ceil_power
from .hashing import HashFamily, smallest_prime_at_least
from .mpc import ClusterState
from .objectives import SquaredDeviationObjective
from .sparsify import grouped_entries


@dataclass(frozen=True)
class PaletteMap:
    """Per-node sorted colour tuples, indexed by node id."""

    lists: tuple[tuple[int, ...], ...]

    @classmethod
    def of(cls, palettes, n: int | None = None) -> "PaletteMap":
        if isinstance(palettes, PaletteMap):
            return palettes
        if isinstance(palettes, Mapping):
            n = (max(palettes, default=-1) + 1) if n is None else n
            rows = [palettes.get(v, ()) for v in range(n)]
        else:
            rows = list(palettes)
        out = []
        for row in rows:
            vals = sorted(int(c) for c in row)
            if len(set(vals)) != len(vals):
                raise ValueError("palette colours must be distinct")
            out.append(tuple(vals))
        return cls(tuple(out))

    @classmethod
    def uniform(cls, n: int, colors: Iterable[int]) -> "PaletteMap":
        row = tuple(sorted(int(c) for c in colors))
        return cls((row,) * n)

    def __len__(self) -> int:
        return len(self.lists)

    def __getitem__(self, v: int) -> tuple[int, ...]:
        return self.lists[v]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(r) for r in self.lists], dtype=np.int64)

    def universe(self, nodes: Iterable[int] | None = None) -> np.ndarray:
        rows = self.lists if nodes is None else [self.lists[v] for v in nodes]
        return np.unique(np.fromiter((c for r in rows for c in r), dtype=np.int64))

    def replace(self, rows: Mapping[int, Iterable[int]]) -> "PaletteMap":
        new = list(self.lists)
        for v, r in rows.items():
            new[v] = tuple(sorted(int(c) for c in r))
        return PaletteMap(tuple(new))

    def format(self) -> str:
        return "".join(f"{v}: {','.join(map(str, r))}\n" for v, r in enumerate(self.lists))


def parse_palettes(text: str, n: int | None = None) -> PaletteMap:
    rows: dict[int, list[int]] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, tail = line.partition(":")
        rows[int(head)] = [int(c) for c in tail.replace(" ", "").split(",") if c]
    return PaletteMap.of(rows, n)


def read_palettes(path: str | Path, n: int | None = None) -> PaletteMap:
    return parse_palettes(Path(path).read_text(), n)


def format_coloring(colors: np.ndarray) -> str:
    return "".join(f"{v} {int(c)}\n" for v, c in enumerate(colors))


def default_palettes(g: Graph) -> PaletteMap:
    """{0, .., deg(v)} for every node."""
    return PaletteMap(tuple(tuple(range(g.degree(v) + 1)) for v in range(g.node_count)))


def _active_degrees(g: Graph, active: np.ndarray) -> np.ndarray:
    if g.m == 0:
        return np.zeros(g.node_count, dtype=np.int64)
    keep = active[g.edges[:, 0]] & active[g.edges[:, 1]]
    return np.bincount(g.edges[keep].ravel(), minlength=g.node_count)


def update_palettes(palettes: PaletteMap, colors: np.ndarray, g: Graph) -> PaletteMap:
    """Uncoloured nodes drop the colours taken by coloured neighbours."""
    colors = np.asarray(colors)
    rows = {}
    for v in np.flatnonzero(colors < 0).tolist():
        nb = g.neighbors(v)
        taken = set(colors[nb][colors[nb] >= 0].tolist())
        if taken:
            rows[v] = [c for c in palettes[v] if c not in taken]
    return palettes.replace(rows)


def low_threshold_exceeded(size: int, n: int, config: RunConfig) -> bool:
    """size > n^(15 delta), exactly."""
    return size ** config.k > n ** 15


def bin_counts(n: int, config: RunConfig) -> tuple[int, int]:
    reserve = config.color_reserve if config.color_reserve is not None else max(1, ceil_power(n, 1, config.k))
    if config.color_bins is not None:
        return config.color_bins, reserve
    return max(2, ceil_power(n, 3, config.k), reserve + 1), reserve


# ---------------------------------------------------------------- MIS reduction

def mis_reduction_color(g: Graph, palettes, config: RunConfig | None = None, cluster: ClusterState | None = None,
                        active: np.ndarray | None = None, n_ref: int | None = None,
                        check_degree: bool = True) -> np.ndarray:
    """Colour the active nodes through an MIS of the palette-clique graph.

    Returns a colour array with -1 on inactive nodes.  Palettes are trimmed
    to deg + 1 entries first, which keeps the cliques small.  The reduction is
    correct at any degree; ``check_degree`` only guards the space budget.
    """
    from .lowdeg import dispatch_mis

    config = config or RunConfig()
    cluster = cluster or config.new_cluster()
    pal = PaletteMap.of(palettes, g.node_count)
    n = g.node_count
    active = np.ones(n, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    deg = _active_degrees(g, active)
    nodes = np.flatnonzero(active)
    n_ref = n if n_ref is None else n_ref
    if check_degree and len(nodes) and low_threshold_exceeded(int(deg[nodes].max()), n_ref, config):
        raise DegreeTooHigh(f"max degree {int(deg[nodes].max())} exceeds n^(15 delta)")
    slot_node, slot_color = [], []
    start = np.zeros(n + 1, dtype=np.int64)
    for v in nodes.tolist():
        need = int(deg[v]) + 1
        if len(pal[v]) < need:
            raise PaletteTooSmall(f"node {v}: palette {len(pal[v])} < degree + 1 = {need}")
        row = pal[v][:need]
        slot_node.extend([v] * need)
        slot_color.extend(row)
    slot_node = np.asarray(slot_node, dtype=np.int64)
    slot_color = np.asarray(slot_color, dtype=np.int64)
    counts = np.bincount(slot_node, minlength=n) if len(slot_node) else np.zeros(n, dtype=np.int64)
    np.cumsum(counts, out=start[1:])
    N = len(slot_node)
    pairs = []
    for size in np.unique(counts[nodes]).tolist() if len(nodes) else []:
        if size < 2:
            continue
        who = nodes[counts[nodes] == size]
        iu, ju = np.triu_indices(size, 1)
        base = start[who][:, None]
        pairs.append(np.stack([(base + iu).ravel(), (base + ju).ravel()], axis=1))
    if g.m:
        keep = active[g.edges[:, 0]] & active[g.edges[:, 1]]
        ea, eb = g.edges[keep, 0], g.edges[keep, 1]
        C = np.unique(slot_color)
        cidx = np.searchsorted(C, slot_color)
        key = slot_node * len(C) + cidx
        order = np.argsort(key)
        skey = key[order]
        # every slot of a, looked up among b's slots
        rep = counts[ea]
        src_slot = np.concatenate([np.arange(start[a], start[a + 1]) for a in ea.tolist()]) if len(ea) else np.zeros(0, np.int64)
        dst_node = np.repeat(eb, rep)
        want = dst_node * len(C) + cidx[src_slot]
        pos = np.minimum(np.searchsorted(skey, want), max(len(skey) - 1, 0))
        hit = skey[pos] == want if len(skey) else np.zeros(0, bool)
        pairs.append(np.stack([src_slot[hit], order[pos[hit]]], axis=1))
    edges = np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)
    edges = np.sort(edges, axis=1)
    red = build_graph(edges, N)
    res = dispatch_mis(red, config, cluster)
    chosen = np.asarray(res.nodes, dtype=np.int64)
    per_node = np.bincount(slot_node[chosen], minlength=n)
    assert np.array_equal(per_node[nodes], np.ones(len(nodes), dtype=np.int64)), "MIS does not pick exactly one entry per clique"
    colors = np.full(n, -1, dtype=np.int64)
    colors[slot_node[chosen]] = slot_color[chosen]
    if g.m:
        keep = active[g.edges[:, 0]] & active[g.edges[:, 1]]
        assert not (colors[g.edges[keep, 0]] == colors[g.edges[keep, 1]]).any(), "reduction produced a monochromatic edge"
    return colors


# ---------------------------------------------------------------- ColorReduce

@dataclass
class ColoringResult:
    colors: np.ndarray
    trace: list[dict]
    certificates: list[ProgressCertificate]
    cluster: ClusterState
    repairs: list[tuple[int, int, int, int]] = field(default_factory=list)  # (depth, node, |Pal'|, |N_1|)
    fallbacks: list[tuple[int, str, int]] = field(default_factory=list)  # (depth, reason, nodes)

    @property
    def depth(self) -> int:
        return max((t["depth"] for t in self.trace), default=0)

    @property
    def rounds(self) -> int:
        return self.cluster.rounds

    def trace_json(self) -> str:
        return json.dumps({"calls": self.trace, "repairs": [list(r) for r in self.repairs],
                           "fallbacks": [list(f) for f in self.fallbacks]}, indent=1, sort_keys=True)


def _bin_field(points: int, config: RunConfig) -> int:
    """Bins only need p above the label range; the sampling floor would just slow the search."""
    if config.field_p is not None:
        return config.field_for(points)
    return smallest_prime_at_least(points + 2)


def _thresholds(p: int, bins: int, upto: int) -> list[int]:
    """tau_b = ceil(b p / bins): h < tau_b iff floor(h bins / p) < b."""
    return [-(-b * p // bins) for b in range(1, upto + 1)]


def _select_seed(family: HashFamily, objs: list, config: RunConfig, cluster: ClusterState, label: str,
                 certs: list) -> tuple[int, ...]:
    if not objs:
        return (0,) * family.k
    cert = verified_greedy_search(family, objs, options=config.engine(), cluster=cluster, label=label)
    certs.append(cert)
    return cert.seed.coefficients


def _bin_nodes(g: Graph, cand: np.ndarray, bins: int, reserve: int, config: RunConfig, cluster, depth, certs):
    """Node bins via h1 over node ids; objectives keep every node's neighbour count below each bin boundary near its mean."""
    n = g.node_count
    family = HashFamily.for_domain(config.k_conc, n + 1, p=_bin_field(n, config))
    keep = cand[g.edges[:, 0]] & cand[g.edges[:, 1]] if g.m else np.zeros(0, bool)
    e = g.edges[keep]
    owner = np.concatenate([e[:, 0], e[:, 1]])
    item = np.concatenate([e[:, 1], e[:, 0]])
    mo, mi = grouped_entries(owner, item)
    labels = np.arange(n, dtype=np.int64)
    objs = [SquaredDeviationObjective(family, t, labels, mo, mi) for t in _thresholds(family.p, bins, bins - reserve)
            if len(mi)]
    cluster.charge("prefix_sum", 1, len(mi))
    seed = _select_seed(family, objs, config, cluster, f"node bins depth {depth}", certs)
    h = family.field_values(np.asarray([seed], dtype=np.int64), labels + 1)[0]
    return (h * bins) // family.p


def _bin_colors(pal: PaletteMap, v1: np.ndarray, beta: np.ndarray, cbins: int, config: RunConfig, cluster, depth, certs):
    """Colour bins via h2; per V1 node, the palette count at both edges of its own bin is steered to its mean."""
    universe = pal.universe(v1.tolist())
    if cbins == 1 or len(universe) == 0:
        return universe, np.zeros(len(universe), dtype=np.int64)
    family = HashFamily.for_domain(config.k_conc, len(universe) + 1, p=_bin_field(len(universe), config))
    labels = np.arange(len(universe), dtype=np.int64)
    taus = _thresholds(family.p, cbins, cbins)
    objs = []
    for b in range(cbins):
        who = v1[beta[v1] == b]
        if len(who) == 0:
            continue
        owner = np.repeat(who, [len(pal[v]) for v in who.tolist()])
        item = np.searchsorted(universe, np.fromiter((c for v in who.tolist() for c in pal[v]), dtype=np.int64))
        for t in ([taus[b - 1]] if b > 0 else []) + ([taus[b]] if b < cbins - 1 else []):
            objs.append(SquaredDeviationObjective(family, t, labels, owner, item))
    seed = _select_seed(family, objs, config, cluster, f"colour bins depth {depth}", certs)
    h = family.field_values(np.asarray([seed], dtype=np.int64), labels + 1)[0]
    return universe, (h * cbins) // family.p


def color_reduce(g: Graph, palettes, config: RunConfig | None = None, cluster: ClusterState | None = None,
                 repair: bool = True) -> ColoringResult:
    """Proper list colouring with every colour taken from the node's palette."""
    config = config or RunConfig()
    cluster = cluster or config.new_cluster()
    pal = PaletteMap.of(palettes, g.node_count)
    n = g.node_count
    cluster.layout(n + g.m + int(pal.sizes.sum()), "distribute")
    colors = np.full(n, -1, dtype=np.int64)
    out = ColoringResult(colors, [], [], cluster)
    limit = -(-config.k // 2) + 1
    _reduce(g, pal, np.ones(n, dtype=bool), 0, config, cluster, out, repair, limit)
    assert (colors >= 0).all(), "some node left uncoloured"
    return out


def _reduce(g: Graph, pal: PaletteMap, active: np.ndarray, depth: int, config: RunConfig, cluster: ClusterState,
            out: ColoringResult, repair: bool, limit: int) -> None:
    assert depth <= limit, f"recursion depth {depth} exceeds {limit}"
    n = g.node_count
    if not active.any():
        return
    deg = _active_degrees(g, active)
    for v in np.flatnonzero(active).tolist():
        if len(pal[v]) < deg[v] + 1:
            raise PaletteTooSmall(f"node {v}: palette {len(pal[v])} < degree + 1 = {deg[v] + 1}")
    # only deg + 1 colours are ever needed
    pal = pal.replace({v: pal[v][:deg[v] + 1] for v in np.flatnonzero(active).tolist()})
    big = np.array([active[v] and low_threshold_exceeded(len(pal[v]), n, config) for v in range(n)], dtype=bool)
    v0 = active & ~big
    bins, reserve = bin_counts(n, config)
    row = {"depth": depth, "V0": int(v0.sum()), "V1": 0, "V2": 0, "repaired": 0, "bins": bins, "reserve": reserve,
           "max_degree": int(deg[active].max(initial=0)), "max_degree_g1": 0, "max_degree_g2": 0, "fallback": ""}
    out.trace.append(row)
    if not big.any():
        out.colors[active] = mis_reduction_color(g, pal, config, cluster, active, n)[active]
        return
    if depth == limit:
        _direct(g, pal, active, depth, "depth limit", config, cluster, out, row)
        return
    beta = _bin_nodes(g, big, bins, reserve, config, cluster, depth, out.certificates)
    cbins = bins - reserve
    v1 = big & (beta < cbins)
    v2 = big & ~v1
    v1_ids = np.flatnonzero(v1)
    universe, cbeta = _bin_colors(pal, v1_ids, beta, cbins, config, cluster, depth, out.certificates)
    color_bin = dict(zip(universe.tolist(), cbeta.tolist()))
    work = {v: [c for c in pal[v] if color_bin[c] == beta[v]] for v in v1_ids.tolist()}
    same = np.zeros(g.m, dtype=bool)
    if g.m:
        a, b = g.edges[:, 0], g.edges[:, 1]
        same = v1[a] & v1[b] & (beta[a] == beta[b])
    n1 = np.bincount(g.edges[same].ravel(), minlength=n) if g.m else np.zeros(n, np.int64)
    deficit = [v for v in v1_ids.tolist() if len(work[v]) <= n1[v]]
    for v in deficit:
        if not repair:
            raise PaletteDeficit(v)
        out.repairs.append((depth, v, len(work[v]), int(n1[v])))
    if deficit:
        v1[deficit] = False
        v2[deficit] = True
        row["repaired"] = len(deficit)
        if g.m:
            same &= v1[g.edges[:, 0]] & v1[g.edges[:, 1]]
    if not v1.any() and not v0.any():
        # every node went to the reserve bins: G2 would repeat this very instance
        _direct(g, pal, active, depth, "no progress", config, cluster, out, row)
        return
    g1 = g.edge_subgraph(same)
    row["V1"], row["V2"] = int(v1.sum()), int(v2.sum())
    row["max_degree_g1"] = int(_active_degrees(g1, v1)[v1].max(initial=0))
    row["max_degree_g2"] = int(_active_degrees(g, v2)[v2].max(initial=0))
    cluster.charge("exchange", 1, int(big.sum()))
    # G1 first, with restricted palettes; bins are disconnected from each other
    _reduce(g1, pal.replace({v: work[v] for v in np.flatnonzero(v1).tolist()}), v1, depth + 1, config, cluster, out,
            repair, limit)
    _check_proper(g, out.colors)
    if v0.any():
        upd = update_palettes(pal, out.colors, g)
        out.colors[v0] = mis_reduction_color(g.induced(v0), upd, config, cluster, v0, n)[v0]
        _check_proper(g, out.colors)
    if v2.any():
        _reduce(g, update_palettes(pal, out.colors, g), v2, depth + 1, config, cluster, out, repair, limit)
        _check_proper(g, out.colors)


def _direct(g: Graph, pal: PaletteMap, active: np.ndarray, depth: int, reason: str, config: RunConfig,
            cluster: ClusterState, out: ColoringResult, row: dict) -> None:
    row["fallback"] = reason
    out.fallbacks.append((depth, reason, int(active.sum())))
    out.colors[active] = mis_reduction_color(g, pal, config, cluster, active, g.node_count, check_degree=False)[active]
    _check_proper(g, out.colors)


def _check_proper(g: Graph, colors: np.ndarray) -> None:
    if g.m:
        a, b = colors[g.edges[:, 0]], colors[g.edges[:, 1]]
        assert not ((a >= 0) & (a == b)).any(), "monochromatic edge"
