"""Deterministic maximal matching.

Each iteration picks the heavy degree class, thins its candidate edges E_0 by
derandomized sampling until every degree is at most 2 n^(4 delta), then picks
the edges whose priority is a local minimum among adjacent candidate edges.
Matched nodes leave the graph and the loop repeats until no edge remains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .config import RunConfig
from .derand import ProgressCertificate, find_seed
from .graph import Graph, HeavySelection, class_thresholds, greedy_edge_coloring, select_heavy_class
from .hashing import HashFamily
from .mpc import ClusterState, two_hop_ball_words
from .objectives import LocalMinUnionObjective
from .sparsify import (SparsifyResult, StageRecord, derandomize_stage, good_group_count, grouped_entries,
                       max_scaled, min_scaled, power_below, power_exceeds, sampling_threshold)


@dataclass(frozen=True)
class EdgeLabels:
    """Proper edge colouring of the input graph, looked up by endpoint pair."""

    n: int
    keys: np.ndarray
    colors: np.ndarray

    @classmethod
    def of(cls, g: Graph) -> "EdgeLabels":
        keys = g.edges[:, 0] * g.node_count + g.edges[:, 1]
        return cls(g.node_count, keys, greedy_edge_coloring(g))

    @property
    def count(self) -> int:
        return int(self.colors.max()) + 1 if self.colors.size else 1

    def lookup(self, g: Graph) -> np.ndarray:
        keys = g.edges[:, 0] * self.n + g.edges[:, 1]
        pos = np.searchsorted(self.keys, keys)
        assert np.array_equal(self.keys[pos], keys), "edge not present in the labelled graph"
        return self.colors[pos]


def _incident_slots(g: Graph, edge_mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    src = np.repeat(np.arange(g.node_count), g.degrees)
    keep = edge_mask[g.inc]
    return src[keep], g.inc[keep]


def _x_slots(g: Graph, sel: HeavySelection, edge_mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(v, e) for v in B and e in X(v), restricted to the mask."""
    inb = np.zeros(g.node_count, dtype=bool)
    inb[sel.B] = True
    src = np.repeat(np.arange(g.node_count), g.degrees)
    side = (g.edges[g.inc, 1] == src).astype(np.int64)
    keep = inb[src] & sel.x_low[g.inc, side] & edge_mask[g.inc]
    return src[keep], g.inc[keep]


def sparsify_edges(g: Graph, sel: HeavySelection, config: RunConfig, cluster: ClusterState,
                   labels: np.ndarray) -> SparsifyResult:
    """Thin E_0 over i - 4 sampling stages (none when i <= 4).

    ``labels`` are the hashing labels of g's edges.  Returns E* as edge ids.
    """
    e0 = np.zeros(g.m, dtype=bool)
    e0[sel.seed_edges] = True
    stages = sel.i - 4
    if stages <= 0 or not e0.any():
        return SparsifyResult(np.flatnonzero(e0))
    n, k = g.node_count, config.k
    T = class_thresholds(n, config.delta)
    t3, t4 = int(T[3]), int(T[4])
    family = HashFamily.for_domain(config.k_conc, int(labels.max()) + 2, p=config.field_for(int(labels.max()) + 1))
    tau = sampling_threshold(n, k, family.p)
    xs_v, xs_e = _x_slots(g, sel, e0)
    x0 = np.bincount(xs_v, minlength=n)
    d0 = np.bincount(g.edges[e0].ravel(), minlength=n)
    cur = e0.copy()
    out = SparsifyResult(np.flatnonzero(e0))
    for j in range(1, stages + 1):
        a_v, a_e = _incident_slots(g, cur)
        b_v, b_e = _x_slots(g, sel, cur)
        cluster.chunk_loads(np.bincount(a_v, minlength=n), t4)
        cluster.chunk_loads(np.bincount(b_v, minlength=n), t4)
        am, ai = grouped_entries(a_v, a_e)
        bm, bi = grouped_entries(b_v + n, b_e)
        hi_a = np.array([t3 + max_scaled(int(d0[v]), n, j, k, 1 + config.zeta) for v in range(n)], dtype=np.int64)
        lo_b = np.array([min_scaled(int(x0[v]), n, j, k, 1 - config.zeta) for v in range(n)], dtype=np.int64)

        def bounds(machines, part):
            if part == 0:
                return np.zeros(len(machines), dtype=np.int64), hi_a[machines]
            return lo_b[machines - n], np.full(len(machines), np.iinfo(np.int64).max)

        cert, keep, objs = derandomize_stage(family, tau, labels, [(am, ai, None), (bm, bi, None)],
                                             config.engine(), cluster, f"edge-stage {j}", bounds,
                                             config.search_budget)
        cluster.charge("prefix_sum", 1, len(am) + len(bm))  # per-group counts
        before = int(cur.sum())
        cur &= keep
        dj = np.bincount(g.edges[cur].ravel(), minlength=n)
        xj = np.bincount(_x_slots(g, sel, cur)[0], minlength=n)
        vi = sum(power_exceeds(int(dj[v]) - t3, int(d0[v]), n, j, k, 1 + config.zeta)
                 for v in np.flatnonzero(dj > t3))
        vii = sum(power_below(int(xj[v]), int(x0[v]), n, j, k, 1 - config.zeta) for v in sel.B.tolist())
        good = sum(good_group_count(o.counts(np.asarray([cert.seed.coefficients]))[0], o.weight_total, n, k, tau, family.p)
                   for o in objs)
        groups = sum(o.machines for o in objs)
        out.stages.append(StageRecord(j, before, int(cur.sum()), len(am) + len(bm), good, groups, vi, vii, cert))
    dstar = np.bincount(g.edges[cur].ravel(), minlength=n)
    for v in np.flatnonzero(dstar > 2 * t4).tolist():
        out.record(config.strict_invariants, stages, "degree", v, f"E*-degree {int(dstar[v])} exceeds 2*{t4}")
    xj = np.bincount(_x_slots(g, sel, cur)[0], minlength=n)
    for v in sel.B.tolist():
        if power_below(int(xj[v]), int(x0[v]), n, stages, k, 1 - config.zeta):
            out.record(config.strict_invariants, stages, "ii", v, f"|X(v) & E*| = {int(xj[v])} of {int(x0[v])}")
    out.kept = np.flatnonzero(cur)
    return out


@dataclass
class CandidateMatching:
    edges: np.ndarray  # edge ids of g
    matched: np.ndarray  # N_h: B-nodes with exactly one selected edge
    weight: int
    certificate: ProgressCertificate


def matching_objective(g: Graph, estar: np.ndarray, B: np.ndarray, labels: np.ndarray, family: HashFamily) -> LocalMinUnionObjective:
    """Owners are B-nodes (weight d(v)); items are E* edges; groups are E*-stars."""
    mask = np.zeros(g.m, dtype=bool)
    mask[estar] = True
    src, eid = _incident_slots(g, mask)
    gptr = np.zeros(g.node_count + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=g.node_count), out=gptr[1:])
    inb = np.zeros(g.node_count, dtype=bool)
    inb[B] = True
    own = inb[src]
    optr = np.zeros(len(B) + 1, dtype=np.int64)
    np.cumsum(np.bincount(src[own], minlength=g.node_count)[B], out=optr[1:])
    return LocalMinUnionObjective(family, labels, gptr, eid, np.ones(len(eid), dtype=bool),
                                  optr, eid[own], g.degrees[B])


def find_round_matching(g: Graph, estar: np.ndarray, B: np.ndarray, config: RunConfig, cluster: ClusterState,
                        labels: np.ndarray, label: str = "") -> CandidateMatching:
    """Local-minimum edges of E* under a derandomized pairwise priority."""
    sub = g.edge_subgraph(np.isin(np.arange(g.m), estar))
    cluster.charge_balls(two_hop_ball_words(sub, B, config.space), 2, B)
    family = HashFamily.for_domain(config.k_select, int(labels.max(initial=0)) + 2,
                                   p=config.field_for(int(labels.max(initial=0)) + 1))
    obj = matching_objective(g, estar, B, labels, family)
    strategy = "exact" if family.k == 2 or family.size <= config.cap else "greedy"
    cert = find_seed(family, [obj], strategy, config.engine(), cluster, label)
    win = obj.winners(np.asarray([cert.seed.coefficients]))[0]
    chosen = np.intersect1d(np.flatnonzero(win), estar)
    ends = g.edges[chosen].ravel()
    assert len(np.unique(ends)) == len(ends), "selected edges are not a matching"
    hit = np.zeros(g.node_count, dtype=bool)
    hit[ends] = True
    matched = B[hit[B]]
    weight = int(g.degrees[matched].sum())
    assert Fraction(weight) == cert.achieved, "matched weight differs from certified value"
    return CandidateMatching(chosen, matched, weight, cert)


@dataclass
class MatchingResult:
    matching: np.ndarray  # (size, 2) node pairs, u < v, sorted
    iterations: int
    metrics: list[dict]
    certificates: list[ProgressCertificate]
    cluster: ClusterState
    iteration_bound: float
    lemma_checks: list[bool] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return self.cluster.rounds


def iteration_bound(m: int, delta: Fraction, per_iteration: int) -> float:
    """log base 1/(1 - delta/c) of m: the iteration count promised by the progress argument."""
    if m <= 1:
        return 1.0
    return math.log(m) / -math.log1p(-float(delta) / per_iteration)


def maximal_matching(g: Graph, config: RunConfig | None = None, cluster: ClusterState | None = None) -> MatchingResult:
    config = config or RunConfig()
    cluster = cluster or config.new_cluster()
    labeller = EdgeLabels.of(g)
    cluster.layout(g.node_count + g.m, "distribute")
    pairs: list[np.ndarray] = []
    metrics, certs, lemma = [], [], []
    cur = g
    it = 0
    while cur.m > 0:
        it += 1
        cluster.layout(2 * cur.m, "sort")
        sel = select_heavy_class(cur, config.delta, "matching")
        cluster.charge("prefix_sum", 1, config.k)
        labels = labeller.lookup(cur)
        sp = sparsify_edges(cur, sel, config, cluster, labels)
        cand = find_round_matching(cur, sp.kept, sel.B, config, cluster, labels, f"matching iter {it}")
        certs.extend(sp.certificates)
        certs.append(cand.certificate)
        pairs.append(cur.edges[cand.edges])
        gone = np.zeros(cur.node_count, dtype=bool)
        gone[cur.edges[cand.edges].ravel()] = True
        nxt = cur.induced(~gone)
        cluster.charge("exchange", 1, int(gone.sum()))
        removed = cur.m - nxt.m
        assert 2 * removed >= cand.weight, "fewer edges removed than half the matched weight"
        lemma_ok = cand.certificate.bound * 109 >= config.delta * cur.m
        if sel.i <= 4:
            lemma.append(bool(lemma_ok))
        metrics.append({"iter": it, "edges": cur.m, "i": sel.i, "sumBd": sel.weight, "stages": len(sp.stages),
                        "violations": len(sp.violations),
                        "bound": str(cand.certificate.bound), "achieved": str(cand.certificate.achieved),
                        "edges_removed": removed})
        cur = nxt
    mm = np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)
    mm = mm[np.lexsort((mm[:, 1], mm[:, 0]))] if len(mm) else mm
    return MatchingResult(mm, it, metrics, certs, cluster, iteration_bound(g.m, config.delta, 218), lemma)
