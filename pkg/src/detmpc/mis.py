"""Deterministic maximal independent set.

Per iteration: absorb isolated nodes, pick the heavy class, thin the class by
derandomized node sampling, let every B-node gather a bounded set N_v of
sampled neighbours, and select sampled nodes whose priority beats all sampled
neighbours.  The selected set and its neighbourhood leave the graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .config import RunConfig
from .derand import ProgressCertificate, find_seed
from .graph import Graph, HeavySelection, class_thresholds, greedy_distance2_coloring, select_heavy_class
from .hashing import HashFamily
from .matching import iteration_bound
from .mpc import ClusterState
from .objectives import LocalMinUnionObjective
from .sparsify import (SparsifyResult, StageRecord, derandomize_stage, good_group_count, grouped_entries,
                       max_scaled, min_scaled, sampling_threshold)

WEIGHT_SCALE = 16  # integer surrogate weights c_u ~ WEIGHT_SCALE * T_{i-1} / d(u)


def _neighbor_slots(g: Graph, left: np.ndarray, right: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(v, u) adjacency slots with v in ``left`` and u in ``right`` (masks), sorted by v then u."""
    src = np.repeat(np.arange(g.node_count), g.degrees)
    keep = left[src] & right[g.indices]
    return src[keep], g.indices[keep]


def inverse_degree_sums(g: Graph, members: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Float sum over u in members adjacent to v of 1/d(u), for each v in ``nodes``."""
    mask = np.zeros(g.node_count, dtype=bool)
    mask[nodes] = True
    v, u = _neighbor_slots(g, mask, members)
    acc = np.zeros(g.node_count)
    np.add.at(acc, v, 1.0 / g.degrees[u])
    return acc[nodes]


def _exact_inverse_sum(g: Graph, members: np.ndarray, v: int) -> Fraction:
    nb = g.neighbors(v)
    return sum((Fraction(1, int(g.degree(int(u)))) for u in nb[members[nb]]), Fraction(0))


def sparsify_nodes(g: Graph, sel: HeavySelection, config: RunConfig, cluster: ClusterState,
                   labels: np.ndarray) -> SparsifyResult:
    """Thin J_0 = C^i over i - 4 node-sampling stages (none when i <= 4)."""
    n, k = g.node_count, config.k
    j0 = np.zeros(n, dtype=bool)
    j0[sel.seed_nodes] = True
    stages = sel.i - 4
    out = SparsifyResult(np.flatnonzero(j0))
    if stages <= 0 or not j0.any():
        return out
    T = class_thresholds(n, config.delta)
    t4 = int(T[4])
    deg = g.degrees
    family = HashFamily.for_domain(config.k_conc, int(labels.max()) + 2, p=config.field_for(int(labels.max()) + 1))
    tau = sampling_threshold(n, k, family.p)
    weight = np.maximum(1, (WEIGHT_SCALE * int(T[sel.i - 1]) + deg // 2) // np.maximum(deg, 1))
    inb = np.zeros(n, dtype=bool)
    inb[sel.B] = True
    bv0, bu0 = _neighbor_slots(g, inb, j0)
    w0 = np.bincount(bv0, weights=weight[bu0], minlength=n).astype(np.int64)
    three_quarters = Fraction(3, 4) * (1 - config.zeta)
    cur = j0.copy()
    for j in range(1, stages + 1):
        av, au = _neighbor_slots(g, cur, cur)
        bv, bu = _neighbor_slots(g, inb, cur)
        cluster.chunk_loads(np.bincount(av, minlength=n), t4)
        cluster.chunk_loads(np.bincount(bv, minlength=n), t4)
        am, ai = grouped_entries(av, au)
        bm, bi = grouped_entries(bv + n, bu)
        hi_a = np.array([max_scaled(int(deg[v]), n, j, k, 1 + config.zeta) for v in range(n)], dtype=np.int64)
        lo_b = np.array([min_scaled(int(w0[v]), n, j, k, three_quarters) for v in range(n)], dtype=np.int64)

        def bounds(machines, part):
            if part == 0:
                return np.zeros(len(machines), dtype=np.int64), hi_a[machines]
            return lo_b[machines - n], np.full(len(machines), np.iinfo(np.int64).max)

        cert, keep, objs = derandomize_stage(family, tau, labels, [(am, ai, None), (bm, bi, weight[bi])],
                                             config.engine(), cluster, f"node-stage {j}", bounds, config.search_budget)
        cluster.charge("prefix_sum", 1, len(am) + len(bm))
        before = int(cur.sum())
        cur &= keep
        vi, vii = _node_invariant_violations(g, sel, cur, j, config)
        good = sum(good_group_count(o.counts(np.asarray([cert.seed.coefficients]))[0], o.weight_total, n, k, tau, family.p)
                   for o in objs)
        out.stages.append(StageRecord(j, before, int(cur.sum()), len(am) + len(bm), good,
                                      sum(o.machines for o in objs), len(vi), len(vii), cert))
    dj = np.bincount(_neighbor_slots(g, cur, cur)[0], minlength=n)
    for v in np.flatnonzero(cur & (dj > 2 * t4)).tolist():
        out.record(config.strict_invariants, stages, "degree", v, f"J'-degree {int(dj[v])} exceeds 2*{t4}")
    for v in _node_invariant_violations(g, sel, cur, stages, config)[1]:
        out.record(config.strict_invariants, stages, "ii", v, "inverse-degree mass below (delta - zeta')/(4 n^(j delta))")
    out.kept = np.flatnonzero(cur)
    return out


def _node_invariant_violations(g: Graph, sel: HeavySelection, cur: np.ndarray, j: int, config: RunConfig):
    """Nodes breaking (i) d_J(v) <= (1+zeta) n^(-j delta) d(v), and B-nodes breaking (ii)."""
    n, k = g.node_count, config.k
    dj = np.bincount(_neighbor_slots(g, cur, cur)[0], minlength=n)
    deg = g.degrees
    bad_i = [v for v in np.flatnonzero(cur).tolist()
             if dj[v] and int(dj[v]) ** k * n ** j * (1 + config.zeta).denominator ** k
             > ((1 + config.zeta).numerator * int(deg[v])) ** k]
    # (ii) with denominator 4 and zeta' = zeta * delta: sum >= (1 - zeta) delta / (4 n^(j delta))
    c = (1 - config.zeta) * config.delta / 4
    target = float(c) * n ** (-j / k)
    sums = inverse_degree_sums(g, cur, sel.B)
    bad_ii = []
    for v, s in zip(sel.B.tolist(), sums.tolist()):
        if abs(s - target) > 1e-9 * max(target, 1e-300):
            if s < target:
                bad_ii.append(v)
        elif _exact_inverse_sum(g, cur, v) ** k * n ** j < c ** k:
            bad_ii.append(v)
    return bad_i, bad_ii


@dataclass
class BoundedNeighborhoods:
    owners: np.ndarray  # B
    ptr: np.ndarray  # CSR over owners
    members: np.ndarray  # N_v, lowest ids first
    words: np.ndarray
    lemma_failures: list[int] = field(default_factory=list)  # owners failing the degree-0 / 0.1 delta disjunction

    def of(self, idx: int) -> np.ndarray:
        return self.members[self.ptr[idx]:self.ptr[idx + 1]]


def build_bounded_neighborhoods(g: Graph, jprime: np.ndarray, B: np.ndarray, config: RunConfig,
                                cluster: ClusterState) -> BoundedNeighborhoods:
    """N_v = the min(d_J'(v), n^(4 delta)) lowest-id J'-neighbours of each v in B."""
    n = g.node_count
    t4 = int(class_thresholds(n, config.delta)[4]) if config.k >= 4 else n
    inj = np.zeros(n, dtype=bool)
    inj[jprime] = True
    inb = np.zeros(n, dtype=bool)
    inb[B] = True
    v, u = _neighbor_slots(g, inb, inj)
    rank = np.arange(len(v)) - np.searchsorted(v, v)
    keep = rank < t4
    v, u = v[keep], u[keep]
    counts = np.bincount(v, minlength=n)[B]
    ptr = np.zeros(len(B) + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    dj = np.bincount(_neighbor_slots(g, inj, inj)[0], minlength=n)
    reach = np.zeros(n, dtype=np.int64)
    np.add.at(reach, v, dj[u])
    words = (1 + counts + reach[B]) + (counts + reach[B])
    cluster.charge_balls(words, 2, B)
    failures = []
    inv = np.zeros(n)
    np.add.at(inv, v, np.where(dj[u] > 0, 1.0 / np.maximum(dj[u], 1), 0.0))
    zero = np.zeros(n, dtype=bool)
    zero[v[dj[u] == 0]] = True
    for idx, b in enumerate(B.tolist()):
        if counts[idx] and not zero[b] and inv[b] < 0.1 * float(config.delta) - 1e-12:
            failures.append(b)
    return BoundedNeighborhoods(B, ptr, u, words, failures)


@dataclass
class CandidateIS:
    nodes: np.ndarray
    covered: np.ndarray  # N_h
    weight: int
    certificate: ProgressCertificate


def is_objective(g: Graph, jprime: np.ndarray, nb: BoundedNeighborhoods, labels: np.ndarray,
                 family: HashFamily) -> LocalMinUnionObjective:
    """Items are nodes; group of u in J' is u with its J'-neighbours (only u constrained)."""
    n = g.node_count
    inj = np.zeros(n, dtype=bool)
    inj[jprime] = True
    v, u = _neighbor_slots(g, inj, inj)
    heads = np.concatenate([jprime, v])
    items = np.concatenate([jprime, u])
    flag = np.concatenate([np.ones(len(jprime), dtype=bool), np.zeros(len(v), dtype=bool)])
    order = np.lexsort((~flag, heads))
    heads, items, flag = heads[order], items[order], flag[order]
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(heads, minlength=n), out=ptr[1:])
    return LocalMinUnionObjective(family, labels, ptr, items, flag, nb.ptr, nb.members, g.degrees[nb.owners])


def find_round_is(g: Graph, jprime: np.ndarray, nb: BoundedNeighborhoods, config: RunConfig, cluster: ClusterState,
                  labels: np.ndarray, label: str = "") -> CandidateIS:
    family = HashFamily.for_domain(config.k_select, int(labels.max(initial=0)) + 2,
                                   p=config.field_for(int(labels.max(initial=0)) + 1))
    obj = is_objective(g, jprime, nb, labels, family)
    strategy = "exact" if family.k == 2 or family.size <= config.cap else "greedy"
    cert = find_seed(family, [obj], strategy, config.engine(), cluster, label)
    win = obj.winners(np.asarray([cert.seed.coefficients]))[0]
    chosen = np.intersect1d(np.flatnonzero(win), jprime)
    mask = np.zeros(g.node_count, dtype=bool)
    mask[chosen] = True
    if g.m:
        assert not (mask[g.edges[:, 0]] & mask[g.edges[:, 1]]).any(), "selected nodes are not independent"
    owner_of = np.repeat(np.arange(len(nb.owners)), np.diff(nb.ptr))
    hit = np.bincount(owner_of[mask[nb.members]], minlength=len(nb.owners)) > 0
    covered = nb.owners[hit]
    weight = int(g.degrees[covered].sum())
    assert Fraction(weight) == cert.achieved, "covered weight differs from certified value"
    return CandidateIS(chosen, covered, weight, cert)


@dataclass
class MISResult:
    nodes: np.ndarray  # sorted
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


def maximal_independent_set(g: Graph, config: RunConfig | None = None, cluster: ClusterState | None = None,
                            labels: np.ndarray | None = None) -> MISResult:
    config = config or RunConfig()
    cluster = cluster or config.new_cluster()
    labels = greedy_distance2_coloring(g) if labels is None else np.asarray(labels, dtype=np.int64)
    cluster.layout(g.node_count + g.m, "distribute")
    alive = np.ones(g.node_count, dtype=bool)
    chosen = np.zeros(g.node_count, dtype=bool)
    metrics, certs, lemma = [], [], []
    cur = g
    it = 0
    delta = config.delta

    def absorb(graph: Graph) -> None:
        iso = alive & (graph.degrees == 0)
        chosen[iso] = True
        alive[iso] = False

    absorb(cur)
    while cur.m > 0:
        it += 1
        cluster.layout(2 * cur.m, "sort")
        sel = select_heavy_class(cur, delta, "mis")
        cluster.charge("prefix_sum", 1, config.k)
        sp = sparsify_nodes(cur, sel, config, cluster, labels)
        nb = build_bounded_neighborhoods(cur, sp.kept, sel.B, config, cluster)
        cand = find_round_is(cur, sp.kept, nb, config, cluster, labels, f"mis iter {it}")
        certs.extend(sp.certificates)
        certs.append(cand.certificate)
        chosen[cand.nodes] = True
        gone = np.zeros(g.node_count, dtype=bool)
        gone[cand.nodes] = True
        nbrs = np.unique(np.concatenate([cur.neighbors(int(v)) for v in cand.nodes])) if len(cand.nodes) else np.zeros(0, np.int64)
        gone[nbrs] = True
        alive &= ~gone
        nxt = cur.induced(alive)
        cluster.charge("exchange", 1, int(gone.sum()))
        removed = cur.m - nxt.m
        assert 2 * removed >= cand.weight, "fewer edges removed than half the covered weight"
        if sel.i <= 4:
            lemma.append(bool(cand.certificate.bound * 100 >= delta * delta * cur.m))
        metrics.append({"iter": it, "edges": cur.m, "i": sel.i, "sumBd": sel.weight, "stages": len(sp.stages),
                        "violations": len(sp.violations), "bound": str(cand.certificate.bound),
                        "achieved": str(cand.certificate.achieved), "edges_removed": removed,
                        "is": int(len(cand.nodes)), "n_is": int(len(nbrs))})
        cur = nxt
        absorb(cur)
    return MISResult(np.flatnonzero(chosen), it, metrics, certs, cluster,
                     iteration_bound(g.m, delta * delta, 200) if g.m else 1.0, lemma)
