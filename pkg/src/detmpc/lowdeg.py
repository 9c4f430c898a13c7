"""The low-degree route: distance-2 colouring plus compressed Luby phases.

Once every node holds its (2l)-hop ball, one stage tries every sequence of l
pairwise hash functions over the colours, simulates l Luby phases under each,
and keeps the sequence leaving the fewest edges.  A node's fate after l
phases only depends on its (2l)-ball, which is what makes the per-node
simulation sound; :func:`ball_local_statuses` checks that directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .config import RunConfig
from .derand import ProgressCertificate
from .errors import BallTooLarge, DetMPCError, SequenceSpaceTooLarge
from .graph import Graph, line_graph_view
from .hashing import Seed, smallest_prime_at_least
from .mpc import ClusterState, ball_words, bfs_ball

ALIVE, JOINED, REMOVED = 0, 1, 2


# ---------------------------------------------------------------- colouring

def _adjacency(g: Graph) -> sp.csr_matrix:
    rows = np.repeat(np.arange(g.node_count), g.degrees)
    return sp.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, g.indices)), shape=(g.node_count,) * 2)


def square_pairs(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """CSR (indptr, indices) of G^2 without self loops."""
    a = _adjacency(g)
    sq = (a + a @ a).tocsr()
    sq.setdiag(0)
    sq.eliminate_zeros()
    sq.sort_indices()
    return sq.indptr.astype(np.int64), sq.indices.astype(np.int64)


@dataclass
class Distance2Coloring:
    labels: np.ndarray  # 0-based colour per node
    count: int  # K, colours in use are < K
    linial_rounds: int
    reduction_rounds: int

    @property
    def colors(self) -> np.ndarray:
        """1-based colours."""
        return self.labels + 1


def _linial_params(K: int, deg2: int) -> tuple[int, int] | None:
    """(d, q) minimising q^2 with q prime > d*deg2 and q^(d+1) >= K; None if no shrink."""
    best = None
    d = 1
    while True:
        q = smallest_prime_at_least(max(d * deg2 + 1, 2))
        while q ** (d + 1) < K:
            q = smallest_prime_at_least(q + 1)
        if best is None or q * q < best[1] ** 2:
            best = (d, q)
        if 2 ** (d + 1) >= K or d * deg2 + 1 > best[1]:
            break
        d += 1
    return best if best[1] ** 2 < K else None


def distance2_coloring(g: Graph, config: RunConfig | None = None, cluster: ClusterState | None = None) -> Distance2Coloring:
    """Colour G^2: Linial-style reductions from the ids, then one colour class per round down to deg2 + 1."""
    n = g.node_count
    indptr, indices = square_pairs(g)
    deg2 = int(np.diff(indptr).max(initial=0))
    if cluster is not None and n:
        a = _adjacency(g)
        two = (a @ g.degrees.astype(np.int64))
        cluster.charge_balls(1 + g.degrees + two + two, 2)
    col = np.arange(n, dtype=np.int64)
    K = max(n, 1)
    src = np.repeat(np.arange(n), np.diff(indptr))
    lin = 0
    while True:
        params = _linial_params(K, deg2)
        if params is None:
            break
        d, q = params
        digits = np.stack([(col // q ** i) % q for i in range(d + 1)], axis=1)  # (n, d+1)
        xs = np.arange(q)
        powers = np.stack([np.ones(q, dtype=np.int64)] + [xs ** i % q for i in range(1, d + 1)], axis=0)
        F = (digits @ powers) % q  # (n, q)
        bad = np.zeros((n, q), dtype=bool)
        if len(src):
            clash = F[src] == F[indices]
            np.logical_or.at(bad, src, clash)
        x = np.argmin(bad, axis=1)
        assert not bad[np.arange(n), x].any(), "Linial step found no free evaluation point"
        col = x * q + F[np.arange(n), x]
        K = q * q
        lin += 1
        if cluster is not None:
            cluster.charge("coloring_step", deg2 + 1, len(src))
    red = 0
    target = deg2 + 1
    if K > target:
        for c in range(target, K):
            who = np.flatnonzero(col == c)
            if who.size == 0:
                continue
            for v in who.tolist():
                used = np.zeros(target + 1, dtype=bool)
                nb = col[indices[indptr[v]:indptr[v + 1]]]
                used[nb[nb < target]] = True
                col[v] = int(np.argmin(used))
            red += 1
            if cluster is not None:
                cluster.charge("coloring_step", deg2 + 1, len(who))
        K = target
    K = int(col.max()) + 1 if n else 1
    return Distance2Coloring(col, K, lin, red)


# ---------------------------------------------------------------- stage plans

@dataclass(frozen=True)
class StagePlan:
    ell: int
    radius: int
    p: int  # field of the pairwise family over colours
    colors: int

    @property
    def family_size(self) -> int:
        return self.p * self.p

    @property
    def sequences(self) -> int:
        return self.family_size ** self.ell


def ball_word_counts(g: Graph, radius: int, alive: np.ndarray | None = None) -> np.ndarray:
    """Words (nodes + induced edges) of every node's radius-ball, via sparse reachability."""
    n = g.node_count
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    a = _adjacency(g).astype(bool)
    reach = sp.identity(n, dtype=bool, format="csr")
    for _ in range(radius):
        reach = (reach + reach @ a).astype(bool)
    reach = reach.astype(np.int64)
    nodes = np.asarray(reach.sum(axis=1)).ravel()
    if g.m == 0:
        return nodes
    both = reach[:, g.edges[:, 0]].multiply(reach[:, g.edges[:, 1]])
    edges = np.asarray(both.sum(axis=1)).ravel()
    return nodes + edges


def make_plan(g: Graph, coloring: Distance2Coloring, config: RunConfig) -> StagePlan:
    """Largest l with |H*|^l within the sequence budget and (2l)-balls within S.

    Also refuses when the first phase alone would exceed ``config.work_cap`` cells.
    """
    p = smallest_prime_at_least(max(coloring.count + 1, 2))
    if p * p > config.sequence_budget:
        raise SequenceSpaceTooLarge(f"|H*| = {p * p} already exceeds the sequence budget {config.sequence_budget}")
    # the first phase runs on the whole graph under every seed; later phases only see surviving edges
    work = (p * p) * max(g.node_count + g.m, 1)
    if work > config.work_cap:
        raise SequenceSpaceTooLarge(f"first phase simulates {work} node/edge cells, above the work cap {config.work_cap}")
    ell = 1
    while (p * p) ** (ell + 1) <= config.sequence_budget:
        ell += 1
    while ell >= 1:
        words = ball_word_counts(g, 2 * ell)
        if words.max(initial=0) <= config.space:
            return StagePlan(ell, 2 * ell, p, coloring.count)
        if ell == 1:
            v = int(np.argmax(words))
            raise BallTooLarge(v, int(words[v]), config.space)
        ell -= 1
    raise AssertionError("unreachable")


# ---------------------------------------------------------------- phase simulation

def _color_keys(plan: StagePlan, seeds: np.ndarray) -> np.ndarray:
    """Priority keys (len(seeds), colours): z * K + colour with z = h(colour + 1)."""
    pts = np.arange(1, plan.colors + 1, dtype=np.int64)
    z = (seeds[:, :1] + seeds[:, 1:2] * pts[None, :]) % plan.p
    return z * plan.colors + (pts - 1)[None, :]


def all_seeds(plan: StagePlan) -> np.ndarray:
    a0, a1 = np.divmod(np.arange(plan.family_size, dtype=np.int64), plan.p)
    return np.stack([a0, a1], axis=1)


def _phase(alive: np.ndarray, a: np.ndarray, b: np.ndarray, ka: np.ndarray, kb: np.ndarray):
    """One Luby phase for a batch of rows.

    ``alive``: (R, n); ``a, b``: edge endpoints; ``ka, kb``: (R, m) endpoint keys.
    Returns (joined, removed) masks of shape (R, n).
    """
    R, n = alive.shape
    ea = alive[:, a] & alive[:, b]
    loser = np.where(ka < kb, b[None, :], a[None, :])
    rows = np.broadcast_to(np.arange(R)[:, None], ea.shape)
    blocked = np.zeros((R, n), dtype=bool)
    blocked.reshape(-1)[(rows * n + loser)[ea]] = True
    joined = alive & ~blocked
    hit = np.zeros((R, n), dtype=bool)
    ja = joined[:, a] & ea
    jb = joined[:, b] & ea
    hit.reshape(-1)[(rows * n + b[None, :])[ja]] = True
    hit.reshape(-1)[(rows * n + a[None, :])[jb]] = True
    removed = hit & ~joined
    return joined, removed


def simulate(g: Graph, labels: np.ndarray, plan: StagePlan, sequence: np.ndarray, alive: np.ndarray | None = None) -> np.ndarray:
    """Status per node (ALIVE/JOINED/REMOVED) after running the sequence's phases globally."""
    n = g.node_count
    status = np.zeros(n, dtype=np.int8)
    live = np.ones(n, dtype=bool) if alive is None else alive.copy()
    status[~live] = REMOVED
    a, b = g.edges[:, 0], g.edges[:, 1]
    for seed in np.asarray(sequence).reshape(-1, 2):
        keys = _color_keys(plan, seed[None, :])[0][labels]
        joined, removed = _phase(live[None, :], a, b, keys[a][None, :], keys[b][None, :])
        status[joined[0]] = JOINED
        status[removed[0]] = REMOVED
        live &= ~(joined[0] | removed[0])
    if alive is not None:
        status[~alive] = ALIVE  # untouched nodes keep their outside status
    return status


def ball_local_statuses(g: Graph, labels: np.ndarray, plan: StagePlan, sequence: np.ndarray,
                        alive: np.ndarray | None = None) -> np.ndarray:
    """Each node simulates the phases on its own (2l)-ball only; returns its own status."""
    n = g.node_count
    live = np.ones(n, dtype=bool) if alive is None else alive
    sub = g.induced(live)
    out = np.zeros(n, dtype=np.int8)
    steps = len(np.asarray(sequence).reshape(-1, 2))
    for v in range(n):
        if not live[v]:
            continue
        ball = np.zeros(n, dtype=bool)
        ball[bfs_ball(sub, v, 2 * steps)] = True
        out[v] = simulate(sub.induced(ball), labels, plan, sequence, ball)[v]
    return out


# ---------------------------------------------------------------- compressed stage

@dataclass
class StageResult:
    joined: np.ndarray  # nodes added to the independent set
    removed: np.ndarray
    sequence: list[tuple[int, int]]
    edges_before: int
    edges_after: int
    evaluated: int
    certificate: ProgressCertificate

    def row(self, stage: int) -> dict:
        return {"stage": stage, "edges_before": self.edges_before, "edges_after": self.edges_after,
                "sequence": ";".join(f"{a},{b}" for a, b in self.sequence), "evaluated": self.evaluated}


class _Search:
    """Depth-first over sequences, a block of (state, seed) rows at a time.

    Row r*F + s extends state r by seed s, so blocks follow lexicographic
    order and the first minimum met is the lexicographically first one.
    """

    def __init__(self, g: Graph, labels: np.ndarray, plan: StagePlan, cells: int = 1 << 22):
        self.g, self.labels, self.plan = g, labels, plan
        self.seeds = all_seeds(plan)
        self.keys = _color_keys(plan, self.seeds)  # (|H*|, K)
        self.best: tuple[int, tuple[int, ...]] | None = None
        self.total = 0
        self.count = 0
        self.block = max(1, cells // max(g.node_count + g.m, 1))

    def run(self, states: np.ndarray, depth: int, prefixes: np.ndarray) -> None:
        """``states``: (R, n) live masks; ``prefixes``: (R, depth) seed indices chosen so far."""
        g = self.g
        F = len(self.seeds)
        last = depth == self.plan.ell - 1
        total = len(states) * F
        for c0 in range(0, total, self.block):
            r, f = np.divmod(np.arange(c0, min(total, c0 + self.block), dtype=np.int64), F)
            live = states[r]
            a, b = g.edges[:, 0], g.edges[:, 1]
            keep = (live[:, a] & live[:, b]).any(axis=0)
            a, b = a[keep], b[keep]
            keys = self.keys[f]
            joined, removed = _phase(live, a, b, keys[:, self.labels[a]], keys[:, self.labels[b]])
            nxt = live & ~(joined | removed)
            seq = np.concatenate([prefixes[r], f[:, None]], axis=1)
            if last:
                left = (nxt[:, a] & nxt[:, b]).sum(axis=1)
                self.total += int(left.sum())
                self.count += len(left)
                j = int(np.argmin(left))
                if self.best is None or int(left[j]) < self.best[0]:
                    self.best = (int(left[j]), tuple(int(x) for x in seq[j]))
            else:
                self.run(nxt, depth + 1, seq)


def compressed_stage(g: Graph, labels: np.ndarray, plan: StagePlan, alive: np.ndarray | None = None,
                     cluster: ClusterState | None = None, label: str = "") -> tuple[StageResult, np.ndarray]:
    """Pick the sequence leaving the fewest live edges (ties: lexicographically first); apply it.

    Returns the stage record and the live-node mask afterwards.
    """
    n = g.node_count
    alive = np.ones(n, dtype=bool) if alive is None else alive.copy()
    a, b = g.edges[:, 0], g.edges[:, 1]
    before = int((alive[a] & alive[b]).sum())
    if plan.sequences > (1 << 40):
        raise SequenceSpaceTooLarge(f"{plan.sequences} sequences")
    search = _Search(g, labels, plan)
    search.run(alive[None, :], 0, np.zeros((1, 0), dtype=np.int64))
    best_left, idx = search.best
    seq = search.seeds[list(idx)]
    status = simulate(g, labels, plan, seq, alive)
    joined = np.flatnonzero(alive & (status == JOINED))
    removed = np.flatnonzero(alive & (status == REMOVED))
    after_alive = alive & (status == ALIVE)
    after = int((after_alive[a] & after_alive[b]).sum())
    assert after == best_left, "replayed sequence disagrees with the search"
    mean = Fraction(search.total, search.count)
    cert = ProgressCertificate(Seed(tuple(int(x) for x in seq.reshape(-1))), Fraction(-after), -mean,
                               "sequence-min", label=label)
    if cluster is not None:
        cluster.charge("prefix_sum", 1, search.count)
        cluster.charge("exchange", 1, int(len(joined) + len(removed)))
    res = StageResult(joined, removed, [tuple(int(x) for x in s) for s in seq], before, after, search.count, cert)
    return res, after_alive


@dataclass
class LowDegResult:
    nodes: np.ndarray
    iterations: int  # compressed stages
    metrics: list[dict]
    certificates: list[ProgressCertificate]
    cluster: ClusterState
    coloring: Distance2Coloring | None = None
    plan: StagePlan | None = None
    iteration_bound: float = 0.0
    lemma_checks: list[bool] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return self.cluster.rounds


def mis_lowdeg(g: Graph, config: RunConfig | None = None, cluster: ClusterState | None = None,
               ball_centers: np.ndarray | None = None) -> LowDegResult:
    """MIS by compressed stages.  ``ball_centers`` restricts ball accounting (line-graph route)."""
    config = config or RunConfig()
    cluster = cluster or config.new_cluster()
    n = g.node_count
    cluster.layout(n + g.m, "distribute")
    if g.m == 0:
        return LowDegResult(np.arange(n), 0, [], [], cluster)
    col = distance2_coloring(g, config, cluster)
    plan = make_plan(g, col, config)
    if ball_centers is None:
        cluster.charge_balls(ball_word_counts(g, plan.radius), plan.radius)
    alive = np.ones(n, dtype=bool)
    chosen = np.zeros(n, dtype=bool)
    metrics, certs = [], []
    stage = 0
    a, b = g.edges[:, 0], g.edges[:, 1]
    while (alive[a] & alive[b]).any():
        stage += 1
        res, nxt = compressed_stage(g, col.labels, plan, alive, cluster, f"lowdeg stage {stage}")
        assert res.edges_after < res.edges_before, "compressed stage made no progress"
        chosen[res.joined] = True
        alive = nxt
        metrics.append(res.row(stage))
        certs.append(res.certificate)
    chosen |= alive  # survivors are isolated now
    return LowDegResult(np.flatnonzero(chosen), stage, metrics, certs, cluster, col, plan)


# ---------------------------------------------------------------- dispatch

def is_low_degree(g: Graph, config: RunConfig) -> bool:
    """Delta <= n^delta, decided exactly as Delta^k <= n."""
    return g.max_degree ** config.k <= max(g.node_count, 1)


def lowdeg_blocker(g: Graph, config: RunConfig, base: Graph | None = None) -> DetMPCError | None:
    """Why the compressed route cannot run here (a ball or the sequence space is too big), or None.

    Trial setup on a scratch cluster, so the caller's accounting is untouched.
    ``base`` is the original graph when ``g`` is its line graph.
    """
    if g.m == 0:
        return None
    trial = config.new_cluster()
    try:
        plan = make_plan(g, distance2_coloring(g, config, trial), config)
        if base is not None:
            trial.charge_balls(ball_word_counts(base, plan.radius + 1), plan.radius + 1)
    except (BallTooLarge, SequenceSpaceTooLarge) as exc:
        return exc
    return None


def dispatch_mis(g: Graph, config: RunConfig | None = None, cluster: ClusterState | None = None):
    """Low degree: compressed stages when they fit.  Otherwise the sparsification route."""
    from .mis import maximal_independent_set

    config = config or RunConfig()
    blocker = lowdeg_blocker(g, config) if is_low_degree(g, config) else None
    if is_low_degree(g, config) and blocker is None:
        res = mis_lowdeg(g, config, cluster)
        res.extra["route"] = "lowdeg"
        return res
    res = maximal_independent_set(g, config, cluster)
    res.extra["route"] = "sparsify" if blocker is None else f"sparsify ({blocker.code})"
    return res


def dispatch_matching(g: Graph, config: RunConfig | None = None, cluster: ClusterState | None = None):
    """Low degree: MIS on the line graph by compressed stages when they fit.  Otherwise sparsification."""
    from .matching import MatchingResult, maximal_matching

    config = config or RunConfig()
    lg = line_graph_view(g, config.line_cap) if is_low_degree(g, config) else None
    blocker = lowdeg_blocker(lg, config, g) if lg is not None else None
    if lg is None or blocker is not None:
        res = maximal_matching(g, config, cluster)
        res.extra["route"] = "sparsify" if blocker is None else f"sparsify ({blocker.code})"
        return res
    cluster = cluster or config.new_cluster()
    res = mis_lowdeg(lg, config, cluster, ball_centers=np.arange(g.node_count))
    if lg.m and res.plan is not None:
        # balls are gathered per original node: radius r+1 around v covers every incident edge's r-ball
        cluster.charge_balls(ball_word_counts(g, res.plan.radius + 1), res.plan.radius + 1)
    pairs = g.edges[res.nodes] if g.m else np.zeros((0, 2), dtype=np.int64)
    return MatchingResult(pairs, res.iterations, res.metrics, res.certificates, cluster,
                          0.0, [], {"route": "lowdeg"})
