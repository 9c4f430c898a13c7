"""Immutable undirected graphs, degree classes and the heavy-class selection.

Node ids are ``0..n-1`` and stay fixed when algorithms shrink a graph: a
"smaller" graph is the same node range with fewer edges.  All thresholds of
the form n^(i*delta) are computed with integer arithmetic only.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import DuplicateEdge, EmptyGraph, NodeIdOutOfRange, SelfLoop, SizeCapExceeded


# ---------------------------------------------------------------- integer roots

def iroot_floor(x: int, k: int) -> int:
    """Largest integer r with r**k <= x."""
    if x < 0 or k < 1:
        raise ValueError("need x >= 0 and k >= 1")
    if x < 2 or k == 1:
        return x
    r = int(round(x ** (1.0 / k))) if x < 1 << 1000 else 1 << (x.bit_length() // k)
    # float guess, then fix up exactly
    while r ** k > x:
        r -= 1
    while (r + 1) ** k <= x:
        r += 1
    return r


def ceil_power(n: int, num: int, den: int) -> int:
    """Exact ceil(n ** (num/den)) for integers n >= 1, num >= 0, den >= 1."""
    x = n ** num
    r = iroot_floor(x, den)
    return r if r ** den == x else r + 1


def floor_scaled_power(n: int, num: int, den: int, scale: int) -> int:
    """Exact floor(scale * n ** (num/den)); ``num`` may be negative."""
    if num >= 0:
        return iroot_floor(scale ** den * n ** num, den)
    # largest r with r**den * n**(-num) <= scale**den
    a, b = scale ** den, n ** (-num)
    r = iroot_floor(a // b, den)
    while (r + 1) ** den * b <= a:
        r += 1
    return r


def parse_delta(delta: str | Fraction | int | float) -> Fraction:
    """Accept '1/8', Fraction(1, 8) or 8 (read as 1/8); delta must be a unit fraction."""
    if isinstance(delta, str):
        d = Fraction(delta)
    elif isinstance(delta, int) and delta > 1:
        d = Fraction(1, delta)
    else:
        d = Fraction(delta).limit_denominator(1 << 16)
    if d <= 0 or d > 1 or d.numerator != 1:
        raise ValueError(f"delta must be a unit fraction 1/k, got {delta}")
    return d


def class_thresholds(n: int, delta: Fraction) -> np.ndarray:
    """T[i] = ceil(n^(i*delta)) for i = 0..1/delta (T[0] = 1, T[1/delta] = n)."""
    k = delta.denominator
    return np.array([ceil_power(max(n, 1), i, k) for i in range(k + 1)], dtype=np.int64)


# ---------------------------------------------------------------- graph type

@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph in CSR form.

    ``edges`` is an (m, 2) array with ``u < v`` sorted lexicographically, so an
    edge's row index is its rank in the globally sorted edge list.  ``indices``
    holds sorted neighbour lists and ``inc`` the matching edge ids.
    """

    node_count: int
    edges: np.ndarray
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    inc: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.node_count

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def incident_edges(self, v: int) -> np.ndarray:
        return self.inc[self.indptr[v]:self.indptr[v + 1]]

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.node_count else 0

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    def edge_subgraph(self, keep: np.ndarray) -> "Graph":
        """Same node range, only edges whose mask entry is true (order preserved)."""
        return _from_sorted_edges(self.node_count, self.edges[np.asarray(keep, dtype=bool)])

    def induced(self, nodes: np.ndarray) -> "Graph":
        """Same node range, only edges with both endpoints in ``nodes`` (mask or ids)."""
        mask = _as_mask(nodes, self.node_count)
        keep = mask[self.edges[:, 0]] & mask[self.edges[:, 1]] if self.m else np.zeros(0, bool)
        return self.edge_subgraph(keep)

    def to_networkx(self):
        import networkx as nx

        h = nx.Graph()
        h.add_nodes_from(range(self.node_count))
        h.add_edges_from(map(tuple, self.edges.tolist()))
        return h


def _as_mask(nodes, n: int) -> np.ndarray:
    arr = np.asarray(nodes)
    if arr.dtype == bool and arr.shape == (n,):
        return arr
    mask = np.zeros(n, dtype=bool)
    mask[arr.astype(np.int64)] = True
    return mask


def _from_sorted_edges(n: int, edges: np.ndarray) -> Graph:
    edges = np.ascontiguousarray(edges, dtype=np.int64).reshape(-1, 2)
    m = edges.shape[0]
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    eid = np.concatenate([np.arange(m), np.arange(m)])
    order = np.lexsort((dst, src))
    counts = np.bincount(src, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return Graph(n, edges, indptr, dst[order].astype(np.int64), eid[order].astype(np.int64))


def build_graph(edge_list: Iterable[Sequence[int]] | np.ndarray, n: int | None = None) -> Graph:
    """Validate and build a graph; ``n`` defaults to 1 + the largest id."""
    arr = np.asarray(list(edge_list) if not isinstance(edge_list, np.ndarray) else edge_list, dtype=np.int64)
    arr = arr.reshape(-1, 2)
    if n is None:
        n = int(arr.max()) + 1 if arr.size else 0
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        bad = arr[(arr < 0) | (arr >= n)][0]
        raise NodeIdOutOfRange(f"node id {int(bad)} outside [0, {n})")
    loops = arr[:, 0] == arr[:, 1]
    if loops.any():
        raise SelfLoop(f"self-loop at node {int(arr[loops][0, 0])}")
    norm = np.sort(arr, axis=1)
    if norm.shape[0]:
        uniq, counts = np.unique(norm, axis=0, return_counts=True)
        if (counts > 1).any():
            u, v = uniq[counts > 1][0]
            raise DuplicateEdge(f"edge ({int(u)}, {int(v)}) given more than once")
        norm = uniq  # np.unique sorts rows lexicographically
    return _from_sorted_edges(n, norm)


def empty_graph(n: int) -> Graph:
    return _from_sorted_edges(n, np.zeros((0, 2), dtype=np.int64))


# ---------------------------------------------------------------- edge-list format

def parse_edge_list(text: str) -> Graph:
    """Parse "p <n> <m>" header plus "u v" lines; '#' starts a comment."""
    n = m = None
    pairs: list[tuple[int, int]] = []
    for raw in io.StringIO(text):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "p":
            n, m = int(parts[1]), int(parts[2])
            continue
        pairs.append((int(parts[0]), int(parts[1])))
    g = build_graph(pairs, n)
    if m is not None and m != g.m:
        raise ValueError(f"header announces {m} edges, found {g.m}")
    return g


def read_edge_list(path: str | Path) -> Graph:
    return parse_edge_list(Path(path).read_text())


def format_edge_list(g: Graph) -> str:
    lines = [f"p {g.node_count} {g.m}"]
    lines += [f"{u} {v}" for u, v in g.edges.tolist()]
    return "\n".join(lines) + "\n"


def write_edge_list(g: Graph, path: str | Path) -> None:
    Path(path).write_text(format_edge_list(g))


# ---------------------------------------------------------------- Luby structure

def luby_candidate_mask(g: Graph) -> np.ndarray:
    deg = g.degrees
    if g.m == 0:
        return np.ones(g.node_count, dtype=bool)
    src = np.repeat(np.arange(g.node_count), deg)
    low = deg[g.indices] <= deg[src]
    cnt = np.bincount(src[low], minlength=g.node_count)
    return 3 * cnt >= deg


def luby_candidate_set(g: Graph) -> frozenset[int]:
    """Nodes with at least d(v)/3 neighbours of degree <= d(v); asserts sum d >= |E|."""
    mask = luby_candidate_mask(g)
    total = int(g.degrees[mask].sum())
    assert total >= g.m, f"Luby mass {total} < |E| = {g.m}"
    return frozenset(np.flatnonzero(mask).tolist())


def degree_classes(g: Graph, delta: Fraction) -> dict[int, frozenset[int]]:
    cls = node_classes(g, delta)
    return {i: frozenset(np.flatnonzero(cls == i).tolist()) for i in range(1, delta.denominator + 1)}


def node_classes(g: Graph, delta: Fraction) -> np.ndarray:
    """Class index per node (0 for isolated nodes)."""
    t = class_thresholds(g.node_count, delta)
    deg = g.degrees
    cls = np.searchsorted(t, deg, side="right").astype(np.int64)
    cls[deg == 0] = 0
    return np.minimum(cls, delta.denominator)


Mode = Literal["matching", "mis"]


@dataclass
class HeavySelection:
    mode: Mode
    delta: Fraction
    i: int
    B: np.ndarray  # sorted node ids
    class_sums: list[int]  # sum of d(v) over candidate B for each class 1..1/delta
    seed_edges: np.ndarray | None = None  # E_0 as edge ids (matching mode)
    seed_nodes: np.ndarray | None = None  # J_0 as node ids (mis mode)
    x_low: np.ndarray | None = None  # per edge (a, b): [b in X-side of a, a in X-side of b]

    @property
    def weight(self) -> int:
        return self.class_sums[self.i - 1]

    def x_edges(self, g: Graph, v: int) -> np.ndarray:
        """X(v): incident edges whose other endpoint has degree <= d(v)."""
        inc = g.incident_edges(v)
        side = (g.edges[inc, 1] == v).astype(np.int64)
        return inc[self.x_low[inc, side]]


def select_heavy_class(g: Graph, delta: Fraction | str, mode: Mode) -> HeavySelection:
    delta = parse_delta(delta)
    if g.m == 0:
        raise EmptyGraph("heavy-class selection needs at least one edge")
    k = delta.denominator
    deg = g.degrees
    cls = node_classes(g, delta)
    if mode == "matching":
        a, b = g.edges[:, 0], g.edges[:, 1]
        x_low = np.stack([deg[b] <= deg[a], deg[a] <= deg[b]], axis=1)
        in_x = luby_candidate_mask(g) & (deg > 0)
        sums = [int(deg[in_x & (cls == i)].sum()) for i in range(1, k + 1)]
        i = 1 + int(np.argmax(sums))
        B = np.flatnonzero(in_x & (cls == i))
        inb = np.zeros(g.node_count, dtype=bool)
        inb[B] = True
        e0 = np.flatnonzero((inb[a] & x_low[:, 0]) | (inb[b] & x_low[:, 1]))
        sel = HeavySelection(mode, delta, i, B, sums, seed_edges=e0, x_low=x_low)
        three_x = 3 * np.bincount(np.concatenate([a[x_low[:, 0]], b[x_low[:, 1]]]), minlength=g.node_count)
        assert (three_x[B] >= deg[B]).all(), "B node with |X(v)| < d(v)/3"
    elif mode == "mis":
        member = _mis_class_membership(g, delta, cls)
        sums = [int(deg[member[:, i - 1]].sum()) for i in range(1, k + 1)]
        i = 1 + int(np.argmax(sums))
        B = np.flatnonzero(member[:, i - 1])
        sel = HeavySelection(mode, delta, i, B, sums, seed_nodes=np.flatnonzero(cls == i))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    assert k * sel.weight >= g.m, f"heavy class weight {sel.weight} < delta*|E|"
    return sel


def _mis_class_membership(g: Graph, delta: Fraction, cls: np.ndarray) -> np.ndarray:
    """member[v, i-1] iff sum over neighbours u in C^i of 1/d(u) >= delta/3 (exact)."""
    k = delta.denominator
    n = g.node_count
    deg = g.degrees
    src = np.repeat(np.arange(n), deg)
    ucls = cls[g.indices]
    acc = np.zeros((n, k), dtype=np.float64)
    np.add.at(acc, (src, ucls - 1), 1.0 / deg[g.indices])
    target = 1.0 / (3 * k)
    member = acc >= target
    close = np.abs(acc - target) <= 1e-9
    for v, col in zip(*np.nonzero(close)):
        nb = g.neighbors(v)
        ds = deg[nb[ucls[g.indptr[v]:g.indptr[v + 1]] == col + 1]]
        member[v, col] = sum(Fraction(1, int(d)) for d in ds) >= Fraction(1, 3 * k)
    return member


# ---------------------------------------------------------------- line graph

def line_graph_view(g: Graph, cap: int = 1 << 20) -> Graph:
    """Node e for each edge rank e; e ~ f iff the edges share an endpoint."""
    if g.m > cap:
        raise SizeCapExceeded(f"{g.m} edges exceed the line-graph cap {cap}")
    pairs = []
    for v in range(g.node_count):
        inc = np.sort(g.incident_edges(v))
        if len(inc) > 1:
            iu, ju = np.triu_indices(len(inc), 1)
            pairs.append(np.stack([inc[iu], inc[ju]], axis=1))
    arr = np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)
    return build_graph(arr, g.m)


# ---------------------------------------------------------------- hashing labels

def greedy_edge_coloring(g: Graph) -> np.ndarray:
    """Proper edge colouring by ascending edge rank; at most 2*Delta - 1 colours."""
    used = [0] * g.node_count
    out = np.empty(g.m, dtype=np.int64)
    for e, (u, v) in enumerate(g.edges.tolist()):
        busy = used[u] | used[v]
        free = ~busy & (busy + 1)
        c = free.bit_length() - 1
        out[e] = c
        used[u] |= free
        used[v] |= free
    return out


def greedy_distance2_coloring(g: Graph) -> np.ndarray:
    """Colouring of the square graph by ascending id; at most Delta^2 + 1 colours."""
    n = g.node_count
    near = [0] * n  # colours already taken by neighbours of each node
    col = [-1] * n
    indptr, indices = g.indptr.tolist(), g.indices.tolist()
    for v in range(n):
        nb = indices[indptr[v]:indptr[v + 1]]
        busy = near[v]
        for u in nb:
            busy |= near[u]
            if col[u] >= 0:
                busy |= 1 << col[u]
        free = ~busy & (busy + 1)
        c = free.bit_length() - 1
        col[v] = c
        for u in nb:
            near[u] |= free
    return np.asarray(col, dtype=np.int64)


def is_distance2_coloring(g: Graph, colors: np.ndarray) -> bool:
    """Brute-force check: nodes at distance 1 or 2 never share a colour."""
    for v in range(g.node_count):
        nb = g.neighbors(v)
        closed = np.concatenate([[v], nb])
        if len(np.unique(colors[closed])) != len(closed):
            return False
    return True


def log_star(n: int) -> int:
    count = 0
    x = float(n)
    while x > 1:
        x = math.log2(x)
        count += 1
    return count
