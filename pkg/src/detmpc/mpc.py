"""A round-synchronous simulator of the low-space MPC model.

Machines are word budgets, not processes.  Sort, prefix sums and ball
collection are modelled primitives: they do the work in memory, check that the
implied per-machine loads fit, and charge a configurable number of rounds.
"""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Sequence

import numpy as np

from .errors import BallTooLarge, SpaceExceeded
from .graph import Graph

DEFAULT_CHARGES = {
    "sort": 1,
    "prefix_sum": 1,
    "distribute": 1,
    "exchange": 1,
    "ball_step": 1,
    "coloring_step": 1,
}


@dataclass(frozen=True)
class MachineSpec:
    space_words: int
    machine_count: int | None = None  # None: as many machines as needed
    word_bits: int = 64

    def __post_init__(self):
        if self.space_words < 1:
            raise ValueError("S must be at least one word")
        if self.machine_count is not None and self.machine_count < 1:
            raise ValueError("M must be positive")

    @property
    def total_words(self) -> float:
        return math.inf if self.machine_count is None else self.machine_count * self.space_words


@dataclass(frozen=True)
class Ball:
    """A collected ball: its node ids and the induced subgraph (original ids)."""

    center: int
    nodes: np.ndarray
    graph: Graph

    @property
    def words(self) -> int:
        return ball_words(len(self.nodes), self.graph.m)


@dataclass
class RoundRecord:
    round: int
    primitive: str
    max_load: int
    messages: int


@dataclass
class ClusterState:
    """Space and round bookkeeping for one run."""

    spec: MachineSpec
    charges: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_CHARGES))
    assignments: list[list[Any]] = field(default_factory=list)
    round_counter: int = 0
    high_water: list[int] = field(default_factory=list)
    round_log: list[RoundRecord] = field(default_factory=list)
    peak_load: int = 0
    peak_machines: int = 0

    # -- accounting -------------------------------------------------------
    def check_loads(self, loads: Sequence[int] | np.ndarray, what: str = "placement") -> int:
        loads = np.asarray(loads, dtype=np.int64)
        if loads.size == 0:
            return 0
        worst = int(loads.max())
        if worst > self.spec.space_words:
            raise SpaceExceeded(f"{what}: a machine needs {worst} words, S = {self.spec.space_words}")
        if self.spec.machine_count is not None and loads.size > self.spec.machine_count:
            raise SpaceExceeded(f"{what}: needs {loads.size} machines, M = {self.spec.machine_count}")
        if int(loads.sum()) > self.spec.total_words:
            raise SpaceExceeded(f"{what}: total {int(loads.sum())} words exceed M*S")
        self.peak_load = max(self.peak_load, worst)
        self.peak_machines = max(self.peak_machines, int(loads.size))
        if len(self.high_water) < loads.size:
            self.high_water.extend([0] * (loads.size - len(self.high_water)))
        hw = np.maximum(np.asarray(self.high_water[: loads.size], dtype=np.int64), loads)
        self.high_water[: loads.size] = hw.tolist()
        return worst

    def charge(self, primitive: str, max_load: int = 0, messages: int = 0, times: int = 1) -> None:
        for _ in range(self.charges.get(primitive, 1) * times):
            self.round_counter += 1
            self.round_log.append(RoundRecord(self.round_counter, primitive, int(max_load), int(messages)))

    @property
    def rounds(self) -> int:
        return self.round_counter

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "primitive", "max_load", "messages"])
        for r in self.round_log:
            w.writerow([r.round, r.primitive, r.max_load, r.messages])
        return buf.getvalue()

    # -- primitives -------------------------------------------------------
    def distribute_grouped(self, items: Sequence[Any], keys: Sequence[Hashable], chunk_size: int) -> list[list[Any]]:
        """Contiguous machine groups per key, ``chunk_size`` items per machine."""
        if chunk_size > self.spec.space_words:
            raise SpaceExceeded(f"chunk {chunk_size} exceeds S = {self.spec.space_words}")
        if chunk_size < 1:
            raise ValueError("chunk size must be positive")
        groups: dict[Hashable, list[Any]] = {}
        for it, key in zip(items, keys):
            groups.setdefault(key, []).append(it)
        machines: list[list[Any]] = []
        for key in sorted(groups, key=_sort_key):
            bucket = groups[key]
            for s in range(0, len(bucket), chunk_size):
                machines.append(bucket[s:s + chunk_size])
        loads = [len(mc) for mc in machines]
        self.check_loads(loads, "distribute_grouped")
        self.assignments = machines
        self.charge("distribute", max(loads, default=0), len(items))
        return machines

    def chunk_loads(self, group_sizes: np.ndarray, chunk_size: int) -> np.ndarray:
        """Loads of a grouped placement given only the group sizes (fast path)."""
        if chunk_size > self.spec.space_words:
            raise SpaceExceeded(f"chunk {chunk_size} exceeds S = {self.spec.space_words}")
        sizes = np.asarray(group_sizes, dtype=np.int64)
        sizes = sizes[sizes > 0]
        full = sizes // chunk_size
        rest = sizes % chunk_size
        loads = np.concatenate([np.full(int(full.sum()), chunk_size, dtype=np.int64), rest[rest > 0]])
        self.check_loads(loads, "grouped placement")
        self.charge("distribute", int(loads.max(initial=0)), int(sizes.sum()))
        return loads

    def global_sort(self, items: Sequence[Any], key: Callable[[Any], Any] | None = None) -> list[Any]:
        """Stable sort; items laid out S per machine in the output order."""
        out = sorted(items, key=key) if key is not None else sorted(items)
        self._layout(len(out), "sort")
        self.assignments = [out[s:s + self.spec.space_words] for s in range(0, len(out), self.spec.space_words)]
        return out

    def prefix_sums(self, values: Sequence[int]) -> list[int]:
        """Machine m receives the sum of values held by machines 0..m."""
        self.check_loads([1] * len(values), "prefix_sum")
        out = [int(x) for x in np.cumsum(np.asarray(values, dtype=object))] if len(values) else []
        self.charge("prefix_sum", 1, len(values))
        return out

    def layout(self, count: int, primitive: str) -> None:
        """Charge one primitive over ``count`` words spread S per machine."""
        self._layout(int(count), primitive)

    def _layout(self, count: int, primitive: str) -> None:
        s = self.spec.space_words
        loads = [s] * (count // s) + ([count % s] if count % s else [])
        self.check_loads(loads, primitive)
        self.charge(primitive, max(loads, default=0), count)

    def exchange(self, outboxes: dict[int, list[tuple[int, Any]]]) -> dict[int, list[Any]]:
        """Deliver messages at a barrier.

        ``outboxes[sender]`` is a list of ``(dest, payload)``; delivery order is
        (sender, sequence number) regardless of how the outboxes were produced.
        """
        inbox: dict[int, list[Any]] = {}
        count = 0
        for sender in sorted(outboxes):
            for seq, (dest, payload) in enumerate(outboxes[sender]):
                inbox.setdefault(dest, []).append(payload)
                count += 1
        loads = [len(v) for _, v in sorted(inbox.items())]
        self.check_loads(loads, "exchange")
        self.charge("exchange", max(loads, default=0), count)
        return {d: inbox[d] for d in sorted(inbox)}

    def collect_balls(self, g: Graph, radius: int, centers: Iterable[int]) -> dict[int, Ball]:
        """Each center's machine receives the induced ``radius``-hop ball."""
        balls: dict[int, Ball] = {}
        loads = []
        for v in sorted(int(c) for c in centers):
            nodes = bfs_ball(g, v, radius)
            sub = g.induced(nodes)
            words = ball_words(len(nodes), sub.m)
            if words > self.spec.space_words:
                raise BallTooLarge(v, words, self.spec.space_words)
            balls[v] = Ball(v, nodes, sub)
            loads.append(words)
        self.check_loads(loads, "collect_balls")
        self.charge("ball_step", max(loads, default=0), sum(loads), times=ball_rounds(radius))
        return balls

    def charge_balls(self, words: np.ndarray, radius: int, centers: np.ndarray | None = None) -> None:
        """Account for ball collection whose sizes were computed elsewhere."""
        words = np.asarray(words, dtype=np.int64)
        if words.size and int(words.max()) > self.spec.space_words:
            j = int(np.argmax(words))
            node = int(centers[j]) if centers is not None else j
            raise BallTooLarge(node, int(words[j]), self.spec.space_words)
        self.check_loads(words, "collect_balls")
        self.charge("ball_step", int(words.max(initial=0)), int(words.sum()), times=ball_rounds(radius))


def _sort_key(k):
    return (0, k) if isinstance(k, (int, np.integer)) else (1, repr(k))


def ball_words(nodes: int, edges: int) -> int:
    return int(nodes) + int(edges)


def ball_rounds(radius: int) -> int:
    """ceil(log2 r) + 1 rounds (graph exponentiation doubles the radius each round)."""
    return (max(radius, 1) - 1).bit_length() + 1


def bfs_ball(g: Graph, v: int, radius: int) -> np.ndarray:
    dist = {v: 0}
    q = deque([v])
    while q:
        u = q.popleft()
        if dist[u] == radius:
            continue
        for w in g.neighbors(u).tolist():
            if w not in dist:
                dist[w] = dist[u] + 1
                q.append(w)
    return np.array(sorted(dist), dtype=np.int64)


def two_hop_ball_words(g: Graph, centers: np.ndarray, space: int) -> np.ndarray:
    """Words of each center's induced 2-hop ball.

    A cheap upper bound (degree sums along 2-walks) is used when it already
    fits ``space``; otherwise the ball is built exactly.
    """
    import scipy.sparse as sp

    centers = np.asarray(centers, dtype=np.int64)
    if centers.size == 0:
        return np.zeros(0, dtype=np.int64)
    deg = g.degrees.astype(np.int64)
    rows = np.repeat(np.arange(g.node_count), deg)
    adj = sp.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, g.indices)), shape=(g.node_count,) * 2)
    s1 = adj @ deg
    s2 = adj @ s1
    bound = ((1 + deg + s1) + (s1 + (s2 + 1) // 2))[centers]  # nodes + edges
    out = bound.copy()
    for j in np.flatnonzero(bound > space):
        nodes = bfs_ball(g, int(centers[j]), 2)
        out[j] = ball_words(len(nodes), g.induced(nodes).m)
    return out
