"""Sequential references and one-pass verifiers.

Greedy order is ascending id everywhere (edge rank for matchings), so the
reference outputs are canonical.  Verifiers never raise on bad input; they
return a report that carries a witness.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import CapExceeded, PaletteTooSmall
from .graph import Graph
from .hashing import HashFamily, Seed


@dataclass(frozen=True)
class VerificationReport:
    prop: str
    ok: bool
    witness: tuple | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok

    def line(self) -> str:
        return f"{self.prop}: {'pass' if self.ok else 'FAIL'}" + ("" if self.ok else f" witness={self.witness} {self.detail}")


def _palette_lists(palettes, n: int) -> list[list[int]]:
    if isinstance(palettes, Mapping):
        return [sorted(int(c) for c in palettes.get(v, ())) for v in range(n)]
    return [sorted(int(c) for c in palettes[v]) for v in range(n)]


def greedy_mis(g: Graph) -> np.ndarray:
    taken = np.zeros(g.node_count, dtype=bool)
    blocked = np.zeros(g.node_count, dtype=bool)
    for v in range(g.node_count):
        if not blocked[v]:
            taken[v] = True
            blocked[g.neighbors(v)] = True
    return np.flatnonzero(taken)


def greedy_matching(g: Graph) -> np.ndarray:
    used = np.zeros(g.node_count, dtype=bool)
    out = []
    for u, v in g.edges.tolist():
        if not used[u] and not used[v]:
            used[u] = used[v] = True
            out.append((u, v))
    return np.asarray(out, dtype=np.int64).reshape(-1, 2)


def greedy_list_coloring(g: Graph, palettes) -> np.ndarray:
    """Each node in id order takes its smallest palette colour unused by earlier neighbours."""
    pal = _palette_lists(palettes, g.node_count)
    col = np.full(g.node_count, -1, dtype=np.int64)
    for v in range(g.node_count):
        if len(pal[v]) < g.degree(v) + 1:
            raise PaletteTooSmall(f"node {v}: palette {len(pal[v])} < degree + 1 = {g.degree(v) + 1}")
        busy = set(col[g.neighbors(v)].tolist())
        col[v] = next(c for c in pal[v] if c not in busy)
    return col


def verify_mis(g: Graph, nodes: Sequence[int] | np.ndarray) -> VerificationReport:
    s = np.asarray(nodes, dtype=np.int64).ravel()
    if s.size and (s.min() < 0 or s.max() >= g.node_count):
        bad = int(s[(s < 0) | (s >= g.node_count)][0])
        return VerificationReport("mis", False, (bad,), "node id out of range")
    mask = np.zeros(g.node_count, dtype=bool)
    mask[s] = True
    if g.m:
        both = mask[g.edges[:, 0]] & mask[g.edges[:, 1]]
        if both.any():
            return VerificationReport("mis", False, tuple(g.edges[np.argmax(both)].tolist()), "adjacent nodes both chosen")
    covered = mask.copy()
    if g.m:
        hit = g.edges[mask[g.edges[:, 0]] | mask[g.edges[:, 1]]].ravel()
        covered[hit] = True
    if not covered.all():
        return VerificationReport("mis", False, (int(np.argmin(covered)),), "node could be added")
    return VerificationReport("mis", True)


def verify_matching(g: Graph, pairs: Sequence[Sequence[int]] | np.ndarray) -> VerificationReport:
    mm = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(mm):
        lo, hi = mm.min(axis=1), mm.max(axis=1)
        keys = lo * max(g.node_count, 1) + hi
        have = g.edges[:, 0] * max(g.node_count, 1) + g.edges[:, 1]
        present = np.isin(keys, have)
        if not present.all():
            return VerificationReport("matching", False, tuple(mm[np.argmin(present)].tolist()), "not an edge of the graph")
        ends, counts = np.unique(mm.ravel(), return_counts=True)
        if (counts > 1).any():
            return VerificationReport("matching", False, (int(ends[np.argmax(counts > 1)]),), "node matched twice")
    used = np.zeros(g.node_count, dtype=bool)
    used[mm.ravel()] = True
    if g.m:
        free = ~used[g.edges[:, 0]] & ~used[g.edges[:, 1]]
        if free.any():
            return VerificationReport("matching", False, tuple(g.edges[np.argmax(free)].tolist()), "edge could be added")
    return VerificationReport("matching", True)


def verify_coloring(g: Graph, palettes, colors: Sequence[int] | np.ndarray) -> VerificationReport:
    col = np.asarray(colors, dtype=np.int64).ravel()
    if len(col) != g.node_count:
        return VerificationReport("coloring", False, (len(col),), "wrong number of colours")
    pal = _palette_lists(palettes, g.node_count)
    for v in range(g.node_count):
        if int(col[v]) not in pal[v]:
            return VerificationReport("coloring", False, (v, int(col[v])), "colour outside the palette")
    if g.m:
        mono = col[g.edges[:, 0]] == col[g.edges[:, 1]]
        if mono.any():
            return VerificationReport("coloring", False, tuple(g.edges[np.argmax(mono)].tolist()), "monochromatic edge")
    return VerificationReport("coloring", True)


def enumerate_family_statistics(family: HashFamily, event: Callable, cap: int = 1 << 22,
                                vectorized: bool = False) -> Fraction:
    """Exact probability of ``event`` over the whole family.

    ``event`` takes a Seed, or with ``vectorized`` an (S, k) coefficient array
    returning a bool array.
    """
    if family.size > cap:
        raise CapExceeded(f"enumerating {family.size} seeds exceeds cap {cap}")
    if vectorized:
        hits = int(np.count_nonzero(event(family.all_seeds(cap))))
    else:
        hits = sum(1 for c in itertools.product(range(family.p), repeat=family.k) if event(Seed(c)))
    return Fraction(hits, family.size)
