"""Machine objectives with exact conditional expectations.

Two shapes cover every derandomization step of the matching and MIS loops.

``LocalMinUnionObjective`` (pairwise family, seed ``(a0, a1)``): items get
priorities ``z = h(y)``; an item joins when its ``(z, label)`` pair is the
smallest in every group it is constrained by; an owner scores its weight if
any of its items joins.  For fixed ``a1 != 0`` an item joins for exactly the
``a0`` in one cyclic interval whose length is the gap to its cyclic
predecessor, so all conditional expectations reduce to interval unions.

``SquaredDeviationObjective`` (4-wise family): each machine counts the
weighted number of its items sampled by ``h(y) < tau`` and scores
``-(N - target)^2``.  The expectation needs only pairwise statistics, which
stay exactly uniform while at least two coefficients are free.

Item points are ``label + 1`` so that every point is a nonzero field element.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .derand import Objective
from .hashing import HashFamily

_CELLS = 1 << 22  # batch size in (seed x entry) cells


def _hash_items(family: HashFamily, seeds: np.ndarray, points: np.ndarray, split=None) -> np.ndarray:
    """Field values per (seed, item), evaluating each distinct point once."""
    uniq, inv = split if split is not None else np.unique(points, return_inverse=True)
    return family.field_values(seeds, uniq)[:, inv]


def _csr_rows(ptr: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(len(ptr) - 1), np.diff(ptr))


class LocalMinUnionObjective(Objective):
    """Weighted count of owners with at least one local-minimum item.

    ``group_ptr/group_items/group_flag``: groups in CSR form; an item is
    constrained by the groups in which it carries a true flag and must have the
    smallest priority there.  ``owner_ptr/owner_items``: the items each owner
    watches.  Labels must be distinct inside every group.
    """

    def __init__(self, family: HashFamily, labels: np.ndarray, group_ptr, group_items, group_flag,
                 owner_ptr, owner_items, owner_weight):
        super().__init__(family)
        self.interval = family.k == 2  # closed forms exist only for pairwise families
        self.labels = np.asarray(labels, dtype=np.int64)
        self.points = self.labels + 1
        if self.points.size and int(self.points.max()) >= family.p:
            raise ValueError("labels do not fit the field")
        self._split = np.unique(self.points, return_inverse=True)
        self.group_ptr = np.asarray(group_ptr, dtype=np.int64)
        self.group_items = np.asarray(group_items, dtype=np.int64)
        self.group_flag = np.asarray(group_flag, dtype=bool)
        self.group_of = _csr_rows(self.group_ptr)
        self.owner_ptr = np.asarray(owner_ptr, dtype=np.int64)
        self.owner_items = np.asarray(owner_items, dtype=np.int64)
        self.owner_of = _csr_rows(self.owner_ptr)
        self.owner_weight = np.asarray(owner_weight, dtype=np.int64)
        self.machines = len(self.owner_weight)
        self.work = max(1, len(self.group_items) + len(self.owner_items))
        self._check_labels()
        n_items = len(self.labels)
        ones = np.ones(int(self.group_flag.sum()))
        self._flag_to_item = sp.csr_matrix((ones, (np.flatnonzero(self.group_flag), self.group_items[self.group_flag])),
                                           shape=(len(self.group_items), n_items))
        self._item_to_owner = sp.csr_matrix((np.ones(len(self.owner_items)), (self.owner_items, self.owner_of)),
                                            shape=(n_items, self.machines))
        self._sweep: tuple[np.ndarray, int] | None = None
        self._pairs = None

    def _check_labels(self) -> None:
        key = self.group_of * (int(self.labels.max(initial=0)) + 1) + self.labels[self.group_items]
        if len(np.unique(key)) != len(key):
            raise ValueError("two items in one group share a label")

    # -- direct evaluation -------------------------------------------------
    def winners(self, seeds: np.ndarray) -> np.ndarray:
        """Boolean (seeds x items): item is the strict minimum of all its constraining groups."""
        seeds = np.atleast_2d(seeds)
        lab_span = int(self.labels.max(initial=0)) + 1
        z = _hash_items(self.family, seeds, self.points, self._split)
        key = z * lab_span + self.labels[None, :]
        if len(self.group_items) == 0:
            return np.ones_like(key, dtype=bool)
        ek = key[:, self.group_items]
        starts = self.group_ptr[:-1][np.diff(self.group_ptr) > 0]
        gmin = np.minimum.reduceat(ek, starts, axis=1)
        nonempty = np.flatnonzero(np.diff(self.group_ptr) > 0)
        gpos = np.searchsorted(nonempty, self.group_of)
        bad = (ek != gmin[:, gpos]).astype(np.float64)
        lost = (self._flag_to_item.T @ bad.T).T
        return lost == 0

    def values(self, seeds: np.ndarray) -> np.ndarray:
        seeds = np.atleast_2d(np.asarray(seeds, dtype=np.int64))
        out = np.empty(seeds.shape[0], dtype=np.int64)
        step = max(1, _CELLS // self.work)
        for s in range(0, seeds.shape[0], step):
            win = self.winners(seeds[s:s + step]).astype(np.float64)
            covered = (self._item_to_owner.T @ win.T).T > 0
            out[s:s + step] = covered.astype(np.int64) @ self.owner_weight
        return out

    # -- interval sweep ------------------------------------------------------
    def _pair_table(self):
        """Distinct differences x_i - x_j over flagged i and the other members j of its groups.

        With distinct points per group, the cyclic gap of i at multiplier a1 is
        the least a1 * d mod p over these differences, which needs no sort.
        Returns None when the table would be much larger than the entry list.
        """
        if self._pairs is not None:
            return self._pairs or None
        sizes = np.diff(self.group_ptr)
        flagged = np.flatnonzero(self.group_flag)
        n_pairs = int((sizes[self.group_of[flagged]] - 1).sum())
        if n_pairs > 2 * max(len(self.group_items), 1):
            self._pairs = ()
            return None
        g = self.group_of[flagged]
        rep = sizes[g]
        i_ent = np.repeat(flagged, rep)
        j_ent = self.group_ptr[np.repeat(g, rep)] + (np.arange(int(rep.sum())) - np.repeat(np.cumsum(rep) - rep, rep))
        keep = i_ent != j_ent
        i_item, j_item = self.group_items[i_ent[keep]], self.group_items[j_ent[keep]]
        p = self.family.p
        d = (self.points[i_item] - self.points[j_item]) % p
        key = np.unique(i_item * p + d)
        item, d = key // p, key % p
        starts = np.flatnonzero(np.concatenate([[True], item[1:] != item[:-1]])) if len(item) else np.zeros(0, np.int64)
        self._pairs = (d, starts, item[starts])
        return self._pairs

    def _gaps(self, a1: np.ndarray, prod: np.ndarray) -> np.ndarray:
        """L[b, item] = number of a0 for which the item joins, per a1 (all nonzero).

        ``prod[b, x] = a1[b] * x mod p``.
        """
        p = self.family.p
        nb = len(a1)
        n_items = len(self.labels)
        L = np.full((nb, n_items), p, dtype=np.int64)
        if len(self.group_items) == 0:
            return L
        pairs = self._pair_table()
        if pairs is not None:
            d, starts, items = pairs
            if len(d):
                L[:, items] = np.minimum.reduceat(prod[:, d], starts, axis=1)
            return L
        bvals = prod[:, self.points[self.group_items]]  # (nb, E)
        G = len(self.group_ptr) - 1
        E = len(self.group_items)
        key = (np.arange(nb)[:, None] * G + self.group_of[None, :]) * p + bvals
        order = np.argsort(key, axis=None, kind="stable")
        flat_b = bvals.reshape(-1)[order]
        flat_g = (np.arange(nb)[:, None] * G + self.group_of[None, :]).reshape(-1)[order]
        # predecessor in the same (a1, group) block, cyclically
        first = np.ones(len(order), dtype=bool)
        first[1:] = flat_g[1:] != flat_g[:-1]
        last = np.ones(len(order), dtype=bool)
        last[:-1] = flat_g[1:] != flat_g[:-1]
        block_end = np.empty(len(order), dtype=np.int64)
        ends = np.flatnonzero(last)
        block_end[:] = np.repeat(ends, np.diff(np.concatenate([[0], ends + 1])))
        pred = np.where(first, block_end, np.arange(len(order)) - 1)
        gap = (flat_b - flat_b[pred]) % p
        gap[gap == 0] = p  # singleton group
        # scatter back to (a1, entry) positions
        gaps = np.empty(nb * E, dtype=np.int64)
        gaps[order] = gap
        gaps = gaps.reshape(nb, E)
        flagged = np.flatnonzero(self.group_flag)
        rows = np.repeat(np.arange(nb), len(flagged))
        cols = np.tile(self.group_items[flagged], nb)
        np.minimum.at(L, (rows, cols), gaps[:, flagged].reshape(-1))
        return L

    def _label_winners(self) -> np.ndarray:
        """Items that join when all priorities tie (a1 = 0): smallest label wins."""
        win = np.ones(len(self.labels), dtype=bool)
        if len(self.group_items) == 0:
            return win
        lab = self.labels[self.group_items]
        starts = self.group_ptr[:-1][np.diff(self.group_ptr) > 0]
        nonempty = np.flatnonzero(np.diff(self.group_ptr) > 0)
        gmin = np.minimum.reduceat(lab, starts)[np.searchsorted(nonempty, self.group_of)]
        lose = self.group_flag & (lab != gmin)
        win[self.group_items[lose]] = False
        return win

    def _run_sweep(self) -> tuple[np.ndarray, int]:
        """Sum over a1 of q(a0, a1) for every a0, plus the grand total."""
        p = self.family.p
        diff = np.zeros(p + 1, dtype=np.int64)
        total = 0
        # a1 = 0
        win = self._label_winners()
        covered = np.zeros(self.machines, dtype=bool)
        covered[self.owner_of[win[self.owner_items]]] = True
        w0 = int(self.owner_weight[covered].sum())
        diff[0] += w0
        diff[p] -= w0
        total += w0 * p
        if len(self.owner_items):
            step = max(1, _CELLS // max(len(self.group_items), len(self.owner_items), 1))
            for s in range(1, p, step):
                a1 = np.arange(s, min(p, s + step), dtype=np.int64)
                total += self._union_batch(a1, diff)
        self._sweep = (np.cumsum(diff[:p]), total)
        return self._sweep

    def _union_batch(self, a1: np.ndarray, diff: np.ndarray) -> int:
        p = self.family.p
        nb = len(a1)
        prod = (a1[:, None] * np.arange(p, dtype=np.int64)[None, :]) % p
        L = self._gaps(a1, prod)  # (nb, items)
        items = self.owner_items
        # item joins for a0 in [start, start + L) mod p, start = -a1 x
        start = (p - prod[:, self.points[items]]) % p
        length = L[:, items]
        # sort key (owner row, start, length); a wrapped interval adds a second piece at 0
        sb = lb = int(p).bit_length()
        rows = (np.arange(nb, dtype=np.int64) * self.machines) << (sb + lb)
        obase = self.owner_of << (sb + lb)
        head = np.minimum(length, p - start)
        wrap = length > head
        n_main = head.size
        key = np.empty(n_main + int(np.count_nonzero(wrap)), dtype=np.int64)
        main = key[:n_main].reshape(head.shape)
        np.left_shift(start, lb, out=main)
        main += head
        main += obase[None, :]
        main += rows[:, None]
        key[n_main:] = (main[wrap] & ~((1 << (sb + lb)) - 1)) + (length - head)[wrap]
        key.sort()
        ks = key >> lb
        reach = np.maximum.accumulate(ks + (key & ((1 << lb) - 1)))
        new = np.ones(len(ks), dtype=bool)
        new[1:] = ks[1:] > reach[:-1]
        seg_first = np.flatnonzero(new)
        seg_last = np.concatenate([seg_first[1:] - 1, [len(ks) - 1]])
        low = (1 << sb) - 1
        seg_s = ks[seg_first] & low
        seg_e = reach[seg_last] - (ks[seg_first] & ~low)
        w = self.owner_weight[(ks[seg_first] >> sb) % self.machines]
        diff += np.bincount(seg_s, w, p + 1).astype(np.int64) - np.bincount(seg_e, w, p + 1).astype(np.int64)
        return int(((seg_e - seg_s) * w).sum())

    def expectation(self, cap: int = 1 << 22) -> Fraction:
        if not self.interval:
            return super().expectation(cap)
        _, total = self._sweep or self._run_sweep()
        return Fraction(total, self.family.p ** 2)

    def conditional_all(self, prefix: tuple[int, ...]):
        p = self.family.p
        if not self.interval:
            return None
        if len(prefix) == 0:
            sums, _ = self._sweep or self._run_sweep()
            return sums.astype(object), p
        if len(prefix) == 1:
            seeds = self.family.seeds_with_prefix(prefix)
            return self.values(seeds).astype(object), 1
        return None

    def conditional(self, prefix: tuple[int, ...]):
        if not self.interval:
            return None
        if len(prefix) == 0:
            return self.expectation()
        if len(prefix) == 1:
            nums, den = self.conditional_all(())
            return Fraction(int(nums[prefix[0]]), den)
        return Fraction(int(self.values(np.asarray([prefix]))[0]))


class SquaredDeviationObjective(Objective):
    """Sum over machines of ``-(N_x - target_x)^2`` for threshold sampling ``h(y) < tau``.

    Machines are given by ``entry_machine`` (nondecreasing), ``entry_item`` and
    integer ``entry_weight``; items on one machine must have distinct points.
    """

    def __init__(self, family: HashFamily, tau: int, labels: np.ndarray, entry_machine, entry_item, entry_weight=None):
        super().__init__(family)
        self.tau = int(tau)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.points = self.labels + 1
        if self.points.size and int(self.points.max()) >= family.p:
            raise ValueError("labels do not fit the field")
        self.entry_machine = np.asarray(entry_machine, dtype=np.int64)
        self.entry_item = np.asarray(entry_item, dtype=np.int64)
        self.entry_weight = (np.ones(len(self.entry_item), dtype=np.int64) if entry_weight is None
                             else np.asarray(entry_weight, dtype=np.int64))
        if len(self.entry_machine) and (np.diff(self.entry_machine) < 0).any():
            raise ValueError("entries must be grouped by machine")
        uniq, self._mpos = np.unique(self.entry_machine, return_inverse=True)
        self.machines = len(uniq)
        self._starts = np.flatnonzero(np.concatenate([[True], np.diff(self.entry_machine) != 0])) if len(uniq) else np.zeros(0, np.int64)
        key = self._mpos * (int(self.labels.max(initial=0)) + 1) + self.labels[self.entry_item]
        if len(np.unique(key)) != len(key):
            raise ValueError("two items on one machine share a point")
        p, t = family.p, self.tau
        w = self.entry_weight
        W = np.bincount(self._mpos, weights=w, minlength=self.machines).astype(np.int64)
        W2 = np.bincount(self._mpos, weights=w * w, minlength=self.machines).astype(np.int64)
        self.weight_total = W
        self.target = (t * W + p // 2) // p
        num = 0
        for Wx, W2x, cx in zip(W.tolist(), W2.tolist(), self.target.tolist()):
            num += t * p * W2x + t * t * (Wx * Wx - W2x) - 2 * cx * t * p * Wx + cx * cx * p * p
        self._expect = Fraction(-num, p * p)
        self.work = max(1, len(self.entry_item))
        self._uniq, inv = np.unique(self.points, return_inverse=True)
        self._point_machine = sp.csr_matrix((self.entry_weight.astype(np.float64), (inv[self.entry_item], self._mpos)),
                                            shape=(len(self._uniq), self.machines))
        if family.k < 2:
            # the closed form needs pairwise independence; one coefficient is cheap to enumerate
            self._expect = Fraction(int(self.values(family.all_seeds()).sum()), p)

    def sampled(self, seed) -> np.ndarray:
        """Items with h(y) < tau under one seed."""
        vals = _hash_items(self.family, np.asarray([seed], dtype=np.int64), self.points)[0]
        return vals < self.tau

    def counts(self, seeds: np.ndarray) -> np.ndarray:
        seeds = np.atleast_2d(np.asarray(seeds, dtype=np.int64))
        if self.machines == 0:
            return np.zeros((seeds.shape[0], 0), dtype=np.int64)
        ind = (self.family.field_values(seeds, self._uniq) < self.tau).astype(np.float64)
        return np.rint((self._point_machine.T @ ind.T).T).astype(np.int64)

    def values(self, seeds: np.ndarray) -> np.ndarray:
        seeds = np.atleast_2d(np.asarray(seeds, dtype=np.int64))
        out = np.empty(seeds.shape[0], dtype=np.int64)
        step = max(1, _CELLS // self.work)
        for s in range(0, seeds.shape[0], step):
            dev = self.counts(seeds[s:s + step]) - self.target[None, :]
            out[s:s + step] = -(dev * dev).sum(axis=1)
        return out

    def expectation(self, cap: int = 0) -> Fraction:
        return self._expect

    def conditional(self, prefix: tuple[int, ...]):
        free = self.family.k - len(prefix)
        if free >= 2:
            return self._expect
        seeds = self.family.seeds_with_prefix(prefix)
        return Fraction(int(self.values(seeds).sum()), len(seeds))

    def conditional_all(self, prefix: tuple[int, ...]):
        free_after = self.family.k - len(prefix) - 1
        p = self.family.p
        if free_after >= 2:
            return np.full(p, self._expect.numerator, dtype=object), self._expect.denominator
        if free_after == 0:
            return self.values(self.family.seeds_with_prefix(prefix)).astype(object), 1
        return None
