"""Pieces shared by edge and node sparsification.

A stage keeps each item with probability about n^-delta: item y survives iff
h(y) < tau with tau = floor(p * n^-delta).  The seed is fixed by the engine
against squared-deviation objectives, one per node group; the invariants are
then checked exactly with integer powers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .derand import ProgressCertificate, verified_greedy_search
from .errors import InvariantViolated
from .graph import floor_scaled_power
from .hashing import HashFamily
from .objectives import SquaredDeviationObjective


def sampling_threshold(n: int, k: int, p: int) -> int:
    """Largest tau with tau^k * n <= p^k, i.e. floor(p * n^(-1/k))."""
    return max(1, floor_scaled_power(max(n, 1), -1, k, p))


def grouped_entries(owner: np.ndarray, item: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stable sort of (owner, item) slots by owner."""
    order = np.argsort(owner, kind="stable")
    return np.asarray(owner)[order], np.asarray(item)[order]


def power_exceeds(a: int, b: int, n: int, j: int, k: int, factor: Fraction) -> bool:
    """a > factor * n^(-j/k) * b, decided exactly as a^k n^j > (factor b)^k."""
    if a <= 0:
        return False
    return a ** k * n ** j * factor.denominator ** k > (factor.numerator * b) ** k


def power_below(a: int, b: int, n: int, j: int, k: int, factor: Fraction) -> bool:
    """a < factor * n^(-j/k) * b, decided exactly."""
    return a ** k * n ** j * factor.denominator ** k < (factor.numerator * b) ** k


def max_scaled(b: int, n: int, j: int, k: int, factor: Fraction) -> int:
    """Largest integer a with a <= factor * n^(-j/k) * b."""
    from .graph import iroot_floor

    top = (factor.numerator * b) ** k
    bot = n ** j * factor.denominator ** k
    return iroot_floor(top // bot, k)


def min_scaled(b: int, n: int, j: int, k: int, factor: Fraction) -> int:
    """Smallest integer a with a >= factor * n^(-j/k) * b."""
    a = max_scaled(b, n, j, k, factor)
    return a if not power_below(a, b, n, j, k, factor) else a + 1


def violation_penalty(objs, lows: list[np.ndarray], highs: list[np.ndarray]):
    """Seeds -> number of groups whose sampled count leaves [low, high]."""

    def penalty(seeds: np.ndarray) -> np.ndarray:
        total = np.zeros(len(seeds), dtype=np.int64)
        for o, lo, hi in zip(objs, lows, highs):
            c = o.counts(seeds)
            total += ((c < lo[None, :]) | (c > hi[None, :])).sum(axis=1)
        return total

    return penalty


def chunk_group_sizes(owner: np.ndarray, groups: int) -> np.ndarray:
    return np.bincount(np.asarray(owner, dtype=np.int64), minlength=groups)


@dataclass
class StageRecord:
    stage: int
    items_before: int
    items_after: int
    machines: int
    good_groups: int
    groups: int
    violations_i: int
    violations_ii: int
    certificate: ProgressCertificate | None = None

    def row(self) -> dict:
        return {"stage": self.stage, "before": self.items_before, "after": self.items_after,
                "machines": self.machines, "good": self.good_groups, "groups": self.groups,
                "viol_i": self.violations_i, "viol_ii": self.violations_ii}


@dataclass
class SparsifyResult:
    kept: np.ndarray  # item ids surviving every stage
    stages: list[StageRecord] = field(default_factory=list)
    violations: list[tuple[str, int, str]] = field(default_factory=list)  # (bound, node, detail) after the last stage

    def record(self, strict: bool, stage: int, bound: str, node: int, detail: str) -> None:
        if strict:
            raise InvariantViolated(stage, node, detail)
        self.violations.append((bound, node, detail))

    @property
    def certificates(self) -> list[ProgressCertificate]:
        return [s.certificate for s in self.stages if s.certificate is not None]


def good_group_count(counts: np.ndarray, sizes: np.ndarray, n: int, k: int, tau: int, p: int) -> int:
    """Groups whose count lies within n^(0.1 delta) sqrt(e) of e * tau / p (reporting only)."""
    if len(sizes) == 0:
        return 0
    mean = sizes * tau / p
    slack = n ** (0.1 / k) * np.sqrt(sizes)
    return int(np.sum(np.abs(counts - mean) <= slack + 1e-9))


def derandomize_stage(family: HashFamily, tau: int, labels: np.ndarray, parts: list, engine, cluster,
                      label: str, bounds=None, search_budget: int = 8) -> tuple[ProgressCertificate, np.ndarray, list[SquaredDeviationObjective]]:
    """Fix one sampling seed against every objective part; returns the kept-item mask.

    ``parts`` holds (machine, item, weight) entry arrays.  ``bounds(machine ids
    of a part, part index) -> (low, high)`` gives per-group count windows used
    to steer the choice among admissible seeds.
    """
    objs, lows, highs = [], [], []
    for idx, (machine, item, weight) in enumerate(parts):
        if len(item):
            o = SquaredDeviationObjective(family, tau, labels, machine, item, weight)
            objs.append(o)
            if bounds is not None:
                lo, hi = bounds(np.unique(machine), idx)
                lows.append(lo)
                highs.append(hi)
    if not objs:
        cert = ProgressCertificate(_zero_seed(family), Fraction(0), Fraction(0), "empty", label=label)
        return cert, np.ones(len(labels), dtype=bool), objs
    pref = violation_penalty(objs, lows, highs) if bounds is not None else None
    cert = verified_greedy_search(family, objs, options=engine, cluster=cluster, label=label, preference=pref,
                                  search_budget=search_budget)
    keep = objs[0].sampled(cert.seed.coefficients)
    return cert, keep, objs


def _zero_seed(family: HashFamily):
    from .hashing import Seed

    return Seed((0,) * family.k)
