"""Method of conditional expectations over a polynomial hash family.

An objective reports, for full seeds, the exact value of the sum over the
machines it represents.  Objectives may also expose exact conditional
expectations for every candidate of the next coefficient; when they do not,
the engine enumerates completions as long as that stays below the cap.

The engine keeps one invariant front and centre: the average of the
conditional expectations over all candidates of a chunk equals the
conditional expectation of the prefix.  It is checked with exact rationals
every time all candidates are evaluated.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import CapExceeded, EvaluatorInconsistent, NoSeedMeetsBound
from .hashing import HashFamily, Seed, SeedPrefix

DEFAULT_CAP = 1 << 22
_BLOCK = 1 << 14


class Objective:
    """Base class: integer-valued per-seed objective, divided by ``scale``."""

    scale: int = 1
    machines: int = 1
    work: int = 1  # rough cost of one evaluation, used against the work cap

    def __init__(self, family: HashFamily):
        self.family = family

    def values(self, seeds: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def expectation(self, cap: int = DEFAULT_CAP) -> Fraction:
        """E[q] over the whole family; the default enumerates."""
        return exact_conditional_expectation(self, SeedPrefix(), cap)

    def conditional_all(self, prefix: tuple[int, ...]) -> tuple[np.ndarray, int] | None:
        """Numerators (one per next-chunk candidate) over a common denominator, or None."""
        return None

    def conditional(self, prefix: tuple[int, ...]) -> Fraction | None:
        """Closed-form conditional expectation for ``prefix``, or None."""
        return None


class FunctionObjective(Objective):
    """Wraps a plain Python function of the seed; used for small families and tests."""

    def __init__(self, family: HashFamily, fn, scale: int = 1):
        super().__init__(family)
        self.fn = fn
        self.scale = scale

    def values(self, seeds: np.ndarray) -> np.ndarray:
        return np.array([self.fn(Seed(tuple(int(c) for c in s))) for s in np.atleast_2d(seeds)], dtype=object)


@dataclass
class ChunkRecord:
    index: int
    value: int
    mode: str  # argmax | first-fit | surrogate
    conditional: Fraction | None
    candidates_evaluated: int

    def to_json(self) -> dict:
        return {"index": self.index, "value": self.value, "mode": self.mode,
                "conditional": None if self.conditional is None else str(self.conditional),
                "candidates": self.candidates_evaluated}


@dataclass
class ProgressCertificate:
    seed: Seed
    achieved: Fraction
    bound: Fraction
    strategy: str
    chunks: list[ChunkRecord] = field(default_factory=list)
    rounds_charged: int = 0
    prefix_sum_invocations: int = 0
    label: str = ""

    @property
    def holds(self) -> bool:
        return self.achieved >= self.bound

    def to_json(self) -> dict:
        return {"label": self.label, "seed": self.seed.to_json(), "achieved": str(self.achieved),
                "bound": str(self.bound), "strategy": self.strategy,
                "chunks": [c.to_json() for c in self.chunks], "rounds": self.rounds_charged}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


@dataclass
class EngineOptions:
    cap: int = DEFAULT_CAP
    workers: int = 1
    work_cap: int = 1 << 28  # seeds times per-seed work allowed for one generic enumeration

    def affordable(self, obj: Objective, seeds: int) -> bool:
        return seeds <= self.cap and seeds * obj.work <= self.work_cap


# ---------------------------------------------------------------- helpers

def _fraction_array(nums: np.ndarray, den: int) -> list[Fraction]:
    return [Fraction(int(x), den) for x in nums]


def _combine(parts: list[tuple[np.ndarray, int]]) -> tuple[np.ndarray, int]:
    if len(parts) == 1:
        return parts[0]
    den = 1
    for _, d in parts:
        den = den * d // np.gcd(den, d) if den < 1 << 62 and d < 1 << 62 else den * d // _gcd(den, d)
    total = np.zeros(len(parts[0][0]), dtype=object)
    for nums, d in parts:
        total = total + np.asarray(nums, dtype=object) * (den // d)
    return total, int(den)


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _block_sums(obj: Objective, prefix: Sequence[int], groups: int, opts: EngineOptions) -> np.ndarray:
    """Sum of obj.values over completions of prefix, grouped into ``groups``
    contiguous (lexicographic) blocks of equal size."""
    fam = obj.family
    total = fam.completions(prefix)
    per = total // groups
    starts = list(range(0, total, _BLOCK))

    def run(s):
        seeds = fam.seeds_with_prefix(prefix, s, s + _BLOCK)
        return s, np.asarray(obj.values(seeds))

    out = np.zeros(groups, dtype=object)
    for s, vals in _map(run, starts, opts.workers):
        gid = np.arange(s, s + len(vals)) // per
        if vals.dtype == object or np.abs(vals).max(initial=0) > (1 << 62) // max(len(vals), 1):
            for g, v in zip(gid.tolist(), vals.tolist()):
                out[g] += int(v)
        else:
            part = np.zeros(groups, dtype=np.int64)
            np.add.at(part, gid, vals.astype(np.int64))
            out += part.astype(object)
    return out


def exact_conditional_expectation(obj: Objective, prefix: SeedPrefix | Sequence[int], cap: int = DEFAULT_CAP,
                                  workers: int = 1) -> Fraction:
    """Exact mean of the objective over all completions of ``prefix``."""
    fixed = tuple(prefix.fixed if isinstance(prefix, SeedPrefix) else prefix)
    closed = obj.conditional(fixed)
    if closed is not None:
        return closed
    count = obj.family.completions(fixed)
    if count > cap:
        raise CapExceeded(f"{count} completions exceed the cap {cap}")
    s = _block_sums(obj, fixed, 1, EngineOptions(cap, workers))[0]
    return Fraction(int(s), count * obj.scale)


def _all_candidates(objs: list[Objective], prefix: tuple[int, ...], opts: EngineOptions):
    """Exact conditional expectation of every next-chunk candidate, or None."""
    parts = []
    p = objs[0].family.p
    for obj in objs:
        got = obj.conditional_all(prefix)
        if got is None:
            seeds = obj.family.completions(prefix)
            if not opts.affordable(obj, seeds):
                return None
            sums = _block_sums(obj, prefix, p, opts)
            got = (sums, (seeds // p) * obj.scale)
        parts.append(got)
    return _combine(parts)


def _one_candidate(objs: list[Objective], prefix: tuple[int, ...], opts: EngineOptions) -> Fraction | None:
    total = Fraction(0)
    for obj in objs:
        closed = obj.conditional(prefix)
        if closed is None:
            if not opts.affordable(obj, obj.family.completions(prefix)):
                return None
            closed = exact_conditional_expectation(obj, prefix, opts.cap, opts.workers)
        total += closed
    return total


def total_value(objs: list[Objective], seeds: np.ndarray) -> tuple[np.ndarray, int]:
    return _combine([(np.asarray(o.values(seeds)), o.scale) for o in objs])


def _evaluate(objs: list[Objective], seed: Seed) -> Fraction:
    nums, den = total_value(objs, np.asarray([seed.coefficients], dtype=np.int64))
    return Fraction(int(nums[0]), den)


def _bound(objs: list[Objective], opts: EngineOptions) -> Fraction:
    return sum((o.expectation(opts.cap) for o in objs), Fraction(0))


# ---------------------------------------------------------------- strategies

def find_seed(family: HashFamily, evaluators: Sequence[Objective], strategy: str = "exact",
              options: EngineOptions | None = None, cluster=None, label: str = "") -> ProgressCertificate:
    """Fix the seed one coefficient at a time.

    ``exact``: every chunk takes the candidate with the largest exact
    conditional expectation (ties to the smaller value); raises CapExceeded
    if some chunk cannot be evaluated exactly.  ``greedy`` delegates to
    :func:`verified_greedy_search`.
    """
    opts = options or EngineOptions()
    objs = list(evaluators)
    if strategy == "greedy":
        return verified_greedy_search(family, objs, options=opts, cluster=cluster, label=label)
    if strategy != "exact":
        raise ValueError(f"unknown strategy {strategy!r}")
    bound = _bound(objs, opts)
    current = bound
    prefix: tuple[int, ...] = ()
    chunks = []
    for j in range(family.k):
        got = _all_candidates(objs, prefix, opts)
        if got is None:
            raise CapExceeded(f"chunk {j}: exact conditional expectations exceed the cap")
        nums, den = got
        _check_average(nums, den, family.p, current, j)
        best = int(np.argmax(nums))
        current = Fraction(int(nums[best]), den)
        prefix += (best,)
        chunks.append(ChunkRecord(j, best, "argmax", current, family.p))
        _charge(cluster, family.p)
    seed = Seed(prefix)
    achieved = _evaluate(objs, seed)
    if achieved != current:
        raise EvaluatorInconsistent(f"full-seed value {achieved} differs from last conditional {current}")
    return ProgressCertificate(seed, achieved, bound, "exact", chunks, family.k, family.k * family.p, label)


def verified_greedy_search(family: HashFamily, evaluators: Sequence[Objective], options: EngineOptions | None = None,
                           cluster=None, bound: Fraction | None = None, label: str = "",
                           preference=None, search_budget: int = 8) -> ProgressCertificate:
    """Greedy chunk fixing that always ends with a certified seed.

    Per chunk, in order of preference: all candidates exact (argmax), else the
    first candidate whose exact conditional expectation reaches the running
    value, else the smallest candidate (surrogate: unconditional expectation).
    The full seed is then evaluated; if it falls short of the bound the family
    is scanned in lexicographic order for the first seed that meets it.

    ``preference`` (seeds -> integer penalties) lets the caller choose among
    completions that keep the guarantee: when only two chunks remain and the
    last one can be enumerated, up to ``search_budget`` admissible values of
    the second-to-last chunk are tried and the admissible full seed with the
    smallest penalty wins (ties: larger value, then lexicographically first).
    """
    opts = options or EngineOptions()
    objs = list(evaluators)
    target = _bound(objs, opts) if bound is None else Fraction(bound)
    current: Fraction | None = target
    prefix: tuple[int, ...] = ()
    chunks: list[ChunkRecord] = []
    p = family.p
    for j in range(family.k):
        if preference is not None and j == family.k - 2 and current is not None:
            picked = _joint_last_two(family, objs, prefix, current, preference, search_budget, opts)
            if picked is not None:
                (c2, cond2, tried), (c3, cond3) = picked
                chunks.append(ChunkRecord(j, c2, "first-fit", cond2, tried))
                chunks.append(ChunkRecord(j + 1, c3, "preferred", cond3, p))
                _charge(cluster, tried)
                _charge(cluster, p)
                prefix += (c2, c3)
                current = cond3
                break
        got = _all_candidates(objs, prefix, opts)
        if got is not None:
            nums, den = got
            if current is not None and bound is None:
                _check_average(nums, den, p, current, j)
            best = int(np.argmax(nums))
            current = Fraction(int(nums[best]), den)
            chunks.append(ChunkRecord(j, best, "argmax", current, p))
            _charge(cluster, p)
        else:
            chosen = None
            tried = 0
            if current is not None:
                for c in range(p):
                    tried += 1
                    val = _one_candidate(objs, prefix + (c,), opts)
                    if val is None:
                        break
                    if val >= current:
                        chosen, current = c, val
                        break
            if chosen is None:
                chosen, current = 0, None
                chunks.append(ChunkRecord(j, 0, "surrogate", None, tried))
            else:
                chunks.append(ChunkRecord(j, chosen, "first-fit", current, tried))
            _charge(cluster, max(tried, 1))
            best = chosen
        prefix += (best,)
    seed = Seed(prefix)
    achieved = _evaluate(objs, seed)
    strategy = "greedy"
    if current is not None and achieved != current:
        raise EvaluatorInconsistent(f"full-seed value {achieved} differs from last conditional {current}")
    if achieved < target:
        seed, achieved = _scan(family, objs, target, opts)
        strategy = "greedy+scan"
        _charge(cluster, 1)
    return ProgressCertificate(seed, achieved, target, strategy, chunks, len(chunks), sum(c.candidates_evaluated for c in chunks), label)


def _joint_last_two(family: HashFamily, objs: list[Objective], prefix: tuple[int, ...], current: Fraction,
                    preference, budget: int, opts: EngineOptions):
    p = family.p
    if not all(opts.affordable(o, p) for o in objs):
        return None
    best = None
    admissible = 0
    for c in range(p):
        seeds = family.seeds_with_prefix(prefix + (c,))
        nums, den = total_value(objs, seeds)
        mean = Fraction(int(np.sum(np.asarray(nums, dtype=object))), den * p)
        if mean < current:
            continue
        admissible += 1
        vals = [Fraction(int(x), den) for x in nums]
        ok = [t for t in range(p) if vals[t] >= mean]
        pen = np.asarray(preference(seeds[ok]))
        t = min(range(len(ok)), key=lambda a: (int(pen[a]), -vals[ok[a]], a))
        cand = (int(pen[t]), (c, mean, c + 1), (ok[t], vals[ok[t]]))
        if best is None or cand[0] < best[0]:
            best = cand
        if best[0] == 0 or admissible >= budget:
            break
    return None if best is None else (best[1], best[2])


def _scan(family: HashFamily, objs: list[Objective], target: Fraction, opts: EngineOptions) -> tuple[Seed, Fraction]:
    total = family.size
    for start in range(0, total, _BLOCK):
        seeds = family.seeds_with_prefix((), start, start + _BLOCK)
        nums, den = total_value(objs, seeds)
        ok = np.flatnonzero(np.asarray([Fraction(int(x), den) >= target for x in nums]))
        if ok.size:
            row = seeds[int(ok[0])]
            return Seed(tuple(int(c) for c in row)), Fraction(int(nums[int(ok[0])]), den)
    raise NoSeedMeetsBound(f"no seed in the family reaches {target}")


def _check_average(nums: np.ndarray, den: int, p: int, current: Fraction, chunk: int) -> None:
    mean = Fraction(int(np.sum(np.asarray(nums, dtype=object))), den * p)
    if mean != current:
        raise EvaluatorInconsistent(f"chunk {chunk}: candidate average {mean} != prefix expectation {current}")


def _charge(cluster, candidates: int) -> None:
    if cluster is not None:
        cluster.charge("prefix_sum", 1, candidates)
