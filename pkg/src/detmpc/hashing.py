"""k-wise independent hash families: polynomials of degree < k over GF(p).

A seed is the coefficient vector ``(c_0, ..., c_{k-1})`` of
``h(x) = sum_j c_j x^j mod p``; field values are mapped to ``[0, range)`` by
floor scaling.  The derandomization engine fixes one coefficient per step, in
index order, so a prefix of length j pins ``c_0..c_{j-1}``.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DomainOverflow, FamilyTooLarge

DEFAULT_FIELD_FLOOR = 1 << 10


def is_prime(x: int) -> bool:
    if x < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    for q in small:
        if x % q == 0:
            return x == q
    d, s = x - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in small:  # deterministic for x < 3.3e24
        y = pow(a, d, x)
        if y in (1, x - 1):
            continue
        for _ in range(s - 1):
            y = y * y % x
            if y == x - 1:
                break
        else:
            return False
    return True


def smallest_prime_at_least(x: int) -> int:
    x = max(int(x), 2)
    while not is_prime(x):
        x += 1
    return x


def auto_field_size(domain_size: int, floor: int = DEFAULT_FIELD_FLOOR) -> int:
    return smallest_prime_at_least(max(domain_size, floor))


@dataclass(frozen=True)
class Seed:
    coefficients: tuple[int, ...]

    def to_json(self) -> list[int]:
        return [int(c) for c in self.coefficients]

    def __str__(self) -> str:
        return ",".join(str(c) for c in self.coefficients)

    @classmethod
    def parse(cls, text: str) -> "Seed":
        return cls(tuple(int(t) for t in text.split(",") if t.strip()))


@dataclass(frozen=True)
class SeedPrefix:
    fixed: tuple[int, ...] = ()

    def extend(self, c: int) -> "SeedPrefix":
        return SeedPrefix(self.fixed + (int(c),))

    def __len__(self) -> int:
        return len(self.fixed)


@dataclass(frozen=True)
class HashFamily:
    k: int
    p: int
    domain_size: int
    range_size: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("independence order k must be >= 1")
        if not is_prime(self.p):
            raise ValueError(f"field size {self.p} is not prime")
        if not (1 <= self.domain_size <= self.p and 1 <= self.range_size <= self.p):
            raise ValueError("domain and range must lie within the field")

    @classmethod
    def for_domain(cls, k: int, domain_size: int, range_size: int | None = None,
                   p: int | None = None, floor: int = DEFAULT_FIELD_FLOOR) -> "HashFamily":
        p = p or auto_field_size(domain_size, floor)
        return cls(k, p, domain_size, range_size or p)

    @property
    def size(self) -> int:
        return self.p ** self.k

    @property
    def seed_bits(self) -> int:
        return self.k * (self.p - 1).bit_length()

    def completions(self, prefix: SeedPrefix | Sequence[int]) -> int:
        j = len(prefix)
        return self.p ** (self.k - j)

    def _check_seed(self, seed: Seed) -> None:
        if len(seed.coefficients) != self.k or any(not 0 <= c < self.p for c in seed.coefficients):
            raise ValueError(f"seed {seed} is not a member of this family")

    def field_value(self, seed: Seed, x: int) -> int:
        if not 0 <= x < self.domain_size:
            raise DomainOverflow(f"{x} outside domain [0, {self.domain_size})")
        acc = 0
        for c in reversed(seed.coefficients):
            acc = (acc * x + c) % self.p
        return acc

    def eval(self, seed: Seed, x: int) -> int:
        self._check_seed(seed)
        return self.field_value(seed, x) * self.range_size // self.p

    def threshold(self, numerator: int, denominator: int) -> int:
        """Field-level cutoff floor(p * num / den)."""
        return self.p * numerator // denominator

    def threshold_indicator(self, seed: Seed, x: int, numerator: int, denominator: int) -> bool:
        return self.eval(seed, x) < self.threshold(numerator, denominator)

    # -- vectorised evaluation ---------------------------------------------
    def field_values(self, seeds: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Field values for every (seed row, point): shape (len(seeds), len(points))."""
        seeds = np.atleast_2d(np.asarray(seeds, dtype=np.int64))
        pts = np.asarray(points, dtype=np.int64) % self.p
        if self.p >= 1 << 31:
            return self._field_values_big(seeds, pts)
        acc = np.zeros((seeds.shape[0], pts.shape[0]), dtype=np.int64)
        for j in range(self.k - 1, -1, -1):
            acc *= pts[None, :]
            acc += seeds[:, j:j + 1]
            acc %= self.p
        return acc

    def _field_values_big(self, seeds: np.ndarray, pts: np.ndarray) -> np.ndarray:
        out = np.empty((seeds.shape[0], pts.shape[0]), dtype=object)
        for a, s in enumerate(seeds.tolist()):
            for b, x in enumerate(pts.tolist()):
                acc = 0
                for c in reversed(s):
                    acc = (acc * x + c) % self.p
                out[a, b] = acc
        return out

    def seeds_with_prefix(self, prefix: Sequence[int], start: int = 0, stop: int | None = None) -> np.ndarray:
        """All completions of ``prefix`` in lexicographic order, rows [start, stop)."""
        j = len(prefix)
        r = self.k - j
        total = self.p ** r
        stop = total if stop is None else min(stop, total)
        idx = np.arange(start, stop, dtype=np.int64)
        out = np.empty((idx.size, self.k), dtype=np.int64)
        out[:, :j] = np.asarray(prefix, dtype=np.int64)
        for t in range(self.k - 1, j - 1, -1):
            out[:, t] = idx % self.p
            idx = idx // self.p
        return out

    def all_seeds(self, cap: int = 1 << 24) -> np.ndarray:
        if self.size > cap:
            raise FamilyTooLarge(f"family has {self.size} members, cap is {cap}")
        return self.seeds_with_prefix(())


def uniformity_check(family: HashFamily, points: Sequence[int], cap: int = 1 << 24) -> Counter:
    """Joint distribution of field values at ``points`` over the whole family.

    Raises unless every tuple occurs exactly p^(k - j) times.
    """
    pts = list(points)
    if len(set(pts)) != len(pts):
        raise ValueError("points must be distinct")
    if len(pts) > family.k:
        raise ValueError(f"{len(pts)} points exceed the independence order {family.k}")
    for x in pts:
        if not 0 <= x < family.domain_size:
            raise DomainOverflow(f"{x} outside domain")
    seeds = family.all_seeds(cap)
    vals = family.field_values(seeds, np.asarray(pts, dtype=np.int64))
    counts = Counter(map(tuple, vals.tolist()))
    expected = family.p ** (family.k - len(pts))
    assert len(counts) == family.p ** len(pts), "some output tuple never occurs"
    assert all(c == expected for c in counts.values()), "output tuples are not uniform"
    return counts


def brute_force_probability(family: HashFamily, event, cap: int = 1 << 22) -> Fraction:
    """Exact probability of ``event(seed)`` by running through every seed."""
    if family.size > cap:
        raise FamilyTooLarge(f"family has {family.size} members, cap is {cap}")
    hits = sum(1 for coefs in itertools.product(range(family.p), repeat=family.k) if event(Seed(coefs)))
    return Fraction(hits, family.size)
