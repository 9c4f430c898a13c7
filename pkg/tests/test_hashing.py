from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from detmpc.errors import DomainOverflow, FamilyTooLarge
from detmpc.hashing import HashFamily, Seed, SeedPrefix, brute_force_probability, is_prime, uniformity_check

primes = st.sampled_from([2, 3, 5, 7, 11, 13])


def test_eval_hand_example():
    fam = HashFamily(2, 7, 7, 7)
    assert fam.eval(Seed((1, 2)), 3) == 0


def test_zero_and_constant_polynomials():
    fam = HashFamily(3, 11, 11, 11)
    assert all(fam.eval(Seed((0, 0, 0)), x) == 0 for x in range(11))
    const = HashFamily(1, 11, 11, 5)
    assert len({const.eval(Seed((7,)), x) for x in range(11)}) == 1


def test_domain_overflow():
    with pytest.raises(DomainOverflow):
        HashFamily(2, 7, 5, 7).eval(Seed((1, 1)), 5)


def test_family_size_and_seed_bits():
    fam = HashFamily(3, 101, 101, 101)
    assert fam.size == 101 ** 3 and fam.seed_bits == 21
    assert fam.completions(SeedPrefix((4,))) == 101 ** 2


def test_threshold_indicator_edges():
    fam = HashFamily(2, 13, 13, 13)
    s = Seed((5, 9))
    assert all(fam.threshold_indicator(s, x, 1, 1) for x in range(13))
    assert not any(fam.threshold_indicator(s, x, 0, 1) for x in range(13))


def test_threshold_one_over_p_probability():
    fam = HashFamily(2, 101, 101, 101)
    seeds = fam.all_seeds()
    hits = (fam.field_values(seeds, np.array([17]))[:, 0] < fam.threshold(1, 101)).sum()
    assert Fraction(int(hits), fam.size) == Fraction(1, 101)
    assert brute_force_probability(HashFamily(2, 11, 11, 11), lambda s: HashFamily(2, 11, 11, 11).eval(s, 3) == 0) == Fraction(1, 11)


def test_uniformity_examples():
    fam = HashFamily(2, 5, 5, 5)
    pair = uniformity_check(fam, [1, 2])
    assert len(pair) == 25 and set(pair.values()) == {1}
    single = uniformity_check(fam, [3])
    assert set(single.values()) == {5}
    with pytest.raises(ValueError):
        uniformity_check(fam, [0, 1, 2])


def test_uniformity_cap():
    with pytest.raises(FamilyTooLarge):
        uniformity_check(HashFamily(3, 257, 257, 257), [1], cap=1000)


@given(primes, st.integers(1, 3), st.data())
def test_k_wise_uniformity(p, k, data):
    fam = HashFamily(k, p, p, p)
    j = data.draw(st.integers(1, min(k, p)))
    pts = data.draw(st.lists(st.integers(0, p - 1), min_size=j, max_size=j, unique=True))
    counts = uniformity_check(fam, pts)
    assert sum(counts.values()) == fam.size


@given(primes, st.integers(1, 3), st.data())
def test_vectorised_matches_scalar(p, k, data):
    fam = HashFamily(k, p, p, p)
    coefs = tuple(data.draw(st.lists(st.integers(0, p - 1), min_size=k, max_size=k)))
    xs = np.arange(p)
    vec = fam.field_values(np.array([coefs]), xs)[0].tolist()
    assert vec == [fam.field_value(Seed(coefs), int(x)) for x in xs]


@given(st.sampled_from([5, 7, 11, 101]), st.integers(1, 101), st.integers(0, 100))
def test_range_mapping_bias_at_most_one_over_p(p, r, x):
    r = min(r, p)
    fam = HashFamily(1, p, p, r)
    seeds = fam.all_seeds()
    vals = np.array([fam.eval(Seed((int(c),)), x % p) for c in seeds[:, 0]])
    for b in range(r):
        dev = abs(Fraction(int((vals == b).sum()), p) - Fraction(1, r))
        assert dev <= Fraction(1, p)


def test_seeds_with_prefix_lexicographic():
    fam = HashFamily(3, 3, 3, 3)
    rows = fam.seeds_with_prefix((2,))
    assert rows.tolist()[:4] == [[2, 0, 0], [2, 0, 1], [2, 0, 2], [2, 1, 0]]
    assert len(rows) == 9


def test_seed_round_trip_and_primes():
    assert Seed.parse(str(Seed((3, 0, 12)))) == Seed((3, 0, 12))
    assert [x for x in range(30) if is_prime(x)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    with pytest.raises(ValueError):
        HashFamily(2, 9, 9, 9)
