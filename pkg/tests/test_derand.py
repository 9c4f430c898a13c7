from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from detmpc.derand import (EngineOptions, FunctionObjective, Objective, exact_conditional_expectation, find_seed,
                           verified_greedy_search)
from detmpc.errors import CapExceeded, EvaluatorInconsistent, NoSeedMeetsBound
from detmpc.hashing import HashFamily, Seed, SeedPrefix
from detmpc.mpc import ClusterState, MachineSpec
from detmpc.objectives import LocalMinUnionObjective, SquaredDeviationObjective
from detmpc.oracles import enumerate_family_statistics

F5 = HashFamily(1, 5, 5, 5)
F52 = HashFamily(2, 5, 5, 5)


def indicator(fam, x, value):
    return FunctionObjective(fam, lambda s: int(fam.field_value(s, x) == value))


def test_constant_objective():
    cert = find_seed(F52, [FunctionObjective(F52, lambda s: 7)])
    assert cert.achieved == cert.bound == 7


def test_single_indicator():
    cert = find_seed(F5, [indicator(F5, 0, 0)])
    assert cert.seed == Seed((0,))
    assert (cert.achieved, cert.bound) == (1, Fraction(1, 5))


def test_opposing_indicators():
    cert = find_seed(F5, [indicator(F5, 0, 0), indicator(F5, 0, 1)])
    assert cert.achieved == 1 and cert.bound == Fraction(2, 5) and cert.holds
    assert cert.seed == Seed((0,))


def test_conditional_expectation_examples():
    obj = indicator(F52, 2, 3)
    assert exact_conditional_expectation(obj, SeedPrefix((1, 1))) == 1
    e = exact_conditional_expectation(obj, SeedPrefix())
    assert (e * 25).denominator == 1
    assert e == enumerate_family_statistics(F52, lambda s: F52.field_value(s, 2) == 3)


def test_symmetric_objective_same_for_equal_prefix_lengths():
    obj = FunctionObjective(F52, lambda s: sum(s.coefficients))
    vals = {exact_conditional_expectation(obj, SeedPrefix((c,))) - c for c in range(5)}
    assert vals == {2}


def test_cap_exceeded():
    fam = HashFamily(3, 101, 101, 101)
    with pytest.raises(CapExceeded):
        exact_conditional_expectation(indicator(fam, 1, 0), (), cap=1000)


class Liar(Objective):
    """Full-seed values disagree with its claimed conditional expectations."""

    def values(self, seeds):
        return np.zeros(len(np.atleast_2d(seeds)), dtype=np.int64)

    def expectation(self, cap=0):
        return Fraction(1)

    def conditional_all(self, prefix):
        return np.ones(self.family.p, dtype=object), 1


def test_evaluator_inconsistent():
    with pytest.raises(EvaluatorInconsistent):
        find_seed(F5, [Liar(F5)])


@given(st.lists(st.integers(0, 4), min_size=1, max_size=4), st.lists(st.integers(0, 4), min_size=1, max_size=4))
def test_greedy_matches_exact_on_small_family(xs, ys):
    objs = [indicator(F52, x, y) for x, y in zip(xs, ys)]
    a = find_seed(F52, objs)
    b = verified_greedy_search(F52, objs)
    assert a.seed == b.seed and a.achieved == b.achieved and a.holds


@given(st.lists(st.integers(-3, 9), min_size=25, max_size=25))
def test_certificate_at_least_mean(table):
    obj = FunctionObjective(F52, lambda s: table[s.coefficients[0] * 5 + s.coefficients[1]])
    cert = find_seed(F52, [obj])
    assert cert.bound == Fraction(sum(table), 25)
    assert cert.achieved >= cert.bound
    assert cert.achieved == max(table) or cert.achieved >= cert.bound


def test_surrogate_forced_scan_still_certifies():
    fam = HashFamily(2, 101, 101, 101)
    # only seed (100, 100) scores; with a tiny cap the greedy pass must fall back to the scan
    obj = FunctionObjective(fam, lambda s: 101 * 101 * int(s.coefficients == (100, 100)))
    cert = verified_greedy_search(fam, [obj], EngineOptions(cap=10), bound=Fraction(1))
    assert cert.strategy == "greedy+scan" and cert.seed == Seed((100, 100)) and cert.holds


def test_unreachable_bound():
    obj = FunctionObjective(F52, lambda s: s.coefficients[0])
    with pytest.raises(NoSeedMeetsBound):
        verified_greedy_search(F52, [obj], EngineOptions(cap=1), bound=Fraction(5))


def test_rounds_charged_per_chunk():
    c = ClusterState(MachineSpec(64))
    cert = find_seed(F52, [indicator(F52, 1, 1)], cluster=c)
    assert c.rounds == 2 and cert.prefix_sum_invocations == 10
    assert '"strategy": "exact"' in cert.dumps()


def test_workers_do_not_change_seed():
    fam = HashFamily(2, 31, 31, 31)
    objs = [indicator(fam, x, (3 * x) % 31) for x in range(6)]
    a = find_seed(fam, objs, options=EngineOptions(workers=1))
    b = find_seed(fam, objs, options=EngineOptions(workers=4))
    assert a.seed == b.seed


@given(st.sampled_from([5, 7, 11]), st.integers(1, 3), st.data())
def test_squared_deviation_closed_forms(p, k, data):
    fam = HashFamily(k, p, p, p)
    tau = data.draw(st.integers(0, p))
    items = data.draw(st.integers(1, min(p - 1, 5)))
    labels = np.arange(items)
    machine = np.sort(np.asarray(data.draw(st.lists(st.integers(0, 2), min_size=items, max_size=items))))
    weight = np.asarray(data.draw(st.lists(st.integers(1, 3), min_size=items, max_size=items)))
    obj = SquaredDeviationObjective(fam, tau, labels, machine, np.arange(items), weight)
    seeds = fam.all_seeds()
    vals = obj.values(seeds)
    assert obj.expectation() == Fraction(int(vals.sum()), fam.size)
    # conditional expectations agree with brute force for every one-coefficient prefix
    for c in range(p):
        sub = vals[c * p ** (k - 1):(c + 1) * p ** (k - 1)]
        assert exact_conditional_expectation(obj, (c,)) == Fraction(int(sub.sum()), len(sub))
    cert = find_seed(fam, [obj])
    assert cert.achieved >= cert.bound


@given(st.sampled_from([7, 11, 13]), st.data(), st.booleans())
def test_local_min_sweep_matches_enumeration(p, data, sorted_gaps):
    fam = HashFamily(2, p, p, p)
    n_items = data.draw(st.integers(1, 6))
    labels = np.asarray(data.draw(st.permutations(range(p - 1))))[:n_items]
    groups = data.draw(st.lists(st.sets(st.integers(0, n_items - 1), min_size=1), max_size=4))
    ptr = np.cumsum([0] + [len(g) for g in groups])
    items = np.asarray([i for g in groups for i in sorted(g)], dtype=np.int64)
    flag = np.asarray(data.draw(st.lists(st.booleans(), min_size=len(items), max_size=len(items))), dtype=bool)
    owners = data.draw(st.lists(st.sets(st.integers(0, n_items - 1)), min_size=1, max_size=3))
    optr = np.cumsum([0] + [len(o) for o in owners])
    oitems = np.asarray([i for o in owners for i in sorted(o)], dtype=np.int64)
    weight = np.arange(1, len(owners) + 1)
    obj = LocalMinUnionObjective(fam, labels, ptr, items, flag, optr, oitems, weight)
    if sorted_gaps:
        obj._pairs = ()  # force the sorting path
    vals = obj.values(fam.all_seeds())
    assert obj.expectation() == Fraction(int(vals.sum()), fam.size)
    for c in range(p):
        assert exact_conditional_expectation(obj, (c,)) == Fraction(int(vals[c * p:(c + 1) * p].sum()), p)
