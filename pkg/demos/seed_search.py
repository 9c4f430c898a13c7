"""Fix a pairwise-independent seed coefficient by coefficient and print its certificate.

The objective counts the points of a small set hashed into the second quarter
of the range; the method of conditional expectations never ends below the average.
"""

from fractions import Fraction

from detmpc.derand import FunctionObjective, exact_conditional_expectation, find_seed
from detmpc.hashing import HashFamily

fam = HashFamily(k=2, p=101, domain_size=101, range_size=101)
points = [3, 17, 29, 42, 77, 90]
cut = fam.threshold(1, 4)


def window(seed):
    return sum(cut <= fam.eval(seed, x) < 2 * cut for x in points)


obj = FunctionObjective(fam, window)
print("average over all seeds:", exact_conditional_expectation(obj, ()))
cert = find_seed(fam, [obj], label="demo")
print("chosen seed:", cert.seed, "value:", cert.achieved, ">= bound", cert.bound, cert.holds)
assert Fraction(cert.achieved) >= Fraction(cert.bound)
