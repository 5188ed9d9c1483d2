"""Hand-written term tables used as oracles for the conversion pipeline."""

from fractions import Fraction

from qutritctx.inequality import CROSS, SAME

H = Fraction(1, 2)
ONE = Fraction(1)


def printed_kappa_prime(g):
    """Split expression written out sum by sum, as a term multiset."""
    singles = {("single", ("A", i)): H for i in range(1, 5)}
    singles.update({("single", ("B", j)): ONE for j in range(5, 11)})
    singles.update({("single", ("A", k)): ONE for k in range(11, 14)})
    terms = dict(singles)
    for i in range(1, 5):
        for j in range(5, 11):
            if g(i, j):
                terms[(CROSS, ("A", i), ("B", j))] = -H
    for k in range(11, 14):
        for j in range(5, 11):
            if g(k, j):
                terms[(CROSS, ("A", k), ("B", j))] = -ONE
    for a, b in [(11, 12), (11, 13), (12, 13)]:
        terms[(SAME, ("A", a), ("A", b))] = -ONE
    for a, b in [(5, 6), (7, 8), (9, 10)]:
        terms[(SAME, ("B", a), ("B", b))] = -ONE
    return terms


def printed_beta(g):
    """Bell expression written out sum by sum, as a term multiset."""
    acc = {}

    def add(key, w):
        acc[key] = acc.get(key, 0) + w

    for i in range(1, 5):
        add(("single", ("A", i)), H)
        for j in range(5, 11):
            if g(i, j):
                add((CROSS, ("A", i), ("B", j)), -H)
    for j in range(5, 11):
        add((CROSS, ("A", j), ("B", j)), H)
        for m in range(5, 11):
            if g(j, m):
                add((CROSS, ("A", j), ("B", m)), -H)
    for k in range(11, 14):
        for n in range(11, 14):
            if g(k, n):
                add((CROSS, ("A", k), ("B", n)), -H)
    for j in range(5, 11):
        add(("single", ("B", j)), ONE)
    for k in range(11, 14):
        add(("single", ("A", k)), ONE)
        for j in range(5, 11):
            if g(k, j):
                add((CROSS, ("A", k), ("B", j)), -ONE)
        add((CROSS, ("A", k), ("B", k)), ONE)
    return {k: w for k, w in acc.items() if w != 0}
