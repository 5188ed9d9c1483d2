import itertools
from fractions import Fraction

import numpy as np
import pytest

from qutritctx import bell, qmath
from qutritctx.inequality import (
    CROSS,
    SAME,
    InequalityExpression,
    Pair,
    Single,
    classical_bound,
    classical_bound_branching,
)
from qutritctx.rays import RayCatalog

from oracles import ONE, H, printed_beta, printed_kappa_prime

def test_entangled_state(catalog):
    rho = bell.entangled_state()
    assert np.trace(rho).real == pytest.approx(1)
    np.testing.assert_allclose(rho @ rho, rho, atol=1e-15)
    for keep in (0, 1):
        np.testing.assert_allclose(bell.partial_trace(rho, keep), qmath.I3 / 3, atol=1e-15)
    for i in catalog.indices:
        a = catalog.observable(i)
        assert abs(qmath.expectation(qmath.tensor(a, a), rho) - 1) <= 1e-12


def test_noisy_state():
    np.testing.assert_allclose(bell.noisy_state(1), bell.entangled_state())
    np.testing.assert_allclose(bell.noisy_state(0), qmath.I9 / 9)
    half = bell.noisy_state(0.5)
    assert np.trace(half).real == pytest.approx(1)
    assert np.linalg.eigvalsh(half).min() >= -1e-12
    for v in (-0.1, 1.1):
        with pytest.raises(ValueError):
            bell.noisy_state(v)


def test_split_settings():
    s = bell.default_split()
    assert s.alice == {1, 2, 3, 4, 11, 12, 13} and s.bob == set(range(5, 11))


def test_split_reproduces_printed_form(kappa_prime, graph):
    assert kappa_prime.term_multiset() == printed_kappa_prime(graph)
    assert len(kappa_prime.cross_pairs) == 18 and len(kappa_prime.same_system_pairs) == 6
    assert kappa_prime.claimed_bound == 9


def test_split_bound(kappa_prime):
    assert classical_bound(kappa_prime).bound == 9


def test_split_without_pairs():
    e = InequalityExpression([Single("A", 1, ONE)], [], 1)
    assert bell.split_expression(e, bell.default_split()).term_multiset() == e.term_multiset()


def test_split_must_cover(kappa):
    with pytest.raises(ValueError):
        bell.split_expression(kappa, bell.PartySplit({1, 2, 3, 4}, {5, 6, 7, 8, 9, 10}))
    with pytest.raises(ValueError):
        bell.PartySplit({1, 2}, {2, 3})


def test_symmetrize_reproduces_printed_form(beta, graph):
    assert beta.term_multiset() == printed_beta(graph)
    assert not beta.same_system_pairs
    assert len(beta.singles) == 13 and len(beta.pairs) == 39
    assert beta.claimed_bound == 15
    assert beta.settings("A") == list(range(1, 14))
    assert beta.settings("B") == list(range(5, 14))


def test_symmetrize_without_sequential_pairs(catalog):
    e = InequalityExpression([Single("A", 1, ONE)], [Pair(CROSS, ("A", 1), ("B", 5), ONE)], 7)
    out = bell.symmetrize(e, catalog)
    assert out.term_multiset() == e.term_multiset()
    assert bell.lhv_bound(out).bound == 2


def test_symmetrize_rejects_incompatible(catalog):
    e = InequalityExpression([], [Pair(SAME, ("A", 1), ("A", 5), ONE)], 1)
    with pytest.raises(ValueError, match="incompatible"):
        bell.symmetrize(e, catalog)


def test_complex_catalog_rejected():
    cat = RayCatalog(np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1j]]))
    e = InequalityExpression([], [Pair(SAME, ("A", 1), ("A", 2), ONE)], 1)
    with pytest.raises(ValueError, match="real"):
        bell.symmetrize(e, cat)


def test_lhv_bounds(beta):
    assert bell.lhv_bound(beta).bound == 15
    cross = InequalityExpression([], [Pair(CROSS, ("A", 1), ("B", 5), ONE)], 1)
    assert bell.lhv_bound(cross).bound == 1
    chsh = InequalityExpression(
        [],
        [
            Pair(CROSS, ("A", 1), ("B", 5), ONE),
            Pair(CROSS, ("A", 1), ("B", 6), ONE),
            Pair(CROSS, ("A", 2), ("B", 5), ONE),
            Pair(CROSS, ("A", 2), ("B", 6), -ONE),
        ],
        2,
    )
    assert bell.lhv_bound(chsh).bound == 2


def test_lhv_rejects_sequential(kappa_prime):
    with pytest.raises(ValueError):
        bell.lhv_bound(kappa_prime)


def test_lhv_two_enumerators(beta):
    assert classical_bound_branching(beta)[0] == bell.lhv_bound(beta).bound == 15


def test_quantum_values(beta, catalog):
    assert bell.quantum_value_bipartite(beta, catalog, bell.entangled_state()) == pytest.approx(47 / 3, abs=1e-12)
    assert bell.quantum_value_bipartite(beta, catalog, qmath.I9 / 9) == pytest.approx(7 / 3, abs=1e-12)
    for v in np.linspace(0, 1, 11):
        val = bell.quantum_value_bipartite(beta, catalog, bell.noisy_state(v))
        assert val == pytest.approx(v * 47 / 3 + (1 - v) * 7 / 3, abs=1e-12)


def test_mixed_value_by_hand(beta):
    # singles -> 1/3 each, cross correlators -> 1/9 each on I/9
    total = sum(s.weight * Fraction(1, 3) for s in beta.singles)
    total += sum(p.weight * Fraction(1, 9) for p in beta.pairs)
    assert total == Fraction(7, 3)


def test_gap_mirrors_single_system(beta, catalog):
    gap = bell.quantum_value_bipartite(beta, catalog, bell.entangled_state()) - float(bell.lhv_bound(beta).bound)
    assert abs(gap - 2 / 3) <= 1e-12


def test_visibility_threshold(beta, catalog):
    assert abs(bell.visibility_threshold(beta, catalog) - 0.95) <= 1e-12
    flat = InequalityExpression([Single("A", 11, ONE)], [], 1)
    with pytest.raises(ValueError, match="no violation"):
        bell.visibility_threshold(flat, catalog)
    looser = beta.with_bound(15.5)
    assert bell.visibility_threshold(looser, catalog) > 0.95


def test_replacement_identity_on_entangled_state(kappa_prime, catalog):
    """On |psi>, (<AiBj> + <AjBi>)/2 equals the sequential <AiAj>; the full
    four-term replacement equals <AiAj> - 1 since <AiBi> = <AjBj> = 1."""
    rho = bell.entangled_state()
    red = bell.partial_trace(rho, 0)
    for p in kappa_prime.same_system_pairs:
        i, j = p.left[1], p.right[1]
        a, b = catalog.observable(i), catalog.observable(j)
        seq = qmath.expectation(a @ b, red)
        ab = qmath.expectation(qmath.tensor(a, b), rho)
        ba = qmath.expectation(qmath.tensor(b, a), rho)
        aa = qmath.expectation(qmath.tensor(a, a), rho)
        bb = qmath.expectation(qmath.tensor(b, b), rho)
        assert abs((ab + ba) / 2 - seq) <= 1e-10
        assert abs((ab + ba - aa - bb) / 2 - (seq - 1)) <= 1e-10


def test_replacement_is_exact_under_perfect_correlation():
    # a_i = b_i for all i: (a_i b_j + a_j b_i - a_i b_i - a_j b_j)/2 = a_i a_j - 1
    for ai, aj in itertools.product((-1, 1), repeat=2):
        assert (ai * aj + aj * ai - 1 - 1) / 2 == ai * aj - 1


def test_convert_report(catalog):
    r = bell.convert(catalog)
    assert r["step1_bound"]["bound"] == {"num": 9, "den": 1}
    assert r["lhv_bound"]["bound"] == {"num": 15, "den": 1}
    assert abs(r["visibility_threshold"] - 0.95) <= 1e-12
    assert r["quantum_value"] == pytest.approx(47 / 3, abs=1e-12)
    assert r["alice_settings"] == list(range(1, 14))
    assert r["bob_settings"] == list(range(5, 14))
