"""Acceptance criteria, one test each; every test records a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they are
produced; they are also repeated in the terminal summary.
"""

import json
import time
from fractions import Fraction

import numpy as np
import pytest

from qutritctx import bell, qmath
from qutritctx.cli import run_descriptor, render
from qutritctx.inequality import (
    CROSS,
    SAME,
    InequalityExpression,
    Pair,
    Single,
    classical_bound,
    classical_bound_branching,
    quantum_value,
    robustness,
    state_independence_witness,
)
from qutritctx.photonics import (
    Cascade,
    NoiseModel,
    QutritSource,
    build_device,
    estimate_expression,
    run_experiment,
    run_shots,
    two_photon_source,
)
from qutritctx.sequential import OUTCOMES, luders_joint, outcome_label, sequential_expectation

from oracles import printed_beta

RESULTS = []


def record(n, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {n:>2}  {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def random_density(rng, dim=3):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


# ---------------------------------------------------------------------------


def test_c01_noncontextual_bound(kappa):
    t0 = time.perf_counter()
    cert = classical_bound(kappa, jobs=1)
    elapsed = time.perf_counter() - t0
    ok = cert.bound == 9 and isinstance(cert.bound, Fraction) and cert.evaluations == 8192 and elapsed < 1.0
    record(1, "noncontextual bound", ok,
           f"max kappa = {cert.bound} over {cert.evaluations} assignments in {elapsed * 1e3:.1f} ms")


def test_c02_state_independence(kappa, catalog):
    rng = np.random.default_rng(2)
    states = [qmath.maximally_mixed()]
    states += [qmath.projector(catalog.ray(i)) for i in catalog.indices]
    states += [qmath.projector(qmath.random_pure_vector(rng)) for _ in range(100)]
    worst = max(abs(quantum_value(kappa, catalog, rho) - 29 / 3) for rho in states)
    w = state_independence_witness(kappa, catalog)
    wit = np.abs(w - 29 / 3 * qmath.I3).max()
    record(2, "state independence", worst <= 1e-9 and wit <= 1e-12,
           f"{len(states)} states, max |kappa_qm - 29/3| = {worst:.1e}, witness residual = {wit:.1e}")


def test_c03_robustness(kappa):
    r = robustness(kappa, Fraction(29, 3))
    ok = r == Fraction(2, 87) and kappa.total_weight() == 29
    record(3, "robustness", ok, f"(29/3 - 9) / {kappa.total_weight()} = {r}")


def test_c04_conversion_pipeline(kappa, catalog, graph):
    step1 = bell.split_expression(kappa, bell.default_split())
    step2 = bell.symmetrize(step1, catalog, certify=False)
    same_terms = step2.term_multiset() == printed_beta(graph)
    t0 = time.perf_counter()
    cert = bell.lhv_bound(step2, jobs=1)
    elapsed = time.perf_counter() - t0
    ok = (same_terms and not step2.same_system_pairs and cert.bound == 15
          and cert.evaluations == 2 ** 22 and elapsed < 60)
    record(4, "conversion pipeline", ok,
           f"terms match = {same_terms} ({len(step2.singles)} singles, {len(step2.pairs)} cross, "
           f"{len(step2.same_system_pairs)} sequential), LHV bound {cert.bound} over "
           f"{cert.evaluations} assignments in {elapsed:.1f} s")


def test_c05_bell_quantum_value(beta, catalog):
    rho = bell.entangled_state()
    val = bell.quantum_value_bipartite(beta, catalog, rho)
    corr = max(abs(qmath.expectation(qmath.tensor(catalog.observable(i), catalog.observable(i)), rho) - 1)
               for i in catalog.indices)
    record(5, "Bell quantum value", abs(val - 47 / 3) <= 1e-9 and corr <= 1e-12,
           f"beta_qm = {val!r} (|err| {abs(val - 47 / 3):.1e}), max |<A_i B_i> - 1| = {corr:.1e}")


def test_c06_visibility_threshold(beta, catalog):
    v = bell.visibility_threshold(beta, catalog)
    by_hand = sum(s.weight * Fraction(1, 3) for s in beta.singles) + sum(p.weight * Fraction(1, 9) for p in beta.pairs)
    numeric = bell.quantum_value_bipartite(beta, catalog, qmath.I9 / 9)
    ok = abs(v - 0.95) <= 1e-12 and by_hand == Fraction(7, 3) and abs(numeric - 7 / 3) <= 1e-12
    record(6, "visibility threshold", ok, f"v* = {v!r}, beta(I/9) by term sum = {by_hand}, numeric {numeric:.12f}")


def test_c07_sequential_joint_equivalence(catalog, graph):
    rng = np.random.default_rng(7)
    states = [random_density(rng) if k % 2 else qmath.projector(qmath.random_pure_vector(rng)) for k in range(50)]
    worst_eq = worst_order = worst_mm = 0.0
    for rho in states:
        for i, j in graph.edges():
            ij, ji = luders_joint(rho, catalog, i, j), luders_joint(rho, catalog, j, i)
            direct = qmath.expectation(catalog.observable(i) @ catalog.observable(j), rho)
            worst_eq = max(worst_eq, abs(sequential_expectation(ij) - direct))
            worst_order = max(worst_order, max(abs(ij[(a, b)] - ji[(b, a)]) for a, b in OUTCOMES))
            worst_mm = max(worst_mm, ij[(-1, -1)], ji[(-1, -1)])
    ok = worst_eq <= 1e-10 and worst_order <= 1e-10 and worst_mm <= 1e-12
    record(7, "sequential/joint equivalence", ok,
           f"{len(graph.edges())} edges x {len(states)} states, max |seq - tr| = {worst_eq:.1e}, "
           f"order asym = {worst_order:.1e}, max P(-1,-1) = {worst_mm:.1e}")


def test_c08_photonic_devices(catalog, graph):
    worst_dev = max(1 - abs((build_device(catalog, i).unitary @ catalog.ray(i))[0]) ** 2 for i in catalog.indices)
    rng = np.random.default_rng(8)
    n = 100_000
    worst_sigma = 0.0
    runs = 0
    for s in range(5):
        v = qmath.random_pure_vector(rng)
        src = QutritSource.pure(v)
        rho = qmath.projector(v)
        for k, (i, j) in enumerate(graph.edges()):
            table = run_shots(src, Cascade(build_device(catalog, i), build_device(catalog, j)), n, seed=s, stream=k)
            oracle = luders_joint(rho, catalog, i, j)
            for a, b in OUTCOMES:
                p = oracle[(a, b)]
                c = table.counts[outcome_label(a, b)]
                sd = np.sqrt(n * p * (1 - p))
                z = abs(c - n * p) / sd if sd > 0 else (0.0 if c == 0 else np.inf)
                worst_sigma = max(worst_sigma, z)
            runs += 1
    ok = worst_dev <= 1e-9 and worst_sigma <= 5
    record(8, "photonic device soundness", ok,
           f"max 1 - P(path a) = {worst_dev:.1e} over 13 devices; {runs} cascades at {n} shots, "
           f"worst deviation {worst_sigma:.2f} sigma")


def test_c09_end_to_end_simulation(kappa, beta, catalog):
    n = 1_000_000
    src = QutritSource.from_density_matrix(qmath.maximally_mixed())
    k_hat, k_se = estimate_expression(kappa, run_experiment(kappa, catalog, src, n, seed=0))
    b_hat, b_se = estimate_expression(beta, run_experiment(beta, catalog, two_photon_source(0.9), n, seed=0))
    doc = {"experiment": "kappa", "shots": 50_000, "seed": 5,
           "noise": {"eta": 0.8, "phase_sigma": 0.02, "bs_sigma": 0.01}}
    first = render(run_descriptor(json.loads(json.dumps(doc))), "json").encode()
    second = render(run_descriptor(json.loads(json.dumps(doc))), "json").encode()
    ok = (abs(k_hat - 29 / 3) <= 3 * k_se and k_hat > 9
          and b_hat < 15 - 3 * b_se and first == second)
    record(9, "end-to-end simulation", ok,
           f"kappa_hat = {k_hat:.4f} +- {k_se:.4f} ({(k_hat - 29 / 3) / k_se:+.2f} sigma from 29/3); "
           f"beta_hat(V=0.9) = {b_hat:.4f} +- {b_se:.4f} ({(15 - b_hat) / b_se:.0f} sigma below 15); "
           f"reruns byte-identical = {first == second}")


def random_expression(rng, n_slots):
    if n_slots == 1 or rng.random() < 0.5:
        slots = [("A", i) for i in range(1, n_slots + 1)]
    else:
        na = int(rng.integers(1, n_slots))
        slots = [("A", i) for i in range(1, na + 1)] + [("B", i) for i in range(1, n_slots - na + 1)]

    def weight():
        return Fraction(int(rng.integers(-6, 7)), int(rng.integers(1, 5)))

    singles = [Single(p, i, weight()) for p, i in slots if rng.random() < 0.6]
    pairs = []
    for a in range(len(slots)):
        for b in range(a + 1, len(slots)):
            if rng.random() < 0.3:
                left, right = slots[a], slots[b]
                pairs.append(Pair(SAME if left[0] == right[0] else CROSS, left, right, weight()))
    if not singles and not pairs:
        singles = [Single(*slots[0], Fraction(1))]
    return InequalityExpression(singles, pairs, 0)


def test_c10_oracle_redundancy(kappa, kappa_prime, beta_uncertified):
    rng = np.random.default_rng(10)
    named = {"kappa": kappa, "kappa_prime": kappa_prime, "beta": beta_uncertified}
    mismatches = []
    for name, expr in named.items():
        a = classical_bound(expr).bound
        b, _ = classical_bound_branching(expr)
        if a != b:
            mismatches.append(name)
    for k in range(50):
        expr = random_expression(rng, int(rng.integers(1, 17)))
        a = classical_bound(expr).bound
        b, _ = classical_bound_branching(expr, prune=bool(k % 2))
        if a != b:
            mismatches.append(f"random#{k}")
    record(10, "oracle redundancy", not mismatches,
           f"bitmask and branching enumerators agree on kappa, kappa', beta and 50 random expressions"
           if not mismatches else f"disagreements: {mismatches}")
