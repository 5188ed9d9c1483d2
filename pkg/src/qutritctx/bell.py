"""From the single-qutrit noncontextuality expression to a two-qutrit Bell expression.

The conversion has two steps:

1. :func:`split_expression` hands every observable to Alice (party ``"A"``)
   or Bob (party ``"B"``). Pairs whose operands land on different parties
   become cross-party correlators; the rest stay sequential.
2. :func:`symmetrize` replaces each remaining sequential pair
   ``<X_i X_j>`` by ``(<A_i B_j> + <A_j B_i> - <A_i B_i> - <A_j B_j>) / 2``.

Bob's observable ``B_j`` is the same matrix as ``A_j``; this is only the
right choice for real rays, so both steps refuse complex catalogs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import qmath
from .inequality import (
    CROSS,
    SAME,
    Certificate,
    InequalityExpression,
    Pair,
    Single,
    classical_bound,
    kappa_expression,
    merge_terms,
)
from .rays import BASIS, DIAGONALS, TRIADS, RayCatalog, build_graph

ALICE = "A"
BOB = "B"


@dataclass(frozen=True)
class PartySplit:
    alice: frozenset[int]
    bob: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "alice", frozenset(self.alice))
        object.__setattr__(self, "bob", frozenset(self.bob))
        if self.alice & self.bob:
            raise ValueError(f"indices assigned to both parties: {sorted(self.alice & self.bob)}")

    def party_of(self, i: int) -> str:
        if i in self.alice:
            return ALICE
        if i in self.bob:
            return BOB
        raise ValueError(f"index {i} is not assigned to either party")

    def to_json(self) -> dict:
        return {"alice": sorted(self.alice), "bob": sorted(self.bob)}


def default_split() -> PartySplit:
    """Alice holds the triad and basis rays, Bob the six diagonals."""
    return PartySplit(frozenset(TRIADS + BASIS), frozenset(DIAGONALS))


def entangled_state() -> np.ndarray:
    """Projector onto (|00> + |11> + |22>)/sqrt(3)."""
    psi = np.zeros(9, dtype=complex)
    psi[[0, 4, 8]] = 1 / np.sqrt(3)
    return np.outer(psi, psi.conj())


def noisy_state(v: float) -> np.ndarray:
    """v |psi><psi| + (1 - v) I/9."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility {v} outside [0, 1]")
    return v * entangled_state() + (1 - v) * qmath.I9 / 9


def partial_trace(rho: np.ndarray, keep: int) -> np.ndarray:
    """Reduced state of party ``keep`` (0 or 1) of a two-qutrit state."""
    r = np.asarray(rho).reshape(3, 3, 3, 3)
    return np.einsum("ijkj->ik", r) if keep == 0 else np.einsum("jijk->ik", r)


def _require_real(catalog: RayCatalog) -> None:
    if not catalog.is_real:
        raise ValueError("conversion needs a real catalog (B_j = A_j only holds for real rays)")


def split_expression(expr: InequalityExpression, split: PartySplit) -> InequalityExpression:
    """Distribute the observables of a single-system expression over two parties.

    Singles keep their weight on the owning party. A pair with operands on
    different parties becomes a cross-party term written Alice-first;
    a pair within one party stays a sequential (same-system) term.

    Raises:
        ValueError: if ``expr`` is multi-party or an index is unassigned.
    """
    if not expr.is_single_system:
        raise ValueError("split_expression expects a single-system expression")
    singles = [Single(split.party_of(s.index), s.index, s.weight) for s in expr.singles]
    pairs = []
    for p in expr.pairs:
        i, j = p.left[1], p.right[1]
        pi, pj = split.party_of(i), split.party_of(j)
        if pi == pj:
            pairs.append(Pair(SAME, (pi, i), (pj, j), p.weight))
        elif pi == ALICE:
            pairs.append(Pair(CROSS, (ALICE, i), (BOB, j), p.weight))
        else:
            pairs.append(Pair(CROSS, (ALICE, j), (BOB, i), p.weight))
    name = f"{expr.name}_split" if expr.name else "split"
    if expr.name == "kappa":
        name = "kappa_prime"
    return InequalityExpression(singles, pairs, expr.claimed_bound, name=name)


def replacement_terms(i: int, j: int, weight: Fraction) -> list[Pair]:
    """Four cross-party terms standing in for ``weight * <X_i X_j>``."""
    h = weight / 2
    return [
        Pair(CROSS, (ALICE, i), (BOB, j), h),
        Pair(CROSS, (ALICE, j), (BOB, i), h),
        Pair(CROSS, (ALICE, i), (BOB, i), -h),
        Pair(CROSS, (ALICE, j), (BOB, j), -h),
    ]


def symmetrize(
    expr: InequalityExpression, catalog: RayCatalog, certify: bool = True, jobs: int = 1
) -> InequalityExpression:
    """Replace sequential pairs by cross-party correlators and merge like terms.

    With ``certify`` the claimed bound of the result is the exhaustively
    computed local bound; otherwise the input bound is carried over.

    Raises:
        ValueError: for a sequential pair on non-orthogonal rays or a complex catalog.
    """
    _require_real(catalog)
    graph = build_graph(catalog)
    new_pairs: list[Pair] = []
    for p in expr.pairs:
        if p.kind == CROSS:
            new_pairs.append(p)
            continue
        i, j = p.left[1], p.right[1]
        if not graph(i, j):
            raise ValueError(f"sequential pair {i},{j} is on incompatible observables")
        new_pairs.extend(replacement_terms(i, j, p.weight))
    singles, pairs = merge_terms(expr.singles, new_pairs)
    name = "beta" if expr.name == "kappa_prime" else (f"{expr.name}_bell" if expr.name else "bell")
    out = InequalityExpression(singles, pairs, expr.claimed_bound, name=name)
    if certify and expr.same_system_pairs:
        out = out.with_bound(lhv_bound(out, jobs=jobs).bound)
    return out


def lhv_bound(expr: InequalityExpression, jobs: int = 1) -> Certificate:
    """Local deterministic bound: one +-1 per (party, setting).

    Raises:
        ValueError: if a sequential pair is present.
    """
    if expr.same_system_pairs:
        raise ValueError("lhv_bound needs a purely bipartite expression (no sequential pairs)")
    return classical_bound(expr, jobs=jobs)


def bipartite_operator(expr: InequalityExpression, catalog: RayCatalog) -> np.ndarray:
    """9x9 Bell operator; Alice is the first tensor factor."""
    if expr.same_system_pairs:
        raise ValueError("bipartite evaluation needs a purely bipartite expression")
    if set(expr.parties()) - {ALICE, BOB}:
        raise ValueError(f"unknown parties {expr.parties()}")
    _require_real(catalog)
    op = np.zeros((9, 9), dtype=complex)
    for s in expr.singles:
        a = catalog.observable(s.index)
        local = qmath.tensor(a, qmath.I3) if s.party == ALICE else qmath.tensor(qmath.I3, a)
        op += float(s.weight) * local
    for p in expr.pairs:
        left, right = sorted((p.left, p.right))
        op += float(p.weight) * qmath.tensor(catalog.observable(left[1]), catalog.observable(right[1]))
    return op


def quantum_value_bipartite(expr: InequalityExpression, catalog: RayCatalog, state) -> float:
    rho = qmath.check_density_matrix(state, 9)
    return float(np.trace(bipartite_operator(expr, catalog) @ rho).real)


def visibility_threshold(expr: InequalityExpression, catalog: RayCatalog) -> float:
    """Smallest visibility v with value(noisy_state(v)) above the claimed bound.

    Raises:
        ValueError: if the maximally entangled state does not violate the bound.
    """
    q1 = quantum_value_bipartite(expr, catalog, entangled_state())
    q0 = quantum_value_bipartite(expr, catalog, qmath.I9 / 9)
    bound = float(expr.claimed_bound)
    if q1 <= bound + 1e-12:
        raise ValueError(f"no violation: value {q1:.12g} at v=1 does not exceed bound {bound}")
    return (bound - q0) / (q1 - q0)


def convert(catalog: RayCatalog, expr: InequalityExpression | None = None,
            split: PartySplit | None = None, jobs: int = 1) -> dict:
    """Run both conversion steps and collect the pipeline report."""
    graph = build_graph(catalog)
    expr = kappa_expression(graph) if expr is None else expr
    split = default_split() if split is None else split
    step1 = split_expression(expr, split)
    step1_cert = classical_bound(step1, jobs=jobs)
    step2 = symmetrize(step1, catalog, certify=False)
    step2_cert = lhv_bound(step2, jobs=jobs)
    step2 = step2.with_bound(step2_cert.bound)
    qv = quantum_value_bipartite(step2, catalog, entangled_state())
    return {
        "input_expr": expr.to_json(),
        "split": split.to_json(),
        "step1_expr": step1.to_json(),
        "step1_bound": step1_cert.to_json(),
        "step2_expr": step2.to_json(),
        "lhv_bound": step2_cert.to_json(),
        "alice_settings": step2.settings(ALICE),
        "bob_settings": step2.settings(BOB),
        "quantum_value": qv,
        "visibility_threshold": visibility_threshold(step2, catalog),
    }


def bell_expression(catalog: RayCatalog, jobs: int = 1) -> InequalityExpression:
    """The converted Bell expression with its certified local bound."""
    step1 = split_expression(kappa_expression(build_graph(catalog)), default_split())
    return symmetrize(step1, catalog, certify=True, jobs=jobs)
