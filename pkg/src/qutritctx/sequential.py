"""Lüders-rule statistics of two sequential dichotomic measurements on one qutrit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qmath
from .inequality import COMMUTE_TOL
from .rays import RayCatalog

OUTCOMES = ((-1, -1), (-1, 1), (1, -1), (1, 1))


def outcome_label(a: int, b: int | None = None) -> str:
    """'-1,+1' style label used in tables and as detector names."""
    fmt = lambda x: "+1" if x > 0 else "-1"  # noqa: E731
    return fmt(a) if b is None else f"{fmt(a)},{fmt(b)}"


def parse_label(label: str) -> tuple[int, ...]:
    return tuple(int(x) for x in label.split(","))


@dataclass(frozen=True)
class JointOutcomeTable:
    """Joint distribution of outcomes (a, b), first observable ``order[0]``."""

    probs: dict[tuple[int, int], float]
    order: tuple[int, int]

    def __post_init__(self):
        probs = {ab: float(self.probs.get(ab, 0.0)) for ab in OUTCOMES}
        if min(probs.values()) < -1e-12:
            raise ValueError("negative probability in joint table")
        if abs(sum(probs.values()) - 1.0) > 1e-10:
            raise ValueError(f"joint table sums to {sum(probs.values())!r}")
        object.__setattr__(self, "probs", probs)

    def __getitem__(self, ab: tuple[int, int]) -> float:
        return self.probs[ab]

    def marginal_first(self, a: int) -> float:
        return self.probs[(a, -1)] + self.probs[(a, 1)]

    def to_json(self) -> dict:
        return {
            "order": list(self.order),
            "probs": {outcome_label(a, b): self.probs[(a, b)] for a, b in OUTCOMES},
        }

    @classmethod
    def from_json(cls, doc: dict) -> JointOutcomeTable:
        probs = {parse_label(k): float(v) for k, v in doc["probs"].items()}
        return cls(probs, tuple(doc["order"]))


def outcome_projectors(catalog: RayCatalog, i: int) -> dict[int, np.ndarray]:
    minus = catalog.minus_projector(i)
    return {-1: minus, 1: qmath.I3 - minus}


def luders_joint(rho, catalog: RayCatalog, i: int, j: int) -> JointOutcomeTable:
    """P(a, b) = tr(Pi^j_b Pi^i_a rho Pi^i_a Pi^j_b) for measuring i first, then j.

    ``i == j`` is allowed and exhibits repeatability.
    """
    rho = qmath.check_density_matrix(rho, 3)
    pi, pj = outcome_projectors(catalog, i), outcome_projectors(catalog, j)
    probs = {}
    for a, b in OUTCOMES:
        k = pj[b] @ pi[a]
        probs[(a, b)] = max(float(np.trace(k @ rho @ qmath.dagger(k)).real), 0.0)
    return JointOutcomeTable(probs, (i, j))


def sequential_expectation(table: JointOutcomeTable) -> float:
    return sum(a * b * p for (a, b), p in table.probs.items())


def single_probability(rho, catalog: RayCatalog, i: int, a: int) -> float:
    rho = qmath.check_density_matrix(rho, 3)
    return float(np.trace(outcome_projectors(catalog, i)[a] @ rho).real)


def compatible(catalog: RayCatalog, i: int, j: int, tol: float = COMMUTE_TOL) -> bool:
    a, b = catalog.observable(i), catalog.observable(j)
    return bool(np.max(np.abs(a @ b - b @ a)) <= tol)
