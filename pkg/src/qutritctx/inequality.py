"""Correlation expressions over dichotomic observables.

An :class:`InequalityExpression` is a weighted sum of one-point terms
``<X>`` and two-point terms ``<XY>`` with a claimed upper bound. Weights are
stored as :class:`fractions.Fraction` so that classical bounds are certified
with integer arithmetic only. Quantum values are floats.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable

import numpy as np

from . import qmath
from .rays import BASIS, DIAGONALS, TRIADS, OrthogonalityGraph, RayCatalog

SAME = "same-system"
CROSS = "cross-party"

MAX_SLOTS = 30
COMMUTE_TOL = 1e-9

Slot = tuple[str, int]


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, dict):
        return Fraction(int(x["num"]), int(x["den"]))
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**6)
    return Fraction(x)


def _frac_json(x: Fraction) -> dict:
    return {"num": x.numerator, "den": x.denominator}


@dataclass(frozen=True)
class Single:
    party: str
    index: int
    weight: Fraction

    @property
    def slot(self) -> Slot:
        return (self.party, self.index)


@dataclass(frozen=True)
class Pair:
    """Two-point term. For same-system terms ``left`` is measured first."""

    kind: str
    left: Slot
    right: Slot
    weight: Fraction

    @property
    def key(self) -> tuple:
        return (self.kind, self.left, self.right)


@dataclass(frozen=True)
class InequalityExpression:
    singles: tuple[Single, ...]
    pairs: tuple[Pair, ...]
    claimed_bound: Fraction
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "singles", tuple(self.singles))
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(self, "claimed_bound", _frac(self.claimed_bound))
        seen = set()
        for s in self.singles:
            if s.slot in seen:
                raise ValueError(f"duplicate single term {s.slot}")
            seen.add(s.slot)
        seen = set()
        for p in self.pairs:
            if p.kind not in (SAME, CROSS):
                raise ValueError(f"unknown pair kind {p.kind!r}")
            if p.left == p.right:
                raise ValueError(f"pair term on a single slot {p.left}")
            if p.kind == SAME and p.left[0] != p.right[0]:
                raise ValueError(f"same-system pair spans parties: {p.left}, {p.right}")
            if p.kind == CROSS and p.left[0] == p.right[0]:
                raise ValueError(f"cross-party pair within one party: {p.left}, {p.right}")
            if p.key in seen:
                raise ValueError(f"duplicate pair term {p.key}")
            seen.add(p.key)

    def slots(self) -> list[Slot]:
        """All (party, index) slots used by the expression, sorted."""
        s = {t.slot for t in self.singles}
        for p in self.pairs:
            s.add(p.left)
            s.add(p.right)
        return sorted(s)

    def parties(self) -> list[str]:
        return sorted({party for party, _ in self.slots()})

    def settings(self, party: str) -> list[int]:
        return [i for p, i in self.slots() if p == party]

    def total_weight(self) -> Fraction:
        return sum((abs(t.weight) for t in (*self.singles, *self.pairs)), Fraction(0))

    @property
    def same_system_pairs(self) -> tuple[Pair, ...]:
        return tuple(p for p in self.pairs if p.kind == SAME)

    @property
    def cross_pairs(self) -> tuple[Pair, ...]:
        return tuple(p for p in self.pairs if p.kind == CROSS)

    @property
    def is_single_system(self) -> bool:
        return len(self.parties()) <= 1

    @property
    def is_bipartite(self) -> bool:
        return not self.same_system_pairs

    def with_bound(self, bound, name: str | None = None) -> InequalityExpression:
        return replace(self, claimed_bound=_frac(bound), name=self.name if name is None else name)

    def term_multiset(self) -> dict:
        """Map of term key to weight, usable for order-free comparison."""
        out = {("single", s.slot): s.weight for s in self.singles}
        out.update({p.key: p.weight for p in self.pairs})
        return out

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "bound": _frac_json(self.claimed_bound),
            "singles": [{"party": s.party, "index": s.index, "w": _frac_json(s.weight)} for s in self.singles],
            "pairs": [
                {
                    "kind": p.kind,
                    "left": {"party": p.left[0], "index": p.left[1]},
                    "right": {"party": p.right[0], "index": p.right[1]},
                    "w": _frac_json(p.weight),
                }
                for p in self.pairs
            ],
        }

    @classmethod
    def from_json(cls, doc) -> InequalityExpression:
        if isinstance(doc, str):
            doc = json.loads(doc)
        slot = lambda d: (str(d["party"]), int(d["index"]))  # noqa: E731
        return cls(
            singles=[Single(str(s["party"]), int(s["index"]), _frac(s["w"])) for s in doc.get("singles", [])],
            pairs=[Pair(p["kind"], slot(p["left"]), slot(p["right"]), _frac(p["w"])) for p in doc.get("pairs", [])],
            claimed_bound=_frac(doc["bound"]),
            name=doc.get("name", ""),
        )


def _check_13_ray_graph(graph: OrthogonalityGraph) -> None:
    ok = (
        graph.n == 13
        and len(graph.edges()) == 24
        and graph.count_edges(TRIADS, DIAGONALS) == 12
        and graph.count_edges(DIAGONALS + BASIS) == 12
        and graph.count_edges(TRIADS) == 0
        and graph.count_edges(TRIADS, BASIS) == 0
    )
    if not ok:
        raise ValueError("graph does not have the 13-ray orthogonality structure")


def kappa_expression(graph: OrthogonalityGraph) -> InequalityExpression:
    """The 13-ray state-independent noncontextuality expression, bound 9."""
    _check_13_ray_graph(graph)
    half = Fraction(1, 2)
    singles = [Single("A", i, half) for i in TRIADS]
    singles += [Single("A", k, Fraction(1)) for k in DIAGONALS + BASIS]
    pairs = [
        Pair(SAME, ("A", i), ("A", j), -half)
        for i in TRIADS
        for j in DIAGONALS
        if graph(i, j)
    ]
    rest = DIAGONALS + BASIS
    pairs += [
        Pair(SAME, ("A", m), ("A", n), Fraction(-1))
        for m in rest
        for n in rest
        if m < n and graph(m, n)
    ]
    return InequalityExpression(singles, pairs, Fraction(9), name="kappa")


def yu_oh_expression(graph: OrthogonalityGraph) -> InequalityExpression:
    """Original unweighted 13-ray form: all singles weight 1, every edge weight -1/2, bound 8."""
    _check_13_ray_graph(graph)
    singles = [Single("A", i, Fraction(1)) for i in range(1, 14)]
    pairs = [Pair(SAME, ("A", i), ("A", j), Fraction(-1, 2)) for i, j in graph.edges()]
    return InequalityExpression(singles, pairs, Fraction(8), name="yu_oh")


# --------------------------------------------------------------------------
# Exhaustive certification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    bound: Fraction
    maximizer: dict[Slot, int]
    evaluations: int
    wall_time_ms: float = field(default=0.0, compare=False)

    def to_json(self) -> dict:
        return {
            "bound": _frac_json(self.bound),
            "bound_float": float(self.bound),
            "maximizer": [{"party": p, "index": i, "value": v} for (p, i), v in sorted(self.maximizer.items())],
            "evaluations": self.evaluations,
            "wall_time_ms": round(self.wall_time_ms, 3),
        }


@dataclass(frozen=True)
class _IntegerForm:
    """Expression scaled to integer weights over a fixed slot order."""

    slots: list[Slot]
    scale: int
    single_w: np.ndarray  # per slot
    pair_l: np.ndarray
    pair_r: np.ndarray
    pair_w: np.ndarray


def _integer_form(expr: InequalityExpression) -> _IntegerForm:
    slots = expr.slots()
    pos = {s: k for k, s in enumerate(slots)}
    weights = [t.weight for t in (*expr.singles, *expr.pairs)]
    scale = math.lcm(*(w.denominator for w in weights)) if weights else 1
    single_w = np.zeros(len(slots), dtype=np.int64)
    for s in expr.singles:
        single_w[pos[s.slot]] += int(s.weight * scale)
    pair_l = np.array([pos[p.left] for p in expr.pairs], dtype=np.int64)
    pair_r = np.array([pos[p.right] for p in expr.pairs], dtype=np.int64)
    pair_w = np.array([int(p.weight * scale) for p in expr.pairs], dtype=np.int64)
    return _IntegerForm(slots, scale, single_w, pair_l, pair_r, pair_w)


def _check_guard(n: int) -> None:
    if n > MAX_SLOTS:
        raise ValueError(
            f"{n} assignment slots exceeds the enumeration guard of {MAX_SLOTS}; "
            "use the CLI's partitioned mode (--jobs) on a reduced expression"
        )


_CHUNK = 1 << 18


def _bitmask_range(form: _IntegerForm, start: int, stop: int) -> tuple[int, int]:
    """Max scaled score over assignment numbers in [start, stop) and its first index.

    Assignment number ``k`` gives slot ``s`` the value +1 when bit ``n-1-s``
    of ``k`` is set and -1 otherwise, so counting up walks assignments in
    lexicographic order with -1 < +1.
    """
    n = len(form.slots)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    best, best_k = None, -1
    for lo in range(start, stop, _CHUNK):
        hi = min(lo + _CHUNK, stop)
        k = np.arange(lo, hi, dtype=np.int64)
        x = (((k[:, None] >> shifts) & 1) * 2 - 1).astype(np.int64)
        score = x @ form.single_w
        if len(form.pair_w):
            score += (x[:, form.pair_l] * x[:, form.pair_r]) @ form.pair_w
        j = int(np.argmax(score))
        if best is None or score[j] > best:
            best, best_k = int(score[j]), lo + j
    return best, best_k


def _decode(form: _IntegerForm, k: int) -> dict[Slot, int]:
    n = len(form.slots)
    return {s: (1 if (k >> (n - 1 - pos)) & 1 else -1) for pos, s in enumerate(form.slots)}


def classical_bound(expr: InequalityExpression, jobs: int = 1) -> Certificate:
    """Maximum of ``expr`` over all deterministic +-1 assignments of its slots.

    Every slot (party, index) gets one value; ``<X>`` becomes ``x`` and
    ``<XY>`` becomes ``x*y``. The returned maximizer is the first
    maximizing assignment in lexicographic order (-1 before +1, slots sorted
    by party then index). With ``jobs > 1`` the assignment counter is split
    into contiguous ranges evaluated in worker processes; the result is
    identical to the sequential run.

    Raises:
        ValueError: if the expression has more than ``MAX_SLOTS`` slots.
    """
    t0 = time.perf_counter()
    form = _integer_form(expr)
    n = len(form.slots)
    _check_guard(n)
    total = 1 << n
    if jobs <= 1 or total < 2 * _CHUNK:
        best, best_k = _bitmask_range(form, 0, total)
    else:
        edges = np.linspace(0, total, jobs + 1).astype(np.int64)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_bitmask_range, form, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
            results = [f.result() for f in futures]
        best, best_k = None, -1
        for score, k in results:
            if best is None or score > best:
                best, best_k = score, k
    return Certificate(
        bound=Fraction(best, form.scale),
        maximizer=_decode(form, best_k),
        evaluations=total,
        wall_time_ms=(time.perf_counter() - t0) * 1e3,
    )


def classical_bound_branching(expr: InequalityExpression, prune: bool = True) -> tuple[Fraction, int]:
    """Independent maximizer: recursive branching over slots in pure-Python integers.

    Pair terms are charged when their later slot is fixed. With ``prune``
    a branch is cut once its score plus the total magnitude of still-open
    terms cannot beat the incumbent, which keeps the result exact.

    Returns:
        ``(bound, leaves)`` where ``leaves`` counts complete assignments visited.
    """
    slots = expr.slots()
    n = len(slots)
    _check_guard(n)
    pos = {s: k for k, s in enumerate(slots)}
    weights = [t.weight for t in (*expr.singles, *expr.pairs)]
    scale = 1
    for w in weights:
        scale = scale * w.denominator // math.gcd(scale, w.denominator)

    single = [0] * n
    for s in expr.singles:
        single[pos[s.slot]] += int(s.weight * scale)
    back: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for p in expr.pairs:
        a, b = pos[p.left], pos[p.right]
        lo, hi = min(a, b), max(a, b)
        back[hi].append((lo, int(p.weight * scale)))
    # rest[d]: magnitude of all terms charged at depth >= d
    rest = [0] * (n + 1)
    for d in range(n - 1, -1, -1):
        rest[d] = rest[d + 1] + abs(single[d]) + sum(abs(w) for _, w in back[d])

    values = [0] * n
    best = [None]
    leaves = [0]

    def descend(d: int, score: int) -> None:
        if d == n:
            leaves[0] += 1
            if best[0] is None or score > best[0]:
                best[0] = score
            return
        if prune and best[0] is not None and score + rest[d] <= best[0]:
            return
        for x in (-1, 1):
            values[d] = x
            delta = single[d] * x
            for lo, w in back[d]:
                delta += w * x * values[lo]
            descend(d + 1, score + delta)

    descend(0, 0)
    bound = best[0] if best[0] is not None else 0
    return Fraction(bound, scale), leaves[0]


def evaluate_assignment(expr: InequalityExpression, values: dict[Slot, int]) -> Fraction:
    """Exact value of ``expr`` under a deterministic assignment."""
    total = Fraction(0)
    for s in expr.singles:
        total += s.weight * values[s.slot]
    for p in expr.pairs:
        total += p.weight * values[p.left] * values[p.right]
    return total


# --------------------------------------------------------------------------
# Quantum predictions
# --------------------------------------------------------------------------


def _require_single_system(expr: InequalityExpression) -> None:
    if not expr.is_single_system:
        raise ValueError(f"expression spans parties {expr.parties()}; use the bipartite evaluator")


def state_independence_witness(expr: InequalityExpression, catalog: RayCatalog) -> np.ndarray:
    """The operator sum_s w_s A_i + sum_p w_p A_i A_j over the expression's terms.

    Raises:
        ValueError: for a multi-party expression or a pair term on
            non-commuting observables.
    """
    _require_single_system(expr)
    op = np.zeros((3, 3), dtype=complex)
    for s in expr.singles:
        op += float(s.weight) * catalog.observable(s.index)
    for p in expr.pairs:
        a, b = catalog.observable(p.left[1]), catalog.observable(p.right[1])
        ab = a @ b
        if np.max(np.abs(ab - b @ a)) > COMMUTE_TOL:
            raise ValueError(f"pair term {p.left[1]},{p.right[1]} is on non-commuting observables")
        op += float(p.weight) * ab
    return op


def quantum_value(expr: InequalityExpression, catalog: RayCatalog, rho) -> float:
    """Quantum prediction of a single-system expression on qutrit state ``rho``."""
    rho = qmath.check_density_matrix(rho, 3)
    w = state_independence_witness(expr, catalog)
    val = np.trace(w @ rho)
    return float(val.real)


def robustness(expr: InequalityExpression, quantum):
    """(quantum - claimed bound) / sum of |weights|.

    An exact ``Fraction`` (or ``int``) quantum value gives an exact result.

    Raises:
        ValueError: if ``quantum`` does not exceed the claimed bound.
    """
    if quantum <= expr.claimed_bound:
        raise ValueError(f"quantum value {quantum} does not violate the bound {expr.claimed_bound}")
    norm = expr.total_weight()
    if isinstance(quantum, (Fraction, int)):
        return (Fraction(quantum) - expr.claimed_bound) / norm
    return (float(quantum) - float(expr.claimed_bound)) / float(norm)


def merge_terms(singles: Iterable[Single], pairs: Iterable[Pair]) -> tuple[list[Single], list[Pair]]:
    """Sum weights of like terms, drop the ones that cancel; first-seen order is kept."""
    s_acc: dict[Slot, Fraction] = {}
    for s in singles:
        s_acc[s.slot] = s_acc.get(s.slot, Fraction(0)) + s.weight
    p_acc: dict[tuple, Fraction] = {}
    for p in pairs:
        p_acc[p.key] = p_acc.get(p.key, Fraction(0)) + p.weight
    out_s = [Single(party, i, w) for (party, i), w in s_acc.items() if w != 0]
    out_p = [Pair(kind, left, right, w) for (kind, left, right), w in p_acc.items() if w != 0]
    return out_s, out_p
