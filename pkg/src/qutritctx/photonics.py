"""Shot-level simulation of three-path single-photon and photon-pair experiments.

A qutrit is one photon in paths a, b, c (basis |0>, |1>, |2>). Circuits are
sequences of two-path beam splitters, single-path wedges (phase shifts)
and path reroutes. A measurement device maps the -1 ray of its observable
into path a; paths b and c report +1.

Beam splitter convention: transmittance ``t`` on paths (p, q) acts as
``[[sqrt(t), sqrt(1-t)], [sqrt(1-t), -sqrt(t)]]`` on the two amplitudes.

Sampling runs in fixed-size batches. Batch ``b`` of stream ``s`` draws from
``SeedSequence(seed, spawn_key=(s, b))``, so counts do not depend on how
batches are spread over worker processes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import qmath
from .bell import ALICE, BOB, noisy_state
from .inequality import InequalityExpression, Pair, Single
from .rays import RayCatalog
from .sequential import OUTCOMES, outcome_label

BATCH = 1 << 16
PATH_A = 0


# --------------------------------------------------------------------------
# Elements and circuits
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BeamSplitter:
    paths: tuple[int, int]
    transmittance: float

    def __post_init__(self):
        p, q = self.paths
        if p == q or not {p, q} <= {0, 1, 2}:
            raise ValueError(f"bad beam-splitter paths {self.paths}")
        if not 0.0 <= self.transmittance <= 1.0:
            raise ValueError(f"transmittance {self.transmittance} outside [0, 1]")


@dataclass(frozen=True)
class Wedge:
    path: int
    phase: float


@dataclass(frozen=True)
class Reroute:
    """Amplitude in input path ``k`` leaves on path ``perm[k]``."""

    perm: tuple[int, int, int]

    def __post_init__(self):
        if sorted(self.perm) != [0, 1, 2]:
            raise ValueError(f"{self.perm} is not a permutation of the three paths")


OpticalElement = Union[BeamSplitter, Wedge, Reroute]


def swap(p: int, q: int) -> Reroute:
    perm = [0, 1, 2]
    perm[p], perm[q] = q, p
    return Reroute(tuple(perm))


def _bs_batch(paths, t: np.ndarray) -> np.ndarray:
    p, q = paths
    n = t.shape[0]
    u = np.zeros((n, 3, 3), dtype=complex)
    r = 3 - p - q
    u[:, r, r] = 1
    st, sr = np.sqrt(t), np.sqrt(1 - t)
    u[:, p, p] = st
    u[:, p, q] = sr
    u[:, q, p] = sr
    u[:, q, q] = -st
    return u


def _wedge_batch(path: int, phase: np.ndarray) -> np.ndarray:
    n = phase.shape[0]
    u = np.zeros((n, 3, 3), dtype=complex)
    for k in range(3):
        u[:, k, k] = 1
    u[:, path, path] = np.exp(1j * phase)
    return u


def element_matrix(el: OpticalElement) -> np.ndarray:
    if isinstance(el, BeamSplitter):
        return _bs_batch(el.paths, np.array([el.transmittance]))[0]
    if isinstance(el, Wedge):
        return _wedge_batch(el.path, np.array([el.phase]))[0]
    u = np.zeros((3, 3), dtype=complex)
    for k, dest in enumerate(el.perm):
        u[dest, k] = 1
    return u


def circuit_unitary(circuit) -> np.ndarray:
    """Composite unitary; the first element acts first."""
    u = qmath.I3.copy()
    for el in circuit:
        u = element_matrix(el) @ u
    return u


def inverse_circuit(circuit) -> list[OpticalElement]:
    out: list[OpticalElement] = []
    for el in reversed(list(circuit)):
        if isinstance(el, BeamSplitter):
            out.append(el)  # real symmetric and involutory
        elif isinstance(el, Wedge):
            out.append(Wedge(el.path, -el.phase))
        else:
            inv = [0, 0, 0]
            for k, dest in enumerate(el.perm):
                inv[dest] = k
            out.append(Reroute(tuple(inv)))
    return out


@dataclass(frozen=True)
class NoiseModel:
    detector_efficiency: float = 1.0
    wedge_phase_jitter_sigma: float = 0.0
    bs_transmittance_error_sigma: float = 0.0
    source_visibility: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.detector_efficiency <= 1.0:
            raise ValueError("detector_efficiency must lie in [0, 1]")
        if not 0.0 <= self.source_visibility <= 1.0:
            raise ValueError("source_visibility must lie in [0, 1]")
        if self.wedge_phase_jitter_sigma < 0 or self.bs_transmittance_error_sigma < 0:
            raise ValueError("noise sigmas must be nonnegative")

    @property
    def has_jitter(self) -> bool:
        return self.wedge_phase_jitter_sigma > 0 or self.bs_transmittance_error_sigma > 0

    def to_json(self) -> dict:
        return {
            "eta": self.detector_efficiency,
            "phase_sigma": self.wedge_phase_jitter_sigma,
            "bs_sigma": self.bs_transmittance_error_sigma,
            "visibility": self.source_visibility,
        }

    @classmethod
    def from_json(cls, doc: dict | None) -> NoiseModel:
        doc = doc or {}
        unknown = set(doc) - {"eta", "phase_sigma", "bs_sigma", "visibility"}
        if unknown:
            raise ValueError(f"unknown noise fields {sorted(unknown)}")
        return cls(
            detector_efficiency=float(doc.get("eta", 1.0)),
            wedge_phase_jitter_sigma=float(doc.get("phase_sigma", 0.0)),
            bs_transmittance_error_sigma=float(doc.get("bs_sigma", 0.0)),
            source_visibility=float(doc.get("visibility", 1.0)),
        )


NOISELESS = NoiseModel()


def batched_unitary(circuit, n: int, noise: NoiseModel = NOISELESS, rng=None) -> np.ndarray:
    """(n, 3, 3) unitaries, with element parameters redrawn per shot when ``rng`` is given."""
    u = np.broadcast_to(qmath.I3, (n, 3, 3)).copy()
    for el in circuit:
        if isinstance(el, BeamSplitter):
            t = np.full(n, el.transmittance)
            if rng is not None and noise.bs_transmittance_error_sigma > 0:
                t = np.clip(t + rng.normal(0.0, noise.bs_transmittance_error_sigma, n), 0.0, 1.0)
            m = _bs_batch(el.paths, t)
        elif isinstance(el, Wedge):
            ph = np.full(n, el.phase)
            if rng is not None and noise.wedge_phase_jitter_sigma > 0:
                ph = ph + rng.normal(0.0, noise.wedge_phase_jitter_sigma, n)
            m = _wedge_batch(el.path, ph)
        else:
            m = np.broadcast_to(element_matrix(el), (n, 3, 3))
        u = m @ u
    return u


def prepare_state_circuit(target) -> list[OpticalElement]:
    """Circuit taking a photon in path a to ``target`` (up to a global phase).

    Two beam splitters set the path weights, (a, b) first and then (b, c);
    wedges on b and c set the phases relative to the reference path.

    Raises:
        ValueError: if ``target`` is not normalized.
    """
    v = qmath.as_vector(target)
    if not qmath.is_normalized(v, 1e-9):
        raise ValueError("target state must be normalized")
    r = np.abs(v)
    if abs(r[0] - 1.0) <= 1e-15:
        return []
    circ: list[OpticalElement] = [BeamSplitter((0, 1), float(r[0] ** 2))]
    rest = 1.0 - r[0] ** 2
    if r[2] > 1e-15:
        circ.append(BeamSplitter((1, 2), float(min(r[1] ** 2 / rest, 1.0))))
    ref = next(k for k in range(3) if r[k] > 1e-15)
    for k in (1, 2):
        if r[k] > 1e-15 and k != ref:
            phase = float(np.angle(v[k]) - np.angle(v[ref]))
            phase = math.remainder(phase, 2 * math.pi)
            if abs(phase) > 1e-15:
                circ.append(Wedge(k, phase))
    return circ


# --------------------------------------------------------------------------
# Measurement devices
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasurementDevice:
    """Maps the -1 ray to path a; ``remap`` restores the path encoding afterwards."""

    ray: np.ndarray = field(compare=False)
    circuit: tuple[OpticalElement, ...]
    remap: tuple[OpticalElement, ...]
    kind: str = "generic"
    index: int | None = None

    outcome_map = {0: -1, 1: 1, 2: 1}

    @property
    def unitary(self) -> np.ndarray:
        return circuit_unitary(self.circuit)


def _make_device(ray, circuit, kind, index) -> MeasurementDevice:
    circuit = tuple(circuit)
    dev = MeasurementDevice(ray, circuit, tuple(inverse_circuit(circuit)), kind, index)
    amp = abs((dev.unitary @ ray)[PATH_A])
    if abs(amp - 1.0) > 1e-9:
        raise AssertionError(f"device {index} leaks the ray out of path a (|amp| = {amp})")
    return dev


def _signs(v: np.ndarray) -> np.ndarray:
    return np.sign(v.real).astype(int)


def _class_circuit(v: np.ndarray) -> tuple[str, list[OpticalElement]] | None:
    """Fixed-structure circuits for rays with equal-magnitude real entries."""
    if np.any(np.abs(v.imag) > 1e-12):
        return None
    nz = [k for k in range(3) if abs(v[k]) > 1e-12]
    if not np.allclose(np.abs(v[nz]), 1 / np.sqrt(len(nz)), atol=1e-12):
        return None
    s = _signs(v)
    if len(nz) == 1:
        k = nz[0]
        return "iii", [swap(0, k) if k else Reroute((0, 1, 2))]
    if len(nz) == 2:
        p, q = nz
        out = p if s[p] == s[q] else q
        circ: list[OpticalElement] = [BeamSplitter((p, q), 0.5)]
        if out != PATH_A:
            circ.append(swap(PATH_A, out))
        return "ii", circ
    # 50:50 on (b, c) concentrates their weight in one path, bring it to b,
    # fix the relative sign against a, then a 1/3 splitter finishes.
    merged = 1 if s[1] == s[2] else 2
    circ = [BeamSplitter((1, 2), 0.5)]
    if merged == 2:
        circ.append(swap(1, 2))
    if s[0] != s[1]:
        circ.append(Wedge(1, math.pi))
    circ.append(BeamSplitter((0, 1), 1 / 3))
    return "i", circ


def generic_circuit(ray) -> list[OpticalElement]:
    """Two-path decomposition for an arbitrary ray: strip phases, then null c and b in turn."""
    v = qmath.normalize(ray)
    r = np.abs(v)
    circ: list[OpticalElement] = []
    for k in range(3):
        if r[k] > 1e-15 and abs(np.angle(v[k])) > 1e-15:
            circ.append(Wedge(k, float(-np.angle(v[k]))))
    bc = r[1] ** 2 + r[2] ** 2
    if r[2] > 1e-15:
        circ.append(BeamSplitter((1, 2), float(r[1] ** 2 / bc)))
    if bc > 1e-15:
        circ.append(BeamSplitter((0, 1), float(min(r[0] ** 2, 1.0))))
    return circ


def build_device(catalog: RayCatalog, i: int, generic: bool = False) -> MeasurementDevice:
    """Device for observable ``i``; ``generic`` forces the fallback decomposition."""
    v = catalog.ray(i)
    built = None if generic else _class_circuit(v)
    if built is None:
        return _make_device(v, generic_circuit(v), "generic", i)
    kind, circ = built
    return _make_device(v, circ, kind, i)


def device_for_ray(ray, kind: str = "auto") -> MeasurementDevice:
    v = qmath.normalize(ray)
    built = _class_circuit(v) if kind == "auto" else None
    if built is None:
        return _make_device(v, generic_circuit(v), "generic", None)
    return _make_device(v, built[1], built[0], None)


# --------------------------------------------------------------------------
# Apparatus: single device, cascade, two-party
# --------------------------------------------------------------------------

_MASK_A = np.array([1, 0, 0], dtype=complex)
_MASK_BC = np.array([0, 1, 1], dtype=complex)


def _apply(u: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return np.einsum("nij,nj->ni", u, psi)


@dataclass(frozen=True)
class SingleMeasurement:
    device: MeasurementDevice
    labels = ("-1", "+1")
    photons = 1
    dim = 3

    def outcome_probs(self, psi: np.ndarray, noise: NoiseModel = NOISELESS, rng=None) -> np.ndarray:
        out = _apply(batched_unitary(self.device.circuit, len(psi), noise, rng), psi)
        p = np.abs(out) ** 2
        return np.column_stack([p[:, 0], p[:, 1] + p[:, 2]])


@dataclass(frozen=True)
class Cascade:
    """Sequential measurement: each outcome port of ``first`` feeds its own copy of ``second``."""

    first: MeasurementDevice
    second: MeasurementDevice
    labels = tuple(outcome_label(a, b) for a, b in OUTCOMES)
    photons = 1
    dim = 3

    def outcome_probs(self, psi: np.ndarray, noise: NoiseModel = NOISELESS, rng=None) -> np.ndarray:
        n = len(psi)
        mid = _apply(batched_unitary(self.first.circuit, n, noise, rng), psi)
        cols = []
        for mask in (_MASK_A, _MASK_BC):
            branch = _apply(batched_unitary(self.first.remap, n, noise, rng), mid * mask)
            out = _apply(batched_unitary(self.second.circuit, n, noise, rng), branch)
            p = np.abs(out) ** 2
            cols += [p[:, 0], p[:, 1] + p[:, 2]]
        return np.column_stack(cols)


@dataclass(frozen=True)
class TwoParty:
    """Alice's device on the first photon, Bob's on the second; ``None`` leaves a side unmeasured."""

    alice: MeasurementDevice | None
    bob: MeasurementDevice | None
    dim = 9

    def __post_init__(self):
        if self.alice is None and self.bob is None:
            raise ValueError("two-party apparatus needs at least one device")

    @property
    def photons(self) -> int:
        return int(self.alice is not None) + int(self.bob is not None)

    @property
    def labels(self) -> tuple[str, ...]:
        if self.alice is not None and self.bob is not None:
            return tuple(outcome_label(a, b) for a, b in OUTCOMES)
        return ("-1", "+1")

    def outcome_probs(self, psi: np.ndarray, noise: NoiseModel = NOISELESS, rng=None) -> np.ndarray:
        n = len(psi)
        m = psi.reshape(n, 3, 3)
        if self.alice is not None:
            m = np.einsum("nij,njk->nik", batched_unitary(self.alice.circuit, n, noise, rng), m)
        if self.bob is not None:
            m = np.einsum("nkj,nij->nik", batched_unitary(self.bob.circuit, n, noise, rng), m)
        p = np.abs(m) ** 2
        pa = np.stack([p[:, 0, :].sum(1), p[:, 1:, :].sum((1, 2))], axis=1)  # Alice -1/+1
        if self.bob is None:
            return pa
        if self.alice is None:
            return np.stack([p[:, :, 0].sum(1), p[:, :, 1:].sum((1, 2))], axis=1)
        return np.column_stack([
            p[:, 0, 0], p[:, 0, 1:].sum(1), p[:, 1:, 0].sum(1), p[:, 1:, 1:].sum((1, 2)),
        ])


def cascade(first: MeasurementDevice, second: MeasurementDevice) -> Cascade:
    return Cascade(first, second)


# --------------------------------------------------------------------------
# Sources
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QutritSource:
    """Mixture of circuit-prepared single-photon states (circuits act on path a)."""

    weights: tuple[float, ...]
    circuits: tuple[tuple[OpticalElement, ...], ...]
    dim = 3

    @classmethod
    def pure(cls, target) -> QutritSource:
        return cls((1.0,), (tuple(prepare_state_circuit(qmath.normalize(target))),))

    @classmethod
    def from_density_matrix(cls, rho) -> QutritSource:
        rho = qmath.check_density_matrix(rho, 3)
        w, v = qmath.eig3_hermitian(rho)
        keep = [k for k in range(3) if w[k] > 1e-15]
        ws = np.clip(w[keep], 0, None)
        ws = ws / ws.sum()
        return cls(tuple(float(x) for x in ws), tuple(tuple(prepare_state_circuit(v[:, k])) for k in keep))

    def components(self, noise: NoiseModel, n: int = 1, rng=None) -> tuple[np.ndarray, list[np.ndarray]]:
        """Mixture weights and per-component state batches (each of shape (n, 3))."""
        vis = noise.source_visibility
        weights = [vis * w for w in self.weights] + [(1 - vis) / 3] * 3
        states = [batched_unitary(c, n, noise, rng)[:, :, 0] for c in self.circuits]
        states += [np.broadcast_to(qmath.I3[k], (n, 3)) for k in range(3)]
        return np.array(weights), states

    def density_matrix(self, noise: NoiseModel = NOISELESS) -> np.ndarray:
        w, states = self.components(noise)
        return sum(wk * np.outer(s[0], s[0].conj()) for wk, s in zip(w, states))


@dataclass(frozen=True)
class PairSource:
    """Three-crystal pair source: sum_k |k>|k>/sqrt(3) with visibility ``v`` against white noise.

    Phase jitter, when enabled, perturbs the relative phase of the second
    and third crystal terms.
    """

    visibility: float = 1.0
    dim = 9

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility {self.visibility} outside [0, 1]")

    @property
    def terms(self) -> list[tuple[complex, tuple[int, int]]]:
        return [(1 / np.sqrt(3), (k, k)) for k in range(3)]

    def components(self, noise: NoiseModel, n: int = 1, rng=None) -> tuple[np.ndarray, list[np.ndarray]]:
        vis = self.visibility * noise.source_visibility
        psi = np.zeros((n, 9), dtype=complex)
        phases = np.zeros((n, 3))
        if rng is not None and noise.wedge_phase_jitter_sigma > 0:
            phases[:, 1:] = rng.normal(0.0, noise.wedge_phase_jitter_sigma, (n, 2))
        for k in range(3):
            psi[:, 4 * k] = np.exp(1j * phases[:, k]) / np.sqrt(3)
        weights = [vis] + [(1 - vis) / 9] * 9
        states = [psi] + [np.broadcast_to(qmath.I9[k], (n, 9)) for k in range(9)]
        return np.array(weights), states

    def density_matrix(self, noise: NoiseModel = NOISELESS) -> np.ndarray:
        return noisy_state(self.visibility * noise.source_visibility)


def two_photon_source(v: float = 1.0) -> PairSource:
    return PairSource(v)


# --------------------------------------------------------------------------
# Shot sampling
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CountTable:
    counts: dict[str, int]
    shots_emitted: int
    shots_detected: int
    seed: int
    stream: int = 0

    def __post_init__(self):
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("negative count")
        if sum(self.counts.values()) != self.shots_detected or self.shots_detected > self.shots_emitted:
            raise ValueError("inconsistent count table")

    def to_json(self) -> dict:
        return {
            "counts": dict(self.counts),
            "shots_emitted": self.shots_emitted,
            "shots_detected": self.shots_detected,
            "seed": self.seed,
            "stream": self.stream,
        }

    @classmethod
    def from_json(cls, doc: dict) -> CountTable:
        return cls({k: int(v) for k, v in doc["counts"].items()}, int(doc["shots_emitted"]),
                   int(doc["shots_detected"]), int(doc["seed"]), int(doc.get("stream", 0)))


def _batch_rng(seed: int, stream: int, batch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, batch)))


def _run_batch(source, apparatus, size, noise, seed, stream, batch, per_shot) -> np.ndarray:
    rng = _batch_rng(seed, stream, batch)
    keep = noise.detector_efficiency ** apparatus.photons
    nlab = len(apparatus.labels)
    if not (per_shot or noise.has_jitter):
        weights, states = source.components(noise)
        probs = apparatus.outcome_probs(np.concatenate(states), noise)
        probs = np.clip(probs, 0, None)
        probs /= probs.sum(1, keepdims=True)
        per_comp = rng.multinomial(size, weights / weights.sum())
        clicks = np.zeros(nlab, dtype=np.int64)
        for k, m in enumerate(per_comp):
            if m:
                clicks += rng.multinomial(m, probs[k])
        return rng.binomial(clicks, keep) if keep < 1 else clicks
    weights, states = source.components(noise, size, rng)
    comp = rng.choice(len(weights), size=size, p=weights / weights.sum())
    psi = np.empty((size, source.dim), dtype=complex)
    for k, s in enumerate(states):
        sel = comp == k
        psi[sel] = s[sel]
    probs = apparatus.outcome_probs(psi, noise, rng)
    cum = np.cumsum(probs, axis=1)
    u = rng.random(size) * cum[:, -1]
    outcome = np.minimum((u[:, None] >= cum).sum(1), nlab - 1)
    detected = rng.random(size) < keep
    return np.bincount(outcome[detected], minlength=nlab).astype(np.int64)


def run_shots(source, apparatus, n: int, noise: NoiseModel = NOISELESS, seed: int = 0,
              stream: int = 0, jobs: int = 1, per_shot: bool = False) -> CountTable:
    """Emit ``n`` photons (or pairs) from ``source`` into ``apparatus`` and count clicks.

    Without element jitter, detector outcomes are drawn from the exact
    per-component probabilities (multinomial draws); with jitter, or with
    ``per_shot``, every shot gets freshly drawn element parameters and its
    own amplitude propagation. Each photon needed for an event is detected
    with probability ``noise.detector_efficiency``; undetected events are
    dropped.
    """
    if n < 1:
        raise ValueError("shot count must be at least 1")
    if source.dim != apparatus.dim:
        raise ValueError("source and apparatus disagree on dimension")
    sizes = [BATCH] * (n // BATCH) + ([n % BATCH] if n % BATCH else [])
    args = [(source, apparatus, s, noise, seed, stream, b, per_shot) for b, s in enumerate(sizes)]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_batch, *zip(*args)))
    else:
        parts = [_run_batch(*a) for a in args]
    total = np.sum(parts, axis=0)
    counts = {lab: int(c) for lab, c in zip(apparatus.labels, total)}
    return CountTable(counts, n, int(total.sum()), seed, stream)


def exact_outcome_probs(source, apparatus, noise: NoiseModel = NOISELESS) -> dict[str, float]:
    """Noiseless-element outcome distribution of ``apparatus`` fed by ``source``."""
    weights, states = source.components(noise)
    probs = apparatus.outcome_probs(np.concatenate(states), noise)
    p = (weights / weights.sum()) @ probs
    return dict(zip(apparatus.labels, p))


# --------------------------------------------------------------------------
# Experiments and estimation
# --------------------------------------------------------------------------


def term_label(term) -> str:
    if isinstance(term, Single):
        return f"{term.party}{term.index}"
    return f"{term.left[0]}{term.left[1]}{term.right[0]}{term.right[1]}"


def term_apparatus(term, catalog: RayCatalog, bipartite: bool):
    dev = lambda i: build_device(catalog, i)  # noqa: E731
    if not bipartite:
        if isinstance(term, Single):
            return SingleMeasurement(dev(term.index))
        if term.kind != "same-system":
            raise ValueError("single-photon experiment cannot measure a cross-party term")
        return Cascade(dev(term.left[1]), dev(term.right[1]))
    if isinstance(term, Single):
        d = dev(term.index)
        return TwoParty(d, None) if term.party == ALICE else TwoParty(None, d)
    if term.kind != "cross-party":
        raise ValueError("pair experiment needs a purely bipartite expression")
    left, right = sorted((term.left, term.right))
    if (left[0], right[0]) != (ALICE, BOB):
        raise ValueError(f"cross term must pair parties {ALICE} and {BOB}")
    return TwoParty(dev(left[1]), dev(right[1]))


def run_experiment(expr: InequalityExpression, catalog: RayCatalog, source, shots: int,
                   noise: NoiseModel = NOISELESS, seed: int = 0, jobs: int = 1,
                   per_shot: bool = False) -> dict[str, CountTable]:
    """One CountTable per term of ``expr``; term ``k`` samples stream ``k``."""
    bipartite = isinstance(source, PairSource)
    out = {}
    for k, term in enumerate((*expr.singles, *expr.pairs)):
        app = term_apparatus(term, catalog, bipartite)
        out[term_label(term)] = run_shots(source, app, shots, noise, seed, stream=k, jobs=jobs,
                                          per_shot=per_shot)
    return out


def term_estimate(table: CountTable) -> tuple[float, float]:
    """Mean of the +-1 outcome (product for pairs) and its binomial standard error."""
    n = table.shots_detected
    if n == 0:
        raise ValueError("no detected events in count table")
    s = 0
    for label, c in table.counts.items():
        s += math.prod(int(x) for x in label.split(",")) * c
    m = s / n
    return m, math.sqrt(max(1 - m * m, 0.0) / n)


def estimate_expression(expr: InequalityExpression, counts: dict[str, CountTable]) -> tuple[float, float]:
    """Plug-in estimate of ``expr`` with independent-term error propagation.

    Raises:
        ValueError: if a term has no table or a table has no detections.
    """
    if not counts:
        raise ValueError("no count tables given")
    value, var = 0.0, 0.0
    for term in (*expr.singles, *expr.pairs):
        label = term_label(term)
        if label not in counts:
            raise ValueError(f"missing count table for term {label}")
        m, se = term_estimate(counts[label])
        w = float(term.weight)
        value += w * m
        var += (w * se) ** 2
    return value, math.sqrt(var)


def per_term_rows(expr: InequalityExpression, counts: dict[str, CountTable]) -> list[dict]:
    rows = []
    for term in (*expr.singles, *expr.pairs):
        label = term_label(term)
        m, se = term_estimate(counts[label])
        rows.append({"term": label, "weight": float(term.weight), "estimate": m, "stderr": se,
                     "shots": counts[label].shots_emitted, "detected": counts[label].shots_detected})
    return rows


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)
