"""The 13-ray qutrit catalog, its orthogonality graph and the reflection observables.

Indices are 1-based throughout, both in code and in serialized output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import qmath

ORTHO_TOL = 1e-9

_S2 = 1 / np.sqrt(2)
_S3 = 1 / np.sqrt(3)

# (index, unnormalized ray) for the built-in catalog.
_YU_OH_RAYS = {
    1: (-1, 1, 1),
    2: (1, -1, 1),
    3: (1, 1, -1),
    4: (1, 1, 1),
    5: (0, 1, 1),
    6: (0, 1, -1),
    7: (1, 0, 1),
    8: (1, 0, -1),
    9: (1, 1, 0),
    10: (1, -1, 0),
    11: (1, 0, 0),
    12: (0, 1, 0),
    13: (0, 0, 1),
}

# Index groups of the built-in catalog.
TRIADS = (1, 2, 3, 4)
DIAGONALS = (5, 6, 7, 8, 9, 10)
BASIS = (11, 12, 13)


@dataclass(frozen=True, eq=False)
class RayCatalog:
    """An ordered set of normalized qutrit rays, indexed from 1.

    Attributes:
        rays: array of shape ``(n, 3)``; row ``k`` holds the ray with index ``k + 1``.
    """

    rays: np.ndarray

    def __post_init__(self):
        rays = np.array(self.rays, dtype=complex)
        if rays.ndim != 2 or rays.shape[1] != 3 or rays.shape[0] < 3:
            raise ValueError(f"catalog needs at least 3 rays of length 3, got shape {rays.shape}")
        norms = np.linalg.norm(rays, axis=1)
        if np.any(norms == 0):
            raise ValueError("catalog contains a zero vector")
        rays = rays / norms[:, None]
        rays.setflags(write=False)
        object.__setattr__(self, "rays", rays)

    def __len__(self) -> int:
        return self.rays.shape[0]

    @property
    def indices(self) -> range:
        return range(1, len(self) + 1)

    def ray(self, i: int) -> np.ndarray:
        self._check_index(i)
        return self.rays[i - 1]

    def _check_index(self, i: int) -> None:
        if not isinstance(i, (int, np.integer)) or not 1 <= i <= len(self):
            raise IndexError(f"ray index {i!r} outside 1..{len(self)}")

    @property
    def is_real(self) -> bool:
        return bool(np.all(np.abs(self.rays.imag) <= 1e-12))

    @cached_property
    def _observables(self) -> np.ndarray:
        return np.array([qmath.I3 - 2 * np.outer(v, np.conj(v)) for v in self.rays])

    def observable(self, i: int) -> np.ndarray:
        """The dichotomic observable ``1 - 2|v_i><v_i|`` (spectrum -1, 1, 1)."""
        self._check_index(i)
        return self._observables[i - 1].copy()

    def minus_projector(self, i: int) -> np.ndarray:
        """Projector onto the -1 eigenspace of observable ``i``."""
        v = self.ray(i)
        return np.outer(v, np.conj(v))

    def permuted(self, perm) -> RayCatalog:
        """Catalog with the components of every ray permuted by ``perm``."""
        return RayCatalog(self.rays[:, list(perm)])

    def to_json(self) -> list[dict]:
        return [
            {"index": k, "re": [float(x) for x in v.real], "im": [float(x) for x in v.imag]}
            for k, v in zip(self.indices, self.rays)
        ]

    @classmethod
    def from_json(cls, doc) -> RayCatalog:
        if isinstance(doc, str):
            doc = json.loads(doc)
        entries = sorted(doc, key=lambda e: e["index"])
        if [e["index"] for e in entries] != list(range(1, len(entries) + 1)):
            raise ValueError("catalog indices must be exactly 1..n")
        return cls(np.array([np.array(e["re"]) + 1j * np.array(e["im"]) for e in entries]))


def build_catalog() -> RayCatalog:
    return RayCatalog(np.array([_YU_OH_RAYS[k] for k in range(1, 14)], dtype=float))


@dataclass(frozen=True, eq=False)
class OrthogonalityGraph:
    """Symmetric 0/1 indicator of orthogonal ray pairs (``gamma[i-1, j-1]``)."""

    gamma: np.ndarray

    @property
    def n(self) -> int:
        return self.gamma.shape[0]

    def __call__(self, i: int, j: int) -> int:
        return int(self.gamma[i - 1, j - 1])

    def edges(self) -> list[tuple[int, int]]:
        """Unordered edges as ``(i, j)`` with ``i < j``, in lexicographic order."""
        iu, ju = np.nonzero(np.triu(self.gamma, 1))
        return [(int(i) + 1, int(j) + 1) for i, j in zip(iu, ju)]

    def count_edges(self, left, right=None) -> int:
        """Unordered edges between index sets ``left`` and ``right`` (or within ``left``)."""
        left = set(left)
        if right is None:
            return sum(1 for i, j in self.edges() if i in left and j in left)
        right = set(right)
        return sum(1 for i, j in self.edges() if (i in left and j in right) or (i in right and j in left))

    def to_json(self) -> list[list[int]]:
        return [[i, j] for i, j in self.edges()]


def build_graph(catalog: RayCatalog, tol: float = ORTHO_TOL) -> OrthogonalityGraph:
    overlaps = np.abs(np.conj(catalog.rays) @ catalog.rays.T)
    gamma = (overlaps <= tol).astype(np.int8)
    np.fill_diagonal(gamma, 0)
    gamma.setflags(write=False)
    return OrthogonalityGraph(gamma)


def observable(catalog: RayCatalog, i: int) -> np.ndarray:
    return catalog.observable(i)
