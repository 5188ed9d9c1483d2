"""Small dense complex linear algebra for qutrit (dim 3) and two-qutrit (dim 9) operators.

Everything is plain ``numpy`` arrays of dtype ``complex128``. The only
non-trivial routine is :func:`eig3_hermitian`, a closed-form eigensolver
for 3x3 Hermitian matrices.
"""

from __future__ import annotations

import numpy as np

TOL = 1e-9

I3 = np.eye(3, dtype=complex)
I9 = np.eye(9, dtype=complex)


def as_matrix(m, dim: int | None = None) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise ValueError(f"expected a {dim}x{dim} matrix, got {a.shape[0]}x{a.shape[1]}")
    return a


def as_vector(v, dim: int = 3) -> np.ndarray:
    a = np.asarray(v, dtype=complex)
    if a.shape != (dim,):
        raise ValueError(f"expected a vector of length {dim}, got shape {a.shape}")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def is_hermitian(m: np.ndarray, tol: float = 1e-12) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= tol)


def is_unitary(m: np.ndarray, tol: float = 1e-12) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(dagger(m) @ m - np.eye(m.shape[-1])), initial=0.0) <= tol)


def is_normalized(v: np.ndarray, tol: float = 1e-12) -> bool:
    return abs(np.vdot(v, v).real - 1.0) <= tol


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def projector(v) -> np.ndarray:
    """|v><v| for a (not necessarily normalized) vector ``v``."""
    v = normalize(v)
    return np.outer(v, np.conj(v))


def tensor(a, b) -> np.ndarray:
    """Kronecker product of two 3x3 matrices."""
    a = as_matrix(a, 3)
    b = as_matrix(b, 3)
    return np.kron(a, b)


def check_density_matrix(rho, dim: int | None = None, tol: float = TOL) -> np.ndarray:
    """Validate ``rho`` as a density matrix and return it as a complex array.

    Raises:
        ValueError: if ``rho`` is not Hermitian, not unit trace, or not
            positive semidefinite within ``tol``.
    """
    rho = as_matrix(rho, dim)
    if not is_hermitian(rho, tol):
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density matrix has trace {tr.real:.12g}, expected 1")
    if rho.shape[0] == 3:
        lo = eig3_hermitian(rho)[0][0]
    else:
        lo = np.linalg.eigvalsh(rho)[0]
    if lo < -tol:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
    return rho


def expectation(m, rho, tol: float = TOL) -> float:
    """Return trace(m rho) for Hermitian ``m`` and density matrix ``rho``."""
    m = as_matrix(m)
    if not is_hermitian(m, tol):
        raise ValueError("observable is not Hermitian")
    rho = check_density_matrix(rho, m.shape[0], tol)
    val = np.trace(m @ rho)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary residue {val.imag:.3e}")
    return float(val.real)


def pure_state(v) -> np.ndarray:
    return projector(v)


def maximally_mixed(dim: int = 3) -> np.ndarray:
    return np.eye(dim, dtype=complex) / dim


def random_pure_vector(rng: np.random.Generator, dim: int = 3) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_hermitian(rng: np.random.Generator, dim: int = 3) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + dagger(a)) / 2


def _eigvals3(m: np.ndarray) -> np.ndarray:
    # Trigonometric solution of the characteristic cubic; real since m is Hermitian.
    q = np.trace(m).real / 3.0
    b = m - q * I3
    p2 = np.sum(np.abs(b) ** 2) / 6.0
    p = np.sqrt(p2)
    if p < 1e-300:
        return np.array([q, q, q])
    r = np.linalg.det(b / p).real / 2.0
    phi = np.arccos(np.clip(r, -1.0, 1.0)) / 3.0
    hi = q + 2 * p * np.cos(phi)
    lo = q + 2 * p * np.cos(phi + 2 * np.pi / 3)
    mid = 3 * q - hi - lo
    return np.array([lo, mid, hi])


def _null_vector(m: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    """Best null vector of m - lam I from cross products of its rows."""
    rows = m - lam * I3
    best, best_norm = None, -1.0
    for i, j in ((0, 1), (0, 2), (1, 2)):
        c = np.cross(rows[i], rows[j])
        n = np.linalg.norm(c)
        if n > best_norm:
            best, best_norm = c, n
    return best, best_norm


def _complete_basis(first: list[np.ndarray]) -> list[np.ndarray]:
    """Gram-Schmidt ``first`` plus standard basis vectors into an orthonormal basis."""
    basis: list[np.ndarray] = []
    for cand in list(first) + list(I3):
        w = np.array(cand, dtype=complex)
        for u in basis:
            w = w - np.vdot(u, w) * u
        n = np.linalg.norm(w)
        if n > 1e-8:
            basis.append(w / n)
        if len(basis) == 3:
            break
    return basis


def eig3_hermitian(m, degeneracy_tol: float = 1e-7) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a 3x3 Hermitian matrix.

    Eigenvalues come from the closed-form roots of the characteristic
    polynomial, eigenvectors from cross products of rows of ``m - lam I``.
    Inside a degenerate eigenspace the basis is arbitrary. A single
    Rayleigh-Ritz pass in the computed basis refines the result.

    Returns:
        ``(w, v)`` with ``w`` ascending and ``v[:, k]`` the eigenvector for
        ``w[k]`` (same layout as :func:`numpy.linalg.eigh`).

    Raises:
        ValueError: if ``m`` is not a Hermitian 3x3 matrix.
    """
    m = as_matrix(m, 3)
    if not is_hermitian(m, TOL):
        raise ValueError("eig3_hermitian requires a Hermitian matrix")
    m = (m + dagger(m)) / 2
    w = _eigvals3(m)
    scale = max(np.max(np.abs(w)), 1.0)
    gaps = np.diff(w) / scale

    if gaps[0] <= degeneracy_tol and gaps[1] <= degeneracy_tol:
        vecs = [I3[0], I3[1], I3[2]]
    elif gaps[0] <= degeneracy_tol:
        v2, _ = _null_vector(m, w[2])
        b = _complete_basis([v2])
        vecs = [b[1], b[2], b[0]]
    elif gaps[1] <= degeneracy_tol:
        v0, _ = _null_vector(m, w[0])
        vecs = _complete_basis([v0])
    else:
        v0, n0 = _null_vector(m, w[0])
        v2, n2 = _null_vector(m, w[2])
        # Seed Gram-Schmidt with the better-conditioned extreme vector.
        b = _complete_basis([v0, v2]) if n0 >= n2 else _complete_basis([v2, v0])
        if n0 >= n2:
            vecs = [b[0], b[2], b[1]]
        else:
            vecs = [b[1], b[2], b[0]]

    v = np.column_stack(vecs)
    # Refinement: diagonalize the (nearly diagonal) projected matrix once more
    # via Jacobi sweeps on the off-diagonal residue.
    h = dagger(v) @ m @ v
    v, w = _jacobi_refine(v, h)
    order = np.argsort(w)
    return w[order], v[:, order]


def _jacobi_refine(v: np.ndarray, h: np.ndarray, sweeps: int = 2) -> tuple[np.ndarray, np.ndarray]:
    for _ in range(sweeps):
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = h[p, q]
            if abs(apq) < 1e-300:
                continue
            app, aqq = h[p, p].real, h[q, q].real
            phase = apq / abs(apq)
            theta = 0.5 * np.arctan2(2 * abs(apq), aqq - app)
            c, s = np.cos(theta), np.sin(theta)
            g = np.eye(3, dtype=complex)
            g[p, p] = c
            g[q, q] = c
            g[p, q] = s * phase
            g[q, p] = -s * np.conj(phase)
            h = dagger(g) @ h @ g
            v = v @ g
    return v, np.real(np.diag(h)).copy()
