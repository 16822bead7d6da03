"""Dense complex linear algebra for small Hilbert spaces.

Density matrices are plain ``numpy`` complex arrays. The validators below
check the invariants once at the boundary; everything downstream treats the
arrays as immutable values. All logarithms are base 2.
"""

from __future__ import annotations

import numpy as np

from .errors import NotPSDError, ShapeError, SizeError, ValidationError

DIM_CAP = 4096
HERMITIAN_TOL = 1e-10
DENSITY_HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
EIG_CLAMP = 1e-8
NORM_TOL = 1e-12


def _as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries")
    return m


def pure_state(amplitudes) -> np.ndarray:
    """Validate a unit vector and return it as a complex 1-d array."""
    v = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if v.size == 0:
        raise ValidationError("empty state vector")
    norm2 = float(np.vdot(v, v).real)
    if abs(norm2 - 1.0) > NORM_TOL:
        raise ValidationError(f"state vector has squared norm {norm2!r}, expected 1")
    return v


def projector(v) -> np.ndarray:
    """|v><v| for a unit vector ``v``."""
    v = pure_state(v)
    return np.outer(v, v.conj())


def density_matrix(m, *, hermitian_tol: float = DENSITY_HERMITIAN_TOL) -> np.ndarray:
    """Validate ``m`` as a density matrix and return it as a complex array.

    Raises
    ------
    ShapeError
        ``m`` is not square.
    ValidationError
        ``m`` is not Hermitian or does not have unit trace.
    NotPSDError
        An eigenvalue is below ``-1e-8``.
    """
    m = _as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"density matrix must be square, got {m.shape}")
    if np.max(np.abs(m - m.conj().T), initial=0.0) > hermitian_tol:
        raise ValidationError("density matrix is not Hermitian")
    tr = np.trace(m)
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValidationError(f"density matrix has trace {tr!r}")
    lam_min = np.linalg.eigvalsh(m)[0]
    if lam_min < -EIG_CLAMP:
        raise NotPSDError(f"density matrix has eigenvalue {lam_min:.3e}")
    return m


def tensor_product(a, b, *, cap: int = DIM_CAP) -> np.ndarray:
    """Kronecker product of two matrices, guarded by a dimension cap."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if max(rows, cols) > cap:
        raise SizeError(f"tensor product of dimension {rows}x{cols} exceeds cap {cap}")
    return np.kron(a, b)


def tensor_power(a, n: int, *, cap: int = DIM_CAP) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for _ in range(n):
        out = tensor_product(out, a, cap=cap)
    return out


def hermitian_eig(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns eigenvalues in descending order and the matching unitary whose
    columns are eigenvectors, so that ``h == V @ diag(lam) @ V^dagger``.
    """
    h = _as_matrix(h)
    if h.shape[0] != h.shape[1]:
        raise ShapeError(f"matrix must be square, got {h.shape}")
    if np.max(np.abs(h - h.conj().T), initial=0.0) > HERMITIAN_TOL:
        raise ValidationError("matrix is not Hermitian")
    h = 0.5 * (h + h.conj().T)
    lam, vecs = np.linalg.eigh(h)
    return lam[::-1].copy(), vecs[:, ::-1].copy()


def _clamped_eigvals(lam: np.ndarray) -> np.ndarray:
    if lam.size and lam.min() < -EIG_CLAMP:
        raise NotPSDError(f"eigenvalue {lam.min():.3e} is below -{EIG_CLAMP:g}")
    return np.clip(lam, 0.0, None)


def psd_sqrt(rho) -> np.ndarray:
    """Principal square root of a positive semidefinite matrix."""
    lam, vecs = hermitian_eig(rho)
    lam = _clamped_eigvals(lam)
    return (vecs * np.sqrt(lam)) @ vecs.conj().T


def _check_pair(sigma, omega):
    sigma = _as_matrix(sigma)
    omega = _as_matrix(omega)
    if sigma.shape != omega.shape:
        raise ShapeError(f"dimension mismatch: {sigma.shape} vs {omega.shape}")
    return sigma, omega


def fidelity(sigma, omega) -> float:
    """F(sigma, omega) = (Tr sqrt(sqrt(sigma) omega sqrt(sigma)))**2, in [0, 1]."""
    sigma, omega = _check_pair(sigma, omega)
    # Tr sqrt(s omega s) is the trace norm of sqrt(sigma) sqrt(omega); singular
    # values avoid the square-root amplification of tiny inner eigenvalues
    root_sum = float(np.linalg.svd(psd_sqrt(sigma) @ psd_sqrt(omega), compute_uv=False).sum())
    return min(1.0, max(0.0, root_sum**2))


def trace_distance(sigma, omega) -> float:
    """D(sigma, omega) = 1/2 Tr|sigma - omega|."""
    sigma, omega = _check_pair(sigma, omega)
    diff = sigma - omega
    lam = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return min(1.0, 0.5 * float(np.sum(np.abs(lam))))


def entropy_of_spectrum(lam) -> float:
    lam = np.asarray(lam, dtype=float)
    lam = lam[lam > 1e-15]
    return float(-np.sum(lam * np.log2(lam))) + 0.0


def von_neumann_entropy(rho) -> float:
    """S(rho) = -Tr rho log2 rho, with 0 log 0 = 0."""
    rho = density_matrix(rho, hermitian_tol=HERMITIAN_TOL)
    lam = _clamped_eigvals(np.linalg.eigvalsh(rho))
    return entropy_of_spectrum(lam)


def mixture_approx_bound(p_e: float, eps: float, f_observed: float, *, tol: float = 1e-12) -> bool:
    """Check an observed fidelity against the approximation bound ``1 - p_e - eps``."""
    if not (0.0 <= p_e <= 1.0 and 0.0 <= eps <= 1.0):
        raise ValueError("p_e and eps must lie in [0, 1]")
    return f_observed >= 1.0 - p_e - eps - tol


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix from a complex Ginibre matrix of the given rank."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    m = 0.5 * (m + m.conj().T)
    return m / np.trace(m).real


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)
