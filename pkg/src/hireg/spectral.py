"""Symmetric eigen-analysis of normal matrices and conditioning diagnostics.

Every inverse of ``N + R`` in this package goes through an eigendecomposition
rather than a generic solve, because the relaxed regularization matrices share
their eigenvectors with ``N = A^T A``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NotSymmetricError, SingularMatrixError

__all__ = [
    "LinearSystem",
    "SpectralDecomposition",
    "NUMERIC_ZERO",
    "symmetrize",
    "normal_matrix",
    "eig_sym",
    "condition_number",
    "spectral_radius",
    "spectral_radius_ok",
    "inverse_spd",
]

# eigenvalues below NUMERIC_ZERO * lambda_1 count as zero for rank decisions
NUMERIC_ZERO = 1e-14
SYMMETRY_RTOL = 1e-9


@dataclass(frozen=True)
class LinearSystem:
    """Overdetermined linear model ``A x = b``.

    Parameters
    ----------
    a : (m, n) array_like
        Design matrix with ``m >= n``.
    b : (m,) array_like
        Observation vector.
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        if a.ndim != 2 or a.size == 0:
            raise DimensionError(f"design matrix must be a non-empty 2-D array, got shape {a.shape}")
        if b.ndim != 1 or b.shape[0] != a.shape[0]:
            raise DimensionError(f"observation vector of shape {b.shape} does not match A of shape {a.shape}")
        if a.shape[0] < a.shape[1]:
            raise DimensionError(f"need m >= n, got m={a.shape[0]}, n={a.shape[1]}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("linear system contains non-finite entries")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    def atb(self) -> np.ndarray:
        return self.a.T @ self.b


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a symmetric matrix, eigenvalues in descending order.

    Column ``i`` of ``eigenvectors`` belongs to ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self, eigenvalues=None) -> np.ndarray:
        """Return ``P diag(w) P^T``; ``w`` defaults to the stored eigenvalues."""
        w = self.eigenvalues if eigenvalues is None else np.asarray(eigenvalues, dtype=float)
        p = self.eigenvectors
        return (p * w) @ p.T

    def rank(self) -> int:
        lam1 = self.eigenvalues[0]
        if lam1 <= 0:
            return 0
        return int(np.sum(self.eigenvalues > NUMERIC_ZERO * lam1))

    def is_singular(self) -> bool:
        return self.rank() < self.n


def symmetrize(m, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Average ``m`` with its transpose after checking it is nearly symmetric.

    Raises
    ------
    NotSymmetricError
        If ``max|M - M^T| > rtol * (1 + max|M|)``.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    scale = 1.0 + (np.max(np.abs(m)) if m.size else 0.0)
    asym = np.max(np.abs(m - m.T)) if m.size else 0.0
    if asym > rtol * scale:
        raise NotSymmetricError(f"matrix asymmetry {asym:.3e} exceeds tolerance {rtol * scale:.3e}")
    return 0.5 * (m + m.T)


def normal_matrix(system: LinearSystem) -> np.ndarray:
    """Form ``A^T A``, symmetrized to remove rounding asymmetry."""
    a = system.a
    g = a.T @ a
    return 0.5 * (g + g.T)


def eig_sym(m) -> SpectralDecomposition:
    """Eigendecomposition of a symmetric matrix with descending eigenvalues.

    Examples
    --------
    >>> d = eig_sym([[2.0, 1.0], [1.0, 2.0]])
    >>> d.eigenvalues.round(12).tolist()
    [3.0, 1.0]
    """
    s = symmetrize(m)
    w, v = np.linalg.eigh(s)
    order = np.argsort(w)[::-1]
    w = w[order]
    v = v[:, order]
    # deterministic sign: largest-magnitude entry of each eigenvector positive
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    v = v * signs
    return SpectralDecomposition(eigenvalues=w, eigenvectors=v)


def condition_number(spec: SpectralDecomposition) -> float:
    """Spectral condition number ``lambda_1 / lambda_n``.

    Raises
    ------
    SingularMatrixError
        If the smallest eigenvalue is not positive.
    """
    lam = spec.eigenvalues
    if lam[-1] <= 0:
        raise SingularMatrixError(f"smallest eigenvalue {lam[-1]:.3e} is not positive")
    return float(lam[0] / lam[-1])


def spectral_radius(m) -> float:
    """Largest eigenvalue modulus of a (not necessarily symmetric) square matrix."""
    m = np.asarray(m, dtype=float)
    return float(np.max(np.abs(np.linalg.eigvals(m)))) if m.size else 0.0


def spectral_radius_ok(r, normal, eps: float = 1e-12) -> tuple[bool, float]:
    """Check the series convergence condition for a regularization matrix.

    Parameters
    ----------
    r : (n, n) array_like
        Regularization matrix.
    normal : (n, n) array_like
        Normal matrix ``A^T A``.
    eps : float
        Safety margin; the check is ``rho < 1 - eps``.

    Returns
    -------
    ok : bool
    rho : float
        Spectral radius of ``R (N + R)^-1``.
    """
    r = np.asarray(r, dtype=float)
    normal = np.asarray(normal, dtype=float)
    if r.shape != normal.shape:
        raise DimensionError(f"R has shape {r.shape}, normal matrix has shape {normal.shape}")
    inv = inverse_spd(normal + r)
    rho = spectral_radius(r @ inv)
    return rho < 1.0 - eps, rho


def inverse_spd(m) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via its eigendecomposition."""
    spec = eig_sym(m)
    lam = spec.eigenvalues
    if lam[-1] <= NUMERIC_ZERO * max(lam[0], 0.0) or lam[-1] <= 0:
        raise SingularMatrixError(f"matrix is numerically singular (smallest eigenvalue {lam[-1]:.3e})")
    return spec.reconstruct(1.0 / lam)
