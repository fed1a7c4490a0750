"""Diagonal arithmetic for regularization matrices that commute with ``A^T A``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrixError
from .spectral import NUMERIC_ZERO, SpectralDecomposition

COMMUTE_RTOL = 1e-12


@dataclass(frozen=True)
class SharedBasis:
    """``N``, ``R`` and ``N + R`` expressed in the eigenbasis of ``N``.

    ``lam``, ``r_eig`` and ``lam_new`` are the eigenvalues of ``N``, ``R`` and
    ``N + R``; ``q = r_eig / lam_new`` are the eigenvalues of ``R (N + R)^-1``
    and ``one_minus_q = lam / lam_new`` is kept separately to avoid
    cancellation when ``q`` is close to one.
    """

    basis: np.ndarray
    lam: np.ndarray
    r_eig: np.ndarray
    lam_new: np.ndarray

    @property
    def q(self) -> np.ndarray:
        return self.r_eig / self.lam_new

    @property
    def one_minus_q(self) -> np.ndarray:
        return self.lam / self.lam_new

    @property
    def rho(self) -> float:
        return float(np.max(np.abs(self.q)))

    def to_coords(self, v) -> np.ndarray:
        return self.basis.T @ v

    def from_coords(self, c) -> np.ndarray:
        return self.basis @ c

    def matrix(self, diag) -> np.ndarray:
        return (self.basis * diag) @ self.basis.T

    def tail_diag(self, k: int) -> np.ndarray:
        """Eigenvalues of ``sum_{i>k} (R H)^i = (I - RH)^-1 (RH)^(k+1)``."""
        q = self.q
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(q == 0, 0.0, q ** (k + 1) / self.one_minus_q)
        return out


def shared_basis(spec: SpectralDecomposition, r, mu2=None, form: str | None = None) -> SharedBasis | None:
    """Express ``R`` in the eigenbasis of ``N`` if the two commute, else return None.

    When ``mu2`` and ``form`` describe how ``R`` was built, its eigenvalues
    (and those of ``N + R``) are taken from the defining formula instead of a
    numerical projection, so that for the relaxed form ``N + R`` has
    eigenvalues exactly ``max(lambda_i, mu2)``.
    """
    p = spec.eigenvectors
    lam = spec.eigenvalues
    if isinstance(mu2, (int, float)) and form == "relaxed":
        r_eig = np.maximum(mu2 - lam, 0.0)
        lam_new = np.maximum(lam, float(mu2))
    elif isinstance(mu2, (int, float)) and form == "identity":
        r_eig = np.full_like(lam, float(mu2))
        lam_new = lam + r_eig
    else:
        c = p.T @ np.asarray(r, dtype=float) @ p
        off = c - np.diag(np.diag(c))
        scale = 1.0 + np.max(np.abs(c))
        if np.max(np.abs(off)) > COMMUTE_RTOL * scale:
            return None
        r_eig = np.diag(c).copy()
        lam_new = lam + r_eig
    if lam_new.min() <= 0 or lam_new.min() <= NUMERIC_ZERO * lam_new.max():
        raise SingularMatrixError(f"N + R is numerically singular (smallest eigenvalue {lam_new.min():.3e})")
    return SharedBasis(basis=p, lam=lam, r_eig=r_eig, lam_new=lam_new)
