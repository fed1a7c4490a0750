"""Approximation residual of the series inverse, bias of the truncated solution,
and bounds on both.

With ``H = (N + R)^-1`` and ``M = R H`` the tail of the series is

    F = sum_{i>k} M^i = (I - M)^-1 M^(k+1)

and the truncated estimate misses the least-squares solution by exactly
``H F A^T b``.
"""

from __future__ import annotations

import numpy as np

from ._basis import shared_basis
from .errors import HiregError, NotSymmetricError, SingularMatrixError, SpectralRadiusError
from .regularization import Method, RegularizationPlan, golden_section, resolve_plan
from .solvers import RADIUS_EPS
from .spectral import (
    NUMERIC_ZERO,
    LinearSystem,
    SpectralDecomposition,
    eig_sym,
    inverse_spd,
    normal_matrix,
    spectral_radius,
    symmetrize,
)

__all__ = [
    "residual_F",
    "hr_bias",
    "hr_bias_alternate_k1",
    "error_bound",
    "residual_bounds",
    "tr_ls_gap_bound",
    "adjustment_omega",
    "is_psd",
]

COMMUTE_TOL = 1e-9
PSD_TOL = 1e-10


def _check_radius(rho: float) -> None:
    if not rho < 1.0 - RADIUS_EPS:
        raise SpectralRadiusError(f"spectral radius {rho:.15g} is not below 1")


def residual_F(r, normal, k: int) -> np.ndarray:
    """Closed-form series tail ``(I - RH)^-1 (RH)^(k+1)``.

    Parameters
    ----------
    r, normal : (n, n) array_like
        Regularization matrix and ``A^T A``.
    k : int
        Truncation order; the tail starts at power ``k + 1``.

    Returns
    -------
    F : (n, n) ndarray

    Raises
    ------
    SpectralRadiusError
        If ``rho(RH) >= 1``.
    """
    r = np.asarray(r, dtype=float)
    normal = symmetrize(normal)
    spec = eig_sym(normal)
    sb = shared_basis(spec, r) if spec.eigenvalues[-1] > 0 else None
    if sb is not None:
        _check_radius(sb.rho)
        q = sb.q
        first = sb.matrix(np.where(q == 0, 1.0, 1.0 / sb.one_minus_q))
        second = sb.matrix(q ** (k + 1))
        f = sb.matrix(sb.tail_diag(k))
    else:
        h = inverse_spd(normal + r)
        m = r @ h
        _check_radius(spectral_radius(m))
        eye = np.eye(m.shape[0])
        first = np.linalg.inv(eye - m)
        second = np.linalg.matrix_power(m, k + 1)
        f = np.linalg.solve(eye - m, second)
    gap = np.linalg.norm(first @ second - second @ first, 2)
    if gap > COMMUTE_TOL * max(1.0, np.linalg.norm(first, 2) * np.linalg.norm(second, 2)):
        raise HiregError(f"factors of the residual fail to commute (gap {gap:.3e})")
    return f


def _resolve(system: LinearSystem, plan: RegularizationPlan, spec: SpectralDecomposition | None):
    spec = eig_sym(normal_matrix(system)) if spec is None else spec
    if plan.r_matrix is None:
        plan = resolve_plan(plan, spec)
    return spec, plan


def hr_bias(system: LinearSystem, plan: RegularizationPlan, spec: SpectralDecomposition | None = None) -> np.ndarray:
    """Exact difference ``x_ls - x_hr^k = (N + R)^-1 F A^T b``."""
    spec, plan = _resolve(system, plan, spec)
    lam = spec.eigenvalues
    if lam[-1] <= NUMERIC_ZERO * lam[0]:
        raise SingularMatrixError("least-squares solution is undefined for a singular normal matrix")
    if plan.method in (Method.LS, Method.TSVD):
        raise HiregError(f"bias of the series solution is not defined for method {plan.method.name}")
    form = plan.effective_form if not isinstance(plan.mu2, str) else None
    sb = shared_basis(spec, plan.r_matrix, mu2=plan.mu2 if form else None, form=form)
    atb = system.atb()
    if sb is not None:
        _check_radius(sb.rho)
        c = sb.to_coords(atb)
        return sb.from_coords(sb.tail_diag(plan.k) * c / sb.lam_new)
    normal = normal_matrix(system)
    h = inverse_spd(normal + plan.r_matrix)
    return h @ residual_F(plan.r_matrix, normal, plan.k) @ atb


def hr_bias_alternate_k1(system: LinearSystem, r) -> np.ndarray:
    """First-order bias through the expansion of ``(N + R)^-1`` around ``N^-1``.

    ``(N + R)^-1 ((I + R N^-1)^-1 - I + R N^-1) A^T b``.  Only valid when
    ``rho(R N^-1) < 1``, a stricter requirement than for :func:`hr_bias`.
    """
    r = np.asarray(r, dtype=float)
    normal = normal_matrix(system)
    n_inv = inverse_spd(normal)
    m = r @ n_inv
    rho = spectral_radius(m)
    if not rho < 1.0:
        raise SpectralRadiusError(f"rho(R N^-1) = {rho:.6g} >= 1; the alternate expansion does not converge")
    eye = np.eye(m.shape[0])
    middle = np.linalg.inv(eye + m) - eye + m
    return inverse_spd(normal + r) @ middle @ system.atb()


def error_bound(system: LinearSystem, plan: RegularizationPlan, spec: SpectralDecomposition | None = None) -> float:
    """Norm of :func:`hr_bias`; the distance between the k-th order and LS estimates."""
    return float(np.linalg.norm(hr_bias(system, plan, spec)))


def tr_ls_gap_bound(system: LinearSystem, mu2: float, spec: SpectralDecomposition | None = None) -> float:
    """Bound on ``||x_tr - x_ls||`` for ``R = mu2 I`` (the ``k = 0`` error bound)."""
    n = system.n
    if mu2 == 0:
        return 0.0
    plan = RegularizationPlan(Method.TR, k=0, mu2=float(mu2), form="identity", r_matrix=mu2 * np.eye(n))
    return error_bound(system, plan, spec)


def _symmetric_rh(r, normal) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    m = r @ inverse_spd(np.asarray(normal, dtype=float) + r)
    try:
        return symmetrize(m, rtol=1e-8)
    except NotSymmetricError as exc:
        raise NotSymmetricError("R (N + R)^-1 is not symmetric; R must commute with N") from exc


def residual_bounds(r, normal, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper bounds ``M^(k+1) / (1 - lambda_min)`` and ``M^(k+1) / (1 - lambda_max)``.

    ``M = R (N + R)^-1`` must be symmetric, which holds whenever ``R``
    commutes with ``N``.  In the Loewner order
    ``lower <= residual_F(r, normal, k) <= upper``.
    """
    r = np.asarray(r, dtype=float)
    normal = symmetrize(normal)
    spec = eig_sym(normal)
    sb = shared_basis(spec, r) if spec.eigenvalues[-1] > 0 else None
    if sb is not None:
        # 1 - q from lambda / lambda_new avoids cancellation for q near one
        q, one_minus_q = sb.q, sb.one_minus_q
        _check_radius(sb.rho)
        power = sb.matrix(q ** (k + 1))
        return power / one_minus_q[np.argmin(q)], power / one_minus_q[np.argmax(q)]
    m_spec = eig_sym(_symmetric_rh(r, normal))
    q = m_spec.eigenvalues
    lam_max, lam_min = float(q[0]), float(q[-1])
    _check_radius(max(abs(lam_max), abs(lam_min)))
    power = m_spec.reconstruct(q ** (k + 1))
    return power / (1.0 - lam_min), power / (1.0 - lam_max)


def adjustment_omega(r, normal, k: int) -> float:
    """``omega`` in ``[lambda_min, lambda_max]`` minimizing ``||F - M^(k+1) / (1 - omega)||_F``.

    Diagnostic only: the solvers never pick ``omega`` this way by default.
    """
    m_spec = eig_sym(_symmetric_rh(r, normal))
    q = m_spec.eigenvalues
    _check_radius(float(np.max(np.abs(q))))
    power = q ** (k + 1)
    tail = power / (1.0 - q)

    def objective(omega: float) -> float:
        return float(np.sum((tail - power / (1.0 - omega)) ** 2))

    lo, hi = float(q.min()), float(q.max())
    return golden_section(objective, lo, hi, 1e-12 * max(hi, 1e-300))


def is_psd(m, tol: float = PSD_TOL, scale: float | None = None) -> bool:
    """Eigenvalue sign test ``lambda_min >= -tol * scale`` for a symmetric matrix.

    ``scale`` defaults to ``max|lambda|`` of ``m`` itself.  When ``m`` is a
    difference of nearly equal matrices pass the magnitude of the operands
    instead, otherwise rounding noise is judged against itself.
    """
    w = eig_sym(m).eigenvalues
    if scale is None:
        scale = float(np.max(np.abs(w))) if w.size else 0.0
    return bool(w[-1] >= -tol * scale)
