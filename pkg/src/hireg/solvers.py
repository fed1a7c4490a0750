"""Least-squares estimators: LS, Tikhonov, TSVD and the k-th order series solution.

The k-th order solution truncates the expansion

    (A^T A)^-1 = (A^T A + R)^-1 sum_{i>=0} (R (A^T A + R)^-1)^i

after ``k + 1`` terms.  ``k = 0`` with ``R = mu2 I`` is ordinary Tikhonov
regularization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._basis import SharedBasis, shared_basis
from .errors import ParameterError, SingularMatrixError, SpectralRadiusError
from .regularization import Method, RegularizationPlan, resolve_plan
from .spectral import (
    NUMERIC_ZERO,
    LinearSystem,
    SpectralDecomposition,
    eig_sym,
    inverse_spd,
    normal_matrix,
    spectral_radius,
)

__all__ = [
    "LinearSystem",
    "SolveOutcome",
    "solve",
    "solve_ls",
    "solve_tikhonov",
    "solve_tsvd",
    "solve_hr",
    "solve_hr_adjusted",
    "RADIUS_EPS",
]

RADIUS_EPS = 1e-12


@dataclass(frozen=True)
class SolveOutcome:
    """An estimate together with the diagnostics of the solve that produced it."""

    estimate: np.ndarray
    method: Method
    condition_before: float
    condition_after: float
    spectral_radius: float
    bias_bound: float
    series_terms_used: int
    plan: RegularizationPlan | None = None

    @property
    def mu2(self) -> float | None:
        return None if self.plan is None else self.plan.mu2


def _spec_of(system: LinearSystem, spec: SpectralDecomposition | None) -> SpectralDecomposition:
    return eig_sym(normal_matrix(system)) if spec is None else spec


def _condition(lam: np.ndarray) -> float:
    if lam[-1] <= NUMERIC_ZERO * lam[0] or lam[-1] <= 0:
        return math.inf
    return float(lam[0] / lam[-1])


def solve_ls(system: LinearSystem, spec: SpectralDecomposition | None = None) -> SolveOutcome:
    """Ordinary least squares through the eigendecomposition of ``A^T A``.

    Raises
    ------
    SingularMatrixError
        If ``lambda_n <= 1e-14 * lambda_1``.
    """
    spec = _spec_of(system, spec)
    lam = spec.eigenvalues
    if lam[0] <= 0 or lam[-1] <= NUMERIC_ZERO * lam[0]:
        raise SingularMatrixError(
            f"normal matrix is numerically singular (eigenvalues {lam[0]:.3e} .. {lam[-1]:.3e})"
        )
    p = spec.eigenvectors
    x = p @ ((p.T @ system.atb()) / lam)
    kappa = float(lam[0] / lam[-1])
    return SolveOutcome(x, Method.LS, kappa, kappa, 0.0, 0.0, 0)


def solve_tikhonov(system: LinearSystem, mu2: float, spec: SpectralDecomposition | None = None) -> SolveOutcome:
    """Tikhonov estimate ``(A^T A + mu2 I)^-1 A^T b``."""
    if mu2 < 0:
        raise ParameterError(f"mu2 must be non-negative, got {mu2}")
    spec = _spec_of(system, spec)
    if mu2 == 0:
        out = solve_ls(system, spec)
        return replace(out, method=Method.TR)
    sb = shared_basis(spec, None, mu2=float(mu2), form="identity")
    c = sb.to_coords(system.atb())
    x = sb.from_coords(c / sb.lam_new)
    rho = sb.rho
    bias = _bias_bound(sb, c, 0) if rho < 1.0 - RADIUS_EPS else math.inf
    plan = RegularizationPlan(Method.TR, k=0, mu2=float(mu2), form="identity", r_matrix=sb.matrix(sb.r_eig))
    return SolveOutcome(x, Method.TR, _condition(spec.eigenvalues), _condition(sb.lam_new), rho, bias, 1, plan)


def solve_tsvd(system: LinearSystem, truncate_count: int, spec: SpectralDecomposition | None = None) -> SolveOutcome:
    """Pseudo-inverse solution with the ``truncate_count`` smallest components of ``A^T A`` dropped."""
    spec = _spec_of(system, spec)
    n = spec.n
    if not 0 <= truncate_count < n:
        raise ParameterError(f"truncate_count={truncate_count} must be in [0, {n})")
    keep = n - truncate_count
    lam = spec.eigenvalues
    if lam[0] <= 0 or lam[keep - 1] <= NUMERIC_ZERO * lam[0]:
        raise SingularMatrixError("retained spectral components include a numerically zero eigenvalue")
    p = spec.eigenvectors
    c = p.T @ system.atb()
    coef = np.zeros(n)
    coef[:keep] = c[:keep] / lam[:keep]
    x = p @ coef
    before = _condition(lam)
    if np.isfinite(before):
        bias = float(np.linalg.norm(c[keep:] / lam[keep:]))
    else:
        bias = math.nan
    plan = RegularizationPlan(Method.TSVD, k=0, mu2=0.0, truncate=truncate_count, s=keep, r_matrix=np.zeros((n, n)))
    return SolveOutcome(x, Method.TSVD, before, float(lam[0] / lam[keep - 1]), 0.0, bias, keep, plan)


def _bias_bound(sb: SharedBasis, c: np.ndarray, k: int) -> float:
    # ||(N+R)^-1 F A^T b|| with F from the closed form (I - RH)^-1 (RH)^(k+1)
    return float(np.linalg.norm(sb.tail_diag(k) * c / sb.lam_new))


def _prepare(system: LinearSystem, plan: RegularizationPlan, spec: SpectralDecomposition | None):
    spec = _spec_of(system, spec)
    if plan.r_matrix is None:
        plan = resolve_plan(plan, spec)
    form = plan.effective_form if not isinstance(plan.mu2, str) else None
    sb = shared_basis(spec, plan.r_matrix, mu2=plan.mu2 if form else None, form=form)
    return spec, plan, sb


def _series_coords(sb: SharedBasis, c: np.ndarray, k: int) -> np.ndarray:
    w = c / sb.lam_new
    total = w.copy()
    q = sb.q
    for _ in range(k):
        w = q * w
        if not w.any():
            break
        total += w
    return total


def _check_radius(rho: float) -> None:
    if not rho < 1.0 - RADIUS_EPS:
        raise SpectralRadiusError(f"spectral radius {rho:.15g} of R (N + R)^-1 is not below 1")


def _general_series(system: LinearSystem, r: np.ndarray, normal: np.ndarray, k: int):
    h = inverse_spd(normal + r)
    m = r @ h
    rho = spectral_radius(m)
    _check_radius(rho)
    atb = system.atb()
    y = h @ atb
    total = y.copy()
    for _ in range(k):
        y = h @ (r @ y)
        total += y
    eye = np.eye(r.shape[0])
    f = np.linalg.solve(eye - m, np.linalg.matrix_power(m, k + 1))
    bias = float(np.linalg.norm(h @ f @ atb))
    return total, h, m, rho, bias


def solve_hr(
    system: LinearSystem,
    plan: RegularizationPlan,
    spec: SpectralDecomposition | None = None,
) -> SolveOutcome:
    """k-th order series estimate ``(N+R)^-1 sum_{i=0}^k (R (N+R)^-1)^i A^T b``.

    ``(N + R)^-1`` is formed once.  When ``R`` commutes with ``N`` (relaxed and
    scaled-identity matrices) the series is iterated in the shared eigenbasis,
    otherwise with explicit matrix-vector products.

    Raises
    ------
    SpectralRadiusError
        If ``rho(R (N + R)^-1) >= 1``.
    SingularMatrixError
        If ``N + R`` is singular.
    """
    spec, plan, sb = _prepare(system, plan, spec)
    k = plan.k
    before = _condition(spec.eigenvalues)
    if sb is not None:
        rho = sb.rho
        _check_radius(rho)
        c = sb.to_coords(system.atb())
        x = sb.from_coords(_series_coords(sb, c, k))
        return SolveOutcome(x, plan.method, before, _condition(sb.lam_new), rho, _bias_bound(sb, c, k), k + 1, plan)
    normal = normal_matrix(system)
    x, h, _, rho, bias = _general_series(system, plan.r_matrix, normal, k)
    after = _condition(eig_sym(normal + plan.r_matrix).eigenvalues)
    return SolveOutcome(x, plan.method, before, after, rho, bias, k + 1, plan)


def solve_hr_adjusted(
    system: LinearSystem,
    plan: RegularizationPlan,
    spec: SpectralDecomposition | None = None,
) -> SolveOutcome:
    """k-th order estimate plus the next series term scaled by ``1 / (1 - omega)``.

    The extra term stands in for the whole tail ``sum_{i>k}``; it is exact
    when every modified eigenvalue of ``R (N + R)^-1`` equals ``omega``.
    ``omega`` must lie in ``[0, lambda_max]``.
    """
    spec, plan, sb = _prepare(system, plan, spec)
    omega = float(plan.omega)
    k = plan.k
    before = _condition(spec.eigenvalues)
    if sb is not None:
        rho = sb.rho
        _check_radius(rho)
        _check_omega(omega, float(np.max(sb.q)))
        c = sb.to_coords(system.atb())
        coords = _series_coords(sb, c, k) + (sb.q ** (k + 1)) * c / sb.lam_new / (1.0 - omega)
        x = sb.from_coords(coords)
        residual = float(np.linalg.norm((sb.tail_diag(k) - sb.q ** (k + 1) / (1.0 - omega)) * c / sb.lam_new))
        return SolveOutcome(x, plan.method, before, _condition(sb.lam_new), rho, residual, k + 2, plan)
    normal = normal_matrix(system)
    x, h, m, rho, _ = _general_series(system, plan.r_matrix, normal, k)
    _check_omega(omega, float(np.max(np.real(np.linalg.eigvals(m)))))
    atb = system.atb()
    corr = h @ np.linalg.matrix_power(m, k + 1) @ atb / (1.0 - omega)
    f = np.linalg.solve(np.eye(m.shape[0]) - m, np.linalg.matrix_power(m, k + 1))
    residual = float(np.linalg.norm(h @ f @ atb - corr))
    after = _condition(eig_sym(normal + plan.r_matrix).eigenvalues)
    return SolveOutcome(x + corr, plan.method, before, after, rho, residual, k + 2, plan)


def _check_omega(omega: float, lam_max: float) -> None:
    if not (0.0 <= omega <= lam_max * (1.0 + 1e-12) and omega < 1.0):
        raise ParameterError(f"omega={omega} outside [0, lambda_max={lam_max}] or not below 1")


def solve(system: LinearSystem, plan: RegularizationPlan, spec: SpectralDecomposition | None = None) -> SolveOutcome:
    """Dispatch to the estimator named by ``plan.method``."""
    spec = _spec_of(system, spec)
    method = plan.method
    if method is Method.LS:
        return solve_ls(system, spec)
    if method is Method.TSVD:
        return solve_tsvd(system, plan.truncate, spec)
    if not plan.is_resolved:
        plan = resolve_plan(plan, spec)
    if method is Method.TR and plan.effective_form == "identity" and float(plan.omega) == 0.0:
        out = solve_tikhonov(system, float(plan.mu2), spec)
        return replace(out, plan=plan)
    if float(plan.omega) != 0.0:
        return solve_hr_adjusted(system, plan, spec)
    return solve_hr(system, plan, spec)
