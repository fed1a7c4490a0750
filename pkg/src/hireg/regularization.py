"""Regularization matrices and a-priori selection of the regularization level.

The relaxed regularization matrix lifts every eigenvalue of ``N = A^T A`` that
lies below ``mu2`` up to ``mu2`` and leaves the rest alone::

    R = P diag(max(mu2 - lambda_i, 0)) P^T

so ``N + R`` has eigenvalues ``max(lambda_i, mu2)`` in the same basis.  With
``s = n - 1`` only the smallest eigenvalue moves and the a-priori loss
(approximation residual of the inverse plus condition number of ``N + R``)
reduces to a scalar convex function of ``mu2`` on ``[lambda_n, lambda_{n-1}]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import ParameterError
from .spectral import SpectralDecomposition

__all__ = [
    "Method",
    "RegularizationPlan",
    "build_relaxed_R",
    "build_tikhonov_R",
    "optimal_mu2_k0",
    "stationary_mu2_k0",
    "optimal_mu2_k1",
    "loss_relaxed",
    "optimal_mu2_general",
    "golden_section",
    "select_s",
    "resolve_plan",
]

DEFAULT_CONDITION_TARGET = 1e3


class Method(str, enum.Enum):
    LS = "ls"
    TR = "tr"
    TSVD = "tsvd"
    FTR = "ftr"
    OFTR = "oftr"
    HR = "hr"


@dataclass(frozen=True)
class RegularizationPlan:
    """How to regularize one linear system.

    A plan is either *declared* (some fields symbolic, e.g. ``mu2="auto"``)
    or *resolved* against a spectrum by :func:`resolve_plan`, after which all
    numeric fields and ``r_matrix`` are set.

    Parameters
    ----------
    method : Method
        Estimator family.
    k : int
        Series order (number of extra terms beyond the first).
    s : int, str or None
        Relaxation cut, 1-based: eigenvalues ``lambda_{s+1}..lambda_n`` are
        lifted.  ``None`` means ``n - 1``; ``"auto"`` picks it from a
        condition-number target.
    mu2 : float or str
        Regularization level.  ``"auto"`` applies the a-priori criterion for
        this method and order; ``"lambda_s"`` uses ``lambda_s`` itself.
    omega : float or str
        Adjustment parameter for the adjusted solution.  ``"min"`` and
        ``"max"`` select the extreme eigenvalues of ``R (N + R)^-1`` over the
        modified modes.  ``0`` disables the adjustment.
    form : str or None
        ``"relaxed"`` or ``"identity"`` (``R = mu2 I``).  ``None`` takes the
        method default (identity for TR, relaxed otherwise).
    truncate : int
        Number of trailing spectral components dropped by TSVD.
    """

    method: Method = Method.HR
    k: int = 1
    s: int | str | None = None
    mu2: float | str = "auto"
    omega: float | str = 0.0
    form: str | None = None
    truncate: int = 1
    condition_target: float = DEFAULT_CONDITION_TARGET
    name: str | None = None
    r_matrix: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 0:
            raise ParameterError(f"series order k must be a non-negative integer, got {self.k!r}")
        if self.form not in (None, "relaxed", "identity"):
            raise ParameterError(f"unknown regularization form {self.form!r}")
        if isinstance(self.mu2, str) and self.mu2 not in ("auto", "lambda_s"):
            raise ParameterError(f"mu2 must be a number, 'auto' or 'lambda_s', got {self.mu2!r}")
        if not isinstance(self.mu2, str) and self.mu2 < 0:
            raise ParameterError(f"mu2 must be non-negative, got {self.mu2}")
        if isinstance(self.omega, str) and self.omega not in ("min", "max"):
            raise ParameterError(f"omega must be a number, 'min' or 'max', got {self.omega!r}")
        if isinstance(self.s, str) and self.s != "auto":
            raise ParameterError(f"s must be an integer, None or 'auto', got {self.s!r}")

    @property
    def label(self) -> str:
        return self.name or self.method.name

    @property
    def effective_form(self) -> str:
        if self.form is not None:
            return self.form
        return "identity" if self.method is Method.TR else "relaxed"

    @property
    def is_resolved(self) -> bool:
        return self.r_matrix is not None or self.method in (Method.LS, Method.TSVD)


def build_relaxed_R(spec: SpectralDecomposition, mu2: float) -> np.ndarray:
    """Relaxed regularization matrix ``P diag(max(mu2 - lambda_i, 0)) P^T``.

    Examples
    --------
    >>> from hireg.spectral import eig_sym
    >>> build_relaxed_R(eig_sym(np.diag([1.0, 0.01])), 1.0).round(12)
    array([[0.  , 0.  ],
           [0.  , 0.99]])
    """
    if mu2 <= 0:
        raise ParameterError(f"mu2 must be positive, got {mu2}")
    return spec.reconstruct(relaxed_r_eigenvalues(spec.eigenvalues, mu2))


def relaxed_r_eigenvalues(eigenvalues, mu2: float) -> np.ndarray:
    return np.maximum(mu2 - np.asarray(eigenvalues, dtype=float), 0.0)


def build_tikhonov_R(n: int, mu2: float) -> np.ndarray:
    """``mu2 * I_n``."""
    if mu2 < 0:
        raise ParameterError(f"mu2 must be non-negative, got {mu2}")
    return mu2 * np.eye(n)


def _check_ordering(lambda1: float, lambda_n_minus_1: float, lambda_n: float) -> None:
    if not (0 < lambda_n <= lambda_n_minus_1 <= lambda1):
        raise ParameterError(
            "need 0 < lambda_n <= lambda_{n-1} <= lambda_1, got "
            f"({lambda1}, {lambda_n_minus_1}, {lambda_n})"
        )


def optimal_mu2_k0(lambda1: float, lambda_n_minus_1: float, lambda_n: float) -> float:
    """Closed-form zeroth-order level: ``sqrt(2 lambda_1 / lambda_n)`` clamped to
    ``[lambda_n, lambda_{n-1}]``.

    This is the value used by the optimal-FTR (OFTR) baseline.  It is *not* the
    stationary point of :func:`loss_relaxed` at ``k = 0``; see
    :func:`stationary_mu2_k0` for that.
    """
    _check_ordering(lambda1, lambda_n_minus_1, lambda_n)
    value = math.sqrt(2.0 * lambda1 / lambda_n)
    return float(min(max(value, lambda_n), lambda_n_minus_1))


def stationary_mu2_k0(lambda1: float, lambda_n_minus_1: float, lambda_n: float) -> float:
    """Minimizer of the ``k = 0`` relaxed loss, ``sqrt(lambda_1 lambda_n)`` clamped.

    Setting the derivative of ``(mu2 - lambda_n) / lambda_n + lambda_1 / mu2``
    to zero gives ``mu2 = sqrt(lambda_1 lambda_n)``.
    """
    _check_ordering(lambda1, lambda_n_minus_1, lambda_n)
    value = math.sqrt(lambda1 * lambda_n)
    return float(min(max(value, lambda_n), lambda_n_minus_1))


def optimal_mu2_k1(lambda1: float, lambda_n_minus_1: float, lambda_n: float) -> float:
    """Closed-form first-order level ``min(sqrt(lambda_n^2 + lambda_n lambda_1), lambda_{n-1})``."""
    _check_ordering(lambda1, lambda_n_minus_1, lambda_n)
    value = min(math.sqrt(lambda_n * lambda_n + lambda_n * lambda1), lambda_n_minus_1)
    return float(max(value, lambda_n))


def loss_relaxed(mu2: float, k: int, lambda1: float, lambda_n: float) -> float:
    """A-priori loss for the relaxed matrix with ``s = n - 1``.

    ``(mu2 / lambda_n) * ((mu2 - lambda_n) / mu2) ** (k + 1) + lambda_1 / mu2``:
    the spectral norm of the series tail beyond order ``k`` plus the condition
    number of ``N + R``.
    """
    if lambda_n <= 0:
        raise ParameterError(f"lambda_n must be positive, got {lambda_n}")
    if mu2 < lambda_n:
        raise ParameterError(f"mu2={mu2} is below lambda_n={lambda_n}")
    q = (mu2 - lambda_n) / mu2
    return (mu2 / lambda_n) * q ** (k + 1) + lambda1 / mu2


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Minimize a unimodal function on ``[lo, hi]`` to absolute tolerance ``tol``.

    The interval end points are compared against the interior result so that a
    minimum sitting on the boundary is returned exactly.
    """
    if hi < lo:
        raise ParameterError(f"invalid interval [{lo}, {hi}]")
    if hi == lo:
        return lo
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    candidates = [(f(x), x), (f(lo), lo), (f(hi), hi)]
    return min(candidates)[1]


def optimal_mu2_general(
    k: int,
    lambda1: float,
    lambda_n_minus_1: float,
    lambda_n: float,
    lower: float | None = None,
) -> float:
    """Numerically minimize :func:`loss_relaxed` over ``[lower, lambda_{n-1}]``.

    ``lower`` defaults to ``lambda_n``; a larger value restricts the search when
    more than one eigenvalue is relaxed.  The loss is convex on the interval,
    so golden-section search converges to the global minimizer.
    """
    _check_ordering(lambda1, lambda_n_minus_1, lambda_n)
    if k < 0:
        raise ParameterError(f"k must be non-negative, got {k}")
    lo = lambda_n if lower is None else float(lower)
    if not (lambda_n <= lo <= lambda_n_minus_1):
        raise ParameterError(f"lower bound {lo} outside [{lambda_n}, {lambda_n_minus_1}]")
    if lo == lambda_n_minus_1:
        return float(lo)
    tol = 1e-10 * lambda_n_minus_1
    return float(golden_section(lambda u: loss_relaxed(u, k, lambda1, lambda_n), lo, lambda_n_minus_1, tol))


def select_s(spec: SpectralDecomposition, target: float = DEFAULT_CONDITION_TARGET) -> int:
    """Relaxation cut that lifts as few eigenvalues as possible.

    Returns the largest ``s`` with ``lambda_1 / lambda_s <= target``.  A return
    value of ``n`` means the matrix already meets the target and needs no
    relaxation.
    """
    lam = spec.eigenvalues
    if lam[0] <= 0:
        raise ParameterError("spectrum has no positive eigenvalue")
    ok = [i + 1 for i in range(lam.shape[0]) if lam[i] > 0 and lam[0] / lam[i] <= target]
    return max(ok)


def _resolve_s(plan: RegularizationPlan, n: int, spec: SpectralDecomposition) -> int:
    if plan.s is None:
        return max(n - 1, 1)
    if plan.s == "auto":
        return select_s(spec, plan.condition_target)
    s = int(plan.s)
    if not 1 <= s <= n:
        raise ParameterError(f"relaxation cut s={s} outside [1, {n}]")
    return s


def _auto_mu2(plan: RegularizationPlan, lam: np.ndarray, s: int) -> float:
    n = lam.shape[0]
    if s >= n:
        return float(lam[-1])
    lam1, lam_s, lam_next, lam_n = lam[0], lam[s - 1], lam[s], lam[-1]
    if lam_n <= 0:
        raise ParameterError("the a-priori criterion needs a positive definite normal matrix")
    if plan.method in (Method.OFTR, Method.TR) or (plan.method is Method.HR and plan.k == 0 and s == n - 1):
        # the OFTR closed form is defined on [lambda_n, lambda_{n-1}]
        return optimal_mu2_k0(lam1, lam[n - 2] if n > 1 else lam1, lam_n)
    if plan.method is Method.FTR:
        return float(lam_s)
    if plan.k == 1 and s == n - 1:
        return optimal_mu2_k1(lam1, lam_s, lam_n)
    return optimal_mu2_general(plan.k, lam1, lam_s, lam_n, lower=lam_next)


def _relaxed_q(spec: SpectralDecomposition, r_eig: np.ndarray) -> np.ndarray:
    return r_eig / (spec.eigenvalues + r_eig)


def resolve_plan(plan: RegularizationPlan, spec: SpectralDecomposition) -> RegularizationPlan:
    """Fill in every symbolic field of ``plan`` for the normal matrix ``spec``.

    The returned plan carries numeric ``s``, ``mu2``, ``omega`` and the
    realized ``r_matrix``.
    """
    n = spec.n
    if plan.method is Method.LS:
        return replace(plan, k=0, mu2=0.0, omega=0.0, s=n, r_matrix=np.zeros((n, n)))
    if plan.method is Method.TSVD:
        if not 0 <= plan.truncate < n:
            raise ParameterError(f"truncate={plan.truncate} must be in [0, {n})")
        return replace(plan, mu2=0.0, omega=0.0, s=n - plan.truncate, r_matrix=np.zeros((n, n)))

    lam = spec.eigenvalues
    k = 0 if plan.method in (Method.TR, Method.FTR, Method.OFTR) else plan.k
    plan = replace(plan, k=k)
    s = _resolve_s(plan, n, spec)

    if plan.mu2 == "auto":
        mu2 = _auto_mu2(plan, lam, s)
    elif plan.mu2 == "lambda_s":
        mu2 = float(lam[min(s, n) - 1])
    else:
        mu2 = float(plan.mu2)

    if plan.effective_form == "identity":
        r = build_tikhonov_R(n, mu2)
        q = mu2 / (lam + mu2)
    else:
        if mu2 <= 0:
            raise ParameterError(f"relaxed regularization needs mu2 > 0, got {mu2}")
        if s < n:
            if not (lam[s] <= mu2 * (1 + 1e-12) and mu2 <= lam[s - 1] * (1 + 1e-12)):
                raise ParameterError(
                    f"mu2={mu2} outside the relaxation interval [{lam[s]}, {lam[s - 1]}] for s={s}"
                )
            # values accepted within rounding are snapped onto the interval
            mu2 = float(min(max(mu2, lam[s]), lam[s - 1]))
        r_eig = relaxed_r_eigenvalues(lam, mu2)
        r = spec.reconstruct(r_eig)
        q = _relaxed_q(spec, r_eig)

    omega = _resolve_omega(plan.omega, q)
    return replace(plan, s=s, mu2=mu2, omega=omega, r_matrix=r)


def _resolve_omega(omega, q: np.ndarray) -> float:
    modified = q[q > 0]
    if omega == "min":
        return float(modified.min()) if modified.size else 0.0
    if omega == "max":
        return float(q.max()) if q.size else 0.0
    return float(omega)
