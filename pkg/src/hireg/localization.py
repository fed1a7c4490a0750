"""Range-based localization as a linear least-squares problem.

Subtracting the range equation of a reference anchor ``p_r`` from the others
removes the quadratic term in the unknown position::

    (p_i - p_r)^T x = 0.5 * (|p_i|^2 - |p_r|^2 + d_r^2 - d_i^2)

When the anchors barely differ along one axis (typically height indoors) the
corresponding column of ``A`` is small and ``A^T A`` is ill-conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .regularization import RegularizationPlan, optimal_mu2_k0, optimal_mu2_k1, resolve_plan, select_s
from .solvers import SolveOutcome, solve
from .spectral import NUMERIC_ZERO, LinearSystem, SpectralDecomposition, eig_sym, normal_matrix

__all__ = [
    "AnchorSet",
    "RangeMeasurement",
    "IllConditionReport",
    "design_matrix",
    "build_system",
    "locate",
    "ill_condition_report",
    "true_ranges",
]

AXES = "xyz"


@dataclass(frozen=True)
class AnchorSet:
    """Known anchor positions, one row per anchor.

    ``reference`` indexes the anchor whose range equation is subtracted from
    the others; the default ``-1`` uses the last anchor.
    """

    positions: np.ndarray
    reference: int = -1

    def __post_init__(self):
        p = np.array(self.positions, dtype=float)
        if p.ndim != 2 or p.shape[1] < 1:
            raise DimensionError(f"anchor positions must be a (count, dim) array, got shape {p.shape}")
        if p.shape[0] < p.shape[1] + 1:
            raise DimensionError(f"need at least {p.shape[1] + 1} anchors in {p.shape[1]}-D, got {p.shape[0]}")
        if not np.all(np.isfinite(p)):
            raise ValueError("anchor positions must be finite")
        if not -p.shape[0] <= self.reference < p.shape[0]:
            raise DimensionError(f"reference index {self.reference} out of range for {p.shape[0]} anchors")
        p.setflags(write=False)
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "reference", self.reference % p.shape[0])

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def reference_point(self) -> np.ndarray:
        return self.positions[self.reference]

    def others(self) -> np.ndarray:
        mask = np.arange(self.count) != self.reference
        return self.positions[mask]

    def with_reference(self, reference: int) -> AnchorSet:
        return AnchorSet(self.positions, reference)


@dataclass(frozen=True)
class RangeMeasurement:
    """Distances from the robot to every anchor at one tick, in anchor order."""

    distances: np.ndarray
    tick: int = 0

    def __post_init__(self):
        d = np.array(self.distances, dtype=float)
        if d.ndim != 1:
            raise DimensionError(f"distances must be a 1-D array, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("distances must be finite")
        if np.any(d < 0):
            raise ValueError(f"negative distance in measurement at tick {self.tick}")
        d.setflags(write=False)
        object.__setattr__(self, "distances", d)


def true_ranges(anchors: AnchorSet, position) -> np.ndarray:
    return np.linalg.norm(anchors.positions - np.asarray(position, dtype=float), axis=1)


def design_matrix(anchors: AnchorSet) -> np.ndarray:
    """Rows ``p_i - p_r`` for every non-reference anchor."""
    return anchors.others() - anchors.reference_point


def build_system(anchors: AnchorSet, ranges: RangeMeasurement) -> LinearSystem:
    d = ranges.distances
    if d.shape[0] != anchors.count:
        raise DimensionError(f"{d.shape[0]} distances for {anchors.count} anchors")
    mask = np.arange(anchors.count) != anchors.reference
    p_ref = anchors.reference_point
    d_ref = d[anchors.reference]
    others = anchors.positions[mask]
    b = 0.5 * (np.sum(others**2, axis=1) - p_ref @ p_ref + d_ref**2 - d[mask] ** 2)
    return LinearSystem(others - p_ref, b)


def locate(
    anchors: AnchorSet,
    ranges: RangeMeasurement,
    plan: RegularizationPlan,
    spec: SpectralDecomposition | None = None,
) -> SolveOutcome:
    """Estimate the robot position from one set of ranges.

    ``spec`` may carry a precomputed decomposition of ``A^T A``; it depends
    only on the anchors, so streams of measurements can share it.
    """
    system = build_system(anchors, ranges)
    if spec is None:
        spec = eig_sym(normal_matrix(system))
    if not plan.is_resolved:
        plan = resolve_plan(plan, spec)
    return solve(system, plan, spec)


@dataclass(frozen=True)
class IllConditionReport:
    column_norms: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    condition_number: float
    rank: int
    suggested_s: int
    small_mode_axis: str
    mu2_k0: float | None = None
    mu2_k1: float | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def needs_regularization(self) -> bool:
        return self.rank == self.eigenvalues.shape[0] and self.suggested_s < self.eigenvalues.shape[0]

    def to_dict(self) -> dict:
        n = self.eigenvalues.shape[0]
        return {
            "column_norms": dict(zip(AXES[:n], map(float, self.column_norms))),
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "small_mode": [float(v) for v in self.eigenvectors[:, -1]],
            "small_mode_axis": self.small_mode_axis,
            "condition_number": None if math.isinf(self.condition_number) else self.condition_number,
            "rank": self.rank,
            "suggested_s": self.suggested_s,
            "needs_regularization": self.needs_regularization,
            "mu2": {"k0": self.mu2_k0, "k1": self.mu2_k1},
            "warnings": list(self.warnings),
        }


def ill_condition_report(anchors: AnchorSet, condition_target: float = 1e3) -> IllConditionReport:
    """Column norms and spectrum of the anchor geometry, plus suggested parameters.

    ``suggested_s`` equal to the dimension means no eigenvalue needs lifting.
    """
    a = design_matrix(anchors)
    spec = eig_sym(a.T @ a)
    lam = spec.eigenvalues
    n = lam.shape[0]
    rank = spec.rank()
    warnings = []
    if rank < n:
        warnings.append(f"design matrix has rank {rank} < {n}; anchors are degenerate (e.g. coplanar)")
        kappa = math.inf
    else:
        kappa = float(lam[0] / lam[-1])
    small = spec.eigenvectors[:, -1]
    axis = AXES[int(np.argmax(np.abs(small)))] if n <= 3 else str(int(np.argmax(np.abs(small))))
    mu2_k0 = mu2_k1 = None
    if rank == n and n >= 2:
        mu2_k0 = optimal_mu2_k0(lam[0], lam[-2], lam[-1])
        mu2_k1 = optimal_mu2_k1(lam[0], lam[-2], lam[-1])
    s = select_s(spec, condition_target) if lam[0] > NUMERIC_ZERO else n
    return IllConditionReport(
        column_norms=np.linalg.norm(a, axis=0),
        eigenvalues=lam,
        eigenvectors=spec.eigenvectors,
        condition_number=kappa,
        rank=rank,
        suggested_s=s,
        small_mode_axis=axis,
        mu2_k0=mu2_k0,
        mu2_k1=mu2_k1,
        warnings=warnings,
    )
