"""Simulated localization scenarios, error metrics and trajectory alignment."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .bias_correction import DEFAULT_WINDOW, SlidingWindow
from .errors import DimensionError, HiregError
from .localization import AnchorSet, RangeMeasurement, build_system, design_matrix, true_ranges
from .regularization import Method, RegularizationPlan, resolve_plan
from .solvers import solve, solve_ls
from .spectral import eig_sym

__all__ = [
    "DEFAULT_BOX",
    "DEFAULT_ROUTE",
    "DESK_ANCHORS",
    "Scenario",
    "MethodMetrics",
    "ScenarioReport",
    "random_points_scenario",
    "route_scenario",
    "stationary_scenario",
    "sample_route",
    "run_scenario",
    "rmse",
    "error_stats",
    "umeyama_align",
]

log = logging.getLogger(__name__)

DEFAULT_BOX = ((0.0, 0.0, 0.0), (6.0, 4.0, 2.5))

# ceiling-mounted anchors whose heights differ by at most 0.5 m
DESK_ANCHORS = ((0.0, 0.0, 2.2), (6.0, 0.0, 2.5), (6.0, 4.0, 2.0), (0.0, 4.0, 2.3))

# a loop on the floor, a ramp up 0.5 m, and a short landing
DEFAULT_ROUTE = (
    (1.0, 1.0, 0.0),
    (5.0, 1.0, 0.0),
    (5.0, 3.0, 0.0),
    (3.5, 3.0, 0.0),
    (1.0, 3.0, 0.5),
    (1.0, 2.0, 0.5),
)


@dataclass(frozen=True)
class Scenario:
    """Ground-truth positions plus the noise model used to simulate ranges.

    ``trials`` independent passes over ``truth`` are simulated, each with
    fresh noise and fresh sliding windows.
    """

    anchors: AnchorSet
    truth: np.ndarray
    noise_sigma: float
    seed: int
    trials: int = 1
    kind: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.array(self.truth, dtype=float)
        if t.ndim != 2 or t.shape[0] == 0:
            raise ValueError("scenario needs a non-empty list of truth points")
        if t.shape[1] != self.anchors.dim:
            raise DimensionError(f"truth points are {t.shape[1]}-D but anchors are {self.anchors.dim}-D")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be non-negative, got {self.noise_sigma}")
        if self.trials < 1:
            raise ValueError(f"trials must be positive, got {self.trials}")
        t.setflags(write=False)
        object.__setattr__(self, "truth", t)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "anchors": self.anchors.positions.tolist(),
            "reference": self.anchors.reference,
            "points": int(self.truth.shape[0]),
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "trials": self.trials,
            **self.meta,
        }


def random_points_scenario(bounds, count: int, anchors: AnchorSet, sigma: float, seed: int) -> Scenario:
    """``count`` positions drawn uniformly from the box ``bounds = (low, high)``."""
    low, high = (np.asarray(v, dtype=float) for v in bounds)
    if low.shape != (anchors.dim,) or high.shape != (anchors.dim,):
        raise DimensionError("box corners must match the anchor dimension")
    if np.any(high <= low):
        raise ValueError(f"degenerate box {low.tolist()} .. {high.tolist()}")
    if count < 1:
        raise ValueError("random-points scenario needs count >= 1")
    rng = np.random.default_rng([seed, 0])
    truth = rng.uniform(low, high, size=(count, anchors.dim))
    meta = {"bounds": [low.tolist(), high.tolist()]}
    return Scenario(anchors, truth, sigma, seed, kind="random_points", meta=meta)


def sample_route(waypoints, step: float) -> np.ndarray:
    """Points every ``step`` metres of arc length along a polyline, starting at its first vertex."""
    w = np.asarray(waypoints, dtype=float)
    if w.ndim != 2 or w.shape[0] < 2:
        raise ValueError("a route needs at least two waypoints")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    seg = np.linalg.norm(np.diff(w, axis=0), axis=1)
    total = float(seg.sum())
    if total <= 0:
        raise ValueError("route has zero length")
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    n = int(math.floor(total / step + 1e-9)) + 1
    s = np.arange(n) * step
    return np.stack([np.interp(s, cum, w[:, j]) for j in range(w.shape[1])], axis=1)


def route_scenario(
    anchors: AnchorSet,
    waypoints=DEFAULT_ROUTE,
    step: float = 0.01,
    sigma: float = 0.1,
    seed: int = 0,
) -> Scenario:
    truth = sample_route(waypoints, step)
    meta = {"waypoints": np.asarray(waypoints, dtype=float).tolist(), "step": step}
    return Scenario(anchors, truth, sigma, seed, kind="route", meta=meta)


def stationary_scenario(anchors: AnchorSet, point, steps: int, sigma: float = 0.1, seed: int = 0) -> Scenario:
    """A robot standing still at ``point`` for ``steps`` measurements."""
    if steps < 1:
        raise ValueError(f"steps must be positive, got {steps}")
    p = np.asarray(point, dtype=float)
    truth = np.tile(p, (int(steps), 1))
    return Scenario(anchors, truth, sigma, seed, kind="stationary", meta={"point": p.tolist(), "steps": int(steps)})


def rmse(estimates, truth) -> tuple[float, np.ndarray]:
    """Total RMSE ``sqrt(mean |e_i|^2)`` and the per-axis RMSE."""
    e = np.asarray(estimates, dtype=float)
    t = np.asarray(truth, dtype=float)
    if e.shape != t.shape:
        raise DimensionError(f"estimates {e.shape} and truth {t.shape} differ in shape")
    if e.ndim != 2 or e.shape[0] == 0:
        raise ValueError("rmse needs at least one point")
    d = e - t
    return float(np.sqrt(np.mean(np.sum(d * d, axis=1)))), np.sqrt(np.mean(d * d, axis=0))


def error_stats(estimates, truth) -> tuple[float, float, float]:
    """Mean, max and min Euclidean error."""
    norms = np.linalg.norm(np.asarray(estimates, dtype=float) - np.asarray(truth, dtype=float), axis=1)
    return float(norms.mean()), float(norms.max()), float(norms.min())


@dataclass(frozen=True)
class MethodMetrics:
    name: str
    estimates: np.ndarray
    truth: np.ndarray
    total_rmse: float
    rmse_axes: np.ndarray
    mean_error: float
    max_error: float
    min_error: float
    skips: int
    corrected: bool = False

    @classmethod
    def from_estimates(cls, name, estimates, truth, skips=0, corrected=False) -> MethodMetrics:
        estimates = np.asarray(estimates, dtype=float).reshape(-1, truth.shape[1])
        if estimates.shape[0] == 0:
            nan = math.nan
            return cls(name, estimates, truth, nan, np.full(truth.shape[1], nan), nan, nan, nan, skips, corrected)
        total, axes = rmse(estimates, truth)
        mean, mx, mn = error_stats(estimates, truth)
        return cls(name, estimates, truth, total, axes, mean, mx, mn, skips, corrected)

    @property
    def rmse_x(self) -> float:
        return float(self.rmse_axes[0])

    @property
    def rmse_y(self) -> float:
        return float(self.rmse_axes[1])

    @property
    def rmse_z(self) -> float:
        return float(self.rmse_axes[2])

    def mean_signed_error(self) -> np.ndarray:
        return np.mean(self.estimates - self.truth, axis=0)


@dataclass(frozen=True)
class ScenarioReport:
    scenario: dict
    window: int
    methods: dict[str, MethodMetrics]

    CSV_HEADER = ("method", "total_rmse", "rmse_x", "rmse_y", "rmse_z", "mean", "max", "min", "skips", "seed")

    def __getitem__(self, name: str) -> MethodMetrics:
        return self.methods[name]

    def rows(self) -> list[tuple]:
        seed = self.scenario["seed"]
        out = []
        for m in self.methods.values():
            axes = [float(v) for v in m.rmse_axes]
            axes += [math.nan] * (3 - len(axes))
            out.append((m.name, m.total_rmse, *axes[:3], m.mean_error, m.max_error, m.min_error, m.skips, seed))
        return out

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "window": self.window,
            "methods": {
                name: {
                    "total_rmse": m.total_rmse,
                    "rmse_axes": [float(v) for v in m.rmse_axes],
                    "mean": m.mean_error,
                    "max": m.max_error,
                    "min": m.min_error,
                    "skips": m.skips,
                    "bias_corrected": m.corrected,
                }
                for name, m in self.methods.items()
            },
        }


def run_scenario(
    s: Scenario,
    plans: list[RegularizationPlan],
    window_l: int = DEFAULT_WINDOW,
    include_raw: bool = True,
) -> ScenarioReport:
    """Simulate noisy ranges for every truth point and estimate with every plan.

    Plans whose method is HR are bias-corrected with one sliding window each
    (``window_l = 0`` disables correction).  With ``include_raw`` their
    uncorrected estimates are reported too, under ``"<label>_raw"``.  An LS row
    is always present.  Points where a solver fails are skipped and counted.
    """
    anchors = s.anchors
    a = design_matrix(anchors)
    spec = eig_sym(a.T @ a)
    resolved = [resolve_plan(p, spec) for p in plans]
    labels = [p.label for p in resolved]
    if len(set(labels)) != len(labels):
        raise ValueError(f"plan labels must be unique, got {labels}")
    ls_label = next((p.label for p in resolved if p.method is Method.LS), "LS")
    windowed = {p.label for p in resolved if p.method is Method.HR and window_l > 0}

    est: dict[str, list] = {ls_label: []}
    for p in resolved:
        est[p.label] = []
    for name in windowed:
        if include_raw:
            est[name + "_raw"] = []
    truth_of = {name: [] for name in est}
    skips = dict.fromkeys(est, 0)

    rng = np.random.default_rng(s.seed)
    for _trial in range(s.trials):
        windows = {name: SlidingWindow(window_l, anchors.dim) for name in windowed}
        for tick, x in enumerate(s.truth):
            d = true_ranges(anchors, x) + rng.normal(0.0, s.noise_sigma, anchors.count)
            try:
                system = build_system(anchors, RangeMeasurement(d, tick))
            except (HiregError, ValueError) as exc:
                log.info("tick %d: measurement rejected: %s", tick, exc)
                for name in skips:
                    skips[name] += 1
                continue
            try:
                ls = solve_ls(system, spec).estimate
            except HiregError as exc:
                log.info("tick %d: LS failed, window not updated: %s", tick, exc)
                ls = None
            if ls is None:
                skips[ls_label] += 1
            else:
                est[ls_label].append(ls)
                truth_of[ls_label].append(x)
            for p in resolved:
                if p.method is Method.LS:
                    continue
                try:
                    xhat = solve(system, p, spec).estimate
                except HiregError as exc:
                    log.info("tick %d: %s failed: %s", tick, p.label, exc)
                    skips[p.label] += 1
                    if p.label + "_raw" in skips:
                        skips[p.label + "_raw"] += 1
                    continue
                if p.label in windows:
                    w = windows[p.label]
                    if ls is not None:
                        w.push(xhat - ls, tick)
                    if include_raw:
                        est[p.label + "_raw"].append(xhat)
                        truth_of[p.label + "_raw"].append(x)
                    xhat = w.correct(xhat)
                est[p.label].append(xhat)
                truth_of[p.label].append(x)

    dim = anchors.dim
    methods = {}
    for name, values in est.items():
        t = np.asarray(truth_of[name], dtype=float).reshape(-1, dim)
        methods[name] = MethodMetrics.from_estimates(name, values, t, skips[name], corrected=name in windowed)
    total_skips = sum(skips.values())
    if total_skips:
        log.warning("scenario seed %d: %d skipped solves %s", s.seed, total_skips, skips)
    return ScenarioReport(scenario=s.describe(), window=window_l, methods=methods)


def umeyama_align(source, target, with_scale: bool = False):
    """Least-squares rigid (or similarity) transform mapping ``source`` onto ``target``.

    Returns
    -------
    rotation : (d, d) ndarray
    translation : (d,) ndarray
    scale : float
        Fixed at 1 unless ``with_scale``.
    aligned : (N, d) ndarray
        ``scale * rotation @ source_i + translation`` for every point.
    """
    src = np.asarray(source, dtype=float)
    dst = np.asarray(target, dtype=float)
    if src.shape != dst.shape or src.ndim != 2:
        raise DimensionError(f"point sets differ in shape: {src.shape} vs {dst.shape}")
    n, d = src.shape
    if n < 3:
        raise ValueError("alignment needs at least three points")
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    xs = src - mu_s
    xd = dst - mu_d
    for cloud, label in ((xs, "source"), (xd, "target")):
        sv = np.linalg.svd(cloud, compute_uv=False)
        if sv.size < 2 or sv[1] <= 1e-9 * max(sv[0], 1e-300):
            raise ValueError(f"{label} points are collinear or coincident; rotation is not determined")
    cov = xd.T @ xs / n
    u, sig, vt = np.linalg.svd(cov)
    sign = np.ones(d)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        sign[-1] = -1.0
    rot = (u * sign) @ vt
    if with_scale:
        var_s = np.sum(xs * xs) / n
        scale = float(np.sum(sig * sign) / var_s)
    else:
        scale = 1.0
    trans = mu_d - scale * rot @ mu_s
    aligned = scale * src @ rot.T + trans
    return rot, trans, scale, aligned
