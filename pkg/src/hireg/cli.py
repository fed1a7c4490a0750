"""Command-line interface: ``hireg simulate | locate | analyze | sweep``.

Exit codes: 0 on success, 1 when a run finished but an invariant check failed,
2 for unreadable or malformed input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bias_correction import DEFAULT_WINDOW, SlidingWindow
from .errors import HiregError
from .localization import AnchorSet, RangeMeasurement, build_system, design_matrix, ill_condition_report
from .regularization import Method, RegularizationPlan, loss_relaxed, optimal_mu2_k0, optimal_mu2_k1, resolve_plan, stationary_mu2_k0
from .scenarios import (
    DEFAULT_BOX,
    DEFAULT_ROUTE,
    ScenarioReport,
    random_points_scenario,
    route_scenario,
    run_scenario,
    stationary_scenario,
)
from .solvers import solve, solve_ls
from .spectral import eig_sym

__all__ = ["main", "build_parser", "ConfigError", "load_config", "plan_from_dict", "format_float"]

log = logging.getLogger("hireg")

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_INPUT = 2

# below this condition number the anchor geometry is treated as well-posed
WELL_CONDITIONED = 10.0

PLAN_KEYS = {"method", "k", "s", "mu2", "omega", "form", "truncate", "name", "condition_target"}
CONFIG_KEYS = {"anchors", "scenario", "noise_sigma", "seed", "seeds", "trials", "methods", "window", "sweep"}


class ConfigError(Exception):
    """Malformed input; the message names the offending line when known."""


def format_float(v) -> str:
    """Shortest round-trip decimal form, so identical runs give identical bytes."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _threads() -> int:
    raw = os.environ.get("HIREG_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


# ---------------------------------------------------------------- config


def _key_line(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


class _Config:
    def __init__(self, data: dict, text: str, path: Path):
        self.data = data
        self.text = text
        self.path = path

    def error(self, key: str, msg: str) -> ConfigError:
        line = _key_line(self.text, key)
        where = f"{self.path}:{line}" if line else str(self.path)
        return ConfigError(f"{where}: {key}: {msg}")

    def get(self, key, default=None):
        return self.data.get(key, default)


def load_config(path) -> _Config:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    cfg = _Config(data, text, path)
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise cfg.error(unknown[0], f"unknown config key (allowed: {', '.join(sorted(CONFIG_KEYS))})")
    return cfg


def plan_from_dict(d: dict) -> RegularizationPlan:
    unknown = set(d) - PLAN_KEYS
    if unknown:
        raise ValueError(f"unknown method keys {sorted(unknown)}")
    kw = dict(d)
    if "method" in kw:
        kw["method"] = Method(str(kw["method"]).lower())
    return RegularizationPlan(**kw)


def _anchors_from(cfg: _Config) -> AnchorSet:
    raw = cfg.get("anchors")
    if raw is None:
        raise cfg.error("anchors", "missing")
    try:
        if isinstance(raw, str):
            return read_anchors(cfg.path.parent / raw)
        return AnchorSet(np.asarray(raw, dtype=float))
    except (ValueError, TypeError) as exc:
        raise cfg.error("anchors", str(exc)) from exc


def _plans_from(cfg: _Config) -> list[RegularizationPlan]:
    raw = cfg.get("methods", [{"method": "ls"}, {"method": "hr", "k": 1}])
    if not isinstance(raw, list) or not raw:
        raise cfg.error("methods", "must be a non-empty list")
    plans = []
    for item in raw:
        try:
            plans.append(plan_from_dict(item))
        except (ValueError, TypeError) as exc:
            raise cfg.error("methods", str(exc)) from exc
    return plans


def _seeds_from(cfg: _Config) -> list[int]:
    if "seeds" in cfg.data:
        seeds = cfg.get("seeds")
        if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
            raise cfg.error("seeds", "must be a non-empty list of integers")
        return seeds
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int):
        raise cfg.error("seed", "must be an integer")
    return [seed]


def _scenario_factory(cfg: _Config, anchors: AnchorSet, sigma: float, trials: int):
    sc = cfg.get("scenario", {"kind": "route"})
    if not isinstance(sc, dict):
        raise cfg.error("scenario", "must be an object")
    kind = sc.get("kind", "route")

    def build(seed: int):
        if kind == "route":
            s = route_scenario(anchors, sc.get("waypoints", DEFAULT_ROUTE), float(sc.get("step", 0.01)), sigma, seed)
        elif kind == "random_points":
            s = random_points_scenario(sc.get("bounds", DEFAULT_BOX), int(sc.get("count", 1000)), anchors, sigma, seed)
        elif kind == "stationary":
            s = stationary_scenario(anchors, sc["point"], int(sc.get("steps", 2000)), sigma, seed)
        else:
            raise ValueError(f"unknown scenario kind {kind!r} (route, random_points, stationary)")
        if trials != 1:
            s = replace(s, trials=trials)
        return s

    try:
        build(0)
    except (ValueError, TypeError, KeyError) as exc:
        raise cfg.error("scenario", str(exc)) from exc
    return build


# ---------------------------------------------------------------- files


def read_anchors(path) -> AnchorSet:
    """Anchor CSV with rows ``x,y,z``; an optional header line is skipped."""
    rows = []
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read anchors: {exc.strerror}") from exc
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or row[0].lstrip().startswith("#"):
            continue
        if lineno == 1 and not _is_number(row[0]):
            continue
        try:
            rows.append([float(v) for v in row])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
        if len(rows[-1]) != len(rows[0]):
            raise ConfigError(f"{path}:{lineno}: expected {len(rows[0])} coordinates, got {len(rows[-1])}")
    if not rows:
        raise ConfigError(f"{path}: no anchors")
    try:
        return AnchorSet(np.asarray(rows))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def read_measurements(path, count: int) -> list[RangeMeasurement | tuple[int, str]]:
    """Measurement CSV: header ``tick,d1,...``, then numeric rows.

    Rows that fail validation come back as ``(tick, message)`` so the caller
    can emit them as flagged output rows.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read measurements: {exc.strerror}") from exc
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["tick"] + [f"d{i}" for i in range(1, count + 1)]:
        raise ConfigError(f"{path}:1: header must be tick,d1,...,d{count}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != count + 1:
            raise ConfigError(f"{path}:{lineno}: expected {count + 1} fields, got {len(row)}")
        try:
            tick = int(row[0])
            d = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
        try:
            out.append(RangeMeasurement(np.asarray(d), tick))
        except ValueError as exc:
            out.append((tick, str(exc)))
    return out


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _csv_text(header, rows, comments=()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------- commands


def _override_plans(args, plans: list[RegularizationPlan]) -> list[RegularizationPlan]:
    if args.method is None:
        if any(v is not None for v in (args.k, args.mu2, args.omega)):
            raise ConfigError("--k, --mu2 and --omega need --method")
        return plans
    return [_plan_from_args(args)]


def _plan_from_args(args) -> RegularizationPlan:
    kw = {"method": Method(args.method)}
    if args.k is not None:
        kw["k"] = args.k
    if args.mu2 is not None:
        kw["mu2"] = _parse_mu2(args.mu2)
    if args.omega is not None:
        kw["omega"] = args.omega if args.omega in ("min", "max") else float(args.omega)
    try:
        return RegularizationPlan(**kw)
    except HiregError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_mu2(raw: str):
    if raw in ("auto", "lambda_s"):
        return raw
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"--mu2 must be a number, 'auto' or 'lambda_s', got {raw!r}") from exc


def _report_problems(report: ScenarioReport) -> list[str]:
    problems = []
    for name, m in report.methods.items():
        if m.estimates.shape[0] == 0:
            problems.append(f"{name}: every point was skipped")
            continue
        values = [m.total_rmse, *m.rmse_axes, m.mean_error, m.max_error, m.min_error]
        if not all(math.isfinite(v) and v >= 0 for v in values):
            problems.append(f"{name}: non-finite or negative metric")
        elif m.mean_error > m.max_error * (1 + 1e-12):
            problems.append(f"{name}: mean error exceeds max error")
    return problems


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    anchors = _anchors_from(cfg)
    plans = _override_plans(args, _plans_from(cfg))
    seeds = [args.seed] if args.seed is not None else _seeds_from(cfg)
    sigma = args.sigma if args.sigma is not None else cfg.get("noise_sigma", 0.1)
    window = args.window if args.window is not None else cfg.get("window", DEFAULT_WINDOW)
    trials = cfg.get("trials", 1)
    if not isinstance(sigma, (int, float)) or sigma < 0:
        raise cfg.error("noise_sigma", "must be a non-negative number")
    if not isinstance(window, int) or window < 0:
        raise cfg.error("window", "must be a non-negative integer")
    if not isinstance(trials, int) or trials < 1:
        raise cfg.error("trials", "must be a positive integer")
    build = _scenario_factory(cfg, anchors, float(sigma), trials)

    def one(seed: int) -> ScenarioReport:
        return run_scenario(build(seed), plans, window)

    try:
        with ThreadPoolExecutor(max_workers=min(_threads(), len(seeds))) as pool:
            reports = list(pool.map(one, seeds))
    except HiregError as exc:
        raise ConfigError(f"{cfg.path}: {exc}") from exc

    rows = [row for r in reports for row in r.rows()]
    out_dir = Path(args.out) if args.out else cfg.path.parent
    stem = cfg.path.stem
    _write(out_dir / f"{stem}_report.csv", _csv_text(ScenarioReport.CSV_HEADER, rows))
    effective = dict(cfg.data, seeds=seeds, noise_sigma=sigma, window=window)
    doc = {"config": effective, "config_text": cfg.text, "reports": [r.to_dict() for r in reports]}
    _write(out_dir / f"{stem}_report.json", json.dumps(doc, indent=2, allow_nan=True) + "\n")

    problems = [f"seed {r.scenario['seed']}: {p}" for r in reports for p in _report_problems(r)]
    for p in problems:
        print(f"invariant violation: {p}", file=sys.stderr)
    return EXIT_INVARIANT if problems else EXIT_OK


def cmd_locate(args) -> int:
    anchors = read_anchors(args.anchors)
    measurements = read_measurements(args.measurements, anchors.count)
    plan = _plan_from_args(args) if args.method else RegularizationPlan(Method.HR, k=1)
    window_l = DEFAULT_WINDOW if args.window is None else args.window
    a = design_matrix(anchors)
    spec = eig_sym(a.T @ a)
    try:
        plan = resolve_plan(plan, spec)
    except HiregError as exc:
        raise ConfigError(f"cannot configure {plan.label}: {exc}") from exc
    windowed = plan.method is Method.HR and window_l > 0
    window = SlidingWindow(window_l, anchors.dim) if windowed else None
    label = plan.method.value

    rows = []
    failures = 0
    for item in measurements:
        if isinstance(item, tuple):
            tick, msg = item
            rows.append((tick, math.nan, math.nan, math.nan, label, "error"))
            failures += 1
            log.warning("tick %d: %s", tick, msg)
            continue
        try:
            system = build_system(anchors, item)
            xhat = solve(system, plan, spec).estimate
        except HiregError as exc:
            rows.append((item.tick, math.nan, math.nan, math.nan, label, "error"))
            failures += 1
            log.warning("tick %d: %s", item.tick, exc)
            continue
        flag = 0
        if window is not None:
            try:
                window.push(xhat - solve_ls(system, spec).estimate, item.tick)
            except HiregError as exc:
                log.warning("tick %d: LS failed, window not updated: %s", item.tick, exc)
            if window.full:
                xhat = window.correct(xhat)
                flag = 1
        rows.append((item.tick, *map(float, xhat), label, flag))

    comments = [
        f"method={label} k={plan.k} mu2={format_float(plan.mu2)} omega={format_float(plan.omega)} window={window_l}"
    ]
    text = _csv_text(("tick", "x", "y", "z")[: anchors.dim + 1] + ("method", "corrected"), rows, comments)
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    if failures:
        print(f"{failures} measurement(s) could not be solved", file=sys.stderr)
    return EXIT_OK


def cmd_analyze(args) -> int:
    anchors = read_anchors(args.anchors)
    report = ill_condition_report(anchors, args.condition_target)
    doc = report.to_dict()
    if report.warnings:
        doc["summary"] = "anchors are degenerate"
    elif report.condition_number <= WELL_CONDITIONED:
        doc["summary"] = "no regularization needed"
    else:
        doc["summary"] = (
            f"{report.small_mode_axis}-mode is weakly observed "
            f"(condition number {report.condition_number:.4g}); regularization recommended"
        )
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def _sweep_grid(cfg: _Config, spec) -> tuple[list[int], np.ndarray]:
    sw = cfg.get("sweep")
    if not isinstance(sw, dict):
        raise cfg.error("sweep", "missing or not an object")
    unknown = sorted(set(sw) - {"k", "mu2"})
    if unknown:
        raise cfg.error(unknown[0], "unknown sweep key (expected 'k' and 'mu2')")
    ks = sw.get("k", [0, 1])
    if not isinstance(ks, list) or not ks or not all(isinstance(k, int) and k >= 0 for k in ks):
        raise cfg.error("k", "must be a non-empty list of non-negative integers")
    lam = spec.eigenvalues
    lo, hi = float(lam[-1]), float(lam[-2])
    raw = sw.get("mu2", {"num": 101})
    if isinstance(raw, list):
        grid = np.asarray(raw, dtype=float)
    elif isinstance(raw, dict) and isinstance(raw.get("num"), int) and raw["num"] >= 1:
        grid = np.linspace(lo, hi, raw["num"]) if raw["num"] > 1 else np.array([lo])
    else:
        raise cfg.error("mu2", "must be a list of values or {\"num\": count}")
    if grid.size == 0:
        raise cfg.error("mu2", "empty grid")
    if np.any(grid < lo * (1 - 1e-12)) or np.any(grid > hi * (1 + 1e-12)):
        raise cfg.error("mu2", f"grid leaves the relaxation interval [{lo!r}, {hi!r}]")
    return ks, np.sort(np.clip(grid, lo, hi))


def _convexity_violations(mu2: np.ndarray, loss: np.ndarray) -> int:
    if mu2.size < 3:
        return 0
    slopes = np.diff(loss) / np.maximum(np.diff(mu2), 1e-300)
    scale = max(1.0, float(np.max(np.abs(slopes))))
    return int(np.sum(np.diff(slopes) < -1e-9 * scale))


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    anchors = _anchors_from(cfg)
    a = design_matrix(anchors)
    spec = eig_sym(a.T @ a)
    lam = spec.eigenvalues
    if lam.shape[0] < 2 or lam[-1] <= 0:
        raise ConfigError(f"{cfg.path}: sweep needs a positive definite normal matrix of size >= 2")
    ks, grid = _sweep_grid(cfg, spec)
    with_rmse = "scenario" in cfg.data
    seeds = [args.seed] if args.seed is not None else _seeds_from(cfg)
    sigma = args.sigma if args.sigma is not None else cfg.get("noise_sigma", 0.1)
    window = args.window if args.window is not None else cfg.get("window", DEFAULT_WINDOW)
    build = _scenario_factory(cfg, anchors, float(sigma), 1) if with_rmse else None

    def rmse_for(k: int, mu2: float) -> float:
        plan = RegularizationPlan(Method.HR, k=k, mu2=float(mu2), name="HR")
        totals = [run_scenario(build(seed), [plan], window, include_raw=False)["HR"].total_rmse for seed in seeds]
        return float(np.mean(totals))

    jobs = [(k, float(m)) for k in ks for m in grid]
    if with_rmse:
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            rmses = list(pool.map(lambda job: rmse_for(*job), jobs))
    else:
        rmses = [""] * len(jobs)
    losses = [loss_relaxed(m, k, float(lam[0]), float(lam[-1])) for k, m in jobs]
    rows = [(k, m, loss, r) for (k, m), loss, r in zip(jobs, losses, rmses)]

    comments = []
    problems = []
    losses_arr = np.asarray(losses)
    for k in ks:
        sel = np.array([jk == k for jk, _ in jobs])
        best = float(grid[int(np.argmin(losses_arr[sel]))])
        line = f"k={k} grid_argmin={format_float(best)}"
        if k == 0:
            line += f" closed_form={format_float(optimal_mu2_k0(lam[0], lam[-2], lam[-1]))}"
            line += f" stationary={format_float(stationary_mu2_k0(lam[0], lam[-2], lam[-1]))}"
        elif k == 1:
            line += f" closed_form={format_float(optimal_mu2_k1(lam[0], lam[-2], lam[-1]))}"
        comments.append(line)
        bad = _convexity_violations(grid, losses_arr[sel])
        if bad:
            problems.append(f"k={k}: loss is not convex along mu2 at {bad} grid point(s)")
    text = _csv_text(("k", "mu2", "loss", "rmse"), rows, comments)
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    for p in problems:
        print(f"invariant violation: {p}", file=sys.stderr)
    return EXIT_INVARIANT if problems else EXIT_OK


# ---------------------------------------------------------------- entry point


def _add_method_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=[m.value for m in Method], help="estimator")
    p.add_argument("--k", type=int, help="series order")
    p.add_argument("--mu2", help="regularization level: a number, 'auto' or 'lambda_s'")
    p.add_argument("--omega", help="adjustment parameter: a number, 'min' or 'max'")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="run a single seed instead of the configured ones")
    p.add_argument("--window", type=int, help="sliding-window length (0 disables bias correction)")
    p.add_argument("--sigma", type=float, help="range noise standard deviation in metres")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hireg", description="Regularized range-based localization toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-point diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run configured scenarios and write CSV and JSON reports")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory for <config>_report.csv/.json (default: next to the config)")
    _add_run_flags(p)
    _add_method_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("locate", help="estimate positions from a measurement file")
    p.add_argument("anchors", help="anchor CSV, rows x,y,z; the last row is the reference")
    p.add_argument("measurements", help="measurement CSV with header tick,d1,...")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.add_argument("--window", type=int, help="sliding-window length (0 disables bias correction)")
    _add_method_flags(p)
    p.set_defaults(func=cmd_locate)

    p = sub.add_parser("analyze", help="report the conditioning of an anchor geometry")
    p.add_argument("anchors")
    p.add_argument("--out", help="output JSON (default: stdout)")
    p.add_argument("--condition-target", type=float, default=1e3)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="tabulate the a-priori loss over a grid of mu2 values")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output CSV (default: stdout)")
    _add_run_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
