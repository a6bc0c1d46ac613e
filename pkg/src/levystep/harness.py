"""Monte-Carlo studies of strong convergence and truncation error.

Every study couples all resolutions pathwise: per path one DrivingPath is
built at the finest level and each step-size ladder entry (or each truncation
level) is evaluated on slices of that same path against the same reference,
so the reported error is pure discretization (or truncation) error with no
resampling noise.  Per-path RNG streams derive from (master seed, path index)
through numpy's SeedSequence.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .common import ConfigError, Region
from .levy import LevyModel, activate, model_from_config, truncate
from .oracle import OracleConfig, OracleKind, exact_solution, reference_solution
from .path import DrivingPath, build_path
from .schemes import (DEFAULT_I32, I32Compensator, LinearCoefficients, Scheme,
                      run_scheme, step_factor)

SUP_NOTE = ("strong error sup taken over grid points and jump times; "
            "the scheme is evaluated at interior jump times through "
            "partial-interval slices")
TRUNC_SUP_NOTE = "truncation difference sup taken over the shared coarse grid"


# -- configuration -----------------------------------------------------------

_TOP_KEYS = {"model", "b", "sigma", "F", "G", "y0", "T", "scheme",
             "ladder_levels", "finest_level", "paths", "seed", "epsilons",
             "truncation_level", "trajectory_level", "i32_compensator",
             "oracle"}


@dataclass(frozen=True)
class StudyConfig:
    model: LevyModel
    epsilon: float | None
    drift: float
    diffusion: float
    small_jump: float
    tail_jump: float
    y0: float
    horizon: float
    scheme: Scheme
    ladder_levels: tuple[int, ...]
    finest_level: int
    paths: int
    seed: int
    epsilons: tuple[float, ...] | None = None
    truncation_level: int | None = None
    trajectory_level: int | None = None
    i32_compensator: I32Compensator = DEFAULT_I32
    oracle: OracleConfig = field(default_factory=OracleConfig)
    source: dict = field(default_factory=dict, compare=False)

    def config_hash(self) -> str:
        blob = json.dumps(self.source, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def coefficients_for(self, active_model) -> LinearCoefficients:
        return LinearCoefficients.for_model(self.drift, self.diffusion,
                                            self.small_jump, self.tail_jump,
                                            active_model)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def config_from_dict(obj: dict) -> StudyConfig:
    _require(isinstance(obj, dict), "config must be a JSON object")
    extra = set(obj) - _TOP_KEYS
    _require(not extra, f"unknown config keys: {sorted(extra)}")
    _require("model" in obj, "config needs a 'model' section")
    model, eps = model_from_config(obj["model"])

    def num(key, default=None):
        val = obj.get(key, default)
        _require(val is not None, f"config key '{key}' is required")
        try:
            return float(val)
        except (TypeError, ValueError):
            raise ConfigError(f"config key '{key}' must be a number, got {val!r}") from None

    horizon = num("T", 1.0)
    _require(horizon > 0, "T must be positive")
    scheme_name = obj.get("scheme", "euler")
    try:
        scheme = Scheme(scheme_name)
    except ValueError:
        raise ConfigError(f"unknown scheme {scheme_name!r}") from None

    ladder = obj.get("ladder_levels", [])
    _require(isinstance(ladder, (list, tuple)), "ladder_levels must be a list")
    levels = tuple(int(x) for x in ladder)
    _require(all(lv >= 0 for lv in levels), "ladder levels must be nonnegative")
    _require(list(levels) == sorted(set(levels)), "ladder levels must be strictly increasing")

    finest = int(obj.get("finest_level", (max(levels) + 2) if levels else 8))
    if levels:
        _require(finest >= max(levels) + 2,
                 "finest_level must be at least two levels finer than the ladder")

    paths = int(obj.get("paths", 0))
    _require(paths >= 2, "paths must be at least 2")
    _require("seed" in obj, "config key 'seed' is required")
    seed = int(obj["seed"])

    epsilons = obj.get("epsilons")
    if epsilons is not None:
        _require(isinstance(epsilons, (list, tuple)) and epsilons,
                 "epsilons must be a nonempty list")
        epsilons = tuple(sorted({float(e) for e in epsilons}, reverse=True))
        _require(all(0 < e < 1 for e in epsilons), "epsilons must lie in (0, 1)")

    trunc_level = obj.get("truncation_level")
    if trunc_level is None and levels:
        trunc_level = max(levels)
    if trunc_level is not None:
        trunc_level = int(trunc_level)
        _require(0 <= trunc_level <= finest, "truncation_level must not exceed finest_level")

    traj_level = obj.get("trajectory_level")
    if traj_level is None and levels:
        traj_level = max(levels)
    if traj_level is not None:
        traj_level = int(traj_level)
        _require(0 <= traj_level <= finest, "trajectory_level must not exceed finest_level")

    i32_name = obj.get("i32_compensator", DEFAULT_I32.value)
    try:
        i32 = I32Compensator(i32_name)
    except ValueError:
        raise ConfigError(f"unknown i32_compensator {i32_name!r}") from None

    oracle_obj = obj.get("oracle") or {}
    _require(isinstance(oracle_obj, dict), "oracle must be an object")
    kind_name = oracle_obj.get("kind", OracleKind.EXACT_LINEAR.value)
    try:
        kind = OracleKind(kind_name)
    except ValueError:
        raise ConfigError(f"unknown oracle kind {kind_name!r}") from None
    try:
        oracle = OracleConfig(kind=kind, level=oracle_obj.get("level"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    return StudyConfig(
        model=model, epsilon=eps,
        drift=num("b"), diffusion=num("sigma"),
        small_jump=num("F"), tail_jump=num("G"),
        y0=num("y0", 1.0), horizon=horizon, scheme=scheme,
        ladder_levels=levels, finest_level=finest, paths=paths, seed=seed,
        epsilons=epsilons, truncation_level=trunc_level,
        trajectory_level=traj_level, i32_compensator=i32, oracle=oracle,
        source=obj,
    )


def config_from_json(path) -> StudyConfig:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    return config_from_dict(obj)


def path_rng(master_seed: int, path_index: int) -> np.random.Generator:
    """Independent per-path stream derived from (master seed, path index)."""
    return np.random.default_rng(np.random.SeedSequence((master_seed, path_index)))


# -- slope fitting -----------------------------------------------------------

def fit_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of y against x plus its standard error (normal
    theory; se is nan with fewer than three points)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc = x - x.mean()
    sxx = float(np.dot(xc, xc))
    slope = float(np.dot(xc, y) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    if x.size < 3:
        return slope, math.nan
    resid = y - (slope * x + intercept)
    s2 = float(np.dot(resid, resid)) / (x.size - 2)
    return slope, math.sqrt(s2 / sxx)


# -- strong convergence study ------------------------------------------------

def exclude_coarsest(mean: np.ndarray, se: np.ndarray, min_points: int = 4) -> bool:
    """Pre-asymptotic guard: True when the coarsest level's mean error is not
    statistically separated (2 s.e.) from the next level's.  Never fires when
    dropping the point would leave fewer than min_points - 1 levels."""
    if mean.size < min_points:
        return False
    return bool(abs(mean[0] - mean[1]) < 2.0 * math.hypot(se[0], se[1]))


@dataclass(frozen=True)
class ConvergenceReport:
    scheme: Scheme
    levels: tuple[int, ...]
    deltas: np.ndarray
    mean_sup_sq: np.ndarray
    std_err: np.ndarray
    per_path: np.ndarray        # (paths, levels) squared sup errors
    scheme_sup_sq: np.ndarray   # mean over paths of sup |Y_scheme|^2 per level
    slope: float
    slope_se: float
    slope_ci: tuple[float, float]
    excluded_coarsest: bool
    target_order: float
    paths: int
    seed: int
    config_hash: str
    sup_note: str = SUP_NOTE

    @property
    def rms_error(self) -> np.ndarray:
        return np.sqrt(self.mean_sup_sq)


def _sup_error_one_path(cfg: StudyConfig, path: DrivingPath,
                        coef: LinearCoefficients, level: int,
                        oracle_at_events: np.ndarray):
    """(sup |err|^2, sup |Y_scheme|^2) for one ladder level on one path."""
    grid = path.grid(level)
    traj = run_scheme(cfg.scheme, grid, path, coef, cfg.y0,
                      cfg.i32_compensator)
    stride = 2 ** (path.finest_level - level)
    grid_idx = path.cell_edges[::stride]
    sup = float(np.max(np.abs(traj.values - oracle_at_events[grid_idx])))
    if cfg.oracle.kind is OracleKind.EXACT_LINEAR:
        # evaluate the scheme at interior jump times via partial slices;
        # the base value is the last grid value at or before the jump
        for j in path.jumps:
            i0 = int(np.searchsorted(grid, j.time, side="left")) - 1
            part = path.slice_between(float(grid[i0]), j.time)
            y_at = traj.values[i0] * step_factor(cfg.scheme, part, coef,
                                                 cfg.i32_compensator)
            sup = max(sup, abs(y_at - oracle_at_events[j.event_index]))
    return sup * sup, float(np.max(np.abs(traj.values))) ** 2


def strong_error_study(cfg: StudyConfig) -> ConvergenceReport:
    _require(len(cfg.ladder_levels) >= 2, "a convergence study needs at least two ladder levels")
    if cfg.oracle.kind is OracleKind.FINE_GRID:
        _require(cfg.oracle.level is not None
                 and cfg.oracle.level >= max(cfg.ladder_levels) + 4,
                 "fine-grid oracle must be at least 4 levels finer than the ladder")
        _require(cfg.oracle.level <= cfg.finest_level,
                 "fine-grid oracle level must not exceed finest_level")
    active = activate(cfg.model, cfg.epsilon)
    coef = cfg.coefficients_for(active)
    levels = cfg.ladder_levels
    deltas = np.array([cfg.horizon / 2**lv for lv in levels])
    per_path = np.empty((cfg.paths, len(levels)))
    scheme_sup = np.empty_like(per_path)
    for i in range(cfg.paths):
        rng = path_rng(cfg.seed, i)
        path = build_path(cfg.horizon, cfg.finest_level, active, rng)
        if cfg.oracle.kind is OracleKind.EXACT_LINEAR:
            oracle_vals = exact_solution(path, path.event_times, coef, cfg.y0)
        else:
            # cache the fine-grid reference at its own grid; ladder grids are
            # subsets, jump-time comparison is skipped for this oracle
            oracle_vals = np.full(path.event_times.size, np.nan)
            stride = 2 ** (path.finest_level - cfg.oracle.level)
            ref = run_scheme(Scheme.MILSTEIN, path.grid(cfg.oracle.level),
                             path, coef, cfg.y0, cfg.i32_compensator)
            oracle_vals[path.cell_edges[::stride]] = ref.values
        for k, lv in enumerate(levels):
            per_path[i, k], scheme_sup[i, k] = _sup_error_one_path(
                cfg, path, coef, lv, oracle_vals)
    mean = per_path.mean(axis=0)
    if np.any(mean <= 0):
        raise RuntimeError("degenerate study: some mean squared errors are zero")
    se = per_path.std(axis=0, ddof=1) / math.sqrt(cfg.paths)

    excluded = exclude_coarsest(mean, se)
    keep = slice(1, None) if excluded else slice(None)
    slope, slope_se = fit_slope(np.log(deltas[keep]), 0.5 * np.log(mean[keep]))
    half = 1.96 * slope_se
    return ConvergenceReport(
        scheme=cfg.scheme, levels=levels, deltas=deltas, mean_sup_sq=mean,
        std_err=se, per_path=per_path, scheme_sup_sq=scheme_sup.mean(axis=0),
        slope=slope, slope_se=slope_se, slope_ci=(slope - half, slope + half),
        excluded_coarsest=excluded, target_order=cfg.scheme.strong_order,
        paths=cfg.paths, seed=cfg.seed, config_hash=cfg.config_hash(),
        sup_note=SUP_NOTE if cfg.oracle.kind is OracleKind.EXACT_LINEAR
        else "strong error sup taken over grid points (fine-grid reference)",
    )


# -- truncation study ---------------------------------------------------------

@dataclass(frozen=True)
class TruncationReport:
    scheme: Scheme
    epsilons: np.ndarray
    eps_reference: float
    level: int
    mean_sup_sq: np.ndarray
    std_err: np.ndarray
    per_path: np.ndarray
    slope: float
    slope_se: float
    slope_ci: tuple[float, float]
    paths: int
    seed: int
    config_hash: str
    sup_note: str = TRUNC_SUP_NOTE


def truncation_study(cfg: StudyConfig) -> TruncationReport:
    """Coupled truncation-error ladder.

    Jumps are simulated once per path with the smallest ball eps0 = min/4
    removed; every coarser truncation reuses the same path with the jumps
    below its own level filtered out and its own analytic compensator
    moments, so the measured difference is pure truncation error.
    """
    _require(cfg.epsilons is not None, "a truncation study needs an 'epsilons' list")
    _require(cfg.truncation_level is not None,
             "a truncation study needs 'truncation_level' (or ladder_levels)")
    eps_list = np.array(cfg.epsilons)  # descending
    eps0 = float(eps_list.min()) / 4.0
    level = cfg.truncation_level
    base = cfg.model
    active0 = truncate(base, eps0)
    coef0 = cfg.coefficients_for(active0)
    coefs = [cfg.coefficients_for(truncate(base, float(e))) for e in eps_list]

    per_path = np.empty((cfg.paths, eps_list.size))
    for i in range(cfg.paths):
        rng = path_rng(cfg.seed, i)
        path = build_path(cfg.horizon, cfg.finest_level, active0, rng)
        grid = path.grid(level)
        ref = run_scheme(cfg.scheme, grid, path, coef0, cfg.y0,
                         cfg.i32_compensator)
        for k, e in enumerate(eps_list):
            kept = [j for j in path.jumps
                    if j.region is Region.TAIL or abs(j.mark) > e]
            filtered = path.with_jumps(kept)
            traj = run_scheme(cfg.scheme, grid, filtered, coefs[k], cfg.y0,
                              cfg.i32_compensator)
            per_path[i, k] = float(np.max(np.abs(traj.values - ref.values))) ** 2
    mean = per_path.mean(axis=0)
    if np.any(mean <= 0):
        raise RuntimeError("degenerate truncation study: zero mean difference")
    se = per_path.std(axis=0, ddof=1) / math.sqrt(cfg.paths)
    slope, slope_se = fit_slope(np.log(eps_list), np.log(mean))
    half = 1.96 * slope_se
    return TruncationReport(
        scheme=cfg.scheme, epsilons=eps_list, eps_reference=eps0, level=level,
        mean_sup_sq=mean, std_err=se, per_path=per_path,
        slope=slope, slope_se=slope_se, slope_ci=(slope - half, slope + half),
        paths=cfg.paths, seed=cfg.seed, config_hash=cfg.config_hash(),
    )


# -- single-trajectory run (CLI `simulate`) -----------------------------------

def simulate_trajectory(cfg: StudyConfig):
    """One coupled (scheme, oracle) trajectory on the trajectory_level grid."""
    _require(cfg.trajectory_level is not None,
             "simulate needs 'trajectory_level' (or ladder_levels)")
    active = activate(cfg.model, cfg.epsilon)
    coef = cfg.coefficients_for(active)
    rng = path_rng(cfg.seed, 0)
    path = build_path(cfg.horizon, cfg.finest_level, active, rng)
    grid = path.grid(cfg.trajectory_level)
    traj = run_scheme(cfg.scheme, grid, path, coef, cfg.y0, cfg.i32_compensator)
    oracle_vals = reference_solution(cfg.oracle, path, grid, coef, cfg.y0)
    return traj, oracle_vals


# -- output writers -----------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def write_errors_csv(report: ConvergenceReport, out_path) -> None:
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta", "mean_sup_sq_error", "std_err", "paths"])
        for d, m, s in zip(report.deltas, report.mean_sup_sq, report.std_err):
            w.writerow([_fmt(d), _fmt(m), _fmt(s), report.paths])


def write_truncation_csv(report: TruncationReport, out_path) -> None:
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "mean_sup_sq_diff", "std_err", "paths"])
        for e, m, s in zip(report.epsilons, report.mean_sup_sq, report.std_err):
            w.writerow([_fmt(e), _fmt(m), _fmt(s), report.paths])


def write_trajectory_csv(times, y_scheme, y_oracle, out_path) -> None:
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "y_scheme", "y_oracle"])
        for t, a, b in zip(times, y_scheme, y_oracle):
            w.writerow([_fmt(t), _fmt(a), _fmt(b)])


def _json_num(v: float):
    return None if (isinstance(v, float) and math.isnan(v)) else v


def report_dict(report: ConvergenceReport | TruncationReport) -> dict:
    common = {
        "scheme": report.scheme.value,
        "slope": _json_num(report.slope),
        "slope_se": _json_num(report.slope_se),
        "slope_ci": [_json_num(v) for v in report.slope_ci],
        "paths": report.paths,
        "seed": report.seed,
        "config_hash": report.config_hash,
        "sup_note": report.sup_note,
        "mean_sup_sq": [float(v) for v in report.mean_sup_sq],
        "std_err": [float(v) for v in report.std_err],
    }
    if isinstance(report, ConvergenceReport):
        common.update({
            "kind": "strong_convergence",
            "deltas": [float(d) for d in report.deltas],
            "levels": list(report.levels),
            "target_order": report.target_order,
            "excluded_coarsest": report.excluded_coarsest,
            "scheme_sup_sq": [float(v) for v in report.scheme_sup_sq],
        })
    else:
        common.update({
            "kind": "truncation",
            "epsilons": [float(e) for e in report.epsilons],
            "eps_reference": report.eps_reference,
            "level": report.level,
        })
    return common


def write_report_json(report, out_path) -> None:
    with open(out_path, "w") as fh:
        json.dump(report_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def ensure_out_dir(out_dir) -> Path:
    p = Path(out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p
