"""Monte Carlo sweeps over noise level or sample count, and bias-vs-N fitting."""

from __future__ import annotations

import csv
import enum
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .estimators import (
    Method,
    compute_stats,
    counter_based_estimate,
    mom_estimate,
    traditional_estimate,
)
from .likelihood import ScenarioConstants
from .model import RangingScenario, synthesize_measurements
from .optimize import SearchBox, amle_estimate


class SweepAxis(str, enum.Enum):
    NOISE_STD = "NOISE_STD"
    NUM_SAMPLES = "NUM_SAMPLES"


DEFAULT_METHODS = (Method.MOM_LINEARIZED, Method.TRADITIONAL, Method.COUNTER_BASED)


@dataclass(frozen=True)
class SweepSpec:
    scenario_template: RangingScenario
    sweep_axis: SweepAxis
    axis_values: tuple
    trials: int = 1000
    estimators: tuple[Method, ...] = DEFAULT_METHODS
    base_seed: int = 0
    box: SearchBox | None = None

    def __post_init__(self):
        object.__setattr__(self, "sweep_axis", SweepAxis(self.sweep_axis))
        object.__setattr__(self, "estimators", tuple(dict.fromkeys(Method(m) for m in self.estimators)))
        values = tuple(self.axis_values)
        if self.sweep_axis is SweepAxis.NUM_SAMPLES:
            values = tuple(int(v) for v in values)
        else:
            values = tuple(float(v) for v in values)
        object.__setattr__(self, "axis_values", values)
        if not values:
            raise ValueError("axis_values must be nonempty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("axis_values must be strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.estimators:
            raise ValueError("at least one estimator is required")

    def scenario_at(self, index: int) -> RangingScenario:
        value = self.axis_values[index]
        if self.sweep_axis is SweepAxis.NOISE_STD:
            return self.scenario_template.replace(noise_std_s=value)
        return self.scenario_template.replace(num_samples=value)

    def to_dict(self) -> dict:
        return {
            "scenario_template": self.scenario_template.to_dict(),
            "sweep_axis": self.sweep_axis.value,
            "axis_values": list(self.axis_values),
            "trials": self.trials,
            "estimators": [m.value for m in self.estimators],
            "base_seed": self.base_seed,
            "box": None if self.box is None else {
                "d_range_m": list(self.box.d_range_m),
                "w_range": list(self.box.w_range),
                "sigma_range_s": list(self.box.sigma_range_s),
                "grid_points_per_axis": self.box.grid_points_per_axis,
            },
        }


def trial_seed(base_seed: int, axis_index: int, trial: int) -> int:
    """Stable 64-bit seed for one (cell, trial) pair."""
    state = np.random.SeedSequence([base_seed, axis_index, trial]).generate_state(1, np.uint64)
    return int(state[0])


@dataclass(frozen=True)
class CellStats:
    mean_d_m: float
    rmse_d_m: float
    bias_d_m: float
    var_d_m2: float
    mean_w: float
    var_w: float
    trials_used: int
    degenerate_count: int


@dataclass
class SweepResult:
    spec: SweepSpec
    cells: dict = field(default_factory=dict)  # (axis_value, Method) -> CellStats

    def cell(self, axis_value, method) -> CellStats:
        return self.cells[(axis_value, Method(method))]

    def column(self, method, attr: str) -> np.ndarray:
        return np.array([getattr(self.cell(v, method), attr) for v in self.spec.axis_values])

    CSV_HEADER = ("axis_value", "method", "mean_d_m", "rmse_d_m", "bias_d_m", "mean_w", "var_w", "degenerate_count")

    def rows(self) -> list[list]:
        out = []
        for v in self.spec.axis_values:
            for m in self.spec.estimators:
                c = self.cells[(v, m)]
                out.append([v, m.value, c.mean_d_m, c.rmse_d_m, c.bias_d_m, c.mean_w, c.var_w, c.degenerate_count])
        return out


def _run_trials(spec: SweepSpec, axis_index: int, trials: Sequence[int]) -> np.ndarray:
    """Estimates for the given trials: array of shape (len(trials), n_methods, 3).

    The last axis holds ``(d_hat, w_hat, degenerate)``.
    """
    scenario = spec.scenario_at(axis_index)
    consts = ScenarioConstants.of(scenario)
    out = np.empty((len(trials), len(spec.estimators), 3))
    for i, t in enumerate(trials):
        ms = synthesize_measurements(scenario, trial_seed(spec.base_seed, axis_index, t))
        stats = None
        for j, method in enumerate(spec.estimators):
            if method in (Method.MOM_LINEARIZED, Method.MOM_QUARTIC):
                if stats is None:
                    stats = compute_stats(ms)
                est = mom_estimate(ms, consts.T0, consts.D, consts.c,
                                   quartic=method is Method.MOM_QUARTIC, stats=stats)
            elif method is Method.TRADITIONAL:
                est = traditional_estimate(ms, consts.T0, consts.D, consts.c)
            elif method is Method.COUNTER_BASED:
                est = counter_based_estimate(ms, ms.reported_counts, consts.T0, consts.c)
            else:
                est = amle_estimate(ms, spec.box, consts=consts)
            out[i, j] = (est.distance_m, est.skew, 1.0 if est.flags else 0.0)
    return out


def _aggregate(values: np.ndarray, truth_d: float) -> CellStats:
    d_hat, w_hat, degenerate = values[:, 0], values[:, 1], values[:, 2]
    mean_d = float(np.mean(d_hat))
    var_d = float(np.mean((d_hat - mean_d) ** 2))
    mean_w = float(np.mean(w_hat))
    return CellStats(
        mean_d_m=mean_d,
        rmse_d_m=math.sqrt(float(np.mean((d_hat - truth_d) ** 2))),
        bias_d_m=mean_d - truth_d,
        var_d_m2=var_d,
        mean_w=mean_w,
        var_w=float(np.mean((w_hat - mean_w) ** 2)),
        trials_used=int(d_hat.size),
        degenerate_count=int(degenerate.sum()),
    )


def run_sweep(spec: SweepSpec, workers: int = 1, chunk_size: int = 100) -> SweepResult:
    """Run every (axis value, trial) cell and aggregate per estimator.

    Trials are split into fixed chunks and gathered in order, so the result
    does not depend on ``workers``.
    """
    chunks = [
        (ai, list(range(lo, min(lo + chunk_size, spec.trials))))
        for ai in range(len(spec.axis_values))
        for lo in range(0, spec.trials, chunk_size)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_trials, [spec] * len(chunks), *zip(*chunks)))
    else:
        parts = [_run_trials(spec, ai, trials) for ai, trials in chunks]

    result = SweepResult(spec)
    truth_d = spec.scenario_template.distance_m
    for ai, value in enumerate(spec.axis_values):
        values = np.concatenate([p for (idx, _), p in zip(chunks, parts) if idx == ai])
        for j, method in enumerate(spec.estimators):
            result.cells[(value, method)] = _aggregate(values[:, j, :], truth_d)
    return result


@dataclass(frozen=True)
class BiasFit:
    """Weighted least-squares fit of ``bias(N) = intercept + slope / N``."""

    num_samples: np.ndarray
    bias: np.ndarray
    std_error: np.ndarray
    intercept: float
    intercept_se: float
    slope: float
    slope_se: float
    residuals: np.ndarray
    chi2: float

    def table(self) -> list[dict]:
        return [
            {"N": int(n), "bias_w": float(b), "se_w": float(s), "residual": float(r)}
            for n, b, s, r in zip(self.num_samples, self.bias, self.std_error, self.residuals)
        ]


def bias_decomposition(result: SweepResult, method=Method.MOM_LINEARIZED) -> BiasFit:
    """Fit the skew-estimate bias against ``1/N`` across a sample-count sweep.

    Uses inverse-variance weights from the per-cell trial spread; when any
    cell has zero spread the fit is unweighted.
    """
    if result.spec.sweep_axis is not SweepAxis.NUM_SAMPLES:
        raise ValueError("bias decomposition needs a NUM_SAMPLES sweep")
    if len(result.spec.axis_values) < 3:
        raise ValueError("at least 3 sample counts are needed to fit bias against 1/N")
    method = Method(method)
    n = np.array(result.spec.axis_values, dtype=float)
    true_w = result.spec.scenario_template.w
    bias = result.column(method, "mean_w") - true_w
    trials = result.column(method, "trials_used")
    # var_w uses the 1/T divisor; rescale to the unbiased spread for the SE
    var = result.column(method, "var_w") * trials / np.maximum(trials - 1, 1)
    se = np.sqrt(var / trials)

    X = np.column_stack([np.ones_like(n), 1.0 / n])
    if np.all(se > 0):
        wts = 1.0 / se**2
        cov = np.linalg.inv(X.T @ (X * wts[:, None]))
        coef = cov @ (X.T @ (wts * bias))
        resid = bias - X @ coef
        chi2 = float(np.sum(wts * resid**2))
    else:
        coef, *_ = np.linalg.lstsq(X, bias, rcond=None)
        resid = bias - X @ coef
        dof = max(n.size - 2, 1)
        cov = np.linalg.inv(X.T @ X) * float(resid @ resid) / dof
        chi2 = float("nan")
    return BiasFit(n, bias, se, float(coef[0]), math.sqrt(cov[0, 0]), float(coef[1]),
                   math.sqrt(cov[1, 1]), resid, chi2)


def write_sweep(result: SweepResult, out_dir, name: str = "sweep") -> list[Path]:
    """Write ``<name>.csv`` and ``<name>.meta.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{name}.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SweepResult.CSV_HEADER)
        for row in result.rows():
            writer.writerow([repr(x) if isinstance(x, float) else x for x in row])
    meta_path = out_dir / f"{name}.meta.json"
    meta = {"version": __version__, "spec": result.spec.to_dict()}
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return [csv_path, meta_path]
