"""Global maximization of the AMLE objective: grid search then simplex refinement.

The objective has many local maxima and flat floored regions, so the search
box is scanned on a regular grid and the best few grid points seed
bounded Nelder-Mead runs.  All work happens in coordinates normalized to
the unit cube, since d, w and sigma differ by ten orders of magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .estimators import FLAG_NOT_CONVERGED, Method, ParameterEstimate
from .likelihood import ScenarioConstants, ThetaVector, amle_objective, amle_objective_grid
from .model import MeasurementSet

DEFAULT_RHO_MAX = 1e-3
_FLOORED = 1e300


@dataclass(frozen=True)
class SearchBox:
    d_range_m: tuple[float, float] = (0.0, 100.0)
    w_range: tuple[float, float] = (1 - 10 * DEFAULT_RHO_MAX, 1 + 10 * DEFAULT_RHO_MAX)
    sigma_range_s: tuple[float, float] = (1e-11, 1e-8)
    grid_points_per_axis: int = 21

    def __post_init__(self):
        for name in ("d_range_m", "w_range", "sigma_range_s"):
            lo, hi = getattr(self, name)
            object.__setattr__(self, name, (float(lo), float(hi)))
            if not lo <= hi:
                raise ValueError(f"{name}: low must not exceed high, got {lo} > {hi}")
        if self.w_range[0] <= 0:
            raise ValueError("w_range must lie in (0, inf)")
        if self.sigma_range_s[0] <= 0:
            raise ValueError("sigma_range_s must lie in (0, inf)")
        if self.grid_points_per_axis < 1:
            raise ValueError("grid_points_per_axis must be >= 1")

    @classmethod
    def point(cls, theta: ThetaVector) -> "SearchBox":
        d, w, s = theta.as_tuple()
        return cls((d, d), (w, w), (s, s), 1)

    @property
    def lows(self) -> np.ndarray:
        return np.array([self.d_range_m[0], self.w_range[0], self.sigma_range_s[0]])

    @property
    def widths(self) -> np.ndarray:
        return np.array([self.d_range_m[1], self.w_range[1], self.sigma_range_s[1]]) - self.lows

    def axes(self) -> list[np.ndarray]:
        n = self.grid_points_per_axis
        out = []
        for lo, hi in (self.d_range_m, self.w_range, self.sigma_range_s):
            out.append(np.array([lo]) if lo == hi else np.linspace(lo, hi, n))
        return out

    def to_unit(self, theta) -> np.ndarray:
        x = np.asarray(theta, dtype=float)
        widths = self.widths
        safe = np.where(widths > 0, widths, 1.0)
        return np.where(widths > 0, (x - self.lows) / safe, 0.0)

    def from_unit(self, u) -> np.ndarray:
        return self.lows + np.clip(np.asarray(u, dtype=float), 0.0, 1.0) * self.widths

    def contains(self, theta, rtol: float = 1e-12) -> bool:
        x = np.asarray(theta, dtype=float)
        lo, hi = self.lows, self.lows + self.widths
        slack = rtol * np.maximum(np.abs(lo), np.abs(hi))
        return bool(np.all(x >= lo - slack) and np.all(x <= hi + slack))


@dataclass
class OptimizerReport:
    best_theta: ThetaVector
    best_objective: float
    grid_evaluations: int = 0
    refinement_iterations: int = 0
    converged: bool = True
    start_objective: float = field(default=-math.inf, repr=False)


def _consts_for(measurements, consts):
    if consts is not None:
        return consts
    if isinstance(measurements, MeasurementSet) and measurements.scenario is not None:
        return ScenarioConstants.of(measurements.scenario)
    raise ValueError("scenario constants are required when the measurements carry no scenario")


def _z(measurements):
    return measurements.samples_s if isinstance(measurements, MeasurementSet) else np.asarray(measurements, float)


def grid_search(measurements, box: SearchBox, top: int = 5, consts: ScenarioConstants | None = None):
    """Evaluate the objective on the full grid and return the ``top`` best points.

    Result is a list of ``(ThetaVector, objective)`` sorted by decreasing
    objective; equal objectives keep lexicographic ``(d, w, sigma)`` grid
    order.
    """
    if top < 1:
        raise ValueError("top must be >= 1")
    consts = _consts_for(measurements, consts)
    d_ax, w_ax, s_ax = box.axes()
    D, W, S = np.meshgrid(d_ax, w_ax, s_ax, indexing="ij")
    obj = amle_objective_grid(_z(measurements), D, W, S, consts).ravel()
    # stable sort on -obj keeps the C-order (lexicographic) index for ties
    order = np.argsort(-obj, kind="stable")[:top]
    D, W, S = D.ravel(), W.ravel(), S.ravel()
    return [(ThetaVector(float(D[i]), float(W[i]), float(S[i])), float(obj[i])) for i in order]


def refine(measurements, start: ThetaVector, box: SearchBox, consts: ScenarioConstants | None = None,
           xatol: float = 1e-10, maxiter: int = 2000, step: float | None = None) -> OptimizerReport:
    """Bounded Nelder-Mead ascent from ``start`` in unit-cube coordinates.

    Stops when the simplex shrinks below ``xatol`` or after ``maxiter``
    iterations.  The returned objective is never below the start value.
    """
    consts = _consts_for(measurements, consts)
    z = _z(measurements)
    if not box.contains(start.as_tuple()):
        raise ValueError(f"start {start} lies outside the search box")
    start_obj = amle_objective(z, start, consts)
    free = box.widths > 0
    if not free.any():
        return OptimizerReport(start, start_obj, 0, 0, True, start_obj)

    u0 = np.clip(box.to_unit(start.as_tuple()), 0.0, 1.0)
    free_idx = np.flatnonzero(free)
    if step is None:
        step = 0.5 / max(box.grid_points_per_axis - 1, 1)

    def full(v):
        u = u0.copy()
        u[free_idx] = v
        return u

    def negobj(v):
        d, w, s = box.from_unit(full(v))
        val = amle_objective_grid(z, d, w, s, consts)
        # finite stand-in for -inf keeps the simplex spread computable
        return -float(val) if np.isfinite(val) else _FLOORED

    v0 = u0[free_idx]
    simplex = [v0]
    for j in range(v0.size):
        v = v0.copy()
        # step inward so every vertex starts inside the cube
        v[j] = v[j] + step if v[j] + step <= 1.0 else v[j] - step
        simplex.append(v)
    res = minimize(
        negobj, v0, method="Nelder-Mead",
        bounds=[(0.0, 1.0)] * v0.size,
        options={"initial_simplex": np.array(simplex), "xatol": xatol, "fatol": math.inf,
                 "maxiter": maxiter, "maxfev": 20 * maxiter},
    )
    best_u = full(res.x)
    theta = ThetaVector(*(float(x) for x in box.from_unit(best_u)))
    best = amle_objective(z, theta, consts)
    if not best >= start_obj:
        theta, best = start, start_obj
    converged = bool(res.success) and math.isfinite(best)
    return OptimizerReport(theta, best, 0, int(res.nit), converged, start_obj)


def amle_estimate(measurements, box: SearchBox | None = None, top: int = 5,
                  consts: ScenarioConstants | None = None, **refine_kw) -> ParameterEstimate:
    """Approximate maximum-likelihood estimate of ``(d, w, sigma)``.

    Grid search, refinement from each of the ``top`` grid winners, keep the best.
    """
    box = box or SearchBox()
    consts = _consts_for(measurements, consts)
    candidates = grid_search(measurements, box, top, consts)
    n_grid = int(np.prod([a.size for a in box.axes()]))
    best = None
    iterations = 0
    for theta, _ in candidates:
        report = refine(measurements, theta, box, consts, **refine_kw)
        iterations += report.refinement_iterations
        if best is None or report.best_objective > best.best_objective:
            best = report
    best.grid_evaluations = n_grid
    best.refinement_iterations = iterations
    converged = best.converged and math.isfinite(best.best_objective)
    d, w, s = best.best_theta.as_tuple()
    return ParameterEstimate(
        d, w, s**2, Method.AMLE,
        {
            "flags": [] if converged else [FLAG_NOT_CONVERGED],
            "objective": best.best_objective,
            "noise_std_s": s,
            "grid_evaluations": n_grid,
            "refinement_iterations": iterations,
            "converged": converged,
        },
    )
