"""Measurement density (exact and tanh-approximated) and the AMLE objective.

The single-sample density of ``z`` is the uniform detection-delay density
``2/(w T0)`` on ``[0, w T0/2)`` smeared by Gaussian noise::

    p(z) = 2/(w T0) * [Phi(alpha/sigma) - Phi(beta/sigma)]
    alpha = z - d/c - w D T0/2,   beta = alpha - w T0/2

The approximate density replaces the Gaussian integral by the closed form
in :func:`gauss_integral_approx`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr

from .model import SPEED_OF_LIGHT, MeasurementSet

LOG_FLOOR = math.log(1e-300)
_SQRT_2PI = math.sqrt(2 * math.pi)
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class ThetaVector:
    distance_m: float
    skew: float
    noise_std_s: float

    def __post_init__(self):
        if not self.skew > 0:
            raise ValueError(f"skew must be positive, got {self.skew}")
        if not self.noise_std_s > 0:
            raise ValueError(f"noise_std_s must be positive, got {self.noise_std_s}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.distance_m, self.skew, self.noise_std_s)


@dataclass(frozen=True)
class ScenarioConstants:
    """Protocol constants known to the estimator: ``T0``, ``D`` and ``c``."""

    T0: float = 1e-8
    D: int = 10
    c: float = SPEED_OF_LIGHT

    @classmethod
    def of(cls, scenario) -> "ScenarioConstants":
        return cls(scenario.T0, scenario.delay_counts, scenario.propagation_speed_m_s)


class Residuals(NamedTuple):
    alpha_s: np.ndarray
    beta_s: np.ndarray


def residuals(z, theta: ThetaVector, consts: ScenarioConstants) -> Residuals:
    d, w, _ = theta.as_tuple()
    alpha = np.asarray(z, dtype=float) - d / consts.c - w * consts.D * consts.T0 / 2
    return Residuals(alpha, alpha - w * consts.T0 / 2)


def _tanh_argument(x):
    return 19.5 * x - 55.5 * np.arctan(x * (35.0 / 111.0))


def gauss_integral_approx(x):
    """Closed-form approximation of the integral of ``exp(-pi t^2)`` from 0 to ``x``.

    Absolute error stays below 2e-3 on the real line.
    """
    return 0.5 * np.tanh(_tanh_argument(np.asarray(x, dtype=float)))


def _log_cosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2 * ax)) - _LN2


def _log_tanh_difference(a, b):
    """``log(tanh(a) - tanh(b))`` for ``a > b`` without cancellation.

    Uses ``tanh a - tanh b = sinh(a - b) / (cosh a cosh b)``.  Entries with
    ``a <= b`` come back as ``-inf``.
    """
    delta = np.asarray(a - b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_sinh = delta + np.log(-np.expm1(-2 * delta)) - _LN2
    log_sinh = np.where(delta > 0, log_sinh, -np.inf)
    return log_sinh - _log_cosh(a) - _log_cosh(b)


def _scaled_arguments(z, theta: ThetaVector, consts: ScenarioConstants):
    alpha, beta = residuals(z, theta, consts)
    scale = _SQRT_2PI * theta.noise_std_s
    return _tanh_argument(alpha / scale), _tanh_argument(beta / scale)


def single_pdf_exact(z, theta: ThetaVector, consts: ScenarioConstants):
    """Exact density via the normal CDF; evaluated on the tail it is accurate in."""
    alpha, beta = residuals(z, theta, consts)
    a = alpha / theta.noise_std_s
    b = beta / theta.noise_std_s
    # both arguments in the upper tail: difference of survival functions
    upper = b > 0
    diff = np.where(upper, ndtr(-b) - ndtr(-a), ndtr(a) - ndtr(b))
    wT = theta.skew * consts.T0
    out = np.maximum(diff, 0.0) * (2.0 / wT)
    return out if out.ndim else float(out)


def single_pdf_approx(z, theta: ThetaVector, consts: ScenarioConstants):
    a, b = _scaled_arguments(z, theta, consts)
    wT = theta.skew * consts.T0
    out = np.exp(_log_tanh_difference(a, b)) / wT
    return out if out.ndim else float(out)


def amle_log_terms(z, theta: ThetaVector, consts: ScenarioConstants) -> np.ndarray:
    """Per-sample ``log[tanh(.alpha.) - tanh(.beta.)]`` floored at ``log(1e-300)``."""
    a, b = _scaled_arguments(z, theta, consts)
    return np.maximum(_log_tanh_difference(a, b), LOG_FLOOR)


def amle_objective(measurements, theta: ThetaVector, consts: ScenarioConstants) -> float:
    """Approximate log-likelihood ``-N log(w T0) + sum_k log[tanh - tanh]``.

    Returns ``-inf`` when every sample sits on the floor, i.e. theta is
    grossly inconsistent with the data.
    """
    z = measurements.samples_s if isinstance(measurements, MeasurementSet) else np.asarray(measurements, float)
    terms = amle_log_terms(z, theta, consts)
    if np.all(terms == LOG_FLOOR):
        return -math.inf
    return float(-z.size * math.log(theta.skew * consts.T0) + np.sum(terms))


def amle_objective_grid(z, d, w, sigma, consts: ScenarioConstants) -> np.ndarray:
    """Vectorized objective over broadcastable arrays of ``d``, ``w`` and ``sigma``.

    Equal to calling :func:`amle_objective` point by point; the sum over
    samples runs along the last axis with numpy's pairwise summation.
    """
    z = np.asarray(z, dtype=float)
    d, w, sigma = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (d, w, sigma)))
    shape = d.shape
    d, w, sigma = (v.reshape(-1) for v in (d, w, sigma))
    out = np.empty(d.size)
    chunk = max(1, 2_000_000 // max(z.size, 1))
    for start in range(0, d.size, chunk):
        sl = slice(start, start + chunk)
        dd, ww, ss = d[sl, None], w[sl, None], sigma[sl, None]
        alpha = z[None, :] - dd / consts.c - ww * consts.D * consts.T0 / 2
        scale = _SQRT_2PI * ss
        a = _tanh_argument(alpha / scale)
        b = _tanh_argument((alpha - ww * consts.T0 / 2) / scale)
        terms = np.maximum(_log_tanh_difference(a, b), LOG_FLOOR)
        total = -z.size * np.log(ww[:, 0] * consts.T0) + terms.sum(axis=1)
        total[np.all(terms == LOG_FLOOR, axis=1)] = -np.inf
        out[sl] = total
    return out.reshape(shape)


LANDSCAPE_AXES = ("d", "w", "sigma")


def landscape(measurements, consts: ScenarioConstants, fixed_axis: str, fixed_value: float,
              axis1_values, axis2_values) -> tuple[str, str, np.ndarray]:
    """Objective over a 2-D grid with one of ``d``, ``w``, ``sigma`` held fixed.

    Returns the names of the two free axes and an array of rows
    ``(param1, param2, objective)`` with ``param1`` varying slowest.
    """
    if fixed_axis not in LANDSCAPE_AXES:
        raise ValueError(f"fixed axis must be one of {LANDSCAPE_AXES}, got {fixed_axis!r}")
    free = [ax for ax in LANDSCAPE_AXES if ax != fixed_axis]
    p1, p2 = np.meshgrid(np.asarray(axis1_values, float), np.asarray(axis2_values, float), indexing="ij")
    coords = {free[0]: p1, free[1]: p2, fixed_axis: np.full(p1.shape, float(fixed_value))}
    z = measurements.samples_s if isinstance(measurements, MeasurementSet) else measurements
    obj = amle_objective_grid(z, coords["d"], coords["w"], coords["sigma"], consts)
    rows = np.column_stack([p1.ravel(), p2.ravel(), obj.ravel()])
    return free[0], free[1], rows
