"""Method-of-moments estimator and the two comparison baselines.

Central moments of a sample ``z_k`` relate to the unknowns through::

    mu1 = d/c + (D/2 + 1/4) w T0
    mu2 = sigma^2 + (w T0)^2 / 48
    mu4 = 3 sigma^4 + sigma^2 (w T0)^2 / 8 + (w T0)^4 / 1280

so ``mu4 - 3 mu2^2 = a (w T0)^4`` with ``a = -1/1920`` independent of sigma.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .model import SPEED_OF_LIGHT, MeasurementSet

KURTOSIS_COEFF_EXACT = Fraction(1, 1280) - Fraction(3, 48**2)
KURTOSIS_COEFF = float(KURTOSIS_COEFF_EXACT)  # -1/1920

FLAG_UNIDENTIFIABLE = "skew-unidentifiable"
FLAG_LOW_VARIANCE = "insufficient-sample-variance"
FLAG_NOT_CONVERGED = "not-converged"


class Method(str, enum.Enum):
    AMLE = "AMLE"
    MOM_QUARTIC = "MOM_QUARTIC"
    MOM_LINEARIZED = "MOM_LINEARIZED"
    TRADITIONAL = "TRADITIONAL"
    COUNTER_BASED = "COUNTER_BASED"


@dataclass(frozen=True)
class SampleStats:
    s1: float
    s2: float
    s4: float
    n: int

    @property
    def excess(self) -> float:
        """``S4 - 3 S2^2``, the sample estimate of ``a (w T0)^4``."""
        return self.s4 - 3 * self.s2**2


@dataclass
class ParameterEstimate:
    distance_m: float
    skew: float
    noise_var_s2: float
    method: Method
    diagnostics: dict = field(default_factory=dict)

    @property
    def flags(self) -> list[str]:
        return list(self.diagnostics.get("flags", []))

    CSV_HEADER = ("method", "d_hat_m", "w_hat", "sigma2_hat_s2", "flags")

    def csv_row(self) -> list[str]:
        return [
            self.method.value,
            repr(float(self.distance_m)),
            repr(float(self.skew)),
            repr(float(self.noise_var_s2)),
            ";".join(self.flags),
        ]


def _samples(measurements) -> np.ndarray:
    if isinstance(measurements, MeasurementSet):
        return measurements.samples_s
    return np.asarray(measurements, dtype=float)


def compute_stats(measurements) -> SampleStats:
    """Sample mean and 1/N central moments of order 2 and 4."""
    z = _samples(measurements)
    if z.size < 2:
        raise ValueError(f"N >= 2 required, got N = {z.size}")
    s1 = float(z.mean())
    dev2 = (z - s1) ** 2
    return SampleStats(s1, float(dev2.mean()), float((dev2**2).mean()), int(z.size))


def mom_skew_quartic(stats: SampleStats, T0: float) -> tuple[float, list[str]]:
    """``(|(S4 - 3 S2^2) / a|)^(1/4) / T0``; returns ``(0.0, [flag])`` when the excess vanishes."""
    if T0 <= 0:
        raise ValueError("T0 must be positive")
    excess = stats.excess
    if excess == 0:
        return 0.0, [FLAG_UNIDENTIFIABLE]
    return abs(excess / KURTOSIS_COEFF) ** 0.25 / T0, []


def mom_skew_linearized(stats: SampleStats, T0: float, as_printed: bool = False) -> tuple[float, list[str]]:
    """First-order inversion of ``S4 - 3 S2^2 = a (w T0)^4`` around ``w = 1``.

    Uses ``w^4 ~ 1 + 4 (w - 1)``, i.e. ``w = 1 + (S4 - 3 S2^2 - a T0^4) / (4 a T0^4)``.
    ``as_printed=True`` flips the sign of the correction term, which yields
    ``2 - w`` instead of ``w`` at the population moments; kept for comparison.
    """
    if T0 <= 0:
        raise ValueError("T0 must be positive")
    aT4 = KURTOSIS_COEFF * T0**4
    correction = (stats.excess - aT4) / (4 * aT4)
    skew = 1 - correction if as_printed else 1 + correction
    flags = [FLAG_LOW_VARIANCE] if stats.s2 == 0 else []
    return skew, flags


def distance_from_moments(s1: float, skew: float, T0: float, D: int, c: float = SPEED_OF_LIGHT) -> float:
    return c * (s1 - (D / 2 + 0.25) * skew * T0)


def noise_var_from_moments(s2: float, skew: float, T0: float) -> float:
    return abs(s2 - (skew * T0) ** 2 / 48)


def mom_estimate(measurements, T0: float, D: int, c: float = SPEED_OF_LIGHT,
                 quartic: bool = False, stats: SampleStats | None = None) -> ParameterEstimate:
    """Distance, skew and noise variance by the method of moments.

    The linearized skew is the default; ``quartic=True`` uses the fourth-root
    inversion instead.
    """
    if stats is None:
        stats = compute_stats(measurements)
    if quartic:
        skew, flags = mom_skew_quartic(stats, T0)
        method = Method.MOM_QUARTIC
    else:
        skew, flags = mom_skew_linearized(stats, T0)
        method = Method.MOM_LINEARIZED
    return ParameterEstimate(
        distance_from_moments(stats.s1, skew, T0, D, c),
        skew,
        noise_var_from_moments(stats.s2, skew, T0),
        method,
        {"flags": flags, "n": stats.n},
    )


def traditional_estimate(measurements, T0: float, D: int, c: float = SPEED_OF_LIGHT) -> ParameterEstimate:
    """Classical TW-TOA: nominal turn-around ``D T0``, no skew or detection delay."""
    z = _samples(measurements)
    if z.size < 1:
        raise ValueError("N >= 1 required")
    s1 = float(z.mean())
    var = float(z.var()) if z.size > 1 else 0.0
    return ParameterEstimate(c * (s1 - D * T0 / 2), 1.0, var, Method.TRADITIONAL, {"flags": [], "n": int(z.size)})


def counter_based_estimate(measurements, reported_counts, T0: float, c: float = SPEED_OF_LIGHT) -> ParameterEstimate:
    """Subtract the slave's self-reported turn-around, converted with the nominal period.

    ``reported_counts[k]`` is the turn-around of round ``k`` in slave ticks.
    The tick count is right but each tick lasts ``w T0``, not ``T0``, so the
    skew error is left in the estimate.
    """
    z = _samples(measurements)
    m = np.asarray(reported_counts, dtype=float)
    if m.shape != z.shape:
        raise ValueError(f"reported_counts length {m.size} does not match N = {z.size}")
    resid = z - m * T0 / 2
    var = float(resid.var()) if z.size > 1 else 0.0
    return ParameterEstimate(c * float(resid.mean()), 1.0, var, Method.COUNTER_BASED,
                             {"flags": [], "n": int(z.size)})


def traditional_bias(T0: float, D: int, skew: float, c: float = SPEED_OF_LIGHT) -> float:
    """Asymptotic bias of :func:`traditional_estimate` in meters."""
    return c * ((D / 2) * (skew - 1) * T0 + skew * T0 / 4)


def counter_based_bias(T0: float, D: int, skew: float, c: float = SPEED_OF_LIGHT) -> float:
    """Asymptotic bias of :func:`counter_based_estimate` under round-to-nearest tick reports."""
    return c * (D / 2 + 0.25) * (skew - 1) * T0
