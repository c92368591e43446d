"""Ground-truth types and synthesis of two-way time-of-arrival measurements.

A master node with a time-to-digital converter times the round trip to a
slave whose oscillator runs at ``w`` times its nominal period ``T0``.  The
slave replies ``D`` of its own ticks after the first clock edge following
signal arrival, so each half round-trip sample is::

    z_k = d/c + w*D*T0/2 + eps_k/2 + n_k,   eps_k ~ U[0, w*T0),  n_k ~ N(0, sigma^2)

All times are in seconds and distances in meters.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

EPSILON_MODES = ("uniform", "mean", "zero")


@dataclass(frozen=True)
class ClockModel:
    """Slave oscillator: nominal frequency plus multiplicative skew.

    ``clock_offset_s`` is carried for completeness only; the master's TDC
    makes it drop out of every measurement.
    """

    nominal_frequency_hz: float = 100e6
    skew: float = 1.0001
    clock_offset_s: float = 0.0

    def __post_init__(self):
        if not (self.nominal_frequency_hz > 0 and math.isfinite(self.nominal_frequency_hz)):
            raise ValueError(f"nominal_frequency_hz must be positive, got {self.nominal_frequency_hz}")
        if not (self.skew > 0 and math.isfinite(self.skew)):
            raise ValueError(f"skew must be positive, got {self.skew}")

    @classmethod
    def from_offset(cls, nominal_frequency_hz: float, rho: float, slower: bool = False,
                    clock_offset_s: float = 0.0) -> "ClockModel":
        """Build from the fractional frequency offset ``rho``; ``w = 1 - rho`` if ``slower``."""
        skew = 1.0 - rho if slower else 1.0 + rho
        return cls(nominal_frequency_hz, skew, clock_offset_s)

    @property
    def nominal_period_s(self) -> float:
        return 1.0 / self.nominal_frequency_hz

    @property
    def frequency_offset_fraction(self) -> float:
        return self.skew - 1.0


@dataclass(frozen=True)
class RangingScenario:
    distance_m: float = 30.0
    delay_counts: int = 10
    clock: ClockModel = field(default_factory=ClockModel)
    noise_std_s: float = 0.1 / SPEED_OF_LIGHT
    num_samples: int = 1000
    propagation_speed_m_s: float = SPEED_OF_LIGHT

    def __post_init__(self):
        if not (self.propagation_speed_m_s > 0 and math.isfinite(self.propagation_speed_m_s)):
            raise ValueError("propagation_speed_m_s must be positive and finite")
        if not (self.distance_m >= 0 and math.isfinite(self.distance_m)):
            raise ValueError(f"distance_m must be nonnegative and finite, got {self.distance_m}")
        if int(self.delay_counts) != self.delay_counts or self.delay_counts < 1:
            raise ValueError(f"delay_counts must be an integer >= 1, got {self.delay_counts}")
        if not (self.noise_std_s >= 0 and math.isfinite(self.noise_std_s)):
            raise ValueError(f"noise_std_s must be nonnegative, got {self.noise_std_s}")
        if int(self.num_samples) != self.num_samples or self.num_samples < 1:
            raise ValueError(f"num_samples must be an integer >= 1, got {self.num_samples}")

    @property
    def T0(self) -> float:
        return self.clock.nominal_period_s

    @property
    def w(self) -> float:
        return self.clock.skew

    @property
    def propagation_delay_s(self) -> float:
        return self.distance_m / self.propagation_speed_m_s

    @property
    def support_s(self) -> tuple[float, float]:
        """Half-open range of noiseless samples ``[low, high)``."""
        low = self.propagation_delay_s + self.w * self.delay_counts * self.T0 / 2
        return low, low + self.w * self.T0 / 2

    def replace(self, **changes) -> "RangingScenario":
        from dataclasses import replace

        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RangingScenario":
        data = dict(data)
        data["clock"] = ClockModel(**data.get("clock", {}))
        return cls(**data)


@dataclass(frozen=True)
class MeasurementSet:
    """N half round-trip samples, with the slave's reported tick counts when simulated."""

    samples_s: np.ndarray
    seed: Optional[int] = None
    scenario: Optional[RangingScenario] = None
    reported_counts: Optional[np.ndarray] = None

    def __post_init__(self):
        z = np.asarray(self.samples_s, dtype=float)
        if z.ndim != 1 or z.size < 1:
            raise ValueError("samples_s must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(z)):
            raise ValueError("samples_s contains non-finite values")
        z.setflags(write=False)
        object.__setattr__(self, "samples_s", z)
        if self.reported_counts is not None:
            m = np.asarray(self.reported_counts, dtype=np.int64)
            if m.shape != z.shape:
                raise ValueError(f"reported_counts has {m.size} entries, samples_s has {z.size}")
            m.setflags(write=False)
            object.__setattr__(self, "reported_counts", m)

    def __len__(self) -> int:
        return self.samples_s.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, MeasurementSet):
            return NotImplemented
        counts_equal = (self.reported_counts is None and other.reported_counts is None) or (
            self.reported_counts is not None
            and other.reported_counts is not None
            and np.array_equal(self.reported_counts, other.reported_counts)
        )
        return (
            np.array_equal(self.samples_s, other.samples_s)
            and self.seed == other.seed
            and self.scenario == other.scenario
            and counts_equal
        )

    __hash__ = None


def synthesize_measurements(scenario: RangingScenario, seed: int,
                            epsilon_mode: str = "uniform") -> MeasurementSet:
    """Draw ``scenario.num_samples`` measurements reproducibly from ``seed``.

    ``epsilon_mode`` replaces the detection delay by its mean (``"mean"``) or
    by zero (``"zero"``); these exist for deterministic checks.  The uniform
    delays are always drawn first and the Gaussian noise second, so a given
    seed yields the same delays whatever the noise level.
    """
    if epsilon_mode not in EPSILON_MODES:
        raise ValueError(f"epsilon_mode must be one of {EPSILON_MODES}, got {epsilon_mode!r}")
    n = scenario.num_samples
    wT = scenario.w * scenario.T0
    rng = np.random.default_rng(seed)
    eps = rng.uniform(0.0, wT, n)
    noise = rng.normal(0.0, 1.0, n) * scenario.noise_std_s
    if epsilon_mode == "mean":
        eps = np.full(n, wT / 2)
    elif epsilon_mode == "zero":
        eps = np.zeros(n)
    base = scenario.propagation_delay_s + scenario.w * scenario.delay_counts * scenario.T0 / 2
    z = base + eps / 2 + noise
    # slave counts its own edges: D ticks plus the detection delay rounded to a tick
    counts = scenario.delay_counts + np.floor(eps / wT + 0.5).astype(np.int64)
    return MeasurementSet(z, seed=int(seed), scenario=scenario, reported_counts=counts)


def true_mean(scenario: RangingScenario) -> float:
    return scenario.propagation_delay_s + (scenario.delay_counts / 2 + 0.25) * scenario.w * scenario.T0


def true_central_moment2(scenario: RangingScenario) -> float:
    wT = scenario.w * scenario.T0
    return scenario.noise_std_s**2 + wT**2 / 48


def true_central_moment4(scenario: RangingScenario) -> float:
    s2 = scenario.noise_std_s**2
    wT = scenario.w * scenario.T0
    return 3 * s2**2 + s2 * wT**2 / 8 + wT**4 / 1280


def samples_for_duration(scenario: RangingScenario, duration_s: float) -> int:
    """Number of back-to-back ranging rounds that fit in ``duration_s``.

    One round lasts the full round trip, i.e. twice the mean sample.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    return max(1, int(duration_s // (2 * true_mean(scenario))))


# -- file formats ------------------------------------------------------------

def _metadata_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".meta.json")


def _counts_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".counts.csv")


def write_measurements(ms: MeasurementSet, path, version: str | None = None) -> list[Path]:
    """Write ``k,z_seconds`` CSV plus a JSON metadata sidecar (and tick counts if present)."""
    path = Path(path)
    written = [path]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "z_seconds"])
        for k, z in enumerate(ms.samples_s, start=1):
            writer.writerow([k, repr(float(z))])
    if ms.reported_counts is not None:
        cpath = _counts_path(path)
        with cpath.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["k", "reported_count"])
            for k, m in enumerate(ms.reported_counts, start=1):
                writer.writerow([k, int(m)])
        written.append(cpath)
    meta = {
        "seed": ms.seed,
        "num_samples": len(ms),
        "scenario": ms.scenario.to_dict() if ms.scenario is not None else None,
    }
    if version is not None:
        meta["version"] = version
    mpath = _metadata_path(path)
    mpath.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    written.append(mpath)
    return written


class MeasurementFormatError(ValueError):
    pass


def _read_column(path: Path, header: Sequence[str], convert) -> list:
    values = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise MeasurementFormatError(f"{path}:1: empty file, expected header {','.join(header)}")
        if [h.strip() for h in first] != list(header):
            raise MeasurementFormatError(f"{path}:1: expected header {','.join(header)}, got {','.join(first)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise MeasurementFormatError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                value = convert(row[1])
            except ValueError:
                raise MeasurementFormatError(f"{path}:{lineno}: cannot parse {row[1]!r}") from None
            if isinstance(value, float) and not math.isfinite(value):
                raise MeasurementFormatError(f"{path}:{lineno}: non-finite value {row[1]!r}")
            values.append(value)
    if not values:
        raise MeasurementFormatError(f"{path}: no data rows")
    return values


def read_measurements(path) -> MeasurementSet:
    """Inverse of :func:`write_measurements`; sidecars are optional."""
    path = Path(path)
    z = _read_column(path, ("k", "z_seconds"), float)
    counts = None
    if _counts_path(path).exists():
        counts = _read_column(_counts_path(path), ("k", "reported_count"), int)
    seed = scenario = None
    mpath = _metadata_path(path)
    if mpath.exists():
        meta = json.loads(mpath.read_text())
        seed = meta.get("seed")
        if meta.get("scenario") is not None:
            scenario = RangingScenario.from_dict(meta["scenario"])
    return MeasurementSet(np.array(z), seed=seed, scenario=scenario,
                          reported_counts=None if counts is None else np.array(counts))
