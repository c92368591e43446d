"""Run configuration: a YAML document with scenario, sweep and search-box sections.

Every key has a default matching the reference experiment (d = 30 m,
f0 = 100 MHz, rho = 1e-4, D = 10).  Noise levels may be given in seconds
(``3.3e-10``) or as a distance with an ``m`` suffix (``"0.1m"``, divided by c).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import yaml

from .estimators import Method
from .model import SPEED_OF_LIGHT, ClockModel, RangingScenario, samples_for_duration
from .montecarlo import SweepAxis, SweepSpec
from .optimize import SearchBox


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "scenario": {
        "distance_m": 30.0,
        "propagation_speed_m_s": SPEED_OF_LIGHT,
        "delay_counts": 10,
        "nominal_frequency_hz": 100e6,
        "skew": 1.0001,
        "noise_std": "0.1m",
        "num_samples": 1000,
        "duration_s": None,
    },
    "sweep": {
        "axis": "NOISE_STD",
        "values": ["0.01m", "0.03m", "0.1m", "0.3m", "1m", "3m"],
        "trials": 1000,
        "estimators": ["MOM_LINEARIZED", "TRADITIONAL", "COUNTER_BASED"],
        "base_seed": 0,
        "workers": 1,
    },
    "box": {
        "d_range_m": [0.0, 100.0],
        "w_range": [0.99, 1.01],
        "sigma_range_s": [1e-11, 1e-8],
        "grid_points_per_axis": 21,
        "top_candidates": 5,
    },
}

METHOD_ALIASES = {
    "amle": Method.AMLE,
    "mom": Method.MOM_LINEARIZED,
    "mom-quartic": Method.MOM_QUARTIC,
    "traditional": Method.TRADITIONAL,
    "counter": Method.COUNTER_BASED,
}


def parse_time(value, c: float = SPEED_OF_LIGHT) -> float:
    """Seconds from a number, ``"<x>s"`` or ``"<x>m"`` (meters over c)."""
    if isinstance(value, bool):
        raise ConfigError(f"not a time value: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    try:
        if text.endswith("m"):
            return float(text[:-1]) / c
        if text.endswith("s"):
            return float(text[:-1])
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse time value {value!r}") from None


def parse_method(name) -> Method:
    key = str(name)
    if key.lower() in METHOD_ALIASES:
        return METHOD_ALIASES[key.lower()]
    try:
        return Method(key.upper())
    except ValueError:
        raise ConfigError(f"unknown estimator {name!r}") from None


def _merge(defaults: dict, given: dict, where: str) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {type(given).__name__}")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown key(s) {', '.join(unknown)}")
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if isinstance(defaults[key], dict):
            out[key] = _merge(defaults[key], value or {}, f"{where}.{key}" if where else key)
        else:
            out[key] = value
    return out


@dataclass
class RunConfig:
    raw: dict

    @classmethod
    def from_dict(cls, data: dict | None) -> "RunConfig":
        cfg = cls(_merge(DEFAULTS, data or {}, ""))
        # build everything once so errors surface before any run
        cfg.scenario()
        cfg.sweep_spec()
        cfg.search_box()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        if path is None:
            return cls.from_dict({})
        try:
            data = yaml.safe_load(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from None
        return cls.from_dict(data)

    def scenario(self) -> RangingScenario:
        s = self.raw["scenario"]
        c = float(s["propagation_speed_m_s"])
        try:
            clock = ClockModel(float(s["nominal_frequency_hz"]), float(s["skew"]))
            scenario = RangingScenario(
                distance_m=float(s["distance_m"]),
                delay_counts=int(s["delay_counts"]),
                clock=clock,
                noise_std_s=parse_time(s["noise_std"], c),
                num_samples=int(s["num_samples"]),
                propagation_speed_m_s=c,
            )
            if s["duration_s"] is not None:
                scenario = scenario.replace(num_samples=samples_for_duration(scenario, float(s["duration_s"])))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"scenario: {exc}") from None
        return scenario

    def sweep_spec(self) -> SweepSpec:
        s = self.raw["sweep"]
        scenario = self.scenario()
        try:
            axis = SweepAxis(str(s["axis"]).upper())
            if axis is SweepAxis.NOISE_STD:
                values = [parse_time(v, scenario.propagation_speed_m_s) for v in s["values"]]
            else:
                values = [int(v) for v in s["values"]]
            return SweepSpec(
                scenario_template=scenario,
                sweep_axis=axis,
                axis_values=tuple(values),
                trials=int(s["trials"]),
                estimators=tuple(parse_method(m) for m in s["estimators"]),
                base_seed=int(s["base_seed"]),
                box=self.search_box(),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"sweep: {exc}") from None

    @property
    def workers(self) -> int:
        return int(self.raw["sweep"]["workers"])

    @property
    def top_candidates(self) -> int:
        return int(self.raw["box"]["top_candidates"])

    def search_box(self) -> SearchBox:
        b = self.raw["box"]
        try:
            return SearchBox(
                tuple(b["d_range_m"]),
                tuple(b["w_range"]),
                tuple(parse_time(v) for v in b["sigma_range_s"]),
                int(b["grid_points_per_axis"]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"box: {exc}") from None
