"""Time discretization, units and scenario configuration.

A day is 144 ten-minute slots. Powers are kW (float64), energies kWh,
money US dollars.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

SLOTS_PER_DAY = 144
SLOTS_PER_HOUR = 6
MINUTES_PER_SLOT = 10
FORECAST_HORIZON = 3


class ScenarioError(ValueError):
    """Base class for configuration problems."""


class ConfigError(ScenarioError):
    """The configuration document could not be parsed."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class ValidationError(ScenarioError):
    """The configuration parsed but violates an invariant."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class Scheme(enum.Enum):
    WITHOUT_P2P = "WithoutP2P"
    CONVENTIONAL_P2P = "ConventionalP2P"
    PROPOSED_P2P = "ProposedP2P"

    @classmethod
    def parse(cls, value: str) -> "Scheme":
        key = str(value).strip().lower()
        for scheme, aliases in _SCHEME_ALIASES.items():
            if key in aliases:
                return scheme
        raise ValueError(f"unknown scheme {value!r}")

    @property
    def short(self) -> str:
        return _SCHEME_SHORT[self]


_SCHEME_ALIASES = {
    Scheme.WITHOUT_P2P: {"withoutp2p", "none", "without", "w/o"},
    Scheme.CONVENTIONAL_P2P: {"conventionalp2p", "conventional"},
    Scheme.PROPOSED_P2P: {"proposedp2p", "proposed"},
}
_SCHEME_SHORT = {
    Scheme.WITHOUT_P2P: "none",
    Scheme.CONVENTIONAL_P2P: "conventional",
    Scheme.PROPOSED_P2P: "proposed",
}


class RpvClass(enum.Enum):
    RPV1 = "RPV1"
    RPV2 = "RPV2"
    FIXED = "Fixed"

    @classmethod
    def parse(cls, value: str | int) -> "RpvClass":
        key = str(value).strip().lower().replace("#", "").replace(" ", "")
        table = {"rpv1": cls.RPV1, "1": cls.RPV1, "rpv2": cls.RPV2, "2": cls.RPV2, "fixed": cls.FIXED}
        if key not in table:
            raise ValueError(f"unknown rpv class {value!r}")
        return table[key]


@dataclass(frozen=True, order=True)
class TimeSlot:
    day: int
    slot_of_day: int

    def __post_init__(self):
        if self.day < 0:
            raise ValueError(f"day must be non-negative, got {self.day}")
        if not 0 <= self.slot_of_day < SLOTS_PER_DAY:
            raise ValueError(f"slot_of_day must be in [0, {SLOTS_PER_DAY}), got {self.slot_of_day}")

    @classmethod
    def from_absolute(cls, n: int) -> "TimeSlot":
        return cls(*divmod(int(n), SLOTS_PER_DAY))

    @property
    def absolute(self) -> int:
        return self.day * SLOTS_PER_DAY + self.slot_of_day

    @property
    def hour(self) -> int:
        return self.slot_of_day // SLOTS_PER_HOUR


def slot_of(slot: TimeSlot | int) -> int:
    """Slot-of-day index for either a ``TimeSlot`` or a bare integer."""
    if isinstance(slot, TimeSlot):
        return slot.slot_of_day
    s = int(slot)
    if not 0 <= s < SLOTS_PER_DAY:
        raise ValueError(f"slot_of_day must be in [0, {SLOTS_PER_DAY}), got {s}")
    return s


def slot_to_clock(slot: TimeSlot | int) -> tuple[int, int]:
    s = slot_of(slot)
    return s // SLOTS_PER_HOUR, (s % SLOTS_PER_HOUR) * MINUTES_PER_SLOT


def clock_to_slot(hour: int, minute: int = 0) -> int:
    return hour * SLOTS_PER_HOUR + minute // MINUTES_PER_SLOT


def slot_energy_kwh(power_kw):
    """Energy of a power held over one 10-minute slot."""
    return power_kw / 6


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation scenario.

    ``thermal``, ``ga`` and ``ev`` hold keyword overrides for the
    corresponding parameter objects and are validated when the run is
    assembled. Paths are resolved relative to the config file by
    :func:`load_scenario`.
    """

    scheme: Scheme = Scheme.PROPOSED_P2P
    cluster_count: int = 6
    houses_per_cluster: int = 3
    pw_max_kw: float = 9.0
    d_max_slots: int = 72
    horizon_k: int = 3
    rpv_class: RpvClass = RpvClass.RPV1
    fixed_peaks_kw: tuple[float, ...] | None = None
    use_published_peaks: bool = False
    seed: int = 0
    days: int = 1
    average_horizon_amount: bool = False
    allow_training: bool = False
    thermal: dict = field(default_factory=dict)
    ga: dict = field(default_factory=dict)
    ev: dict = field(default_factory=dict)
    smp_csv: str | None = None
    emission_csv: str | None = None
    ev_arrival_csv: str | None = None
    weather_csv: str | None = None
    reference_curve_csv: str | None = None
    forecaster_dir: str | None = None

    def __post_init__(self):
        if not self.pw_max_kw > 0:
            raise ValidationError("pw_max_kw", f"must be > 0, got {self.pw_max_kw}")
        if self.d_max_slots < 1:
            raise ValidationError("d_max_slots", f"must be >= 1, got {self.d_max_slots}")
        if not 1 <= self.horizon_k <= FORECAST_HORIZON:
            raise ValidationError("horizon_k", f"must be in [1, {FORECAST_HORIZON}], got {self.horizon_k}")
        if self.cluster_count < 1:
            raise ValidationError("cluster_count", "must be >= 1")
        if self.houses_per_cluster < 1:
            raise ValidationError("houses_per_cluster", "must be >= 1")
        if self.days < 1:
            raise ValidationError("days", f"must be >= 1, got {self.days}")
        if self.rpv_class is RpvClass.FIXED:
            peaks = self.fixed_peaks_kw
            if peaks is None or len(peaks) != self.cluster_count:
                raise ValidationError(
                    "fixed_peaks_kw", f"rpv_class Fixed needs {self.cluster_count} peak values"
                )
            # zero is accepted: a cluster without a PV system
            if any(not (p >= 0 and math.isfinite(p)) for p in peaks):
                raise ValidationError("fixed_peaks_kw", "peaks must be finite and non-negative")

    def replace(self, **changes) -> "ScenarioConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(changes)
        return ScenarioConfig(**data)


_FIELD_TYPES: dict[str, Any] = {
    "cluster_count": int,
    "houses_per_cluster": int,
    "pw_max_kw": float,
    "d_max_slots": int,
    "horizon_k": int,
    "seed": int,
    "days": int,
    "use_published_peaks": bool,
    "average_horizon_amount": bool,
    "allow_training": bool,
    "thermal": dict,
    "ga": dict,
    "ev": dict,
    "smp_csv": str,
    "emission_csv": str,
    "ev_arrival_csv": str,
    "weather_csv": str,
    "reference_curve_csv": str,
    "forecaster_dir": str,
}
_PATH_FIELDS = ("smp_csv", "emission_csv", "ev_arrival_csv", "weather_csv", "reference_curve_csv", "forecaster_dir")


def _coerce(name: str, value: Any, kind: Any) -> Any:
    if kind is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(name, f"expected true/false, got {value!r}")
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return int(value)
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        return float(value)
    if not isinstance(value, kind):
        raise ConfigError(name, f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def scenario_from_dict(doc: dict, base_dir: Path | None = None) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    kwargs: dict[str, Any] = {}
    for key, value in doc.items():
        if key == "scheme":
            try:
                kwargs["scheme"] = Scheme.parse(value)
            except ValueError as exc:
                raise ConfigError("scheme", str(exc)) from None
        elif key == "rpv_class":
            try:
                kwargs["rpv_class"] = RpvClass.parse(value)
            except ValueError as exc:
                raise ConfigError("rpv_class", str(exc)) from None
        elif key == "fixed_peaks_kw":
            if value is None:
                continue
            if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
            ):
                raise ConfigError("fixed_peaks_kw", "expected a list of numbers")
            kwargs["fixed_peaks_kw"] = tuple(float(v) for v in value)
        elif key in _FIELD_TYPES:
            if value is None and key in _PATH_FIELDS:
                continue
            kwargs[key] = _coerce(key, value, _FIELD_TYPES[key])
        else:
            raise ConfigError(key, "unknown configuration field")
    if base_dir is not None:
        for key in _PATH_FIELDS:
            if key in kwargs and not Path(kwargs[key]).is_absolute():
                kwargs[key] = str((base_dir / kwargs[key]).resolve())
    return ScenarioConfig(**kwargs)


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read a JSON scenario file; absent fields take their defaults."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(doc, base_dir=path.parent)


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    out: dict[str, Any] = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, enum.Enum):
            value = value.value
        elif isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out
