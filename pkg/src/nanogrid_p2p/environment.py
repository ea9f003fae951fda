"""PV production per cluster and outdoor weather."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._io import read_rows
from .core import SLOTS_PER_DAY, SLOTS_PER_HOUR, RpvClass, TimeSlot, slot_of

REFERENCE_PEAK_KW = 2.0

RPV_RANGES_KW = {
    RpvClass.RPV1: (3.0, 16.0),
    RpvClass.RPV2: (2.0, 11.0),
}

# Cluster peaks of the published single realisation, clusters 1..6.
PUBLISHED_PEAKS_KW = {
    RpvClass.RPV1: (2.23, 5.87, 8.1, 10.34, 13.97, 16.0),
    RpvClass.RPV2: (1.72, 3.84, 5.47, 7.49, 9.01, 10.24),
}

OUTDOOR_CO2_PPM = 550.0


@dataclass(frozen=True)
class PvSystemSpec:
    peak_kw: float = REFERENCE_PEAK_KW
    sunrise_slot: int = 36
    sunset_slot: int = 120
    peak_slot: int = 78

    def __post_init__(self):
        if not self.sunrise_slot < self.peak_slot < self.sunset_slot:
            raise ValueError("need sunrise_slot < peak_slot < sunset_slot")
        if not self.peak_kw > 0:
            raise ValueError("peak_kw must be > 0")


REFERENCE_SPEC = PvSystemSpec()


def pv_reference(slot: TimeSlot | int, spec: PvSystemSpec = REFERENCE_SPEC) -> float:
    """Reference production curve in kW.

    Rises as a quarter sine from sunrise to the peak slot and falls as a
    quarter sine to sunset; with the default symmetric anchors this is the
    half sine ``peak * sin(pi * (s - sunrise) / (sunset - sunrise))``.
    """
    s = slot_of(slot)
    if s <= spec.sunrise_slot or s >= spec.sunset_slot:
        return 0.0
    if s <= spec.peak_slot:
        phase = (s - spec.sunrise_slot) / (spec.peak_slot - spec.sunrise_slot)
    else:
        phase = (spec.sunset_slot - s) / (spec.sunset_slot - spec.peak_slot)
    return spec.peak_kw * math.sin(0.5 * math.pi * phase)


def pv_production(slot: TimeSlot | int, peak_kw: float, spec: PvSystemSpec = REFERENCE_SPEC) -> float:
    if peak_kw < 0:
        raise ValueError("peak_kw must be non-negative")
    return (peak_kw / spec.peak_kw) * pv_reference(slot, spec)


@dataclass(frozen=True)
class ReferenceCurve:
    """Tabulated 144-slot reference curve; scaled by ``peak / reference_peak``."""

    kw: np.ndarray
    reference_peak_kw: float = REFERENCE_PEAK_KW

    def __post_init__(self):
        arr = np.asarray(self.kw, dtype=float)
        if arr.shape != (SLOTS_PER_DAY,):
            raise ValueError(f"reference curve needs {SLOTS_PER_DAY} values")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("reference curve values must be finite and non-negative")
        object.__setattr__(self, "kw", arr)

    @classmethod
    def default(cls, spec: PvSystemSpec = REFERENCE_SPEC) -> "ReferenceCurve":
        return cls(np.array([pv_reference(s, spec) for s in range(SLOTS_PER_DAY)]), spec.peak_kw)

    def profile(self, peak_kw: float) -> np.ndarray:
        return self.kw * (peak_kw / self.reference_peak_kw)


def load_reference_curve(path: str | Path) -> ReferenceCurve:
    """Read ``slot, kw`` rows. The curve maximum is taken as its reference peak."""
    values = np.zeros(SLOTS_PER_DAY)
    for row in read_rows(path, ("slot", "kw")):
        values[int(row["slot"])] = float(row["kw"])
    return ReferenceCurve(values, float(values.max()) if values.max() > 0 else REFERENCE_PEAK_KW)


def draw_cluster_peaks(rpv: RpvClass, count: int, rng: np.random.Generator) -> list[float]:
    """Uniform peak draws, sorted so cluster 1 has the smallest system."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if rpv not in RPV_RANGES_KW:
        raise ValueError(f"{rpv} has no peak distribution")
    lo, hi = RPV_RANGES_KW[rpv]
    return sorted(float(v) for v in rng.uniform(lo, hi, size=count))


def default_outdoor_temperature(slot: int) -> float:
    """Synthetic summer day: 23 C at 04:00 rising to 33 C at 14:00.

    Cosine rise over the 10 h from 04:00 to 14:00 and cosine fall over the
    remaining 14 h back to 04:00.
    """
    h = slot / SLOTS_PER_HOUR
    if 4.0 <= h <= 14.0:
        return 28.0 - 5.0 * math.cos(math.pi * (h - 4.0) / 10.0)
    since_peak = (h - 14.0) % 24.0
    return 28.0 + 5.0 * math.cos(math.pi * since_peak / 14.0)


@dataclass(frozen=True)
class WeatherProfile:
    outdoor_temp_c: np.ndarray = field(
        default_factory=lambda: np.array([default_outdoor_temperature(s) for s in range(SLOTS_PER_DAY)])
    )
    outdoor_co2_ppm: float = OUTDOOR_CO2_PPM

    def __post_init__(self):
        arr = np.asarray(self.outdoor_temp_c, dtype=float)
        if arr.shape != (SLOTS_PER_DAY,) or not np.all(np.isfinite(arr)):
            raise ValueError(f"outdoor_temp_c needs {SLOTS_PER_DAY} finite values")
        if not self.outdoor_co2_ppm > 0:
            raise ValueError("outdoor_co2_ppm must be > 0")
        object.__setattr__(self, "outdoor_temp_c", arr)


def outdoor_temperature(slot: TimeSlot | int, profile: WeatherProfile | None = None) -> float:
    profile = profile or WeatherProfile()
    return float(profile.outdoor_temp_c[slot_of(slot)])


def load_weather(path: str | Path, co2_ppm: float = OUTDOOR_CO2_PPM) -> WeatherProfile:
    temps = np.full(SLOTS_PER_DAY, np.nan)
    for row in read_rows(path, ("slot", "temp_c")):
        temps[int(row["slot"])] = float(row["temp_c"])
    if np.isnan(temps).any():
        missing = int(np.flatnonzero(np.isnan(temps))[0])
        raise ValueError(f"{path}: no temperature for slot {missing}")
    return WeatherProfile(temps, co2_ppm)

