"""Room temperature / CO2 dynamics and thermostat control.

All functions accept scalars or numpy arrays of rooms; the simulator steps
every room of a cluster as one ``(houses, 4)`` array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

AC_KW = 1.2
FAN_KW = 0.06
HEATER_KW = 1.16

OCCUPIED_TARGET_C = 23.0
VACANT_TARGET_C = 25.0
CO2_TARGET_PPM = 500.0


@dataclass(frozen=True)
class RoomState:
    temp_c: float | np.ndarray
    co2_ppm: float | np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.temp_c)) or not np.all(np.isfinite(self.co2_ppm)):
            raise ValueError("room state must be finite")
        if np.any(np.asarray(self.co2_ppm) <= 0):
            raise ValueError("co2_ppm must be > 0")


@dataclass(frozen=True)
class ThermalParams:
    # leak 0.02/slot is a ~8 h envelope time constant
    leak_coeff: float = 0.02
    cool_delta_c: float = 0.5
    heat_delta_c: float = 0.5
    deadband_c: float = 0.5
    fan_vent_coeff: float = 0.3
    occupant_co2_ppm_per_slot: float = 15.0

    def __post_init__(self):
        for name in ("leak_coeff", "cool_delta_c", "heat_delta_c", "deadband_c",
                     "fan_vent_coeff", "occupant_co2_ppm_per_slot"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.leak_coeff >= 1 or self.fan_vent_coeff >= 1:
            raise ValueError("leak_coeff and fan_vent_coeff must be < 1")


@dataclass(frozen=True)
class HvacCommand:
    cool_on: bool | np.ndarray
    heat_on: bool | np.ndarray
    fan_on: bool | np.ndarray

    def __post_init__(self):
        if np.any(np.logical_and(self.cool_on, self.heat_on)):
            raise ValueError("cooling and heating cannot both be on in one room")

    @property
    def power_kw(self):
        return AC_KW * np.asarray(self.cool_on) + HEATER_KW * np.asarray(self.heat_on) + FAN_KW * np.asarray(self.fan_on)


def hvac_control(state: RoomState, occupied, params: ThermalParams = ThermalParams()) -> HvacCommand:
    target = np.where(occupied, OCCUPIED_TARGET_C, VACANT_TARGET_C)
    cool = state.temp_c > target + params.deadband_c
    heat = state.temp_c < target - params.deadband_c
    fan = state.co2_ppm > CO2_TARGET_PPM
    if np.ndim(cool) == 0:
        return HvacCommand(bool(cool), bool(heat), bool(fan))
    return HvacCommand(cool, heat, fan)


def step_thermal(state: RoomState, cmd: HvacCommand, t_out: float, params: ThermalParams = ThermalParams()):
    """Next-slot room temperature (first-order envelope plus actuator steps)."""
    return (
        state.temp_c
        + params.leak_coeff * (t_out - state.temp_c)
        - params.cool_delta_c * np.asarray(cmd.cool_on, dtype=float)
        + params.heat_delta_c * np.asarray(cmd.heat_on, dtype=float)
    )


def step_co2(state: RoomState, fan_on, occupied, outdoor_ppm: float, params: ThermalParams = ThermalParams()):
    return (
        state.co2_ppm
        + params.occupant_co2_ppm_per_slot * np.asarray(occupied, dtype=float)
        + params.fan_vent_coeff * (outdoor_ppm - state.co2_ppm) * np.asarray(fan_on, dtype=float)
    )
