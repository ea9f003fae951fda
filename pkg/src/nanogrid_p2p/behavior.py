"""Resident mobility, appliance requests and EV charging sessions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ._io import read_rows
from .core import SLOTS_PER_DAY, TimeSlot, slot_of

ROOMS = 4
EV_INDEX = 13


class ApplianceKind(enum.Enum):
    HVAC_NON_FLEXIBLE = "HvacNonFlexible"
    NON_FLEXIBLE = "NonFlexible"
    FLEXIBLE = "Flexible"


@dataclass(frozen=True)
class ApplianceSpec:
    index: int
    name: str
    kind: ApplianceKind
    power_kw: float
    rooms: frozenset[int]
    duration_slots: int = 1

    def __post_init__(self):
        if not 1 <= self.index <= 12:
            raise ValueError("appliance index must be in 1..12")
        if (self.kind is ApplianceKind.HVAC_NON_FLEXIBLE) != (self.index <= 3):
            raise ValueError("only indices 1-3 are HVAC appliances")
        if self.duration_slots < 1:
            raise ValueError("duration_slots must be >= 1")


def default_catalog() -> list[ApplianceSpec]:
    """Table of the twelve household appliances with their power ratings."""
    H, N, F = ApplianceKind.HVAC_NON_FLEXIBLE, ApplianceKind.NON_FLEXIBLE, ApplianceKind.FLEXIBLE
    every = frozenset({1, 2, 3, 4})
    return [
        ApplianceSpec(1, "air-conditioner", H, 1.2, every),
        ApplianceSpec(2, "electric fan", H, 0.06, every),
        ApplianceSpec(3, "heater", H, 1.16, every),
        ApplianceSpec(4, "computer", N, 0.255, frozenset({3}), 6),
        ApplianceSpec(5, "tv", N, 0.13, frozenset({1}), 6),
        ApplianceSpec(6, "audio", F, 0.05, frozenset({3}), 3),
        ApplianceSpec(7, "washing machine", F, 0.242, frozenset({2}), 6),
        ApplianceSpec(8, "vacuum cleaner", F, 1.07, frozenset({3}), 1),
        ApplianceSpec(9, "iron", F, 1.23, frozenset({1}), 1),
        ApplianceSpec(10, "microwave oven", F, 1.04, frozenset({4}), 1),
        ApplianceSpec(11, "rice cooker", F, 1.03, frozenset({4}), 1),
        ApplianceSpec(12, "hair dryer", F, 1.0, frozenset({2}), 1),
    ]


def default_adjacency() -> dict[int, tuple[int, ...]]:
    # room 1 reaches every room; rooms 2-4 may stay, go to room 1 or to the next room
    return {1: (1, 2, 3, 4), 2: (1, 2, 3), 3: (1, 3, 4), 4: (1, 2, 4)}


def transition_from_adjacency(adjacency: dict[int, tuple[int, ...]]) -> np.ndarray:
    P = np.zeros((ROOMS, ROOMS))
    for room, reachable in adjacency.items():
        for nxt in reachable:
            P[room - 1, nxt - 1] = 1.0 / len(reachable)
    return P


@dataclass(frozen=True)
class MobilityModel:
    """Markov chain over the four rooms; ``transition[i, j]`` is P(i+1 -> j+1)."""

    transition: np.ndarray = field(default_factory=lambda: transition_from_adjacency(default_adjacency()))

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        if P.shape != (ROOMS, ROOMS):
            raise ValueError("transition must be 4x4")
        if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, rtol=0, atol=1e-9):
            raise ValueError("every transition row must be a probability distribution")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "_cdf", np.cumsum(P, axis=1))

    def stationary(self) -> np.ndarray:
        w, v = np.linalg.eig(self.transition.T)
        pi = np.real(v[:, np.argmin(np.abs(w - 1))])
        return pi / pi.sum()


def step_resident(room: int, model: MobilityModel, rng: np.random.Generator) -> int:
    """Next room of the resident, drawn from row ``room`` of the chain."""
    if not 1 <= room <= ROOMS:
        raise ValueError(f"room must be in 1..{ROOMS}")
    cdf = model._cdf[room - 1]
    j = int(np.searchsorted(cdf, rng.random(), side="right"))
    # guard against the last cdf entry rounding below 1
    j = min(j, ROOMS - 1)
    while model.transition[room - 1, j] == 0.0:
        j -= 1
    return j + 1


@dataclass(frozen=True)
class EmissionProfile:
    """Per-slot request probability of each appliance, shape (13, 144).

    Row ``i`` belongs to appliance index ``i``; row 0 and the HVAC rows are
    unused.
    """

    probability: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probability, dtype=float)
        if p.shape != (EV_INDEX, SLOTS_PER_DAY):
            raise ValueError(f"probability must have shape ({EV_INDEX}, {SLOTS_PER_DAY})")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("emission probabilities must lie in [0, 1]")
        object.__setattr__(self, "probability", p)

    @classmethod
    def zeros(cls) -> "EmissionProfile":
        return cls(np.zeros((EV_INDEX, SLOTS_PER_DAY)))

    def with_probability(self, index: int, value: float | np.ndarray) -> "EmissionProfile":
        p = self.probability.copy()
        p[index, :] = value
        return EmissionProfile(p)


def load_emission_profiles(path: str | Path) -> EmissionProfile:
    """Read ``appliance_index, slot, probability`` rows; unlisted entries are 0."""
    p = np.zeros((EV_INDEX, SLOTS_PER_DAY))
    for row in read_rows(path, ("appliance_index", "slot", "probability")):
        idx, slot = int(row["appliance_index"]), int(row["slot"])
        if not 1 <= idx <= 12 or not 0 <= slot < SLOTS_PER_DAY:
            raise ValueError(f"{path}: bad row {row}")
        p[idx, slot] = float(row["probability"])
    return EmissionProfile(p)


def default_emission_profiles() -> EmissionProfile:
    with resources.as_file(resources.files(__package__) / "data" / "emission_profiles.csv") as path:
        return load_emission_profiles(path)


@dataclass(frozen=True)
class EvModel:
    capacity_kwh: float = 15.0
    charge_rate_kw: float = 3.0
    efficiency: float = 0.9
    initial_soc: float = 0.2
    arrival_prob: np.ndarray = field(default_factory=lambda: default_ev_arrival())

    def __post_init__(self):
        if not 0 <= self.initial_soc < 1:
            raise ValueError("initial_soc must be in [0, 1)")
        if not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must be in (0, 1]")
        if not (self.capacity_kwh > 0 and self.charge_rate_kw > 0):
            raise ValueError("capacity and charge rate must be positive")
        arr = np.asarray(self.arrival_prob, dtype=float)
        if arr.shape != (24,) or np.any(arr < 0) or np.any(arr > 1):
            raise ValueError("arrival_prob needs 24 probabilities in [0, 1]")
        object.__setattr__(self, "arrival_prob", arr)

    @property
    def energy_to_store_kwh(self) -> float:
        return (1.0 - self.initial_soc) * self.capacity_kwh

    @property
    def stored_per_slot_kwh(self) -> float:
        return self.charge_rate_kw * self.efficiency / 6


def load_ev_arrival(path: str | Path) -> np.ndarray:
    prob = np.full(24, np.nan)
    for row in read_rows(path, ("hour", "probability")):
        prob[int(row["hour"])] = float(row["probability"])
    if np.isnan(prob).any():
        raise ValueError(f"{path}: every hour 0-23 needs a probability")
    return prob


def default_ev_arrival() -> np.ndarray:
    with resources.as_file(resources.files(__package__) / "data" / "ev_arrival.csv") as path:
        return load_ev_arrival(path)


def ev_required_slots(ev: EvModel) -> int:
    ratio = ev.energy_to_store_kwh / ev.stored_per_slot_kwh
    # tolerate float noise on exact divisions (e.g. 1 kWh at 1 kWh/slot)
    return max(1, math.ceil(ratio - 1e-9))


@dataclass(slots=True)
class LoadRequest:
    """A demand waiting for (or running under) the scheduler.

    EV sessions carry ``deadline_slot`` (absolute slot by which charging must
    be complete) and ``energy_kwh`` (energy still to be stored).
    """

    appliance_index: int
    house: int
    issued_slot: TimeSlot
    remaining_slots: int
    accumulated_delay_slots: int = 0
    power_kw: float = 0.0
    immediate: bool = False
    deadline_slot: int | None = None
    energy_kwh: float = 0.0
    charge_rate_kw: float = 0.0
    efficiency: float = 1.0

    @property
    def is_ev(self) -> bool:
        return self.appliance_index == EV_INDEX

    def demand_kw(self) -> float:
        """Power drawn if this request runs in the current slot."""
        if self.is_ev:
            return min(self.charge_rate_kw, self.energy_kwh / self.efficiency * 6)
        return self.power_kw


def sample_requests(
    slot: TimeSlot | int,
    room: int,
    profiles: EmissionProfile,
    catalog: list[ApplianceSpec],
    rng: np.random.Generator,
    house: int = 0,
) -> list[LoadRequest]:
    """Requests emitted in ``slot`` by the appliances in the resident's room.

    One uniform draw per catalog entry is consumed on every call, so the
    stream position never depends on which requests fire.
    """
    s = slot_of(slot)
    ts = slot if isinstance(slot, TimeSlot) else TimeSlot(0, s)
    draws = rng.random(len(catalog))
    out = []
    for u, item in zip(draws, catalog):
        if item.kind is ApplianceKind.HVAC_NON_FLEXIBLE or room not in item.rooms:
            continue
        if u < profiles.probability[item.index, s]:
            out.append(
                LoadRequest(
                    appliance_index=item.index,
                    house=house,
                    issued_slot=ts,
                    remaining_slots=item.duration_slots,
                    power_kw=item.power_kw,
                    immediate=item.kind is ApplianceKind.NON_FLEXIBLE,
                )
            )
    return out


def sample_ev_arrival(hour: int, ev: EvModel, already_charging: bool, rng: np.random.Generator) -> bool:
    """Whether an EV plugs in this hour. Always consumes one draw."""
    if not 0 <= hour < 24:
        raise ValueError("hour must be in [0, 24)")
    u = rng.random()
    return (not already_charging) and u < ev.arrival_prob[hour]


def new_ev_session(ev: EvModel, house: int, slot: TimeSlot, d_max_slots: int) -> LoadRequest:
    return LoadRequest(
        appliance_index=EV_INDEX,
        house=house,
        issued_slot=slot,
        remaining_slots=ev_required_slots(ev),
        power_kw=ev.charge_rate_kw,
        deadline_slot=slot.absolute + d_max_slots,
        energy_kwh=ev.energy_to_store_kwh,
        charge_rate_kw=ev.charge_rate_kw,
        efficiency=ev.efficiency,
    )
