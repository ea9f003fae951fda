"""Time-of-use grid tariff, P2P price curve, cost ledger and daily reports."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._io import read_rows
from .core import SLOTS_PER_DAY, SLOTS_PER_HOUR, TimeSlot, slot_of

# (start hour, end hour, $/kWh); 23:00-09:00 wraps midnight
DR_TIME_ZONES = (
    (0, 9, 0.05),
    (9, 10, 0.10),
    (10, 12, 0.18),
    (12, 13, 0.10),
    (13, 17, 0.18),
    (17, 23, 0.10),
    (23, 24, 0.05),
)
DEFAULT_SMP = 0.10


@dataclass(frozen=True)
class Tariff:
    rate: np.ndarray = field(default_factory=lambda: dr_program_rates())

    def __post_init__(self):
        arr = np.asarray(self.rate, dtype=float)
        if arr.shape != (SLOTS_PER_DAY,) or np.any(arr < 0):
            raise ValueError(f"tariff needs {SLOTS_PER_DAY} non-negative rates")
        object.__setattr__(self, "rate", arr)


def dr_program_rates() -> np.ndarray:
    rates = np.empty(SLOTS_PER_DAY)
    for start, end, price in DR_TIME_ZONES:
        rates[start * SLOTS_PER_HOUR:end * SLOTS_PER_HOUR] = price
    return rates


@dataclass(frozen=True)
class SmpCurve:
    price: np.ndarray = field(default_factory=lambda: np.full(SLOTS_PER_DAY, DEFAULT_SMP))

    def __post_init__(self):
        arr = np.asarray(self.price, dtype=float)
        if arr.shape != (SLOTS_PER_DAY,) or np.any(arr < 0):
            raise ValueError(f"SMP curve needs {SLOTS_PER_DAY} non-negative prices")
        object.__setattr__(self, "price", arr)

    def at(self, slot: TimeSlot | int) -> float:
        return float(self.price[slot_of(slot)])


def load_smp(path: str | Path) -> SmpCurve:
    prices = np.full(SLOTS_PER_DAY, np.nan)
    for row in read_rows(path, ("slot", "usd_per_kwh")):
        prices[int(row["slot"])] = float(row["usd_per_kwh"])
    if np.isnan(prices).any():
        raise ValueError(f"{path}: every slot 0-143 needs a price")
    return SmpCurve(prices)


DEFAULT_TARIFF = Tariff()
DEFAULT_SMP_CURVE = SmpCurve()


def dr_rate(slot: TimeSlot | int, tariff: Tariff = DEFAULT_TARIFF) -> float:
    return float(tariff.rate[slot_of(slot)])


def interval_cost(split, traded_kw_signed: float, slot: TimeSlot | int,
                  tariff: Tariff = DEFAULT_TARIFF, smp: SmpCurve = DEFAULT_SMP_CURVE) -> tuple[float, float]:
    """(grid cost, trade settlement) in $ for one slot; self-supplied PV is free."""
    s = slot_of(slot)
    grid_usd = split.grid_kw * tariff.rate[s] / 6
    trade_usd = traded_kw_signed * smp.price[s] / 6
    return float(grid_usd), float(trade_usd)


class CostLedger:
    """Per-cluster, per-slot grid cost and trade settlement."""

    def __init__(self, clusters: int, slots: int):
        self.clusters = clusters
        self.slots = slots
        self.grid_usd = np.zeros((clusters, slots))
        self.trade_usd = np.zeros((clusters, slots))
        self.filled = np.zeros((clusters, slots), dtype=bool)

    def record(self, cluster: int, abs_slot: int, grid_usd: float, trade_usd: float) -> None:
        self.grid_usd[cluster, abs_slot] = grid_usd
        self.trade_usd[cluster, abs_slot] = trade_usd
        self.filled[cluster, abs_slot] = True

    @property
    def days(self) -> float:
        return self.slots / SLOTS_PER_DAY

    def total(self, cluster: int, start: int = 0, stop: int | None = None) -> float:
        stop = self.slots if stop is None else stop
        return math.fsum(self.grid_usd[cluster, start:stop]) + math.fsum(self.trade_usd[cluster, start:stop])

    def daily_totals(self) -> np.ndarray:
        """Array (clusters, whole days) of daily cost in $."""
        n_days = self.slots // SLOTS_PER_DAY
        return np.array([
            [self.total(c, d * SLOTS_PER_DAY, (d + 1) * SLOTS_PER_DAY) for d in range(n_days)]
            for c in range(self.clusters)
        ]).reshape(self.clusters, n_days)


@dataclass
class DailyReport:
    scheme: str
    rpv_class: str
    cluster_cost_usd: list[float]
    warnings: list[str] = field(default_factory=list)

    @property
    def total_usd(self) -> float:
        return math.fsum(self.cluster_cost_usd)

    @property
    def average_usd(self) -> float:
        return self.total_usd / len(self.cluster_cost_usd)

    def rows(self) -> list[tuple[str, str, str, float]]:
        out = [(self.scheme, self.rpv_class, str(c + 1), v) for c, v in enumerate(self.cluster_cost_usd)]
        out.append((self.scheme, self.rpv_class, "avg", self.average_usd))
        out.append((self.scheme, self.rpv_class, "total", self.total_usd))
        return out

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            for w in self.warnings:
                fh.write(f"# warning: {w}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["scheme", "rpv_class", "cluster", "daily_cost_usd"])
            for scheme, rpv, cluster, cost in self.rows():
                writer.writerow([scheme, rpv, cluster, repr(float(cost))])


def daily_report(ledger: CostLedger, scheme: str = "", rpv_class: str = "") -> DailyReport:
    """Mean daily cost per cluster plus the average and total rows.

    A ledger that does not cover whole days, or has unrecorded slots, gets a
    partial-data warning.
    """
    warnings = []
    if ledger.slots % SLOTS_PER_DAY:
        warnings.append(f"ledger covers {ledger.slots} slots, not a whole number of days")
    if not ledger.filled.all():
        warnings.append(f"{int((~ledger.filled).sum())} cluster-slots have no entry")
    days = max(ledger.days, 1e-12)
    costs = [ledger.total(c) / days for c in range(ledger.clusters)]
    return DailyReport(scheme, rpv_class, costs, warnings)


def read_report(path: str | Path) -> DailyReport:
    rows = [r for r in read_rows_skipping_comments(path)]
    clusters = [r for r in rows if r["cluster"] not in ("avg", "total")]
    clusters.sort(key=lambda r: int(r["cluster"]))
    scheme = rows[0]["scheme"] if rows else ""
    rpv = rows[0]["rpv_class"] if rows else ""
    return DailyReport(scheme, rpv, [float(r["daily_cost_usd"]) for r in clusters])


def read_rows_skipping_comments(path: str | Path):
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    yield from csv.DictReader(lines)
