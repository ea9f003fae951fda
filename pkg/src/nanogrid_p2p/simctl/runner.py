"""Scenario runs, the scheme/RPV matrix, dataset generation and output files."""

from __future__ import annotations

import csv
import json
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from ..accounting import DailyReport, daily_report, read_report
from ..core import SLOTS_PER_DAY, RpvClass, ScenarioConfig, Scheme, scenario_to_dict
from ..forecaster import ModelStore, TrainConfig, read_dataset, train, write_dataset
from .engine import Inputs, Simulation, SimulationResult

log = logging.getLogger(__name__)

OUTPUT_FILES = {
    "trade_log": "trade_log.csv",
    "schedule_log": "schedule_log.csv",
    "power": "power.csv",
    "report": "report.csv",
    "ev_arrivals": "ev_arrivals.csv",
    "audit": "audit.csv",
    "metadata": "run.json",
}

TRADE_HEADER = ["day", "slot", "cluster", "role", "posted_kw", "cleared_kw", "smp", "settlement_usd"]
SCHEDULE_HEADER = ["day", "slot", "cluster", "appliance_index", "action", "accumulated_delay"]
POWER_HEADER = ["day", "slot", "cluster", "pw_load_kw", "pv_self_used_kw", "pv_traded_kw", "grid_kw",
                "hvac_kw", "ev_kw", "total_delay_slots"]


def artifact_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass
class RunOutputs:
    run_dir: Path
    paths: dict[str, Path]
    seed: int
    scheme: Scheme
    rpv_class: RpvClass
    version: str
    report: DailyReport
    result: SimulationResult | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.result is None or not self.result.violations


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_outputs(result: SimulationResult, out_dir: Path) -> dict[str, Path]:
    """Write every artifact of a run into ``out_dir``.

    Files are first written to a scratch directory next to ``out_dir`` and
    moved in only when all of them succeeded.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    scratch = Path(tempfile.mkdtemp(prefix=".partial-", dir=out_dir))
    try:
        _write_csv(scratch / OUTPUT_FILES["trade_log"], TRADE_HEADER, (
            (d, s, c, role, _fmt(posted), _fmt(cleared), _fmt(smp), _fmt(usd))
            for d, s, c, role, posted, cleared, smp, usd in result.trades
        ))
        _write_csv(scratch / OUTPUT_FILES["schedule_log"], SCHEDULE_HEADER, result.schedule)
        rec = result.records
        C, N = rec.grid.shape
        _write_csv(scratch / OUTPUT_FILES["power"], POWER_HEADER, (
            (n // SLOTS_PER_DAY, n % SLOTS_PER_DAY, c + 1, _fmt(rec.pw_load[c, n]), _fmt(rec.pv_self[c, n]),
             _fmt(rec.pv_traded[c, n]), _fmt(rec.grid[c, n]), _fmt(rec.hvac[c, n]), _fmt(rec.ev[c, n]),
             int(rec.total_delay[c, n]))
            for n in range(N) for c in range(C)
        ))
        _write_csv(scratch / OUTPUT_FILES["ev_arrivals"], ["day", "slot", "cluster", "house"], (
            (a // SLOTS_PER_DAY, a % SLOTS_PER_DAY, c + 1, h + 1) for a, c, h in result.ev_arrivals
        ))
        _write_csv(scratch / OUTPUT_FILES["audit"], ["kind", "day", "slot", "cluster", "detail"], (
            (v.kind, v.abs_slot // SLOTS_PER_DAY, v.abs_slot % SLOTS_PER_DAY, v.cluster + 1, v.detail)
            for v in result.violations
        ))
        report = daily_report(result.ledger, cfg.scheme.value, cfg.rpv_class.value)
        report.write_csv(scratch / OUTPUT_FILES["report"])
        meta = {
            "seed": cfg.seed,
            "scheme": cfg.scheme.value,
            "rpv_class": cfg.rpv_class.value,
            "version": artifact_version(),
            "peaks_kw": result.peaks_kw,
            "violations": len(result.violations),
            "config": scenario_to_dict(cfg),
        }
        (scratch / OUTPUT_FILES["metadata"]).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        paths = {}
        for key, name in OUTPUT_FILES.items():
            os.replace(scratch / name, out_dir / name)
            paths[key] = out_dir / name
        return paths
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def simulate(cfg: ScenarioConfig, models: ModelStore | None = None, inputs: Inputs | None = None) -> SimulationResult:
    return Simulation(cfg, inputs=inputs, models=models).run()


def run(cfg: ScenarioConfig, out_dir: str | Path | None = None, models: ModelStore | None = None,
        inputs: Inputs | None = None) -> RunOutputs:
    """Simulate one scenario; files are written when ``out_dir`` is given."""
    result = simulate(cfg, models, inputs)
    report = daily_report(result.ledger, cfg.scheme.value, cfg.rpv_class.value)
    paths: dict[str, Path] = {}
    run_dir = Path(out_dir) if out_dir is not None else Path()
    if out_dir is not None:
        paths = write_outputs(result, run_dir)
    for v in result.violations[:5]:
        log.warning("constraint violation (%s) at slot %d cluster %d: %s", v.kind, v.abs_slot, v.cluster + 1, v.detail)
    return RunOutputs(run_dir, paths, cfg.seed, cfg.scheme, cfg.rpv_class, artifact_version(), report, result)


MATRIX_SCHEMES = (Scheme.WITHOUT_P2P, Scheme.CONVENTIONAL_P2P, Scheme.PROPOSED_P2P)
MATRIX_RPV = (RpvClass.RPV1, RpvClass.RPV2)


def matrix_configs(base: ScenarioConfig, seeds: list[int] | None = None) -> list[ScenarioConfig]:
    seeds = [base.seed] if seeds is None else list(seeds)
    return [base.replace(scheme=sch, rpv_class=rpv, seed=s)
            for s in seeds for rpv in MATRIX_RPV for sch in MATRIX_SCHEMES]


def run_dir_name(cfg: ScenarioConfig, with_seed: bool = False) -> str:
    name = f"{cfg.scheme.short}_{cfg.rpv_class.value.lower()}"
    return f"{name}_seed{cfg.seed}" if with_seed else name


def run_matrix(base: ScenarioConfig, out_dir: str | Path | None = None, seeds: list[int] | None = None,
               models: ModelStore | None = None) -> list[RunOutputs]:
    """All three schemes under both RPV classes with shared seeds.

    Behaviour streams depend only on (seed, cluster, house), so every
    scheme sees the same residents, requests and EV arrivals.
    """
    outs = []
    many = seeds is not None and len(seeds) > 1
    for cfg in matrix_configs(base, seeds):
        target = None if out_dir is None else Path(out_dir) / run_dir_name(cfg, many)
        outs.append(run(cfg, target, models))
    return outs


def collect_dataset(cfg: ScenarioConfig, days: int) -> tuple[list[float], np.ndarray, np.ndarray]:
    """Per-cluster unscheduled load and PV from a no-trading run: (peaks, load, pv)."""
    res = simulate(cfg.replace(scheme=Scheme.WITHOUT_P2P, days=days))
    return res.peaks_kw, res.records.unscheduled, res.records.pv


def gen_dataset(cfg: ScenarioConfig, days: int, out_dir: str | Path) -> list[Path]:
    """Write one ``slot_abs, load_kw, pv_kw`` file per cluster; returns their paths."""
    if days < 1:
        raise ValueError("days must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    peaks, load, pv = collect_dataset(cfg, days)
    paths = []
    for c, peak in enumerate(peaks):
        path = out_dir / f"cluster{c + 1}_pv{int(round(peak * 1000))}w.csv"
        write_dataset(path, load[c], pv[c])
        paths.append(path)
    return paths


def train_model_for_peak(cfg: ScenarioConfig, peak: float, days: int = 365, train_cfg: TrainConfig = TrainConfig()):
    """Generate a no-trading year for a cluster with this peak and fit its model."""
    log.info("training a forecast model for a %.3f kW cluster from %d simulated days", peak, days)
    single = cfg.replace(scheme=Scheme.WITHOUT_P2P, cluster_count=1, rpv_class=RpvClass.FIXED,
                         fixed_peaks_kw=(peak,), use_published_peaks=False, days=days)
    _, load, pv = collect_dataset(single, days)
    data = np.column_stack([load[0], pv[0]])
    return train(data, train_cfg, rng=cfg.seed).model


def train_from_file(dataset: str | Path, out: str | Path, train_cfg: TrainConfig = TrainConfig(), seed: int = 0):
    res = train(read_dataset(dataset), train_cfg, rng=seed)
    res.model.save(out)
    return res


def load_run_report(run_dir: str | Path) -> DailyReport:
    return read_report(Path(run_dir) / OUTPUT_FILES["report"])
