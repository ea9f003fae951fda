"""Simulation orchestration: the per-slot engine, scenario runs and the CLI."""

from .engine import Inputs, Simulation, SimulationResult, cluster_peaks
from .runner import RunOutputs, gen_dataset, run, run_matrix, simulate

__all__ = ["Inputs", "RunOutputs", "Simulation", "SimulationResult", "cluster_peaks", "gen_dataset", "run",
           "run_matrix", "simulate"]
