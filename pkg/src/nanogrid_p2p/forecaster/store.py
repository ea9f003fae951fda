"""Lookup of per-cluster forecast models by PV peak."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .model import ForecastModel


class MissingModelError(LookupError):
    pass


def model_filename(peak_kw: float) -> str:
    """Models are keyed by the cluster PV peak in watts, e.g. ``pv2230w.npz``."""
    return f"pv{int(round(peak_kw * 1000))}w.npz"


def bundled_model_dir() -> Path:
    return Path(str(resources.files(__package__.rsplit(".", 1)[0]) / "data" / "models"))


class ModelStore:
    """Searches the given directories (then the bundled set) for a model file."""

    def __init__(self, directories: list[str | Path] | None = None, include_bundled: bool = True):
        self.directories = [Path(d) for d in (directories or [])]
        if include_bundled:
            self.directories.append(bundled_model_dir())
        self._cache: dict[str, ForecastModel] = {}

    def path_for(self, peak_kw: float) -> Path | None:
        name = model_filename(peak_kw)
        for d in self.directories:
            if (d / name).is_file():
                return d / name
        return None

    def get(self, peak_kw: float) -> ForecastModel:
        name = model_filename(peak_kw)
        if name not in self._cache:
            path = self.path_for(peak_kw)
            if path is None:
                searched = ", ".join(str(d) for d in self.directories)
                raise MissingModelError(
                    f"no forecast model {name} for a {peak_kw:g} kW cluster (searched {searched}). "
                    "Set allow_training=true in the scenario, or train one with "
                    "`nanogrid-p2p gen-dataset` and `nanogrid-p2p train-forecaster` and "
                    "point forecaster_dir at its directory."
                )
            self._cache[name] = ForecastModel.load(path)
        return self._cache[name]

    def put(self, peak_kw: float, model: ForecastModel) -> None:
        self._cache[model_filename(peak_kw)] = model
