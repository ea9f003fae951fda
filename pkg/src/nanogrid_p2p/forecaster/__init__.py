"""GRU load/PV forecaster used by the look-ahead trading rule."""

from .gru import DimensionError, GruLayerParams, gru_cell, layer_backward, layer_forward
from .model import (
    FEATURES,
    INPUT_STEPS,
    OUTPUT_STEPS,
    ForecastModel,
    MinMaxNormalizer,
    ModelNotReadyError,
    persistence_forecast,
)
from .store import MissingModelError, ModelStore, model_filename
from .training import (
    DataError,
    DivergenceError,
    TrainConfig,
    TrainResult,
    clip_global_norm,
    make_windows,
    read_dataset,
    train,
    write_dataset,
)

__all__ = [
    "DataError", "DimensionError", "DivergenceError", "FEATURES", "ForecastModel", "GruLayerParams",
    "INPUT_STEPS", "MinMaxNormalizer", "MissingModelError", "ModelNotReadyError", "ModelStore",
    "OUTPUT_STEPS", "TrainConfig", "TrainResult", "clip_global_norm", "gru_cell", "layer_backward",
    "layer_forward", "make_windows", "model_filename", "persistence_forecast", "read_dataset", "train",
    "write_dataset",
]
