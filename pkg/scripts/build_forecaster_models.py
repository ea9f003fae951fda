"""Regenerate the bundled per-cluster forecast models.

For each RPV class a one-year no-trading run with the published cluster
peaks produces one (load, PV) dataset per cluster; a model is trained on
each and written to ``src/nanogrid_p2p/data/models``.

    python scripts/build_forecaster_models.py [--datasets-only] [--rpv 1|2]
"""

from __future__ import annotations

import argparse
import json
import logging
import time
from pathlib import Path

from nanogrid_p2p.core import RpvClass, ScenarioConfig
from nanogrid_p2p.forecaster import TrainConfig, model_filename, read_dataset, train
from nanogrid_p2p.simctl.runner import gen_dataset

ROOT = Path(__file__).resolve().parents[1]
MODEL_DIR = ROOT / "src" / "nanogrid_p2p" / "data" / "models"
DATASET_DIR = ROOT / "build" / "datasets"
# kept apart from the seeds used for evaluation runs
DATASET_SEED = 9999
TRAIN_SEED = 7


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--rpv", choices=["1", "2"], action="append")
    ap.add_argument("--datasets-only", action="store_true")
    ap.add_argument("--days", type=int, default=365)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    MODEL_DIR.mkdir(parents=True, exist_ok=True)
    for rpv in [RpvClass.parse(r) for r in (args.rpv or ["1", "2"])]:
        out = DATASET_DIR / rpv.value.lower()
        cfg = ScenarioConfig(rpv_class=rpv, use_published_peaks=True, seed=DATASET_SEED)
        t0 = time.time()
        paths = sorted(out.glob("cluster*.csv")) if out.exists() else []
        if len(paths) != cfg.cluster_count:
            paths = gen_dataset(cfg, args.days, out)
            logging.info("%s datasets written in %.0f s", rpv.value, time.time() - t0)
        if args.datasets_only:
            continue
        for path in paths:
            peak_w = int(path.stem.split("_pv")[1].rstrip("w"))
            target = MODEL_DIR / model_filename(peak_w / 1000)
            if target.exists():
                continue
            t0 = time.time()
            res = train(read_dataset(path), TrainConfig(), rng=TRAIN_SEED)
            res.model.save(target, {"dataset": path.name, "dataset_seed": DATASET_SEED, "train_seed": TRAIN_SEED,
                                    "train_seconds": round(time.time() - t0, 1)})
            logging.info("%s: rmse %s baseline %s epochs %d (best %d) in %.0f s", target.name,
                         json.dumps([round(v, 4) for v in res.val_rmse]),
                         json.dumps([round(v, 4) for v in res.baseline_rmse]),
                         res.epochs_run, res.best_epoch, time.time() - t0)


if __name__ == "__main__":
    main()
