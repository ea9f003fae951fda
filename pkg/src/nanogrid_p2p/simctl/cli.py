"""Command-line entry point: ``nanogrid-p2p <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..accounting import read_report
from ..core import RpvClass, ScenarioConfig, ScenarioError, Scheme, load_scenario
from ..forecaster import MissingModelError, TrainConfig
from .runner import OUTPUT_FILES, gen_dataset, run, run_matrix, train_from_file

log = logging.getLogger("nanogrid_p2p")


def _config(path: str | None) -> ScenarioConfig:
    return load_scenario(path) if path else ScenarioConfig()


def _seed_list(text: str) -> list[int]:
    """``5`` means seeds 0-4; ``1,4,9`` lists them; ``3-7`` is a range."""
    if "," in text:
        return [int(t) for t in text.split(",")]
    if "-" in text:
        lo, hi = text.split("-")
        return list(range(int(lo), int(hi) + 1))
    return list(range(int(text)))


def _print_report(path: Path) -> None:
    rep = read_report(path)
    print(f"{rep.scheme} / {rep.rpv_class}  ({path.parent.name})")
    for c, v in enumerate(rep.cluster_cost_usd, start=1):
        print(f"  cluster {c}: ${v:8.3f}")
    print(f"  average  : ${rep.average_usd:8.3f}")
    print(f"  total    : ${rep.total_usd:8.3f}")


def cmd_run(args) -> int:
    cfg = _config(args.config)
    changes = {}
    if args.scheme:
        changes["scheme"] = Scheme.parse(args.scheme)
    if args.rpv:
        changes["rpv_class"] = RpvClass.parse(args.rpv)
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.days is not None:
        changes["days"] = args.days
    cfg = cfg.replace(**changes)
    out = run(cfg, Path(args.out_dir))
    _print_report(out.paths["report"])
    if out.result.violations:
        print(f"{len(out.result.violations)} constraint violation(s); see {out.paths['audit']}", file=sys.stderr)
        return 3
    return 0


def cmd_run_matrix(args) -> int:
    cfg = _config(args.config)
    seeds = _seed_list(args.seeds) if args.seeds else None
    outs = run_matrix(cfg, Path(args.out_dir), seeds)
    bad = 0
    for o in outs:
        _print_report(o.paths["report"])
        bad += len(o.result.violations)
    if bad:
        print(f"{bad} constraint violation(s) across the matrix", file=sys.stderr)
        return 3
    return 0


def cmd_gen_dataset(args) -> int:
    cfg = _config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    for p in gen_dataset(cfg, args.days, Path(args.out_dir)):
        print(p)
    return 0


def cmd_train(args) -> int:
    tc = TrainConfig(epochs=args.epochs, patience=args.patience)
    res = train_from_file(args.dataset, args.out, tc, seed=args.seed)
    print(f"validation RMSE (fraction of range): load {res.val_rmse[0]:.4f}, pv {res.val_rmse[1]:.4f}")
    print(f"persistence baseline:               load {res.baseline_rmse[0]:.4f}, pv {res.baseline_rmse[1]:.4f}")
    print(f"epochs run {res.epochs_run}, best epoch {res.best_epoch}; model written to {args.out}")
    return 0


def cmd_report(args) -> int:
    root = Path(args.run_dir)
    direct = root / OUTPUT_FILES["report"]
    reports = [direct] if direct.is_file() else sorted(root.glob(f"*/{OUTPUT_FILES['report']}"))
    if not reports:
        print(f"no {OUTPUT_FILES['report']} under {root}", file=sys.stderr)
        return 1
    for path in reports:
        _print_report(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nanogrid-p2p", description="Nanogrid-cluster P2P trading simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("--config")
    p.add_argument("--scheme", choices=["none", "conventional", "proposed"])
    p.add_argument("--rpv", choices=["1", "2"])
    p.add_argument("--seed", type=int)
    p.add_argument("--days", type=int)
    p.add_argument("--out-dir", default="run_out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("run-matrix", help="all schemes x RPV classes with shared seeds")
    p.add_argument("--config")
    p.add_argument("--seeds", help="N (seeds 0..N-1), a-b, or a comma list")
    p.add_argument("--out-dir", default="matrix_out")
    p.set_defaults(func=cmd_run_matrix)

    p = sub.add_parser("gen-dataset", help="write per-cluster forecaster datasets from a no-trading run")
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", default="datasets")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train-forecaster", help="fit a forecast model on a dataset CSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--patience", type=int, default=TrainConfig.patience)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("report", help="print the cost report(s) of a run or matrix directory")
    p.add_argument("--run-dir", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, MissingModelError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
