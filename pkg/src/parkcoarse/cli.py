"""Command-line entry points.

Every subcommand takes --config PATH --seed N --out DIR and operates on
checkpointed stage artifacts inside the output directory, so stages can
be run one at a time or all at once (`evaluate` runs whatever is still
missing). Exit codes: 0 ok, 2 config error, 3 data validation error,
4 numeric failure, 5 IO error. PARKCOARSE_THREADS caps worker pools.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .arrayio import format_float, write_arrays
from .errors import ConfigError, DataValidationError, NumericError, ParkcoarseError, ShapeError
from .parking import build_distance_graph, extract_low_features, parking_rank
from .synth import planted_structure_report

STAGE_ORDER = ("data", "rank", "graph", "adjacency", "coarsen", "codecs", "predictor", "evaluate")


def _load(args) -> pl.PipelineConfig:
    if args.config is None:
        raise ConfigError("--config PATH is required")
    return pl.load_config(args.config, seed_override=args.seed)


def _run_until(config: pl.PipelineConfig, out_dir: Path, last_stage: str):
    """Execute pipeline stages in order up to and including ``last_stage``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    pl._guard_config_echo(config, out_dir, resume=True)
    state: dict = {}
    state["dataset"] = pl.prepare_data(config, out_dir, resume=True)
    state["splits"] = pl._splits(config, state["dataset"].n_steps)
    state["q"] = state["dataset"].occupancy_rates()
    if last_stage == "data":
        return state
    state["pr"] = parking_rank(state["dataset"].lots)
    state["features"] = extract_low_features(state["dataset"], state["pr"]).values
    if last_stage == "rank":
        return state
    state["graph"] = build_distance_graph(state["dataset"].lots, config.distance_threshold_m)
    if last_stage == "graph":
        return state
    state["adjacency"], state["adj_info"] = pl.stage_adjacency(
        config, state["features"], state["graph"], state["splits"], out_dir, resume=True)
    if last_stage == "adjacency":
        return state
    state["coarse"] = pl.stage_coarsen(config, state["adjacency"], out_dir, resume=True)
    if last_stage == "coarsen":
        return state
    state["codecs"] = pl.stage_codecs(config, state["coarse"], state["features"],
                                      state["splits"], out_dir, resume=True)
    if last_stage == "codecs":
        return state
    from . import tcnae
    state["latents"] = tcnae.encode_all(state["codecs"], state["coarse"].index, state["features"])
    state["params"], state["log"] = pl.stage_predictor(
        config, state["codecs"], state["coarse"], state["latents"], state["q"],
        state["splits"], out_dir, resume=True)
    return state


def cmd_generate(args) -> int:
    config = _load(args)
    if config.synth is None:
        raise ConfigError("generate requires a synth data section in the config")
    out_dir = Path(args.out)
    from .synth import generate
    dataset = generate(config.synth, out_dir)
    report = planted_structure_report(dataset)
    print(f"wrote {out_dir / 'lots.csv'} and {out_dir / 'occupancy.csv'} "
          f"({dataset.n_lots} lots x {dataset.n_steps} steps)")
    print(f"planted high-PR lots: {len(report['high_pr_lots'])}; "
          f"type counts: {report['type_counts']}")
    return 0


def cmd_rank(args) -> int:
    config = _load(args)
    out_dir = Path(args.out)
    state = _run_until(config, out_dir, "rank")
    pr = state["pr"]
    write_arrays(out_dir / "rank.pkc", {"pr": pr})
    lines = ["lot_id,parking_rank"]
    for lot, score in zip(state["dataset"].lots, pr):
        lines.append(f"{lot.lot_id},{format_float(score)}")
    (out_dir / "rank.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out_dir / 'rank.csv'} (max PR {pr.max():.6f}, min PR {pr.min():.6f})")
    return 0


def cmd_build_graph(args) -> int:
    config = _load(args)
    out_dir = Path(args.out)
    state = _run_until(config, out_dir, "graph")
    graph = state["graph"]
    write_arrays(out_dir / "graph.pkc", {
        "weights": graph.weights, "distances_m": graph.distances_m,
        "threshold_m": np.array(graph.threshold_m)})
    edges = int((graph.weights > 0).sum() // 2)
    print(f"wrote {out_dir / 'graph.pkc'} ({edges} edges within {graph.threshold_m:.0f} m)")
    return 0


def cmd_pretrain_gat(args) -> int:
    config = _load(args)
    out_dir = Path(args.out)
    state = _run_until(config, out_dir, "adjacency")
    info = state["adj_info"]
    print(f"adjacency mode {info['mode']}: epochs={info.get('epochs', 0)}")
    return 0


def cmd_coarsen(args) -> int:
    config = _load(args)
    out_dir = Path(args.out)
    state = _run_until(config, out_dir, "coarsen")
    coarse = state["coarse"]
    print(f"coarsened {state['dataset'].n_lots} lots -> {coarse.n_hypernodes} hypernodes "
          f"(ratio {coarse.ratio:.3f}, SD {coarse.spectral_dist:.6f}, window {coarse.window})")
    return 0


def cmd_pretrain_ae(args) -> int:
    config = _load(args)
    out_dir = Path(args.out)
    state = _run_until(config, out_dir, "codecs")
    print(f"trained {len(state['codecs'])} codecs ({config.ae_mode})")
    return 0


def cmd_train(args) -> int:
    config = _load(args)
    out_dir = Path(args.out)
    state = _run_until(config, out_dir, "predictor")
    log = state["log"]
    if log:
        print(f"predictor trained: {len(log)} epochs, last val loss {log[-1]['val_loss']:.6f}")
    else:
        print("predictor loaded from checkpoint")
    return 0


def cmd_predict(args) -> int:
    config = _load(args)
    out_dir = Path(args.out)
    state = _run_until(config, out_dir, "predictor")
    starts, y, y_hat = pl.forecast_test_split(
        config, state["params"], state["codecs"], state["coarse"],
        state["latents"], state["q"], state["splits"])
    write_arrays(out_dir / "predictions.pkc",
                 {"starts": starts.astype(np.float64), "y": y, "y_hat": y_hat})
    print(f"wrote {out_dir / 'predictions.pkc'} ({y_hat.shape[0]} windows, horizon {config.horizon})")
    return 0


def cmd_evaluate(args) -> int:
    config = _load(args)
    report = pl.run_pipeline(config, args.out, resume=True)
    print(f"MAE={report.metrics['mae']:.6f} RMSE={report.metrics['rmse']:.6f} "
          f"MAPE={report.metrics['mape']:.3f}%")
    print(f"report: {Path(args.out) / 'report.json'}")
    return 0


def cmd_sweep_ratio(args) -> int:
    config = _load(args)
    ratios = [float(r) for r in args.ratios.split(",") if r]
    if not ratios or any(not 0 < r <= 1 for r in ratios):
        raise ConfigError(f"ratios must lie in (0, 1], got {args.ratios!r}")
    rows = pl.sweep_ratio(config, ratios, args.out)
    for row in rows:
        if "error" in row:
            print(f"ratio {row['ratio']:.2f}: ERROR {row['error']}")
        else:
            print(f"ratio {row['ratio']:.2f}: MAPE={row['mape']:.3f}% "
                  f"sec/epoch={row['seconds_per_epoch']:.3f} SD={row['spectral_distance']:.6f}")
    print(f"sweep table: {Path(args.out) / 'sweep.csv'}")
    return 0


def cmd_ablate(args) -> int:
    config = _load(args)
    rows = pl.ablate(config, args.axis, args.out)
    for row in rows:
        if "error" in row:
            print(f"{row['mode']}: ERROR {row['error']}")
        else:
            print(f"{row['mode']}: MAE={row['mae']:.6f} RMSE={row['rmse']:.6f} MAPE={row['mape']:.3f}%")
    print(f"ablation table: {Path(args.out) / ('ablate_' + args.axis + '.csv')}")
    return 0


def cmd_export_plots(args) -> int:
    out_dir = Path(args.out)
    sweep_rows = _parse_sweep_csv(out_dir / "sweep.csv")
    ablate_rows = {}
    for axis in ("adjacency", "autoencoder"):
        rows = _parse_ablate_csv(out_dir / f"ablate_{axis}.csv")
        if rows:
            ablate_rows[axis] = rows
    written = pl.export_plot_data(out_dir / "plots", sweep_rows, ablate_rows)
    if not written:
        print("nothing to export: no sweep.csv or ablate_*.csv found")
        return 0
    for path in written:
        print(f"wrote {path}")
    return 0


def _parse_sweep_csv(path: Path) -> list[dict]:
    if not path.exists():
        return []
    rows = []
    for line in path.read_text().strip().splitlines()[1:]:
        ratio, mape, sec, sd = line.split(",")
        if mape == "error":
            continue
        rows.append({"ratio": float(ratio), "mape": float(mape),
                     "seconds_per_epoch": float(sec), "spectral_distance": float(sd)})
    return rows


def _parse_ablate_csv(path: Path) -> list[dict]:
    if not path.exists():
        return []
    rows = []
    for line in path.read_text().strip().splitlines()[1:]:
        mode, mae, rmse, mape, _epochs = line.split(",")
        if mae == "error":
            continue
        rows.append({"mode": mode, "mae": float(mae), "rmse": float(rmse), "mape": float(mape)})
    return rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parkcoarse",
                                     description="Parking-graph coarsening and occupancy forecasting")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "generate": cmd_generate,
        "rank": cmd_rank,
        "build-graph": cmd_build_graph,
        "pretrain-gat": cmd_pretrain_gat,
        "coarsen": cmd_coarsen,
        "pretrain-ae": cmd_pretrain_ae,
        "train": cmd_train,
        "predict": cmd_predict,
        "evaluate": cmd_evaluate,
        "sweep-ratio": cmd_sweep_ratio,
        "ablate": cmd_ablate,
        "export-plots": cmd_export_plots,
    }
    for name, func in commands.items():
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", type=str, required=True, help="output directory")
        if name == "sweep-ratio":
            p.add_argument("--ratios", type=str, default="0.2,0.4,0.6,0.8,1.0")
        if name == "ablate":
            p.add_argument("--axis", type=str, choices=("adjacency", "autoencoder"), required=True)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataValidationError as exc:
        print(f"data validation error: {exc}", file=sys.stderr)
        return 3
    except (NumericError, ShapeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except ParkcoarseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
