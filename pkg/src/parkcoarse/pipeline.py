"""End-to-end orchestration: stages, metrics, sweeps, ablations, exports.

A run walks: ingest/generate -> rank -> distance graph -> adjacency
(attention-pretrained or ablation) -> coarsen -> codec pretraining ->
predictor training -> forecast + metrics. Heavy stage outputs are
checkpointed under the output directory and reloaded on resume, so
deleting a downstream artifact reruns only from that point.

Reports are split into a deterministic part (report.json: every number
reproducible from config + seed) and a timing sidecar (timings.csv),
because wall-clock measurements can never be byte-stable.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import coarsen as coarsen_mod
from . import prgat as prgat_mod
from . import tcnae
from . import tgcn as tgcn_mod
from .arrayio import format_float, read_arrays, write_arrays
from .errors import ConfigError, DataValidationError, ParkcoarseError
from .parking import (
    ParkingDataset,
    SplitRanges,
    build_distance_graph,
    extract_low_features,
    load_dataset,
    parking_rank,
    split_dataset,
)
from .synth import SynthConfig, generate, load_synth_config
from .tcnae import CodecConfig, PassthroughCodec, window_starts
from .tgcn import TgcnConfig

ADJACENCY_MODES = ("distance", "gat_plain", "prgat")
AE_MODES = ("tcn_ae", "concat_passthrough")


@dataclass
class PipelineConfig:
    seed: int = 0
    synth: SynthConfig | None = None
    lots_csv: str | None = None
    occupancy_csv: str | None = None
    coarsening_ratio: float = 0.6
    window: int = 12
    horizon: int = 1
    adjacency_mode: str = "prgat"
    ae_mode: str = "tcn_ae"
    distance_threshold_m: float = 500.0
    split_fractions: tuple[float, float, float] = (0.7, 0.2, 0.1)
    mape_floor: float = 1e-3
    attention: prgat_mod.PretrainConfig = field(default_factory=prgat_mod.PretrainConfig)
    codec: CodecConfig = field(default_factory=CodecConfig)
    predictor: TgcnConfig = field(default_factory=TgcnConfig)

    def __post_init__(self):
        if not 0.0 < self.coarsening_ratio <= 1.0:
            raise ConfigError(f"coarsening_ratio must be in (0, 1], got {self.coarsening_ratio}")
        if self.adjacency_mode not in ADJACENCY_MODES:
            raise ConfigError(f"adjacency_mode must be one of {ADJACENCY_MODES}, got {self.adjacency_mode!r}")
        if self.ae_mode not in AE_MODES:
            raise ConfigError(f"ae_mode must be one of {AE_MODES}, got {self.ae_mode!r}")
        if self.synth is None and (self.lots_csv is None or self.occupancy_csv is None):
            raise ConfigError("config needs either a synth section or lots_csv + occupancy_csv paths")
        if self.horizon not in (1, 2, 4):
            raise ConfigError(f"horizon must be 1, 2, or 4, got {self.horizon}")
        if self.window < 1:
            raise ConfigError(f"window must be positive, got {self.window}")
        # Single source of truth for window/horizon across sub-configs.
        self.codec.window = self.window
        self.predictor.window = self.window
        self.predictor.horizon = self.horizon
        self.attention.seed = self.seed
        self.attention.include_transfer = self.adjacency_mode == "prgat"

    def to_dict(self) -> dict:
        doc = {
            "seed": self.seed,
            "coarsening_ratio": self.coarsening_ratio,
            "window": self.window,
            "horizon": self.horizon,
            "adjacency_mode": self.adjacency_mode,
            "ae_mode": self.ae_mode,
            "distance_threshold_m": self.distance_threshold_m,
            "split_fractions": list(self.split_fractions),
            "mape_floor": self.mape_floor,
            "attention": {k: v for k, v in asdict(self.attention).items() if k not in ("seed", "include_transfer")},
            "codec": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.codec).items()},
            "predictor": asdict(self.predictor),
        }
        if self.synth is not None:
            doc["data"] = {"synth": asdict(self.synth)}
            doc["data"]["synth"]["type_mix"] = list(self.synth.type_mix)
        else:
            doc["data"] = {"lots_csv": self.lots_csv, "occupancy_csv": self.occupancy_csv}
        return doc


def config_from_dict(doc: dict, seed_override: int | None = None) -> PipelineConfig:
    doc = dict(doc)
    data = doc.pop("data", {})
    kwargs: dict = {}
    if "synth" in data:
        synth_doc = dict(data["synth"])
        if seed_override is not None:
            synth_doc["seed"] = seed_override
        kwargs["synth"] = load_synth_config(synth_doc)
    else:
        kwargs["lots_csv"] = data.get("lots_csv")
        kwargs["occupancy_csv"] = data.get("occupancy_csv")

    def _sub(name, cls):
        sub = doc.pop(name, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"{name} section must be an object")
        try:
            if name == "codec" and "dilations" in sub:
                sub = dict(sub)
                sub["dilations"] = tuple(sub["dilations"])
            return cls(**sub)
        except TypeError as exc:
            raise ConfigError(f"bad {name} section: {exc}") from None

    kwargs["attention"] = _sub("attention", prgat_mod.PretrainConfig)
    kwargs["codec"] = _sub("codec", CodecConfig)
    kwargs["predictor"] = _sub("predictor", TgcnConfig)
    allowed = {"seed", "coarsening_ratio", "window", "horizon", "adjacency_mode", "ae_mode",
               "distance_threshold_m", "split_fractions", "mape_floor"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in allowed & set(doc):
        value = doc[key]
        if key == "split_fractions":
            value = tuple(value)
        kwargs[key] = value
    if seed_override is not None:
        kwargs["seed"] = seed_override
    try:
        return PipelineConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}") from None


def load_config(path, seed_override: int | None = None) -> PipelineConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(doc, seed_override)


# ---------------------------------------------------------------------------
# metrics


@dataclass
class Metrics:
    mae: float
    rmse: float
    mape: float

    def as_dict(self) -> dict:
        return {"mae": self.mae, "rmse": self.rmse, "mape": self.mape}


def evaluate_metrics(y: np.ndarray, y_hat: np.ndarray, mape_floor: float = 1e-3) -> Metrics:
    """MAE, RMSE, and MAPE(%) with the ground truth floored for the ratio."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ConfigError(f"metric shapes differ: {y.shape} vs {y_hat.shape}")
    err = y - y_hat
    mae = float(np.abs(err).mean())
    rmse = float(np.sqrt((err * err).mean()))
    mape = float(100.0 * (np.abs(err) / np.maximum(y, mape_floor)).mean())
    return Metrics(mae=mae, rmse=rmse, mape=mape)


@dataclass
class ExperimentReport:
    config: dict
    n_lots: int
    n_steps: int
    n_hypernodes: int
    achieved_ratio: float
    spectral_distance: float
    coarsen_window: str
    metrics: dict
    per_step_metrics: list
    persistence_baseline: dict
    epochs: dict
    stage_seconds: dict = field(default_factory=dict)   # sidecar only
    seconds_per_epoch: float = 0.0                      # sidecar only

    def deterministic_dict(self) -> dict:
        return {
            "config": self.config,
            "n_lots": self.n_lots,
            "n_steps": self.n_steps,
            "n_hypernodes": self.n_hypernodes,
            "achieved_ratio": self.achieved_ratio,
            "spectral_distance": self.spectral_distance,
            "coarsen_window": self.coarsen_window,
            "metrics": self.metrics,
            "per_step_metrics": self.per_step_metrics,
            "persistence_baseline": self.persistence_baseline,
            "epochs": self.epochs,
        }


# ---------------------------------------------------------------------------
# stages


class _Timer:
    def __init__(self):
        self.seconds: dict[str, float] = {}

    def stage(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.tic = time.perf_counter()

            def __exit__(self, exc_type, exc_val, exc_tb):
                timer.seconds[name] = timer.seconds.get(name, 0.0) + time.perf_counter() - self.tic
                if exc_val is not None and isinstance(exc_val, ParkcoarseError):
                    # abort names the failing stage; partial artifacts stay on disk
                    if exc_val.args and not str(exc_val.args[0]).startswith("stage "):
                        exc_val.args = (f"stage {name}: {exc_val.args[0]}",) + exc_val.args[1:]
                return False

        return _Ctx()


def prepare_data(config: PipelineConfig, out_dir: Path | None, resume: bool) -> ParkingDataset:
    if config.synth is not None:
        if out_dir is not None:
            lots = out_dir / "lots.csv"
            occ = out_dir / "occupancy.csv"
            if resume and lots.exists() and occ.exists():
                return load_dataset(lots, occ)
            return generate(config.synth, out_dir)
        return generate(config.synth)
    return load_dataset(config.lots_csv, config.occupancy_csv)


def _splits(config: PipelineConfig, n_steps: int) -> SplitRanges:
    return split_dataset(n_steps, config.split_fractions,
                         min_length=config.window + config.horizon)


def stage_adjacency(config: PipelineConfig, features: np.ndarray, graph,
                    splits: SplitRanges, out_dir: Path | None, resume: bool) -> tuple[np.ndarray, dict]:
    """Adjacency handed to coarsening, per the configured construction mode."""
    mode = config.adjacency_mode
    if mode == "distance":
        matrix = graph.weights + np.eye(graph.weights.shape[0])
        return matrix, {"mode": mode, "epochs": 0}
    adj_path = out_dir / "adjacency.pkc" if out_dir is not None else None
    params_path = out_dir / "attention.pkc" if out_dir is not None else None
    info_path = out_dir / "adjacency_info.json" if out_dir is not None else None
    if resume and adj_path is not None and adj_path.exists() and info_path.exists():
        arrays = read_arrays(adj_path)
        info = json.loads(info_path.read_text())
        return arrays["matrix"], info
    params, snapshot, history = prgat_mod.pretrain(
        features, graph, config.attention,
        train_steps=splits.train, val_steps=splits.val)
    info = {"mode": mode, "epochs": history["epochs_run"], "stopped_epoch": history["stopped_epoch"],
            "final_val_loss": history["val_loss"][history["stopped_epoch"]],
            "snapshot_step": snapshot.step}
    if out_dir is not None:
        write_arrays(adj_path, {"matrix": snapshot.values, "step": np.array(float(snapshot.step))})
        write_arrays(params_path, {k: v.data for k, v in params.as_param_dict().items()})
        prgat_mod.export_adjacency(snapshot, out_dir / "adjacency_triplets.txt")
        info_path.write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    return snapshot.values, info


def stage_coarsen(config: PipelineConfig, adjacency: np.ndarray,
                  out_dir: Path | None, resume: bool) -> coarsen_mod.CoarseGraph:
    coarse_path = out_dir / "coarse.pkc" if out_dir is not None else None
    meta_path = out_dir / "coarse_meta.json" if out_dir is not None else None
    if resume and coarse_path is not None and coarse_path.exists() and meta_path.exists():
        arrays = read_arrays(coarse_path)
        meta = json.loads(meta_path.read_text())
        return coarsen_mod.CoarseGraph(adjacency=arrays["adjacency"],
                                       index=[list(m) for m in meta["index"]],
                                       ratio=meta["ratio"], spectral_dist=meta["spectral_distance"],
                                       window=meta["window"])
    graph = coarsen_mod.coarsen(adjacency, config.coarsening_ratio)
    if out_dir is not None:
        write_arrays(coarse_path, {"adjacency": graph.adjacency})
        meta = {"index": graph.index, "ratio": graph.ratio,
                "spectral_distance": graph.spectral_dist, "window": graph.window}
        meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        coarsen_mod.export_coarse(graph, out_dir / "coarse_triplets.txt", out_dir / "coarse_index.txt")
    return graph


def stage_codecs(config: PipelineConfig, coarse: coarsen_mod.CoarseGraph,
                 features: np.ndarray, splits: SplitRanges,
                 out_dir: Path | None, resume: bool) -> dict:
    codec_dir = out_dir / "codecs" if out_dir is not None else None
    if resume and codec_dir is not None and (codec_dir / "manifest.json").exists():
        return tcnae.load_codecs(codec_dir)
    if config.ae_mode == "concat_passthrough":
        max_width = max(len(m) for m in coarse.index) * features.shape[2]
        codecs = {p: PassthroughCodec(p, len(members), max_width)
                  for p, members in enumerate(coarse.index)}
    else:
        codecs = tcnae.pretrain_codecs(coarse.index, features, splits.train, splits.val,
                                       config.codec, config.seed)
    if codec_dir is not None:
        tcnae.save_codecs(codecs, codec_dir)
    return codecs


def stage_predictor(config: PipelineConfig, codecs: dict, coarse, latents: np.ndarray,
                    q: np.ndarray, splits: SplitRanges,
                    out_dir: Path | None, resume: bool) -> tuple[dict, list[dict]]:
    params_path = out_dir / "tgcn.pkc" if out_dir is not None else None
    log_path = out_dir / "training_log.csv" if out_dir is not None else None
    if resume and params_path is not None and params_path.exists():
        params = tgcn_mod.load_params(params_path)
        log = _read_training_log(log_path) if log_path.exists() else []
        return params, log
    rng = np.random.default_rng(config.seed + 1)
    params = tgcn_mod.init_params(latents.shape[2], latents.shape[2], config.predictor, rng)
    params, log = tgcn_mod.train(params, codecs, coarse.index, coarse.adjacency, latents, q,
                                 splits.train, splits.val, config.predictor, config.seed + 1)
    if params_path is not None:
        tgcn_mod.save_params(params, params_path)
        _write_training_log(log, log_path)
    return params, log


def _write_training_log(log: list[dict], path) -> None:
    lines = ["epoch,train_loss,val_loss,seconds"]
    for row in log:
        lines.append(f"{row['epoch']},{format_float(row['train_loss'])},"
                     f"{format_float(row['val_loss'])},{format_float(row['seconds'])}")
    Path(path).write_text("\n".join(lines) + "\n")


def _read_training_log(path) -> list[dict]:
    rows = []
    lines = Path(path).read_text().strip().splitlines()[1:]
    for line in lines:
        epoch, tr, vl, sec = line.split(",")
        rows.append({"epoch": int(epoch), "train_loss": float(tr),
                     "val_loss": float(vl), "seconds": float(sec)})
    return rows


def forecast_test_split(config: PipelineConfig, params, codecs, coarse,
                        latents: np.ndarray, q: np.ndarray,
                        splits: SplitRanges) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(starts, y, y_hat) over all test windows; shapes (W,), (W, T', N)."""
    starts = window_starts(splits.test, config.window, 1, config.horizon)
    if starts.size == 0:
        raise DataValidationError("test split shorter than window + horizon")
    y_hat = tgcn_mod.predict_occupancy(params, latents, starts, coarse.adjacency,
                                       codecs, coarse.index, config.predictor)
    target_steps = starts[:, None] + config.window + np.arange(config.horizon)[None, :]
    y = q[target_steps]
    return starts, y, y_hat


def persistence_forecast(q: np.ndarray, starts: np.ndarray, window: int, horizon: int) -> np.ndarray:
    """Repeat the last observed value across the horizon."""
    last = q[starts + window - 1]
    return np.repeat(last[:, None, :], horizon, axis=1)


def run_pipeline(config: PipelineConfig, out_dir=None, resume: bool = True) -> ExperimentReport:
    """Execute all stages; write report.json + timings.csv when out_dir given."""
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        _guard_config_echo(config, out_path, resume)
    timer = _Timer()

    with timer.stage("data"):
        dataset = prepare_data(config, out_path, resume)
        q = dataset.occupancy_rates()
        splits = _splits(config, dataset.n_steps)
    with timer.stage("rank"):
        pr = parking_rank(dataset.lots)
        features = extract_low_features(dataset, pr).values
    with timer.stage("graph"):
        graph = build_distance_graph(dataset.lots, config.distance_threshold_m)
    with timer.stage("adjacency"):
        adjacency, adj_info = stage_adjacency(config, features, graph, splits, out_path, resume)
    with timer.stage("coarsen"):
        coarse = stage_coarsen(config, adjacency, out_path, resume)
    with timer.stage("codecs"):
        codecs = stage_codecs(config, coarse, features, splits, out_path, resume)
    with timer.stage("latents"):
        latents = tcnae.encode_all(codecs, coarse.index, features)
    with timer.stage("predictor"):
        params, log = stage_predictor(config, codecs, coarse, latents, q, splits, out_path, resume)
    with timer.stage("evaluate"):
        starts, y, y_hat = forecast_test_split(config, params, codecs, coarse, latents, q, splits)
        overall = evaluate_metrics(y, y_hat, config.mape_floor)
        per_step = [evaluate_metrics(y[:, h], y_hat[:, h], config.mape_floor).as_dict()
                    for h in range(config.horizon)]
        baseline = evaluate_metrics(
            y, persistence_forecast(q, starts, config.window, config.horizon), config.mape_floor)
        if out_path is not None:
            write_arrays(out_path / "predictions.pkc",
                         {"starts": starts.astype(np.float64), "y": y, "y_hat": y_hat})

    seconds_per_epoch = float(np.median([row["seconds"] for row in log])) if log else 0.0
    report = ExperimentReport(
        config=config.to_dict(),
        n_lots=dataset.n_lots,
        n_steps=dataset.n_steps,
        n_hypernodes=coarse.n_hypernodes,
        achieved_ratio=coarse.ratio,
        spectral_distance=coarse.spectral_dist,
        coarsen_window=coarse.window,
        metrics=overall.as_dict(),
        per_step_metrics=per_step,
        persistence_baseline=baseline.as_dict(),
        epochs={"adjacency": adj_info.get("epochs", 0), "predictor": len(log)},
        stage_seconds=dict(timer.seconds),
        seconds_per_epoch=seconds_per_epoch,
    )
    if out_path is not None:
        write_report(report, out_path)
    return report


def _guard_config_echo(config: PipelineConfig, out_path: Path, resume: bool) -> None:
    echo_path = out_path / "config.json"
    doc = json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"
    if resume and echo_path.exists():
        if echo_path.read_text() != doc:
            raise ConfigError(
                f"{echo_path} holds artifacts for a different config; "
                "use a fresh output directory or disable resume")
    echo_path.write_text(doc)


def write_report(report: ExperimentReport, out_dir) -> Path:
    out_dir = Path(out_dir)
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report.deterministic_dict(), indent=2, sort_keys=True) + "\n")
    lines = ["stage,seconds"]
    for stage_name in sorted(report.stage_seconds):
        lines.append(f"{stage_name},{format_float(report.stage_seconds[stage_name])}")
    lines.append(f"predictor_epoch_median,{format_float(report.seconds_per_epoch)}")
    (out_dir / "timings.csv").write_text("\n".join(lines) + "\n")
    return report_path


# ---------------------------------------------------------------------------
# experiment operations


def sweep_ratio(config: PipelineConfig, ratios: list[float], out_dir) -> list[dict]:
    """Per-ratio runs sharing the pretrained adjacency; emits sweep.csv."""
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    rows = []
    for ratio in ratios:
        run_dir = out_path / f"ratio_{ratio:.2f}"
        row: dict = {"ratio": ratio}
        try:
            run_config = _with_overrides(config, coarsening_ratio=ratio)
            _share_upstream(out_path, run_dir, config)
            report = run_pipeline(run_config, run_dir, resume=True)
            row.update(mape=report.metrics["mape"],
                       seconds_per_epoch=report.seconds_per_epoch,
                       spectral_distance=report.spectral_distance,
                       mae=report.metrics["mae"])
        except ParkcoarseError as exc:
            row["error"] = str(exc)
        rows.append(row)
    _write_sweep_csv(rows, out_path / "sweep.csv")
    return rows


def _share_upstream(parent: Path, run_dir: Path, config: PipelineConfig,
                    include_coarse: bool = False) -> None:
    """Materialize shared upstream artifacts once and copy them per run."""
    run_dir.mkdir(parents=True, exist_ok=True)
    shared_dir = parent / "shared"
    shared_dir.mkdir(exist_ok=True)
    shared_config = _with_overrides(config)
    dataset = prepare_data(shared_config, shared_dir, resume=True)
    splits = _splits(shared_config, dataset.n_steps)
    pr = parking_rank(dataset.lots)
    features = extract_low_features(dataset, pr).values
    graph = build_distance_graph(dataset.lots, shared_config.distance_threshold_m)
    adjacency, _ = stage_adjacency(shared_config, features, graph, splits, shared_dir, resume=True)
    names = ["lots.csv", "occupancy.csv", "synth_meta.json", "adjacency.pkc",
             "attention.pkc", "adjacency_info.json", "adjacency_triplets.txt"]
    if include_coarse:
        stage_coarsen(shared_config, adjacency, shared_dir, resume=True)
        names += ["coarse.pkc", "coarse_meta.json", "coarse_triplets.txt", "coarse_index.txt"]
    for name in names:
        src = shared_dir / name
        if src.exists():
            (run_dir / name).write_bytes(src.read_bytes())


def _with_overrides(config: PipelineConfig, **overrides) -> PipelineConfig:
    doc = config.to_dict()
    doc.update(overrides)
    return config_from_dict(doc)


def _write_sweep_csv(rows: list[dict], path: Path) -> None:
    lines = ["ratio,MAPE,seconds_per_epoch,spectral_distance"]
    for row in rows:
        if "error" in row:
            lines.append(f"{format_float(row['ratio'])},error,error,error")
        else:
            lines.append(",".join([
                format_float(row["ratio"]), format_float(row["mape"]),
                format_float(row["seconds_per_epoch"]), format_float(row["spectral_distance"])]))
    path.write_text("\n".join(lines) + "\n")


def ablate(config: PipelineConfig, axis: str, out_dir) -> list[dict]:
    """Run the mode set along one axis with shared data and seed."""
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    if axis == "adjacency":
        modes = [("adjacency_mode", m) for m in ADJACENCY_MODES]
    elif axis == "autoencoder":
        modes = [("ae_mode", m) for m in AE_MODES]
    else:
        raise ConfigError(f"ablation axis must be 'adjacency' or 'autoencoder', got {axis!r}")
    rows = []
    for key, mode in modes:
        run_dir = out_path / f"{key}_{mode}"
        row: dict = {"mode": mode}
        try:
            run_config = _with_overrides(config, **{key: mode})
            run_dir.mkdir(parents=True, exist_ok=True)
            if axis == "autoencoder":
                _share_upstream(out_path, run_dir, config, include_coarse=True)
            else:
                _share_data_only(out_path, run_dir, config)
            report = run_pipeline(run_config, run_dir, resume=True)
            row.update(report.metrics)
            row["epochs"] = report.epochs["predictor"]
        except ParkcoarseError as exc:
            row["error"] = str(exc)
        rows.append(row)
    _write_ablate_csv(rows, out_path / f"ablate_{axis}.csv")
    return rows


def _share_data_only(parent: Path, run_dir: Path, config: PipelineConfig) -> None:
    if config.synth is None:
        return
    shared_dir = parent / "shared"
    shared_dir.mkdir(exist_ok=True)
    prepare_data(config, shared_dir, resume=True)
    for name in ("lots.csv", "occupancy.csv", "synth_meta.json"):
        src = shared_dir / name
        if src.exists():
            (run_dir / name).write_bytes(src.read_bytes())


def _write_ablate_csv(rows: list[dict], path: Path) -> None:
    lines = ["mode,MAE,RMSE,MAPE,epochs"]
    for row in rows:
        if "error" in row:
            lines.append(f"{row['mode']},error,error,error,error")
        else:
            lines.append(",".join([row["mode"], format_float(row["mae"]), format_float(row["rmse"]),
                                   format_float(row["mape"]), str(row["epochs"])]))
    path.write_text("\n".join(lines) + "\n")


def export_plot_data(out_dir, sweep_rows: list[dict] | None = None,
                     ablate_rows: dict[str, list[dict]] | None = None) -> list[Path]:
    """Tidy per-figure CSVs (ratio sweep and ablation analogues)."""
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    written = []
    if sweep_rows:
        path = out_path / "fig_ratio_sweep.csv"
        lines = ["ratio,mape_percent,seconds_per_epoch,spectral_distance"]
        for row in sweep_rows:
            if "error" in row:
                continue
            lines.append(",".join([format_float(row["ratio"]), format_float(row["mape"]),
                                   format_float(row["seconds_per_epoch"]),
                                   format_float(row["spectral_distance"])]))
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    for axis, rows in (ablate_rows or {}).items():
        path = out_path / f"fig_ablation_{axis}.csv"
        lines = ["mode,mae,rmse,mape_percent"]
        for row in rows:
            if "error" in row:
                continue
            lines.append(",".join([row["mode"], format_float(row["mae"]),
                                   format_float(row["rmse"]), format_float(row["mape"])]))
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    return written
