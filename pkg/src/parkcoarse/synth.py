"""Deterministic synthetic parking datasets with planted tidal structure.

Stands in for a proprietary city feed. Lots are scattered uniformly over
a square with one central high-capacity cluster; each lot gets a
type-specific occupancy profile:

* commercial  - midday-to-evening plateau, amplified on weekends
* office      - weekday working-hours plateau (rush-hour rise and fall)
* residential - overnight peak, purely daily (period = 96 steps)

Occupancy is clamp(base + amplitude * profile + noise) quantized to
whole spaces. The closed-form profiles double as the ground truth the
acceptance suite checks against, so they are evaluated both as a scalar
reference (:func:`profile_fraction`) and as the vectorized sampling path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .arrayio import format_float
from .errors import ConfigError, DataValidationError
from .parking import (
    STEP_MINUTES,
    OccupancySeries,
    ParkingDataset,
    ParkingLot,
    parking_rank,
)

STEPS_PER_DAY = 24 * 60 // STEP_MINUTES
LOT_TYPES = ("commercial", "office", "residential")
DEFAULT_START = "2024-01-01T00:00:00"  # a Monday
DEFAULT_CENTER = (22.54, 114.05)
M_PER_DEG_LAT = 111_320.0

# (plateau start hour, plateau length hours) per type; residential peaks at 03:00.
PEAK_WINDOWS = {
    "commercial": {"start_hour": 10.0, "length_hours": 12.0, "weekend_amplified": True},
    "office": {"start_hour": 8.0, "length_hours": 11.0, "weekend_amplified": False},
    "residential": {"peak_hour": 3.0, "daily_only": True},
}


@dataclass
class SynthConfig:
    n_lots: int = 100
    type_mix: tuple[float, float, float] = (0.4, 0.35, 0.25)
    area_extent_m: float = 3000.0
    seed: int = 0
    days: int = 14
    noise_sigma: float = 0.03
    start_time: str = DEFAULT_START

    def __post_init__(self):
        if self.n_lots < 2:
            raise ConfigError(f"n_lots must be >= 2, got {self.n_lots}")
        if self.days < 1:
            raise ConfigError(f"days must be >= 1, got {self.days}")
        if len(self.type_mix) != 3 or abs(sum(self.type_mix) - 1.0) > 1e-9 or min(self.type_mix) < 0:
            raise ConfigError(f"type_mix must be 3 nonnegative fractions summing to 1, got {self.type_mix}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclass
class LotProfile:
    lot_type: str
    base: float
    amplitude_weekday: float
    amplitude_weekend: float
    phase_hours: float  # per-lot shift of the plateau/peak position


def apportion_types(n_lots: int, type_mix) -> dict[str, int]:
    """Largest-remainder apportionment of lots to the three types."""
    exact = [f * n_lots for f in type_mix]
    counts = [int(math.floor(e)) for e in exact]
    remainders = [e - c for e, c in zip(exact, counts)]
    short = n_lots - sum(counts)
    for i in sorted(range(3), key=lambda i: (-remainders[i], i))[:short]:
        counts[i] += 1
    return dict(zip(LOT_TYPES, counts))


def _bump(u: float) -> float:
    """Smooth 0..1..0 bump on [0, 1], zero outside."""
    if u <= 0.0 or u >= 1.0:
        return 0.0
    return math.sin(math.pi * u) ** 2


_RAMP = 0.15  # fraction of the plateau spent rising / falling


def _plateau(u: float) -> float:
    """Trapezoid on [0, 1]: fast rise, long hold, fast fall."""
    if u <= 0.0 or u >= 1.0:
        return 0.0
    return max(0.0, min(1.0, u / _RAMP, (1.0 - u) / _RAMP))


def profile_fraction(profile: LotProfile, step: int) -> float:
    """Closed-form occupancy fraction before noise; scalar reference path."""
    dow = (step // STEPS_PER_DAY) % 7
    weekend = dow >= 5
    hour = (step % STEPS_PER_DAY) * STEP_MINUTES / 60.0
    amp = profile.amplitude_weekend if weekend else profile.amplitude_weekday
    if profile.lot_type == "residential":
        peak = PEAK_WINDOWS["residential"]["peak_hour"] + profile.phase_hours
        value = profile.base + profile.amplitude_weekday * math.cos(2 * math.pi * (hour - peak) / 24.0)
    else:
        window = PEAK_WINDOWS[profile.lot_type]
        start = window["start_hour"] + profile.phase_hours
        u = (hour - start) / window["length_hours"]
        shape = _plateau(u) if profile.lot_type == "office" else _bump(u)
        value = profile.base + amp * shape
    return min(1.0, max(0.0, value))


def _profile_series(profile: LotProfile, n_steps: int) -> np.ndarray:
    """Vectorized closed form; sampling path used by the generator."""
    steps = np.arange(n_steps)
    dow = (steps // STEPS_PER_DAY) % 7
    hour = (steps % STEPS_PER_DAY) * (STEP_MINUTES / 60.0)
    if profile.lot_type == "residential":
        peak = PEAK_WINDOWS["residential"]["peak_hour"] + profile.phase_hours
        values = profile.base + profile.amplitude_weekday * np.cos(2 * np.pi * (hour - peak) / 24.0)
    else:
        window = PEAK_WINDOWS[profile.lot_type]
        u = (hour - window["start_hour"] - profile.phase_hours) / window["length_hours"]
        if profile.lot_type == "office":
            shape = np.clip(np.minimum(u / _RAMP, (1.0 - u) / _RAMP), 0.0, 1.0)
            shape[(u <= 0) | (u >= 1)] = 0.0
        else:
            shape = np.where((u > 0) & (u < 1), np.sin(np.pi * np.clip(u, 0, 1)) ** 2, 0.0)
        amp = np.where(dow >= 5, profile.amplitude_weekend, profile.amplitude_weekday)
        values = profile.base + amp * shape
    return np.clip(values, 0.0, 1.0)


def _draw_profile(lot_type: str, rng: np.random.Generator) -> LotProfile:
    # bases sit well above zero so occupancy-rate ratios stay meaningful
    phase = rng.uniform(-0.75, 0.75)
    if lot_type == "commercial":
        return LotProfile(lot_type, base=rng.uniform(0.22, 0.30),
                          amplitude_weekday=rng.uniform(0.25, 0.35),
                          amplitude_weekend=rng.uniform(0.48, 0.58), phase_hours=phase)
    if lot_type == "office":
        return LotProfile(lot_type, base=rng.uniform(0.18, 0.24),
                          amplitude_weekday=rng.uniform(0.50, 0.60),
                          amplitude_weekend=rng.uniform(0.08, 0.15), phase_hours=phase)
    return LotProfile(lot_type, base=rng.uniform(0.50, 0.60),
                      amplitude_weekday=rng.uniform(0.20, 0.28),
                      amplitude_weekend=rng.uniform(0.20, 0.28), phase_hours=phase)


def generate(config: SynthConfig, out_dir=None) -> ParkingDataset:
    """Build a dataset (optionally writing lots.csv / occupancy.csv / synth_meta.json)."""
    rng = np.random.default_rng(config.seed)
    n = config.n_lots
    counts = apportion_types(n, config.type_mix)
    types: list[str] = []
    for t in LOT_TYPES:
        types.extend([t] * counts[t])
    order = rng.permutation(n)
    types = [types[i] for i in order]

    # Placement: uniform square plus one central business-district cluster
    # of high-capacity, highly open lots (the planted high-PR set).
    extent = config.area_extent_m
    xy = rng.uniform(-extent / 2, extent / 2, size=(n, 2))
    n_cluster = max(1, round(0.2 * n))
    cluster_ids = sorted(rng.choice(n, size=n_cluster, replace=False).tolist())
    cluster_set = set(cluster_ids)
    for i in cluster_ids:
        xy[i] = rng.normal(0.0, extent / 10.0, size=2)

    lat0, lon0 = DEFAULT_CENTER
    m_per_deg_lon = M_PER_DEG_LAT * math.cos(math.radians(lat0))

    lots: list[ParkingLot] = []
    profiles: dict[int, LotProfile] = {}
    for i in range(n):
        t = types[i]
        if i in cluster_set:
            capacity = int(round(math.exp(rng.uniform(math.log(200), math.log(500)))))
            service = rng.uniform(0.8, 1.0)
        else:
            capacity = int(round(math.exp(rng.uniform(math.log(20), math.log(300)))))
            service = {"commercial": rng.uniform(0.7, 1.0),
                       "office": rng.uniform(0.3, 0.7),
                       "residential": rng.uniform(0.0, 0.3)}[t]
        price = {"commercial": rng.uniform(6.0, 12.0),
                 "office": rng.uniform(3.0, 8.0),
                 "residential": 0.0 if rng.random() < 0.5 else rng.uniform(0.5, 3.0)}[t]
        lots.append(ParkingLot(
            lot_id=i,
            lat=lat0 + xy[i, 1] / M_PER_DEG_LAT,
            lon=lon0 + xy[i, 0] / m_per_deg_lon,
            service_range=round(service, 6),
            capacity=capacity,
            price=round(price, 2),
        ))
        profiles[i] = _draw_profile(t, rng)

    n_steps = config.days * STEPS_PER_DAY
    series: dict[int, OccupancySeries] = {}
    for lot in lots:
        clean = _profile_series(profiles[lot.lot_id], n_steps)
        noisy = clean if config.noise_sigma == 0 else clean + rng.normal(0.0, config.noise_sigma, n_steps)
        occupied = np.rint(np.clip(noisy, 0.0, 1.0) * lot.capacity).astype(np.int64)
        series[lot.lot_id] = OccupancySeries(lot_id=lot.lot_id, start_time=config.start_time, samples=occupied)

    meta = {
        "config": asdict(config),
        "type_counts": counts,
        "lot_types": {str(lot.lot_id): profiles[lot.lot_id].lot_type for lot in lots},
        "profiles": {str(i): asdict(p) for i, p in sorted(profiles.items())},
        "high_pr_lots": cluster_ids,
        "peak_windows": PEAK_WINDOWS,
    }
    dataset = ParkingDataset(lots=lots, series=series, n_steps=n_steps, synth_meta=meta)
    if out_dir is not None:
        write_dataset_files(dataset, out_dir)
    return dataset


def write_dataset_files(dataset: ParkingDataset, out_dir) -> tuple[Path, Path]:
    """Emit lots.csv and occupancy.csv exactly as ingestion expects them."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lots_path = out_dir / "lots.csv"
    occ_path = out_dir / "occupancy.csv"

    lines = ["lot_id,lat,lon,service_range,capacity,price"]
    for lot in dataset.lots:
        lines.append(",".join([
            str(lot.lot_id), format_float(lot.lat), format_float(lot.lon),
            format_float(lot.service_range), str(lot.capacity), format_float(lot.price),
        ]))
    lots_path.write_text("\n".join(lines) + "\n")

    start = datetime.fromisoformat(dataset.series[dataset.lots[0].lot_id].start_time)
    step = timedelta(minutes=STEP_MINUTES)
    occ = dataset.occupancy_matrix()
    rows = ["timestamp,lot_id,occupied"]
    for t in range(dataset.n_steps):
        stamp = (start + t * step).isoformat()
        for j, lot in enumerate(dataset.lots):
            rows.append(f"{stamp},{lot.lot_id},{occ[t, j]}")
    occ_path.write_text("\n".join(rows) + "\n")

    if dataset.synth_meta is not None:
        (out_dir / "synth_meta.json").write_text(
            json.dumps(dataset.synth_meta, indent=2, sort_keys=True) + "\n")
    return lots_path, occ_path


def planted_structure_report(dataset: ParkingDataset) -> dict:
    """Ground truth planted by :func:`generate`, for use as a test oracle."""
    meta = dataset.synth_meta
    if meta is None:
        raise DataValidationError("planted_structure_report requires a dataset produced by generate()")
    present = sorted({t for t in meta["lot_types"].values()})
    pr = parking_rank(dataset.lots)
    return {
        "type_counts": meta["type_counts"],
        "peak_windows": {t: meta["peak_windows"][t] for t in present},
        "high_pr_lots": meta["high_pr_lots"],
        "mean_rank_high_pr": float(np.mean([pr[i] for i in meta["high_pr_lots"]])),
        "mean_rank_rest": float(np.mean([pr[i] for i in range(dataset.n_lots)
                                         if i not in set(meta["high_pr_lots"])])) if dataset.n_lots > len(meta["high_pr_lots"]) else 0.0,
    }


def load_synth_config(doc: dict) -> SynthConfig:
    """Build a SynthConfig from a JSON-style dict, rejecting unknown keys."""
    allowed = {"n_lots", "type_mix", "area_extent_m", "seed", "days", "noise_sigma", "start_time"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
    if "type_mix" in doc:
        doc = dict(doc)
        doc["type_mix"] = tuple(doc["type_mix"])
    try:
        return SynthConfig(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad synth config: {exc}") from None
