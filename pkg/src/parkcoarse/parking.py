"""Parking lots, occupancy series, service-capacity scoring, and ingestion.

The service-capacity score (ParkingRank) of lot i combines its openness
s_i in [0, 1], capacity y_i, and hourly price z_i:

    PR_i = exp(s_i) * (y_i / ||y||_1) / (1 + z_i / ||z||_1)

with the price term dropped when every lot is free. Distance graphs use
haversine distances on a spherical Earth and a hard reachability
threshold; edge weights are the reciprocal of the threshold-normalized
distance with a 10 m floor so co-located lots stay finite.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .errors import ConfigError, DataValidationError

EARTH_RADIUS_M = 6_371_000.0
MIN_DISTANCE_M = 10.0
STEP_MINUTES = 15

# Channel order of the low-dimensional feature tensor.
FEATURE_CHANNELS = ("parking_rank", "occupancy_rate", "lat", "lon")
F_LOW = len(FEATURE_CHANNELS)
OCCUPANCY_CHANNEL = FEATURE_CHANNELS.index("occupancy_rate")


@dataclass(frozen=True)
class ParkingLot:
    """Static attributes of one lot."""

    lot_id: int
    lat: float
    lon: float
    service_range: float
    capacity: int
    price: float

    def __post_init__(self):
        if not 0.0 <= self.service_range <= 1.0:
            raise DataValidationError(f"lot {self.lot_id}: service_range {self.service_range} outside [0, 1]")
        if self.capacity < 1:
            raise DataValidationError(f"lot {self.lot_id}: capacity {self.capacity} must be >= 1")
        if self.price < 0:
            raise DataValidationError(f"lot {self.lot_id}: price {self.price} must be >= 0")


@dataclass
class OccupancySeries:
    """Occupied-space counts for one lot at a fixed 15-minute cadence."""

    lot_id: int
    start_time: str
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.int64)


@dataclass
class ParkingDataset:
    lots: list[ParkingLot]
    series: dict[int, OccupancySeries]
    n_steps: int
    synth_meta: dict | None = None

    @property
    def n_lots(self) -> int:
        return len(self.lots)

    def occupancy_matrix(self) -> np.ndarray:
        """Occupied counts as (T, N) in lot order."""
        return np.stack([self.series[lot.lot_id].samples for lot in self.lots], axis=1)

    def capacities(self) -> np.ndarray:
        return np.array([lot.capacity for lot in self.lots], dtype=np.float64)

    def occupancy_rates(self) -> np.ndarray:
        """Occupancy fractions as (T, N); every entry in [0, 1]."""
        return self.occupancy_matrix() / self.capacities()[None, :]


@dataclass
class DistanceGraph:
    """Thresholded reciprocal-distance weights plus raw distances."""

    weights: np.ndarray
    distances_m: np.ndarray
    threshold_m: float

    @property
    def support(self) -> np.ndarray:
        """Boolean adjacency support including self-loops."""
        return (self.weights > 0) | np.eye(self.weights.shape[0], dtype=bool)


@dataclass
class LowFeatures:
    """(T, N, 4) tensor with channels (PR, q, lat_norm, lon_norm)."""

    values: np.ndarray
    channels: tuple = FEATURE_CHANNELS


@dataclass
class SplitRanges:
    train: range
    val: range
    test: range


def rank_scores(s: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Array-level ParkingRank; a zero-capacity entry simply scores 0."""
    s = np.asarray(s, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    y_norm = np.abs(y).sum()
    if y_norm <= 0:
        raise DataValidationError("total capacity must be positive")
    z_norm = np.abs(z).sum()
    z_term = z / z_norm if z_norm > 0 else np.zeros_like(z)
    return np.exp(s) * (y / y_norm) / (1.0 + z_term)


def parking_rank(lots: list[ParkingLot]) -> np.ndarray:
    """Service-capacity score per lot; all-free fleets drop the price term."""
    if not lots:
        raise DataValidationError("parking_rank needs at least one lot")
    return rank_scores(
        np.array([lot.service_range for lot in lots]),
        np.array([lot.capacity for lot in lots], dtype=np.float64),
        np.array([lot.price for lot in lots], dtype=np.float64),
    )


def normalize_rank(pr: np.ndarray) -> np.ndarray:
    """Min-max normalize scores into [0, 1]; constant vectors map to 1."""
    lo, hi = pr.min(), pr.max()
    if hi - lo <= 0:
        return np.ones_like(pr)
    return (pr - lo) / (hi - lo)


def occupancy_rate(dataset: ParkingDataset, t: int) -> np.ndarray:
    if not 0 <= t < dataset.n_steps:
        raise DataValidationError(f"step {t} out of range [0, {dataset.n_steps})")
    occupied = np.array([dataset.series[lot.lot_id].samples[t] for lot in dataset.lots], dtype=np.float64)
    return occupied / dataset.capacities()


def haversine_m(lat1, lon1, lat2, lon2) -> float:
    """Great-circle distance in meters on a spherical Earth."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dphi = p2 - p1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def build_distance_graph(lots: list[ParkingLot], threshold_m: float = 500.0) -> DistanceGraph:
    """Pairwise reachability weights: w = threshold / max(d, 10 m), zero beyond threshold."""
    if threshold_m <= 0:
        raise ConfigError(f"threshold_m must be positive, got {threshold_m}")
    n = len(lots)
    lat = np.radians(np.array([lot.lat for lot in lots]))
    lon = np.radians(np.array([lot.lon for lot in lots]))
    dphi = lat[:, None] - lat[None, :]
    dlam = lon[:, None] - lon[None, :]
    a = np.sin(dphi / 2) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlam / 2) ** 2
    dist = 2 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(a)))
    np.fill_diagonal(dist, 0.0)
    floored = np.maximum(dist, MIN_DISTANCE_M)
    weights = np.where(dist <= threshold_m, threshold_m / floored, 0.0)
    np.fill_diagonal(weights, 0.0)
    weights = (weights + weights.T) / 2.0  # enforce exact symmetry against fp asymmetry
    return DistanceGraph(weights=weights, distances_m=dist, threshold_m=threshold_m)


def extract_low_features(dataset: ParkingDataset, pr: np.ndarray,
                         window: tuple[int, int] | None = None) -> LowFeatures:
    """Assemble the (T, N, 4) channel tensor over a step window [start, stop)."""
    start, stop = window if window is not None else (0, dataset.n_steps)
    if not (0 <= start < stop <= dataset.n_steps):
        raise DataValidationError(f"window [{start}, {stop}) out of bounds for T={dataset.n_steps}")
    n = dataset.n_lots
    if pr.shape != (n,):
        raise DataValidationError(f"PR vector shape {pr.shape} != ({n},)")
    q = dataset.occupancy_rates()[start:stop]
    lat = np.array([lot.lat for lot in dataset.lots])
    lon = np.array([lot.lon for lot in dataset.lots])
    lat_n = _min_max(lat)
    lon_n = _min_max(lon)
    steps = stop - start
    values = np.empty((steps, n, F_LOW))
    values[:, :, 0] = pr[None, :]
    values[:, :, 1] = q
    values[:, :, 2] = lat_n[None, :]
    values[:, :, 3] = lon_n[None, :]
    return LowFeatures(values=values)


def _min_max(x: np.ndarray) -> np.ndarray:
    span = x.max() - x.min()
    if span <= 0:
        return np.zeros_like(x)
    return (x - x.min()) / span


# ---------------------------------------------------------------------------
# ingestion

LOTS_HEADER = ["lot_id", "lat", "lon", "service_range", "capacity", "price"]
OCCUPANCY_HEADER = ["timestamp", "lot_id", "occupied"]


def load_dataset(lots_file, occupancy_file) -> ParkingDataset:
    """Strict CSV ingestion; rejects rather than imputes.

    Violations are reported with file and row number. Occupancy series
    must share one uniform 15-minute timeline with no gaps or duplicate
    (timestamp, lot_id) pairs, and counts must stay within capacity.
    """
    lots = _load_lots(lots_file)
    by_id = {lot.lot_id: lot for lot in lots}
    raw: dict[int, list[tuple[datetime, int, int]]] = {lot.lot_id: [] for lot in lots}

    with open(occupancy_file, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != OCCUPANCY_HEADER:
            raise DataValidationError(f"{occupancy_file}:1: expected header {','.join(OCCUPANCY_HEADER)}")
        for row_no, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise DataValidationError(f"{occupancy_file}:{row_no}: expected 3 fields, got {len(row)}")
            try:
                ts = datetime.fromisoformat(row[0])
            except ValueError:
                raise DataValidationError(f"{occupancy_file}:{row_no}: bad timestamp {row[0]!r}") from None
            try:
                lot_id = int(row[1])
                occupied = int(row[2])
            except ValueError:
                raise DataValidationError(f"{occupancy_file}:{row_no}: non-integer lot_id/occupied") from None
            lot = by_id.get(lot_id)
            if lot is None:
                raise DataValidationError(f"{occupancy_file}:{row_no}: unknown lot_id {lot_id}")
            if occupied < 0 or occupied > lot.capacity:
                raise DataValidationError(
                    f"{occupancy_file}:{row_no}: occupied {occupied} outside [0, capacity={lot.capacity}] for lot {lot_id}")
            raw[lot_id].append((ts, occupied, row_no))

    series: dict[int, OccupancySeries] = {}
    expected_len = None
    expected_start = None
    step = timedelta(minutes=STEP_MINUTES)
    for lot in lots:
        rows = sorted(raw[lot.lot_id], key=lambda r: r[0])
        if not rows:
            raise DataValidationError(f"{occupancy_file}: no occupancy rows for lot {lot.lot_id}")
        times = [r[0] for r in rows]
        for i in range(1, len(times)):
            if times[i] == times[i - 1]:
                raise DataValidationError(
                    f"{occupancy_file}:{rows[i][2]}: duplicate (timestamp, lot_id) for lot {lot.lot_id} at {times[i].isoformat()}")
            if times[i] - times[i - 1] != step:
                raise DataValidationError(
                    f"{occupancy_file}:{rows[i][2]}: non-uniform spacing for lot {lot.lot_id}: "
                    f"{times[i - 1].isoformat()} -> {times[i].isoformat()} (need {STEP_MINUTES} min)")
        if expected_len is None:
            expected_len = len(rows)
            expected_start = times[0]
        elif len(rows) != expected_len or times[0] != expected_start:
            raise DataValidationError(
                f"{occupancy_file}: lot {lot.lot_id} timeline differs from lot {lots[0].lot_id} "
                f"(length {len(rows)} vs {expected_len})")
        series[lot.lot_id] = OccupancySeries(
            lot_id=lot.lot_id,
            start_time=times[0].isoformat(),
            samples=np.array([r[1] for r in rows], dtype=np.int64),
        )
    return ParkingDataset(lots=lots, series=series, n_steps=expected_len)


def _load_lots(lots_file) -> list[ParkingLot]:
    lots: list[ParkingLot] = []
    seen: set[int] = set()
    with open(lots_file, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != LOTS_HEADER:
            raise DataValidationError(f"{lots_file}:1: expected header {','.join(LOTS_HEADER)}")
        for row_no, row in enumerate(reader, start=2):
            if len(row) != 6:
                raise DataValidationError(f"{lots_file}:{row_no}: expected 6 fields, got {len(row)}")
            try:
                lot = ParkingLot(
                    lot_id=int(row[0]),
                    lat=float(row[1]),
                    lon=float(row[2]),
                    service_range=float(row[3]),
                    capacity=int(row[4]),
                    price=float(row[5]),
                )
            except ValueError:
                raise DataValidationError(f"{lots_file}:{row_no}: malformed field") from None
            except DataValidationError as exc:
                raise DataValidationError(f"{lots_file}:{row_no}: {exc}") from None
            if lot.lot_id in seen:
                raise DataValidationError(f"{lots_file}:{row_no}: duplicate lot_id {lot.lot_id}")
            seen.add(lot.lot_id)
            lots.append(lot)
    if not lots:
        raise DataValidationError(f"{lots_file}: no lots found")
    return lots


def split_dataset(dataset_or_steps, fractions: tuple[float, float, float] = (0.7, 0.2, 0.1),
                  min_length: int = 1) -> SplitRanges:
    """Contiguous chronological split; boundaries at floors of cumulative fractions."""
    if isinstance(dataset_or_steps, ParkingDataset):
        n_steps = dataset_or_steps.n_steps
    else:
        n_steps = int(dataset_or_steps)
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {fractions}")
    if any(f < 0 for f in fractions):
        raise ConfigError(f"split fractions must be nonnegative, got {fractions}")
    # floor of the cumulative fraction, guarded against fp droop at exact
    # boundaries (e.g. 0.7 + 0.2 rounding just below 0.9)
    guard = 1e-9 * n_steps
    b1 = int(math.floor(fractions[0] * n_steps + guard))
    b2 = int(math.floor((fractions[0] + fractions[1]) * n_steps + guard))
    ranges = SplitRanges(train=range(0, b1), val=range(b1, b2), test=range(b2, n_steps))
    for name, rng in (("train", ranges.train), ("val", ranges.val), ("test", ranges.test)):
        frac = {"train": fractions[0], "val": fractions[1], "test": fractions[2]}[name]
        if frac > 0 and len(rng) < min_length:
            raise DataValidationError(
                f"{name} split has {len(rng)} steps, below the required {min_length} (window + horizon)")
    return ranges
