"""Parking domain: rank scores, distance graphs, features, ingestion, splits."""

import numpy as np
import pytest

from parkcoarse.errors import ConfigError, DataValidationError
from parkcoarse import parking as pk


def make_lot(lot_id, lat=22.5, lon=113.9, s=1.0, cap=100, price=5.0):
    return pk.ParkingLot(lot_id=lot_id, lat=lat, lon=lon, service_range=s,
                         capacity=cap, price=price)


THREE_LOTS = [
    make_lot(0, s=1.0, cap=100, price=5.0),
    make_lot(1, s=0.5, cap=50, price=10.0),
    make_lot(2, s=0.0, cap=50, price=0.0),
]


class TestParkingRank:
    def test_three_lot_hand_values(self):
        # independent evaluation with ||y||_1 = 200, ||z||_1 = 15:
        # exp(1)*0.5/(1+1/3), exp(0.5)*0.25/(1+2/3), 1*0.25/(1+0)
        pr = pk.parking_rank(THREE_LOTS)
        np.testing.assert_allclose(pr, [1.019356, 0.247308, 0.250000], atol=5e-7)

    def test_single_free_lot(self):
        pr = pk.parking_rank([make_lot(0, s=0.0, cap=10, price=0.0)])
        assert pr[0] == pytest.approx(1.0)

    def test_zero_capacity_scores_zero_at_formula_level(self):
        pr = pk.rank_scores(np.array([1.0, 0.5]), np.array([0.0, 10.0]), np.array([0.0, 0.0]))
        assert pr[0] == 0.0

    def test_all_free_drops_price_term(self):
        pr = pk.rank_scores(np.zeros(2), np.array([10.0, 10.0]), np.zeros(2))
        np.testing.assert_allclose(pr, [0.5, 0.5])

    def test_empty_rejected(self):
        with pytest.raises(DataValidationError):
            pk.parking_rank([])

    def test_capacity_scale_invariance(self):
        # multiplying all capacities by c leaves y_i/||y|| unchanged
        scaled = [make_lot(i, s=l.service_range, cap=l.capacity * 7, price=l.price)
                  for i, l in enumerate(THREE_LOTS)]
        np.testing.assert_allclose(pk.parking_rank(scaled), pk.parking_rank(THREE_LOTS), atol=1e-12)

    def test_monotonicity_in_attributes(self):
        s = np.array([0.5, 0.5, 0.5])
        y = np.array([50.0, 50.0, 50.0])
        z = np.array([5.0, 5.0, 5.0])
        base = pk.rank_scores(s, y, z)[0]
        assert pk.rank_scores(s + np.array([0.1, 0, 0]), y, z)[0] > base
        assert pk.rank_scores(s, y + np.array([10.0, 0, 0]), z)[0] > base
        assert pk.rank_scores(s, y, z + np.array([5.0, 0, 0]))[0] < base


class TestOccupancyRate:
    def make_dataset(self):
        lots = [make_lot(0, cap=100), make_lot(1, cap=4)]
        series = {
            0: pk.OccupancySeries(0, "2024-01-01T00:00:00", np.array([0, 25, 100])),
            1: pk.OccupancySeries(1, "2024-01-01T00:00:00", np.array([4, 1, 0])),
        }
        return pk.ParkingDataset(lots=lots, series=series, n_steps=3)

    def test_bounds_and_values(self):
        ds = self.make_dataset()
        np.testing.assert_allclose(pk.occupancy_rate(ds, 0), [0.0, 1.0])
        np.testing.assert_allclose(pk.occupancy_rate(ds, 1), [0.25, 0.25])

    def test_step_out_of_range(self):
        with pytest.raises(DataValidationError):
            pk.occupancy_rate(self.make_dataset(), 3)


class TestDistanceGraph:
    def test_haversine_one_degree_lat(self):
        # 0.009 deg of latitude is ~1001 m on the 6371 km sphere
        d = pk.haversine_m(22.5000, 113.9000, 22.5090, 113.9000)
        assert d == pytest.approx(1001.0, abs=1.0)

    def test_beyond_threshold_zero(self):
        lots = [make_lot(0, lat=22.5, lon=113.9), make_lot(1, lat=22.5054, lon=113.9)]
        g = pk.build_distance_graph(lots, threshold_m=500.0)
        assert g.distances_m[0, 1] == pytest.approx(600.0, abs=2.0)
        assert g.weights[0, 1] == 0.0

    def test_within_threshold_reciprocal_weight(self):
        lots = [make_lot(0, lat=22.5, lon=113.9), make_lot(1, lat=22.50225, lon=113.9)]
        g = pk.build_distance_graph(lots, threshold_m=500.0)
        assert g.weights[0, 1] == pytest.approx(500.0 / g.distances_m[0, 1], rel=1e-9)

    def test_colocated_lots_floored_not_inf(self):
        lots = [make_lot(0), make_lot(1)]
        g = pk.build_distance_graph(lots, threshold_m=500.0)
        assert np.isfinite(g.weights[0, 1])
        assert g.weights[0, 1] == pytest.approx(500.0 / 10.0)

    def test_no_self_edges(self):
        g = pk.build_distance_graph([make_lot(i) for i in range(3)], 500.0)
        assert np.all(np.diag(g.weights) == 0.0)

    def test_symmetry_and_threshold_property(self):
        for seed in range(100):
            r = np.random.default_rng(seed)
            lots = [make_lot(i, lat=22.5 + r.uniform(-0.01, 0.01), lon=113.9 + r.uniform(-0.01, 0.01))
                    for i in range(12)]
            g = pk.build_distance_graph(lots, threshold_m=600.0)
            np.testing.assert_array_equal(g.weights, g.weights.T)
            off = ~np.eye(12, dtype=bool)
            assert np.all((g.weights[off] > 0) == (g.distances_m[off] <= 600.0))

    def test_bad_threshold(self):
        with pytest.raises(ConfigError):
            pk.build_distance_graph([make_lot(0)], 0.0)


class TestLowFeatures:
    def make_dataset(self, n_steps=4):
        lots = [make_lot(0, lat=22.50, lon=113.90, cap=100),
                make_lot(1, lat=22.51, lon=113.95, cap=50)]
        series = {i: pk.OccupancySeries(i, "2024-01-01T00:00:00",
                                        np.full(n_steps, 25 * (i + 1)))
                  for i in range(2)}
        return pk.ParkingDataset(lots=lots, series=series, n_steps=n_steps)

    def test_shape_contract(self):
        ds = self.make_dataset(1)
        feats = pk.extract_low_features(ds, pk.parking_rank(ds.lots), window=(0, 1))
        assert feats.values.shape == (1, 2, 4)

    def test_constant_occupancy_constant_channel(self):
        ds = self.make_dataset()
        feats = pk.extract_low_features(ds, pk.parking_rank(ds.lots)).values
        q = feats[:, :, pk.OCCUPANCY_CHANNEL]
        assert np.all(q == q[0])

    def test_pr_channel_static(self):
        pr = pk.parking_rank(THREE_LOTS)
        series = {i: pk.OccupancySeries(i, "2024-01-01T00:00:00", np.arange(5) * (i + 1))
                  for i in range(3)}
        ds = pk.ParkingDataset(lots=THREE_LOTS, series=series, n_steps=5)
        feats = pk.extract_low_features(ds, pr).values
        np.testing.assert_allclose(feats[:, 0, 0], 1.019356, atol=5e-7)

    def test_coordinate_channels_normalized(self):
        ds = self.make_dataset()
        feats = pk.extract_low_features(ds, pk.parking_rank(ds.lots)).values
        assert feats[:, :, 2].min() == 0.0 and feats[:, :, 2].max() == 1.0
        assert feats[:, :, 3].min() == 0.0 and feats[:, :, 3].max() == 1.0

    def test_window_out_of_bounds(self):
        ds = self.make_dataset()
        with pytest.raises(DataValidationError):
            pk.extract_low_features(ds, pk.parking_rank(ds.lots), window=(0, 9))


class TestIngestion:
    def write_fixture(self, tmp_path, occupancy_rows=None, lots_rows=None):
        lots = tmp_path / "lots.csv"
        occ = tmp_path / "occupancy.csv"
        lots.write_text("\n".join(
            ["lot_id,lat,lon,service_range,capacity,price"] +
            (lots_rows or ["0,22.5,113.9,1.0,100,5.0", "1,22.501,113.9,0.5,50,0.0"])) + "\n")
        if occupancy_rows is None:
            occupancy_rows = []
            for step in range(8):
                stamp = f"2024-01-01T{step * 15 // 60:02d}:{step * 15 % 60:02d}:00"
                occupancy_rows.append(f"{stamp},0,{10 + step}")
                occupancy_rows.append(f"{stamp},1,{step}")
        occ.write_text("\n".join(["timestamp,lot_id,occupied"] + occupancy_rows) + "\n")
        return lots, occ

    def test_well_formed_fixture(self, tmp_path):
        lots, occ = self.write_fixture(tmp_path)
        ds = pk.load_dataset(lots, occ)
        assert ds.n_steps == 8
        assert ds.n_lots == 2
        assert ds.series[0].samples[0] == 10

    def test_over_capacity_rejected_with_row(self, tmp_path):
        rows = ["2024-01-01T00:00:00,0,120"]
        lots, occ = self.write_fixture(tmp_path, occupancy_rows=rows)
        with pytest.raises(DataValidationError, match=r"occupancy\.csv:2"):
            pk.load_dataset(lots, occ)

    def test_duplicate_timestamp_rejected(self, tmp_path):
        rows = ["2024-01-01T00:00:00,0,1", "2024-01-01T00:00:00,0,2",
                "2024-01-01T00:00:00,1,1", "2024-01-01T00:15:00,1,1"]
        lots, occ = self.write_fixture(tmp_path, occupancy_rows=rows)
        with pytest.raises(DataValidationError, match="duplicate"):
            pk.load_dataset(lots, occ)

    def test_gap_rejected(self, tmp_path):
        rows = ["2024-01-01T00:00:00,0,1", "2024-01-01T00:45:00,0,2",
                "2024-01-01T00:00:00,1,1", "2024-01-01T00:45:00,1,1"]
        lots, occ = self.write_fixture(tmp_path, occupancy_rows=rows)
        with pytest.raises(DataValidationError, match="non-uniform"):
            pk.load_dataset(lots, occ)

    def test_unknown_lot_rejected(self, tmp_path):
        rows = ["2024-01-01T00:00:00,7,1"]
        lots, occ = self.write_fixture(tmp_path, occupancy_rows=rows)
        with pytest.raises(DataValidationError, match="unknown lot_id 7"):
            pk.load_dataset(lots, occ)

    def test_duplicate_lot_id_rejected(self, tmp_path):
        lots, occ = self.write_fixture(
            tmp_path, lots_rows=["0,22.5,113.9,1.0,100,5.0", "0,22.6,113.9,1.0,100,5.0"])
        with pytest.raises(DataValidationError, match="duplicate lot_id"):
            pk.load_dataset(lots, occ)

    def test_table_scale_step_count_is_180_days(self):
        # 17,280 steps at 15 minutes is exactly 180 days
        assert 17280 * 15 / (24 * 60) == 180


class TestSplits:
    def test_reference_step_count(self):
        s = pk.split_dataset(17280)
        assert (len(s.train), len(s.val), len(s.test)) == (12096, 3456, 1728)

    def test_small_floors(self):
        s = pk.split_dataset(10)
        assert (len(s.train), len(s.val), len(s.test)) == (7, 2, 1)

    def test_all_train(self):
        s = pk.split_dataset(10, fractions=(1.0, 0.0, 0.0))
        assert (len(s.train), len(s.val), len(s.test)) == (10, 0, 0)

    def test_disjoint_ordered_cover(self):
        for t_steps in (10, 97, 1344):
            s = pk.split_dataset(t_steps)
            assert s.train.stop == s.val.start and s.val.stop == s.test.start
            assert s.train.start == 0 and s.test.stop == t_steps

    def test_fraction_sum_enforced(self):
        with pytest.raises(ConfigError):
            pk.split_dataset(100, fractions=(0.7, 0.2, 0.2))

    def test_too_short_split_rejected(self):
        with pytest.raises(DataValidationError):
            pk.split_dataset(20, min_length=13)
