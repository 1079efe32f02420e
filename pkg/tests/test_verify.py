"""The oracle harness itself: correctness and structural independence."""

import ast
from pathlib import Path

import numpy as np
import pytest

from parkcoarse import verify as vf


class TestOracleMetrics:
    def test_exact_on_integers(self):
        out = vf.oracle_metrics([1.0, 2.0], [1.0, 3.0])
        assert out["mae"] == 0.5
        assert out["rmse"] == pytest.approx(np.sqrt(0.5))
        assert out["mape"] == pytest.approx(25.0)

    def test_perfect_prediction(self):
        out = vf.oracle_metrics([0.4, 0.7], [0.4, 0.7])
        assert out == {"mae": 0.0, "rmse": 0.0, "mape": 0.0}

    def test_mutation_detected(self):
        # a deliberately wrong formula must disagree with the oracle
        y = np.array([1.0, 2.0, 4.0])
        p = np.array([1.5, 1.0, 3.0])
        wrong_mae = float(np.abs(y - p).sum())  # forgot the 1/n
        assert abs(wrong_mae - vf.oracle_metrics(y, p)["mae"]) > 1e-6

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            vf.oracle_metrics([1.0], [1.0, 2.0])


class TestOracleEigen:
    def test_k2(self):
        lap = np.array([[1.0, -1.0], [-1.0, 1.0]])
        np.testing.assert_allclose(vf.oracle_eigen(lap), [0.0, 2.0], atol=1e-10)

    def test_p3(self):
        a = np.array([[0.0, 1, 0], [1, 0, 1], [0, 1, 0]])
        np.testing.assert_allclose(vf.oracle_laplacian_eigenvalues(a), [0.0, 1.0, 2.0], atol=1e-10)

    def test_matches_lapack_on_random_symmetric(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n = rng.integers(2, 9)
            m = rng.normal(size=(n, n))
            sym = (m + m.T) / 2
            np.testing.assert_allclose(vf.oracle_eigen(sym), np.linalg.eigvalsh(sym), atol=1e-8)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            vf.oracle_eigen(np.array([[0.0, 1.0], [0.5, 0.0]]))

    def test_single_entry(self):
        np.testing.assert_allclose(vf.oracle_eigen(np.array([[3.0]])), [3.0])


class TestOracleCoarsenSmall:
    def test_k2_unique_partition(self):
        part, sd = vf.oracle_coarsen_small(np.array([[0.0, 1.0], [1.0, 0.0]]), 0.5)
        assert part == [(0, 1)]
        assert sd >= 0.0

    def test_ratio_one_singletons(self):
        part, sd = vf.oracle_coarsen_small(np.array([[0.0, 1.0], [1.0, 0.0]]), 1.0)
        assert part == [(0,), (1,)]
        assert sd == pytest.approx(0.0, abs=1e-10)

    def test_two_triangles_optimum(self):
        tri = np.zeros((6, 6))
        for x, y in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]:
            tri[x, y] = tri[y, x] = 1.0
        part, sd = vf.oracle_coarsen_small(tri, 1 / 3)
        assert part == [(0, 1, 2), (3, 4, 5)]
        assert sd == pytest.approx(0.0, abs=1e-9)

    def test_rejects_big_instances(self):
        with pytest.raises(ValueError):
            vf.oracle_coarsen_small(np.eye(9), 0.5)

    def test_connectivity_restriction(self):
        # two disconnected edges cannot merge across components into 1 block
        a = np.zeros((4, 4))
        a[0, 1] = a[1, 0] = 1.0
        a[2, 3] = a[3, 2] = 1.0
        with pytest.raises(ValueError):
            vf.oracle_coarsen_small(a, 0.25)


class TestStatisticalRunner:
    def test_constant_values(self):
        report = vf.statistical_runner(lambda s: 2.0, seeds=range(5), name="const")
        assert report.values == [2.0] * 5
        assert report.median == 2.0

    def test_reproducible_median(self):
        def check(seed):
            return float(np.random.default_rng(seed).normal())

        a = vf.statistical_runner(check, seeds=[1, 2, 3, 4, 5])
        b = vf.statistical_runner(check, seeds=[1, 2, 3, 4, 5])
        assert a.values == b.values and a.median == b.median

    def test_insufficient_seeds(self):
        with pytest.raises(ValueError):
            vf.statistical_runner(lambda s: 0.0, seeds=[1])

    def test_sign_count(self):
        assert vf.paired_sign_count([-1.0, -0.5, 0.2]) == (2, 3)

    def test_report_json_lines(self, tmp_path):
        reports = [vf.statistical_runner(lambda s: float(s), seeds=[1, 2, 3], name="ids")]
        path = tmp_path / "reports.jsonl"
        vf.write_reports(reports, path)
        line = path.read_text().strip()
        assert '"check": "ids"' in line and line.count("\n") == 0


def test_oracles_structurally_independent():
    """verify.py must not import the optimized modules it cross-checks."""
    source = Path(vf.__file__).read_text()
    tree = ast.parse(source)
    imported = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            imported |= {alias.name for alias in node.names}
        elif isinstance(node, ast.ImportFrom):
            imported.add(node.module or "")
    banned = {"parkcoarse.coarsen", "parkcoarse.pipeline", "parkcoarse.tensor",
              "parkcoarse.prgat", "parkcoarse.tgcn", "parkcoarse.tcnae", "parkcoarse.parking"}
    assert not (imported & banned), f"oracle module imports implementation modules: {imported & banned}"
    assert not any(name.startswith(".") or name in {"coarsen", "pipeline", "tensor"} for name in imported)


def test_oracle_eigen_no_lapack():
    source = Path(vf.__file__).read_text()
    assert "linalg" not in source, "oracle eigensolver must not delegate to numpy.linalg"
