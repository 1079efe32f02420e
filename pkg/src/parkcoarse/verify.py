"""Brute-force reference implementations for the acceptance suite.

Every oracle here is written against the raw formulas with naive loops
and deliberately imports nothing from the optimized modules it checks
(the test suite asserts this structurally). Jacobi rotations stand in
for the library eigensolver; set-partition enumeration stands in for
greedy coarsening.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np


@dataclass
class OracleReport:
    check: str
    instance: str
    values: list
    median: float | None = None
    max_deviation: float | None = None
    tolerance: float | None = None
    passed: bool | None = None

    def to_json_line(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def oracle_metrics(y, y_hat, mape_floor: float = 1e-3) -> dict[str, float]:
    """MAE / RMSE / MAPE(%) with scalar loops over flattened values."""
    ys = np.asarray(y, dtype=np.float64).ravel().tolist()
    ps = np.asarray(y_hat, dtype=np.float64).ravel().tolist()
    if len(ys) != len(ps):
        raise ValueError(f"length mismatch: {len(ys)} vs {len(ps)}")
    n = len(ys)
    abs_sum = 0.0
    sq_sum = 0.0
    pct_sum = 0.0
    for yt, pt in zip(ys, ps):
        err = yt - pt
        abs_sum += abs(err)
        sq_sum += err * err
        pct_sum += abs(err) / max(yt, mape_floor)
    return {
        "mae": abs_sum / n,
        "rmse": math.sqrt(sq_sum / n),
        "mape": 100.0 * pct_sum / n,
    }


def oracle_eigen(a, tol: float = 1e-12, max_sweeps: int = 200) -> np.ndarray:
    """Eigenvalues of a small symmetric matrix via classical Jacobi rotations."""
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"matrix must be square, got {a.shape}")
    if np.abs(a - a.T).max() > 1e-10:
        raise ValueError("oracle_eigen expects a symmetric matrix")
    a = (a + a.T) / 2.0
    if n == 1:
        return a.diagonal().copy()
    for _ in range(max_sweeps * n * n):
        off = np.abs(a - np.diag(np.diag(a)))
        p, q = np.unravel_index(np.argmax(off), off.shape)
        if off[p, q] <= tol:
            break
        if p > q:
            p, q = q, p
        theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
        t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
        c = 1.0 / math.sqrt(t * t + 1.0)
        s = t * c
        rot = np.eye(n)
        rot[p, p] = c
        rot[q, q] = c
        rot[p, q] = s
        rot[q, p] = -s
        a = rot.T @ a @ rot
        a = (a + a.T) / 2.0
    return np.sort(np.diag(a))


def _oracle_normalized_laplacian(a: np.ndarray) -> np.ndarray:
    a = (np.asarray(a, dtype=np.float64) + np.asarray(a, dtype=np.float64).T) / 2.0
    n = a.shape[0]
    deg = [sum(a[i]) for i in range(n)]
    lap = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            lap[i, j] = (1.0 if i == j else 0.0) - a[i, j] / math.sqrt(deg[i] * deg[j])
    return lap


def oracle_laplacian_eigenvalues(a) -> np.ndarray:
    return oracle_eigen(_oracle_normalized_laplacian(a))


def _connected(block: tuple[int, ...], support: np.ndarray) -> bool:
    block = list(block)
    todo = [block[0]]
    seen = {block[0]}
    members = set(block)
    while todo:
        x = todo.pop()
        for y in members:
            if y not in seen and support[x, y]:
                seen.add(y)
                todo.append(y)
    return len(seen) == len(members)


def _partitions_into(items: list[int], n_blocks: int):
    """All set partitions of items into exactly n_blocks blocks."""
    def rec(i, blocks):
        remaining = len(items) - i
        if len(blocks) > n_blocks or len(blocks) + remaining < n_blocks:
            return
        if i == len(items):
            if len(blocks) == n_blocks:
                yield [tuple(b) for b in blocks]
            return
        x = items[i]
        for b in blocks:
            b.append(x)
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([x])
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(0, [])


def oracle_coarsen_small(a, ratio: float) -> tuple[list[tuple[int, ...]], float]:
    """Exhaustive min-spectral-distance clustering for N <= 8.

    Enumerates every partition into round(ratio * N) blocks whose blocks
    induce connected subgraphs, aggregates edge weights per block pair,
    and scores each candidate by the L1 gap between the leading
    normalized-Laplacian eigenvalues of the original and coarse graphs.
    """
    a = np.asarray(a, dtype=np.float64)
    a = (a + a.T) / 2.0
    n = a.shape[0]
    if n > 8:
        raise ValueError(f"oracle_coarsen_small caps at N=8, got {n}")
    n_c = max(1, round(ratio * n))
    support = a > 0
    orig = oracle_laplacian_eigenvalues(a)
    best_sd = None
    best_partition = None
    for partition in _partitions_into(list(range(n)), n_c):
        if not all(_connected(b, support) for b in partition):
            continue
        coarse = np.zeros((len(partition), len(partition)))
        for pi, bp in enumerate(partition):
            for qi, bq in enumerate(partition):
                total = 0.0
                for x in bp:
                    for y in bq:
                        total += a[x, y]
                coarse[pi, qi] = total
        if np.any(coarse.sum(axis=1) <= 0):
            continue
        lam_c = oracle_laplacian_eigenvalues(coarse)
        k = len(partition)
        sd = float(np.abs(orig[:k] - lam_c[:k]).sum())
        if best_sd is None or sd < best_sd:
            best_sd = sd
            best_partition = sorted(tuple(sorted(b)) for b in partition)
    if best_partition is None:
        raise ValueError("no neighbor-respecting partition exists at this ratio")
    return best_partition, best_sd


def statistical_runner(check, seeds, alpha: float = 0.5, name: str = "check",
                       instance: str = "", min_seeds: int = 3) -> OracleReport:
    """Run a scalar-valued check per seed and report all values + median."""
    seeds = list(seeds)
    if len(seeds) < min_seeds:
        raise ValueError(f"need at least {min_seeds} seeds, got {len(seeds)}")
    values = [float(check(seed)) for seed in seeds]
    return OracleReport(check=name, instance=instance or f"seeds={seeds}",
                        values=values, median=float(np.median(values)))


def paired_sign_count(diffs) -> tuple[int, int]:
    """(favorable, total) counts of strictly negative paired differences."""
    diffs = list(diffs)
    favorable = sum(1 for d in diffs if d < 0)
    return favorable, len(diffs)


def write_reports(reports: list[OracleReport], path) -> None:
    with open(path, "w") as fh:
        for report in reports:
            fh.write(report.to_json_line() + "\n")
