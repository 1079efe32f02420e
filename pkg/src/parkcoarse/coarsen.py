"""Spectral coarsening of the combined adjacency into hypernodes.

The adjacency is symmetrized (row softmaxes make it directed), its
normalized Laplacian decomposed, and nodes greedily agglomerated by
cosine similarity of their eigenvector-row embeddings. Merges are
restricted to graph neighbors, so every hypernode induces a connected
subgraph. Several eigen-subspace windows (leading and trailing blocks)
are tried and the clustering with the smallest spectral distance to the
original graph wins; spectral distance is the L1 gap between the graphs'
leading normalized-Laplacian eigenvalues.

Coarse edge weights aggregate all member-pair weights, with intra-cluster
weight landing on the diagonal, so total weight is preserved exactly.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .arrayio import format_float
from .errors import ConfigError, NumericError, ShapeError

SD_REPORT_THRESHOLD = 1e-8  # reporting flag only, never a hard gate


@dataclass
class SpectralCache:
    laplacian: np.ndarray
    eigenvalues: np.ndarray | None = None
    eigenvectors: np.ndarray | None = None


@dataclass
class CoarseGraph:
    adjacency: np.ndarray
    index: list[list[int]]
    ratio: float
    spectral_dist: float = 0.0
    window: str = "identity"

    @property
    def n_hypernodes(self) -> int:
        return len(self.index)

    @property
    def within_threshold(self) -> bool:
        return self.spectral_dist < SD_REPORT_THRESHOLD


def symmetrize(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2.0


def normalized_laplacian(a: np.ndarray) -> SpectralCache:
    """L = I - D^{-1/2} A_sym D^{-1/2} on the symmetrized matrix."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"adjacency must be square, got {a.shape}")
    if np.any(a < 0):
        raise ConfigError("adjacency must be nonnegative")
    a_sym = symmetrize(a)
    deg = a_sym.sum(axis=1)
    if np.any(deg <= 0):
        bad = int(np.nonzero(deg <= 0)[0][0])
        raise NumericError(f"zero-degree node {bad}; add self-loops before Laplacian work")
    d_inv_sqrt = 1.0 / np.sqrt(deg)
    lap = -a_sym * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]
    lap[np.diag_indices_from(lap)] += 1.0
    return SpectralCache(laplacian=lap)


def eigen_decompose(cache: SpectralCache, k_lo: int | None = None, k_hi: int | None = None):
    """Full symmetric eigendecomposition, ascending.

    With no subset arguments returns (values, vectors). With ``k_lo`` /
    ``k_hi`` returns the leading k_lo and trailing k_hi pairs as
    (lead_vals, lead_vecs, trail_vals, trail_vecs).
    """
    if cache.eigenvalues is None:
        lap = symmetrize(cache.laplacian)  # guard fp asymmetry
        try:
            vals, vecs = np.linalg.eigh(lap)
        except np.linalg.LinAlgError as exc:
            residual = float(np.abs(lap - lap.T).max())
            raise NumericError(f"eigendecomposition failed to converge (asymmetry residual {residual})") from exc
        cache.eigenvalues = vals
        cache.eigenvectors = vecs
    if k_lo is None and k_hi is None:
        return cache.eigenvalues, cache.eigenvectors
    n = cache.eigenvalues.shape[0]
    k_lo = min(n, k_lo if k_lo is not None else n)
    k_hi = min(n, k_hi if k_hi is not None else n)
    return (cache.eigenvalues[:k_lo], cache.eigenvectors[:, :k_lo],
            cache.eigenvalues[n - k_hi:], cache.eigenvectors[:, n - k_hi:])


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ShapeError(f"vector shapes differ: {u.shape} vs {v.shape}")
    nu = math.sqrt(float(u @ u))
    nv = math.sqrt(float(v @ v))
    if nu == 0.0 or nv == 0.0:
        raise NumericError("cosine similarity undefined for a zero vector")
    return float(u @ v) / (nu * nv)


def laplacian_eigenvalues(a: np.ndarray) -> np.ndarray:
    return eigen_decompose(normalized_laplacian(a))[0]


def spectral_distance(a: np.ndarray, b: np.ndarray, k: int) -> float:
    """L1 distance between the k leading normalized-Laplacian eigenvalues."""
    if k < 1 or k > min(a.shape[0], b.shape[0]):
        raise ConfigError(f"k={k} invalid for sizes {a.shape[0]} and {b.shape[0]}")
    la = laplacian_eigenvalues(a)[:k]
    lb = laplacian_eigenvalues(b)[:k]
    return float(np.abs(la - lb).sum())


def partition_adjacency(a_sym: np.ndarray, index: list[list[int]]) -> np.ndarray:
    """Aggregate member-pair weights; intra-cluster weight hits the diagonal."""
    n_c = len(index)
    a_c = np.zeros((n_c, n_c))
    for p, mp in enumerate(index):
        block_p = a_sym[np.ix_(mp, mp)]
        a_c[p, p] = block_p.sum()
        for q in range(p + 1, n_c):
            w = a_sym[np.ix_(mp, index[q])].sum()
            a_c[p, q] = w
            a_c[q, p] = w
    return a_c


def _greedy_merge(embed: np.ndarray, support: np.ndarray, n_target: int) -> list[list[int]]:
    """Agglomerate neighboring clusters by embedding-row cosine similarity.

    Merged clusters pool their embedding rows; ties break on the
    lexicographically smallest (i, j). Stops early if the remaining
    clusters have no connecting edges (disconnected components).
    """
    n = embed.shape[0]
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    vecs: dict[int, np.ndarray] = {i: embed[i].astype(np.float64).copy() for i in range(n)}
    neighbors: dict[int, set[int]] = {}
    off_diag = support & ~np.eye(n, dtype=bool)
    for i in range(n):
        neighbors[i] = set(np.nonzero(off_diag[i])[0].tolist())
    version = {i: 0 for i in range(n)}

    def sim(i: int, j: int) -> float:
        vi, vj = vecs[i], vecs[j]
        ni = math.sqrt(float(vi @ vi))
        nj = math.sqrt(float(vj @ vj))
        if ni == 0.0 or nj == 0.0:
            return -1.0
        return float(vi @ vj) / (ni * nj)

    heap: list[tuple[float, int, int, int, int]] = []
    for i in range(n):
        for j in sorted(neighbors[i]):
            if j > i:
                heap.append((-sim(i, j), i, j, 0, 0))
    heapq.heapify(heap)

    alive = n
    while alive > n_target and heap:
        neg, i, j, vi, vj = heapq.heappop(heap)
        if version.get(i) != vi or version.get(j) != vj or j not in neighbors.get(i, ()):
            continue
        # merge j into i (i < j by construction)
        members[i] = sorted(members[i] + members[j])
        vecs[i] = vecs[i] + vecs[j]
        merged_nbrs = (neighbors[i] | neighbors[j]) - {i, j}
        neighbors[i] = merged_nbrs
        for nb in merged_nbrs:
            neighbors[nb].discard(j)
            neighbors[nb].add(i)
        del members[j], vecs[j], neighbors[j], version[j]
        version[i] += 1
        alive -= 1
        for nb in sorted(merged_nbrs):
            lo, hi = (i, nb) if i < nb else (nb, i)
            heapq.heappush(heap, (-sim(lo, hi), lo, hi, version[lo], version[hi]))
    return [members[k] for k in sorted(members)]


def _candidate_windows(n: int, n_c: int) -> list[tuple[str, int]]:
    """Leading/trailing eigenvector blocks to try as node embeddings."""
    windows: list[tuple[str, int]] = []
    lead_max = max(2, min(n, n_c))
    trail_max = max(2, min(n, n - n_c + 1))
    if n <= 16:
        sizes = set(range(2, max(lead_max, trail_max) + 1))
    else:
        sizes = {2}
        m = 4
        while m < max(lead_max, trail_max):
            sizes.add(m)
            m *= 2
    for size in sorted(sizes | {lead_max}):
        if 2 <= size <= lead_max:
            windows.append(("leading", size))
    for size in sorted(sizes | {trail_max}):
        if 2 <= size <= trail_max:
            windows.append(("trailing", size))
    return windows


REFINE_MAX_NODES = 128  # SD-guided refinement is O(N_c^3) per move; cap it


def _moved_adjacency(a_c: np.ndarray, c: np.ndarray, p: int, q: int, a_xx: float) -> np.ndarray:
    """Coarse adjacency after moving one node (edge sums c) from cluster p to q."""
    out = a_c.copy()
    out[p, :] -= c
    out[:, p] -= c
    out[q, :] += c
    out[:, q] += c
    # the rank-one row/col updates above mishandle the p/q block; fix directly
    out[p, p] = a_c[p, p] - (2 * c[p] - a_xx)
    out[q, q] = a_c[q, q] + 2 * c[q] + a_xx
    cross = a_c[p, q] - c[q] + (c[p] - a_xx)
    out[p, q] = cross
    out[q, p] = cross
    # exact zeros can drift to -1e-17 under the incremental update
    out[np.abs(out) < 1e-12] = 0.0
    return out


def _sd_against(orig_vals: np.ndarray, a_c: np.ndarray) -> float:
    k = a_c.shape[0]
    return float(np.abs(orig_vals[:k] - laplacian_eigenvalues(a_c)[:k]).sum())


def _refine_partition(a_sym: np.ndarray, orig_vals: np.ndarray, index: list[list[int]],
                      max_rounds: int = 4) -> tuple[list[list[int]], np.ndarray, float]:
    """First-improvement single-node moves between adjacent clusters.

    A node may leave its cluster only if the remainder stays connected;
    moves are scanned in deterministic (node, target) order and applied
    whenever they strictly decrease the spectral distance.
    """
    n = a_sym.shape[0]
    support = a_sym > 0
    index = [sorted(m) for m in index]
    cluster_of = np.empty(n, dtype=np.intp)
    for p, members in enumerate(index):
        cluster_of[members] = p
    a_c = partition_adjacency(a_sym, index)
    best_sd = _sd_against(orig_vals, a_c)
    for _ in range(max_rounds):
        improved = False
        for x in range(n):
            p = int(cluster_of[x])
            rest = [y for y in index[p] if y != x]
            if not rest or not _stays_connected(support, rest):
                continue
            c = np.array([a_sym[x, index_q].sum() for index_q in index])
            targets = sorted({int(cluster_of[y]) for y in np.nonzero(support[x])[0]} - {p})
            for q in targets:
                candidate = _moved_adjacency(a_c, c, p, q, a_sym[x, x])
                if np.any(candidate.sum(axis=1) <= 0):
                    continue
                sd = _sd_against(orig_vals, candidate)
                if sd < best_sd - 1e-12:
                    index[p] = rest
                    index[q] = sorted(index[q] + [x])
                    cluster_of[x] = q
                    a_c = partition_adjacency(a_sym, index)  # exact, no drift
                    best_sd = _sd_against(orig_vals, a_c)
                    improved = True
                    break
        if not improved:
            break
    return index, a_c, best_sd


def _stays_connected(support: np.ndarray, members: list[int]) -> bool:
    seen = {members[0]}
    frontier = [members[0]]
    mset = set(members)
    while frontier:
        x = frontier.pop()
        for y in np.nonzero(support[x])[0]:
            y = int(y)
            if y in mset and y not in seen:
                seen.add(y)
                frontier.append(y)
    return len(seen) == len(mset)


def coarsen(a: np.ndarray, ratio: float) -> CoarseGraph:
    """Coarsen to round(ratio * N) hypernodes, choosing the min-SD candidate."""
    if not 0.0 < ratio <= 1.0:
        raise ConfigError(f"coarsening ratio must be in (0, 1], got {ratio}")
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    a_sym = symmetrize(a)
    n_c = max(1, round(ratio * n))
    if n_c >= n:
        return CoarseGraph(adjacency=a_sym.copy(), index=[[i] for i in range(n)],
                           ratio=1.0, spectral_dist=0.0, window="identity")

    cache = normalized_laplacian(a_sym)
    _, vecs = eigen_decompose(cache)
    support = (a_sym > 0) | np.eye(n, dtype=bool)

    best: tuple[float, int] | None = None
    best_graph: CoarseGraph | None = None
    for order, (kind, size) in enumerate(_candidate_windows(n, n_c)):
        embed = vecs[:, :size] if kind == "leading" else vecs[:, n - size:]
        index = _greedy_merge(embed, support, n_c)
        a_c = partition_adjacency(a_sym, index)
        k = min(len(index), n)
        sd = float(np.abs(cache.eigenvalues[:k] - laplacian_eigenvalues(a_c)[:k]).sum())
        key = (sd, order)
        if best is None or key < best:
            best = key
            best_graph = CoarseGraph(adjacency=a_c, index=index, ratio=len(index) / n,
                                     spectral_dist=sd, window=f"{kind}:{size}")
    if n <= REFINE_MAX_NODES and best_graph.spectral_dist > 1e-12:
        index, a_c, sd = _refine_partition(a_sym, cache.eigenvalues, best_graph.index)
        if sd < best_graph.spectral_dist:
            best_graph = CoarseGraph(adjacency=a_c, index=index, ratio=len(index) / n,
                                     spectral_dist=sd, window=best_graph.window + "+refined")
    return best_graph


def hypernode_features(x_low_values: np.ndarray, index: list[list[int]]) -> list[np.ndarray]:
    """Member-concatenated feature streams, one (T, |M_p| * F) array per hypernode."""
    t, n, f = x_low_values.shape
    seen: set[int] = set()
    out = []
    for members in index:
        mp = sorted(members)
        if any(m < 0 or m >= n for m in mp):
            raise ShapeError(f"hypernode members {mp} out of range for N={n}")
        if seen & set(mp):
            raise ShapeError("hypernode index is not a partition (duplicate member)")
        seen |= set(mp)
        out.append(x_low_values[:, mp, :].reshape(t, len(mp) * f))
    if len(seen) != n:
        raise ShapeError(f"hypernode index covers {len(seen)} of {n} lots")
    return out


def export_coarse(graph: CoarseGraph, adjacency_path, index_path) -> None:
    """Triplet text for A_c plus ``hypernode_id: lot,lot,...`` index lines."""
    lines = []
    for i, j in zip(*np.nonzero(graph.adjacency)):
        lines.append(f"{i} {j} {format_float(graph.adjacency[i, j])}")
    with open(adjacency_path, "w") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
    with open(index_path, "w") as fh:
        for p, members in enumerate(graph.index):
            fh.write(f"{p}: {','.join(str(m) for m in members)}\n")
