"""K-nearest-neighbor graph construction.

Two builders share the KnnGraph container: a brute-force exact builder (the
quality oracle) and a seeded NN-descent loop (neighbor-of-my-neighbor
refinement) for realistic sizes. add_reverse_edges() closes the graph under
edge reversal, producing the variable-degree candidate source the index
builder consumes.

Everything here is deterministic for a fixed seed: random draws come from one
PCG64 stream, and every merge breaks ties by ascending id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset

__all__ = [
    "KnnGraph",
    "BKnnGraph",
    "build_exact_knng",
    "build_knng",
    "knng_recall",
    "add_reverse_edges",
]

# Per-round cap on each node's join pool. Local joins cost O(cap^2) per node,
# so this bounds the quadratic blowup at large K; 60 matches pynndescent's
# max_candidates default.
_MAX_CANDIDATES = 60

# Stop refining once a round changes fewer than this fraction of list slots.
_CONVERGENCE_DELTA = 0.001


@dataclass
class KnnGraph:
    """Fixed-width neighbor lists: row u holds the k_eff ids nearest to u.

    ids and dists have shape (n, k_eff) with k_eff = min(K, n-1); rows are
    sorted ascending by (distance, id) and hold no self or duplicate entries.
    """

    ids: np.ndarray
    dists: np.ndarray
    K: int

    @property
    def n(self) -> int:
        return self.ids.shape[0]

    @property
    def k_eff(self) -> int:
        return self.ids.shape[1]


@dataclass
class BKnnGraph:
    """CSR adjacency: node u's entries sit in slice offsets[u]:offsets[u+1].

    Symmetric by construction — (u, v) present implies (v, u) present. Each
    node's slice is sorted ascending by (distance, id).
    """

    offsets: np.ndarray
    ids: np.ndarray
    dists: np.ndarray

    @property
    def n(self) -> int:
        return self.offsets.shape[0] - 1

    def neighbor_ids(self, u: int) -> np.ndarray:
        return self.ids[self.offsets[u] : self.offsets[u + 1]]

    def neighbor_dists(self, u: int) -> np.ndarray:
        return self.dists[self.offsets[u] : self.offsets[u + 1]]


def _pair_distances(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """L2 distances between row pairs x[a[i]], x[b[i]], chunked to bound memory."""
    out = np.empty(a.shape[0], dtype=np.float64)
    chunk = 1 << 19
    for i in range(0, a.shape[0], chunk):
        diff = x[a[i : i + chunk]] - x[b[i : i + chunk]]
        out[i : i + chunk] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return out


def _exact_topk(
    dataset: Dataset, queries64: np.ndarray, k: int, exclude_self: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Top-k (ids, distances) per query by full scan; ties by ascending id.

    With exclude_self, query row i is assumed to be dataset point i and is
    removed from its own result.
    """
    n = dataset.count
    x = dataset.vectors64
    nq = queries64.shape[0]
    ids = np.empty((nq, k), dtype=np.int64)
    dists = np.empty((nq, k), dtype=np.float64)
    col_ids = np.arange(n, dtype=np.int64)
    block = int(min(nq, max(1, (1 << 23) // max(n * max(dataset.dim, 1), 1))))
    for start in range(0, nq, block):
        q = queries64[start : start + block]
        diff = q[:, None, :] - x[None, :, :]
        d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        if exclude_self:
            self_ids = np.arange(start, start + q.shape[0])
            d[np.arange(q.shape[0]), self_ids] = np.inf
        order = np.lexsort((np.broadcast_to(col_ids, d.shape), d), axis=1)[:, :k]
        ids[start : start + q.shape[0]] = order
        dists[start : start + q.shape[0]] = np.take_along_axis(d, order, axis=1)
    return ids, dists


def build_exact_knng(dataset: Dataset, K: int) -> KnnGraph:
    """Exact K nearest neighbors per node by brute force (K clamped to n-1)."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    n = dataset.count
    k_eff = min(K, max(n - 1, 0))
    if k_eff == 0:
        return KnnGraph(
            np.empty((n, 0), dtype=np.int64), np.empty((n, 0), dtype=np.float64), K
        )
    ids, dists = _exact_topk(dataset, dataset.vectors64, k_eff, exclude_self=True)
    return KnnGraph(ids, dists, K)


def knng_recall(approx: KnnGraph, exact: KnnGraph) -> float:
    """Mean per-node overlap fraction between two graphs' neighbor lists."""
    if approx.n != exact.n or approx.K != exact.K or approx.k_eff != exact.k_eff:
        raise ValueError(
            f"graph shape mismatch: ({approx.n}, K={approx.K}) "
            f"vs ({exact.n}, K={exact.K})"
        )
    if approx.n == 0 or approx.k_eff == 0:
        return 1.0
    hits = 0
    for u in range(approx.n):
        hits += np.intersect1d(approx.ids[u], exact.ids[u]).size
    return hits / (approx.n * approx.k_eff)


def add_reverse_edges(kg: KnnGraph) -> BKnnGraph:
    """Union of the graph's edges with their reversals, deduplicated."""
    n, k = kg.ids.shape
    if k == 0:
        return BKnnGraph(
            np.zeros(n + 1, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.float64),
        )
    src = np.repeat(np.arange(n, dtype=np.int64), k)
    dst = kg.ids.ravel().astype(np.int64)
    d = kg.dists.ravel().astype(np.float64)
    all_src = np.concatenate([src, dst])
    all_dst = np.concatenate([dst, src])
    all_d = np.concatenate([d, d])
    key = all_src * np.int64(n) + all_dst
    order = np.lexsort((all_d, key))
    key_sorted = key[order]
    first = np.ones(key_sorted.shape[0], dtype=bool)
    first[1:] = key_sorted[1:] != key_sorted[:-1]
    kept = order[first]
    src_u, dst_u, d_u = all_src[kept], all_dst[kept], all_d[kept]
    by_node = np.lexsort((dst_u, d_u, src_u))
    src_s, dst_s, d_s = src_u[by_node], dst_u[by_node], d_u[by_node]
    offsets = np.searchsorted(src_s, np.arange(n + 1, dtype=np.int64))
    return BKnnGraph(offsets, dst_s, d_s)


def _random_neighbor_init(
    rng: np.random.Generator, n: int, K: int
) -> np.ndarray:
    """K distinct non-self neighbor ids per node (order fixed later by distance)."""
    rows = np.arange(n, dtype=np.int64)[:, None]
    draws = rng.integers(0, n - 1, size=(n, K + 8), dtype=np.int64)
    draws += draws >= rows  # uniform over the n-1 ids that are not the row itself
    srt = np.sort(draws, axis=1)
    fresh = np.ones(srt.shape, dtype=bool)
    fresh[:, 1:] = srt[:, 1:] != srt[:, :-1]
    counts = fresh.sum(axis=1)
    order = np.argsort(~fresh, axis=1, kind="stable")[:, :K]
    ids = np.take_along_axis(srt, order, axis=1)
    for u in np.nonzero(counts < K)[0]:
        # Rare small-n case: too many repeated draws. Keep the distinct ones
        # and top up with the smallest unused ids.
        have = [int(v) for v in dict.fromkeys(srt[u].tolist())]
        have_set = set(have)
        for i in range(n):
            if len(have) >= K:
                break
            if i != u and i not in have_set:
                have.append(i)
        ids[u] = np.asarray(have[:K], dtype=np.int64)
    return ids


def _sort_rows(
    ids: np.ndarray, dists: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((ids, dists), axis=1)
    return (
        np.take_along_axis(ids, order, axis=1),
        np.take_along_axis(dists, order, axis=1),
    )


def _cap_per_node(
    node: np.ndarray, cand: np.ndarray, pri: np.ndarray, n: int, cap: int
) -> np.ndarray:
    """Dedupe (node, cand) pairs and keep at most cap per node by priority."""
    key = node * np.int64(n) + cand
    order = np.lexsort((pri, key))
    key_sorted = key[order]
    first = np.ones(key_sorted.shape[0], dtype=bool)
    first[1:] = key_sorted[1:] != key_sorted[:-1]
    kept = order[first]
    node_k, cand_k, pri_k = node[kept], cand[kept], pri[kept]
    by_pri = np.lexsort((pri_k, node_k))
    node_s = node_k[by_pri]
    starts = np.searchsorted(node_s, np.arange(n, dtype=np.int64))
    rank = np.arange(node_s.shape[0], dtype=np.int64) - starts[node_s]
    keep = rank < cap
    rect = np.full((n, cap), -1, dtype=np.int64)
    rect[node_s[keep], rank[keep]] = cand_k[by_pri][keep]
    return rect


def _sample_candidates(
    rng: np.random.Generator, ids: np.ndarray, flags: np.ndarray, cap: int
) -> tuple[np.ndarray, np.ndarray]:
    """Random join pools for this round: (new entries, old entries).

    Each node contributes up to cap of its flagged-new entries (which are
    then marked old — they get exactly one join round in the new pool) and up
    to cap old ones; every sampled edge also enters the reverse endpoint's
    pool. Pools are rectangles padded with -1.
    """
    n, K = ids.shape
    pri = rng.random((n, K))
    rows = np.broadcast_to(np.arange(n, dtype=np.int64)[:, None], (n, cap))
    rects = []
    for want_new in (True, False):
        masked = np.where(flags if want_new else ~flags, pri, np.inf)
        pos = np.argsort(masked, axis=1)[:, :cap]
        valid = np.take_along_axis(masked, pos, axis=1) < np.inf
        cand = np.take_along_axis(ids, pos, axis=1)
        fwd_node = rows[valid]
        fwd_cand = cand[valid]
        if want_new:
            flags[fwd_node, pos[valid]] = False
        node = np.concatenate([fwd_node, fwd_cand])
        cand_all = np.concatenate([fwd_cand, fwd_node])
        rects.append(_cap_per_node(node, cand_all, rng.random(node.shape[0]), n, cap))
    return rects[0], rects[1]


def _local_join_pairs(
    new_rect: np.ndarray, old_rect: np.ndarray, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Unique point pairs proposed by joining each node's pools: new x new
    (unordered) plus new x old."""
    cap = new_rect.shape[1]
    iu, ju = np.triu_indices(cap, k=1)
    keys = []
    block = max(1, (1 << 21) // max(cap * cap, 1))
    for s0 in range(0, new_rect.shape[0], block):
        fn = new_rect[s0 : s0 + block]
        fo = old_rect[s0 : s0 + block]
        a = fn[:, iu].ravel()
        b = fn[:, ju].ravel()
        ok = (a >= 0) & (b >= 0)
        a, b = a[ok], b[ok]
        a2 = np.repeat(fn, cap, axis=1).ravel()
        b2 = np.tile(fo, (1, cap)).ravel()
        ok2 = (a2 >= 0) & (b2 >= 0) & (a2 != b2)
        lo = np.concatenate([np.minimum(a, b), np.minimum(a2[ok2], b2[ok2])])
        hi = np.concatenate([np.maximum(a, b), np.maximum(a2[ok2], b2[ok2])])
        if lo.size:
            keys.append(np.unique(lo * np.int64(n) + hi))
    if not keys:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    key = np.unique(np.concatenate(keys))
    return key // n, key % n


def _merge_shard(
    ids: np.ndarray,
    dists: np.ndarray,
    flags: np.ndarray,
    lo: int,
    hi: int,
    node: np.ndarray,
    cand: np.ndarray,
    d: np.ndarray,
) -> int:
    """Merge updates for nodes in [lo, hi) into their lists, in place.

    Keeps the K best (distance, id) entries per node and returns how many
    slots changed.
    """
    K = ids.shape[1]
    worst_d = dists[node, K - 1]
    worst_i = ids[node, K - 1]
    ok = (d < worst_d) | ((d == worst_d) & (cand < worst_i))
    node, cand, d = node[ok], cand[ok], d[ok]
    if node.size == 0:
        return 0
    rows = hi - lo
    base_node = np.repeat(np.arange(lo, hi, dtype=np.int64), K)
    all_node = np.concatenate([base_node, node])
    all_id = np.concatenate([ids[lo:hi].ravel(), cand])
    all_d = np.concatenate([dists[lo:hi].ravel(), d])
    all_flag = np.concatenate([flags[lo:hi].ravel(), np.ones(node.shape[0], dtype=bool)])
    incoming = np.concatenate(
        [np.zeros(rows * K, dtype=np.uint8), np.ones(node.shape[0], dtype=np.uint8)]
    )
    # Dedupe per (node, id), preferring the entry already in the list so its
    # new/old flag survives.
    key = (all_node - lo) * np.int64(ids.shape[0]) + all_id
    order = np.lexsort((incoming, key))
    key_sorted = key[order]
    first = np.ones(key_sorted.shape[0], dtype=bool)
    first[1:] = key_sorted[1:] != key_sorted[:-1]
    sel = order[first]
    node_u, id_u, d_u = all_node[sel], all_id[sel], all_d[sel]
    flag_u, inc_u = all_flag[sel], incoming[sel]
    by_rank = np.lexsort((id_u, d_u, node_u))
    node_s = node_u[by_rank]
    starts = np.searchsorted(node_s, np.arange(lo, hi, dtype=np.int64))
    rank = np.arange(node_s.shape[0], dtype=np.int64) - starts[node_s - lo]
    chosen = by_rank[rank < K]
    ids[lo:hi] = id_u[chosen].reshape(rows, K)
    dists[lo:hi] = d_u[chosen].reshape(rows, K)
    flags[lo:hi] = flag_u[chosen].reshape(rows, K)
    return int(inc_u[chosen].sum())


def _apply_updates(
    ids: np.ndarray,
    dists: np.ndarray,
    flags: np.ndarray,
    pa: np.ndarray,
    pb: np.ndarray,
    pd: np.ndarray,
) -> int:
    """Merge proposed pairs into both endpoints' lists; keep top-K per node.

    Mutates (ids, dists, flags) and returns the number of changed slots.
    Work is sharded by node range so the transient merge arrays stay small
    relative to the update volume.
    """
    n = ids.shape[0]
    shards = max(1, -(-2 * pa.shape[0] // 4_000_000))
    width = -(-n // shards)
    changed = 0
    for lo in range(0, n, width):
        hi = min(lo + width, n)
        in_a = (pa >= lo) & (pa < hi)
        in_b = (pb >= lo) & (pb < hi)
        node = np.concatenate([pa[in_a], pb[in_b]])
        cand = np.concatenate([pb[in_a], pa[in_b]])
        d = np.concatenate([pd[in_a], pd[in_b]])
        changed += _merge_shard(ids, dists, flags, lo, hi, node, cand, d)
    return changed


def build_knng(
    dataset: Dataset,
    K: int,
    iterations: int = 10,
    sample_rate: float = 1.0,
    seed: int = 0,
) -> KnnGraph:
    """Approximate KNNG by NN-descent; falls back to brute force for tiny n.

    Starts from random lists and repeatedly joins each node's recently-added
    (new) entries against its pools, keeping the K best per node, until
    `iterations` rounds have run or an iteration changes almost nothing.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if not 0.0 < sample_rate <= 1.0:
        raise ValueError(f"sample_rate must be in (0, 1], got {sample_rate}")
    n = dataset.count
    if n <= K + 1:
        return build_exact_knng(dataset, K)
    x = dataset.vectors64
    rng = np.random.Generator(np.random.PCG64(seed))
    ids = _random_neighbor_init(rng, n, K)
    rows = np.repeat(np.arange(n, dtype=np.int64), K)
    dists = _pair_distances(x, rows, ids.ravel()).reshape(n, K)
    ids, dists = _sort_rows(ids, dists)
    flags = np.ones((n, K), dtype=bool)
    cap = max(1, min(int(round(sample_rate * K)), _MAX_CANDIDATES))
    for _ in range(iterations):
        new_rect, old_rect = _sample_candidates(rng, ids, flags, cap)
        pa, pb = _local_join_pairs(new_rect, old_rect, n)
        if pa.size == 0:
            break
        pd = _pair_distances(x, pa, pb)
        changed = _apply_updates(ids, dists, flags, pa, pb, pd)
        if changed <= _CONVERGENCE_DELTA * n * K:
            break
    return KnnGraph(ids, dists, K)
