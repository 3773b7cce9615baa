"""Edge pruning for graph index construction.

Given a node s, a sorted candidate pool, and an already-selected neighbor v,
each strategy decides whether v makes a further candidate e redundant:

* rng   — drop e when v is closer to e than s is.
* nssg  — drop e when the angle between edges sv and se is at most alpha_t.
* tbsg  — drop e only when the rng condition holds AND the kept edge sv still
          guarantees, with probability at least mp, that a query falling
          within radius r of e can move strictly closer via v.

The probability guarantee is the closed-form lower bound min_prob(); its
Monte Carlo and analytic-disk counterparts below exist to validate that bound
and are exercised by the prob-check harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset

__all__ = [
    "TriangleGeom",
    "StrategyParams",
    "min_prob",
    "monte_carlo_prob",
    "analytic_disk_prob",
    "select_neighbors",
]

# Absolute slack on cosine comparisons at the nssg angle threshold, so a
# candidate sitting numerically on the boundary is excluded consistently.
_COS_SLACK = 1e-9


@dataclass(frozen=True)
class TriangleGeom:
    """Side lengths of the triangle (s, e, v) plus the query radius around e.

    d_se: distance from s to the candidate e; d_sv: from s to the kept
    neighbor v; d_ve: from v to e. Distances coming from real point triples
    always satisfy the triangle inequality; it is deliberately not enforced
    here, because the closed-form bound is well defined on raw lengths and
    only the Monte Carlo embedding needs a realizable triangle.
    """

    d_se: float
    d_sv: float
    d_ve: float
    r: float

    def __post_init__(self):
        for name in ("d_se", "d_sv"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.d_ve < 0:
            raise ValueError(f"d_ve must be non-negative, got {self.d_ve}")
        if self.r <= 0:
            raise ValueError(f"r must be positive, got {self.r}")


def _bisector_offset(d_se: float, d_sv: float, d_ve: float) -> float:
    """Signed distance from e to the perpendicular bisector of segment s-v.

    Positive when e lies on v's side (d_ve < d_se). Written with explicit
    products so the vectorized matrix path in _min_prob_matrix produces the
    same bits.
    """
    return (d_se * d_se - d_ve * d_ve) / (2.0 * d_sv)


def min_prob(g: TriangleGeom) -> float:
    """Lower bound on the chance that a query within r of e is closer to v.

    A query Q in the radius-r ball around e is closer to v than to s exactly
    when Q falls on v's side of the bisector hyperplane of segment s-v; the
    worst case over dimensions is the fraction 1 - arccos(h/r)/pi of the
    ball, where h is the signed offset of e from that hyperplane. h/r is
    clamped to [-1, 1]: beyond +1 the whole ball lies on v's side.
    """
    h = _bisector_offset(g.d_se, g.d_sv, g.d_ve)
    return float(1.0 - np.arccos(np.clip(h / g.r, -1.0, 1.0)) / math.pi)


def analytic_disk_prob(g: TriangleGeom) -> float:
    """Exact 2-D value of the quantity min_prob bounds from below.

    For a uniform sample in a radius-r disk around e, the portion cut off on
    s's side of the bisector is a circular segment of angle
    phi = 2*arccos(h/r); its area fraction is (phi - sin(phi)) / (2*pi).
    """
    h = _bisector_offset(g.d_se, g.d_sv, g.d_ve)
    phi = 2.0 * np.arccos(np.clip(h / g.r, -1.0, 1.0))
    return float(1.0 - (phi - np.sin(phi)) / (2.0 * math.pi))


def _embed_triangle(g: TriangleGeom, dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Place s at the origin, e on the x axis, v in the xy plane, in `dim` dims."""
    x_v = (g.d_se * g.d_se + g.d_sv * g.d_sv - g.d_ve * g.d_ve) / (2.0 * g.d_se)
    y_sq = g.d_sv * g.d_sv - x_v * x_v
    if y_sq < -1e-9 * max(g.d_sv * g.d_sv, 1.0):
        raise ValueError(f"unrealizable triangle geometry: {g}")
    s = np.zeros(dim)
    e = np.zeros(dim)
    e[0] = g.d_se
    v = np.zeros(dim)
    v[0] = x_v
    v[1] = math.sqrt(max(y_sq, 0.0))
    return s, e, v


def monte_carlo_prob(
    g: TriangleGeom, dim: int, samples: int = 100_000, seed: int = 0
) -> tuple[float, float]:
    """Estimate Pr[query nearer v than s] for uniform queries in e's ball.

    Embeds the triangle in the first two of `dim` coordinates, draws queries
    uniformly from the radius-r ball around e (normalized Gaussian direction
    times r * U^(1/dim)), and counts the side of the s-v bisector each lands
    on. Returns (estimate, std_error) with the binomial standard error
    sqrt(p*(1-p)/samples).
    """
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    if samples < 1:
        raise ValueError("samples must be positive")
    s, e, v = _embed_triangle(g, dim)
    rng = np.random.Generator(np.random.PCG64(seed))
    hits = 0
    done = 0
    chunk = 1 << 18
    while done < samples:
        m = min(chunk, samples - done)
        direction = rng.standard_normal((m, dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = g.r * rng.random(m) ** (1.0 / dim)
        q = e + direction * radius[:, None]
        d_v = np.einsum("ij,ij->i", q - v, q - v)
        d_s = np.einsum("ij,ij->i", q - s, q - s)
        hits += int(np.count_nonzero(d_v < d_s))
        done += m
    estimate = hits / samples
    std_error = math.sqrt(estimate * (1.0 - estimate) / samples)
    return estimate, std_error


@dataclass(frozen=True)
class StrategyParams:
    """Pruning configuration shared by the three strategies.

    mp is the tbsg probability threshold; anything below 0.5 would never
    exclude beyond the rng precondition, so 0.5 is the floor (values above
    1.0 are legal and disable all but clamp-saturated exclusions). alpha_t
    is the nssg angle threshold in radians, at most 60 degrees. In static
    r_mode, static_r[s] supplies the per-node radius; dynamic mode uses the
    candidate's own distance d_se.
    """

    strategy: str = "tbsg"
    mp: float = 0.53
    alpha_t: float = math.pi / 3.0
    m: int = 50
    r_mode: str = "dynamic"
    static_r: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.strategy not in ("rng", "nssg", "tbsg"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.mp < 0.5:
            raise ValueError(f"mp must be >= 0.5, got {self.mp}")
        if not 0.0 < self.alpha_t <= math.pi / 3.0 + 1e-12:
            raise ValueError(f"alpha_t must be in (0, 60 degrees], got {self.alpha_t}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.r_mode not in ("dynamic", "static"):
            raise ValueError(f"unknown r_mode {self.r_mode!r}")
        if self.r_mode == "static" and self.static_r is None:
            raise ValueError("static r_mode requires static_r values")


def _candidate_matrices(
    dataset: Dataset, cand_ids: np.ndarray
) -> np.ndarray:
    """All pairwise distances among the candidates, row v by column e."""
    rows = dataset.vectors64[cand_ids]
    diff = rows[:, None, :] - rows[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _min_prob_matrix(d: np.ndarray, cand_d: np.ndarray, r: np.ndarray) -> np.ndarray:
    """min_prob of excluding column-candidate e via row-neighbor v.

    Elementwise mirror of min_prob(): d is the candidate pairwise-distance
    matrix, cand_d the distances from s, r the per-column radius.
    """
    h = (cand_d[None, :] * cand_d[None, :] - d * d) / (2.0 * cand_d[:, None])
    return 1.0 - np.arccos(np.clip(h / r[None, :], -1.0, 1.0)) / math.pi


def _select_from_arrays(
    s: int,
    cand_ids: np.ndarray,
    cand_d: np.ndarray,
    params: StrategyParams,
    dataset: Dataset,
) -> list[int]:
    """Scan candidates in (distance, id) order, keeping the non-redundant ones."""
    order = np.lexsort((cand_ids, cand_d))
    cand_ids = cand_ids[order]
    cand_d = cand_d[order]
    # Zero-length edges (exact duplicates of s) carry no search progress and
    # break the angle terms; drop them along with any accidental self entry.
    live = (cand_d > 0.0) & (cand_ids != s)
    if cand_ids.size > 1:
        # Repeated ids keep only their first appearance in scan order.
        by_id = np.argsort(cand_ids, kind="stable")
        repeats = by_id[1:][cand_ids[by_id[1:]] == cand_ids[by_id[:-1]]]
        live[repeats] = False
    cand_ids = cand_ids[live]
    cand_d = cand_d[live]
    count = cand_ids.shape[0]
    if count == 0:
        return []

    d = _candidate_matrices(dataset, cand_ids)
    if params.strategy == "tbsg":
        if params.r_mode == "dynamic":
            radius = cand_d
        else:
            r_s = float(params.static_r[s])
            # A node whose nearest neighbor is a duplicate has no usable
            # static radius; fall back to the dynamic rule for it.
            radius = np.full(count, r_s) if r_s > 0.0 else cand_d
        prob = _min_prob_matrix(d, cand_d, radius)
        blocks = (d < cand_d[None, :]) & (prob >= params.mp)
    elif params.strategy == "rng":
        blocks = d < cand_d[None, :]
    else:
        cos_threshold = math.cos(params.alpha_t) - _COS_SLACK
        num = (
            cand_d[:, None] * cand_d[:, None]
            + cand_d[None, :] * cand_d[None, :]
            - d * d
        )
        cos_angle = num / (2.0 * cand_d[:, None] * cand_d[None, :])
        blocks = cos_angle >= cos_threshold

    selected: list[int] = []
    selected_rows = np.zeros(count, dtype=bool)
    for j in range(count):
        if len(selected) == params.m:
            break
        if not np.any(blocks[selected_rows, j]):
            selected.append(int(cand_ids[j]))
            selected_rows[j] = True
    return selected


def select_neighbors(
    s: int,
    candidates,
    params: StrategyParams,
    dataset: Dataset,
) -> list[int]:
    """Pick at most params.m neighbors for s from (id, distance) candidates.

    Candidates are processed in ascending (distance, id) order; the closest
    is always kept, and each later one is kept unless an already-kept
    neighbor triggers the strategy's exclusion rule. Returns ids in
    ascending-distance order.
    """
    cand_ids = np.asarray([c[0] for c in candidates], dtype=np.int64)
    cand_d = np.asarray([c[1] for c in candidates], dtype=np.float64)
    if cand_ids.size and (cand_ids.min() < 0 or cand_ids.max() >= dataset.count):
        raise ValueError("candidate id out of range")
    return _select_from_arrays(s, cand_ids, cand_d, params, dataset)
