"""Dynamic-time-warping dissimilarity between frame-feature sequences.

The alignment is the classic monotone DP over steps {(1,1),(1,0),(0,1)}
with unit weights. Ties between equal-cost paths are broken toward the
shorter path, and the normalized score divides by the node count of that
optimal path.

Cosine local costs are computed on unit-normalized frames rounded to
single precision. The rounding collapses u and c*u (any c > 0) to the
same quantized direction, so every downstream score, threshold, and
decision is exactly invariant to a global rescale of the embeddings;
residuals below 1e-6 are snapped to zero so self-distance is exactly 0.
The cost of this quantization (~1e-7) is far below matching tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import (
    BandTooNarrowError,
    DimensionMismatchError,
    EmptySequenceError,
    PhrasematchError,
)

COSINE_SNAP = 1e-6

METRICS = ("cosine", "euclidean")
STEP_PATTERNS = ("symmetric1",)


@dataclass(frozen=True)
class DtwConfig:
    """Alignment options; defaults match the engine's matching path."""

    local_metric: str = "cosine"
    step_pattern: str = "symmetric1"
    normalize_by_path_length: bool = True
    band_radius: int | None = None

    def __post_init__(self):
        if self.local_metric not in METRICS:
            raise ValueError(f"unknown metric {self.local_metric!r}")
        if self.step_pattern not in STEP_PATTERNS:
            raise ValueError(f"unknown step pattern {self.step_pattern!r}")
        if self.band_radius is not None and self.band_radius < 1:
            raise ValueError("band_radius must be a positive integer")


def _unit_rows(x: np.ndarray) -> np.ndarray:
    """Rows scaled to unit L2 norm, quantized through float32; zero rows stay zero."""
    norms = np.linalg.norm(x, axis=1)
    out = np.zeros_like(x)
    nz = norms > 0
    out[nz] = x[nz] / norms[nz, None]
    return out.astype(np.float32).astype(np.float64)


def frame_distance(a, b, metric: str = "cosine") -> float:
    """Local cost between two feature vectors.

    cosine: 1 - <a,b>/(|a||b|), with 0/0 := 0 for two zero vectors and
    1 for zero-vs-nonzero. euclidean: |a - b|.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"vectors of dim {a.size} vs {b.size}")
    if metric == "euclidean":
        return float(np.sqrt(np.sum((a - b) ** 2)))
    if metric != "cosine":
        raise ValueError(f"unknown metric {metric!r}")
    ua = _unit_rows(a[None, :])[0]
    ub = _unit_rows(b[None, :])[0]
    if not ua.any() and not ub.any():
        return 0.0
    d = 1.0 - float(np.dot(ua, ub))
    if d < COSINE_SNAP:
        return 0.0
    return d


def _cosine_cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ua = _unit_rows(a)
    ub = _unit_rows(b)
    d = 1.0 - ua @ ub.T
    np.maximum(d, 0.0, out=d)
    d[d < COSINE_SNAP] = 0.0
    za = ~ua.any(axis=1)
    zb = ~ub.any(axis=1)
    if za.any() and zb.any():
        d[np.ix_(za, zb)] = 0.0
    return d


def _euclidean_cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # row blocks keep the broadcast buffer small; differences (not the
    # |a|^2+|b|^2-2ab identity) so identical frames cost exactly zero
    n = a.shape[0]
    out = np.empty((n, b.shape[0]))
    step = max(1, (1 << 20) // max(1, b.size))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        diff = a[lo:hi, None, :] - b[None, :, :]
        out[lo:hi] = np.sqrt(np.sum(diff * diff, axis=2))
    return out


def local_cost_matrix(a: np.ndarray, b: np.ndarray, metric: str) -> np.ndarray:
    if metric == "cosine":
        return _cosine_cost_matrix(a, b)
    if metric == "euclidean":
        return _euclidean_cost_matrix(a, b)
    raise ValueError(f"unknown metric {metric!r}")


@njit(cache=True)
def _dp_accumulate(costs, band_radius):  # pragma: no cover - compiled
    """Min-cost monotone path to the far corner; ties -> fewer steps.

    Returns (cost, node count of the optimal path). Rolling rows keep
    the DP state at O(columns).
    """
    n, m = costs.shape
    inf = np.inf
    prev_cost = np.full(m, inf)
    prev_len = np.zeros(m, dtype=np.int64)
    cur_cost = np.full(m, inf)
    cur_len = np.zeros(m, dtype=np.int64)
    for i in range(n):
        if band_radius >= 0:
            j_lo = max(0, i - band_radius)
            j_hi = min(m - 1, i + band_radius)
        else:
            j_lo = 0
            j_hi = m - 1
        for j in range(m):
            cur_cost[j] = inf
            cur_len[j] = 0
        for j in range(j_lo, j_hi + 1):
            if i == 0 and j == 0:
                cur_cost[0] = costs[0, 0]
                cur_len[0] = 1
                continue
            best_cost = inf
            best_len = 0
            if i > 0 and j > 0 and prev_cost[j - 1] < inf:
                best_cost = prev_cost[j - 1]
                best_len = prev_len[j - 1]
            if i > 0 and prev_cost[j] < inf:
                if prev_cost[j] < best_cost or (
                        prev_cost[j] == best_cost and prev_len[j] < best_len):
                    best_cost = prev_cost[j]
                    best_len = prev_len[j]
            if j > 0 and cur_cost[j - 1] < inf:
                if cur_cost[j - 1] < best_cost or (
                        cur_cost[j - 1] == best_cost and cur_len[j - 1] < best_len):
                    best_cost = cur_cost[j - 1]
                    best_len = cur_len[j - 1]
            if best_cost < inf:
                cur_cost[j] = best_cost + costs[i, j]
                cur_len[j] = best_len + 1
        prev_cost, cur_cost = cur_cost, prev_cost
        prev_len, cur_len = cur_len, prev_len
    return prev_cost[m - 1], prev_len[m - 1]


def _validate_pair(a: np.ndarray, b: np.ndarray, cfg: DtwConfig):
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("sequences must be 2-D (frames x features)")
    if a.shape[0] < 1 or b.shape[0] < 1:
        raise EmptySequenceError("sequence with zero frames")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatchError(
            f"feature dims {a.shape[1]} vs {b.shape[1]}")
    if cfg.band_radius is not None and cfg.band_radius < abs(a.shape[0] - b.shape[0]):
        raise BandTooNarrowError(
            f"band radius {cfg.band_radius} < length gap "
            f"{abs(a.shape[0] - b.shape[0])}")


def dtw_distance(a, b, cfg: DtwConfig = DtwConfig()) -> float:
    """DTW dissimilarity between a (t_a x f) and b (t_b x f)."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    _validate_pair(a, b, cfg)
    if a.shape[0] < b.shape[0]:
        a, b = b, a  # DP state rolls over the shorter side
    costs = local_cost_matrix(a, b, cfg.local_metric)
    band = -1 if cfg.band_radius is None else int(cfg.band_radius)
    cost, length = _dp_accumulate(costs, band)
    if not np.isfinite(cost):
        raise BandTooNarrowError("band excludes every complete path")
    if cfg.normalize_by_path_length:
        return float(cost / length)
    return float(cost)


def dtw_one_to_many(query, refs, cfg: DtwConfig = DtwConfig()) -> list[float]:
    """dtw_distance of the query against each reference, in order."""
    if not refs:
        raise EmptySequenceError("refs is empty")
    out = []
    for k, ref in enumerate(refs):
        try:
            out.append(dtw_distance(query, ref, cfg))
        except PhrasematchError as e:
            raise type(e)(f"ref[{k}]: {e}") from e
    return out
