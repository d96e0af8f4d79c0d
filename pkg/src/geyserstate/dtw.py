"""Dynamic time warping distance and a k-nearest-neighbor window classifier.

Distances run on mean-pooled windows (12000-sample windows pool to 600 by
default) because the full quadratic grid is two orders of magnitude more
work per pair without changing the neighbor ranking in practice.  The DP is
vectorized along anti-diagonals so the inner loop is numpy, not Python.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

LOCAL_COSTS = ("squared", "absolute")


@dataclass(frozen=True)
class DtwParams:
    k_neighbors: int = 1
    local_cost: str = "squared"
    band_radius: int | None = None
    downsample_to: int = 600
    z_normalize: bool = False

    def __post_init__(self) -> None:
        if self.k_neighbors < 1:
            raise ConfigError(f"k_neighbors must be >= 1, got {self.k_neighbors}")
        if self.local_cost not in LOCAL_COSTS:
            raise ConfigError(f"local_cost must be one of {LOCAL_COSTS}, got {self.local_cost!r}")
        if self.band_radius is not None and self.band_radius < 0:
            raise ConfigError(f"band_radius must be >= 0, got {self.band_radius}")
        if self.downsample_to < 1:
            raise ConfigError(f"downsample_to must be >= 1, got {self.downsample_to}")


def mean_pool(x: np.ndarray, target: int) -> np.ndarray:
    """Pool to `target` points by averaging equal index spans.

    Series at or below the target length pass through unchanged.  When the
    length divides evenly this is plain block averaging.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("mean_pool expects a 1-D series")
    n = x.size
    if n <= target:
        return x.copy()
    bounds = (np.arange(target + 1) * n) // target
    sums = np.add.reduceat(x, bounds[:-1])
    return sums / np.diff(bounds)


def _z_normalize(x: np.ndarray) -> np.ndarray:
    centered = x - x.mean()
    sd = centered.std()
    return centered / sd if sd > 0 else centered


def dtw_distance(a: np.ndarray, b: np.ndarray, params: DtwParams | None = None) -> float:
    """Alignment cost D(|a|,|b|) of the standard warping recurrence.

    D(i,j) = cost(a_i, b_j) + min(D(i-1,j), D(i,j-1), D(i-1,j-1)) with
    D(0,0) = 0 and +inf boundaries.  An optional Sakoe-Chiba band keeps
    |i - j| <= band_radius; a band narrower than the length difference
    admits no path and is rejected.
    """
    params = params or DtwParams()
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.size == 0 or b.size == 0:
        raise DataError("dtw_distance needs two non-empty 1-D series")
    na, nb = a.size, b.size
    r = params.band_radius
    if r is not None and abs(na - nb) > r:
        raise DataError(
            f"band radius {r} admits no path between lengths {na} and {nb}"
        )
    if params.local_cost == "squared":
        cost = (a[:, None] - b[None, :]) ** 2
    else:
        cost = np.abs(a[:, None] - b[None, :])
    if r is not None:
        i_idx = np.arange(na)[:, None]
        j_idx = np.arange(nb)[None, :]
        cost = np.where(np.abs(i_idx - j_idx) <= r, cost, np.inf)

    acc = np.full((na + 1, nb + 1), np.inf)
    acc[0, 0] = 0.0
    # Sweep anti-diagonals: every cell on diagonal s = i + j depends only on
    # diagonals s-1 and s-2, so each sweep is one vectorized update.
    for s in range(2, na + nb + 1):
        lo = max(1, s - nb)
        hi = min(na, s - 1)
        if lo > hi:
            continue
        i = np.arange(lo, hi + 1)
        j = s - i
        best = np.minimum(acc[i - 1, j], acc[i, j - 1])
        best = np.minimum(best, acc[i - 1, j - 1])
        acc[i, j] = cost[i - 1, j - 1] + best
    result = float(acc[na, nb])
    if not np.isfinite(result):
        raise DataError("band admits no complete warping path")
    return result


def knn_dtw_classify(train: list, query: np.ndarray, params: DtwParams | None = None) -> int:
    """Label of the k nearest training windows under dtw_distance.

    Majority vote; a vote tie goes to the tied class with the smallest
    neighbor distance, and an exact distance tie to the lowest class label.
    Training windows are (samples, label) pairs or objects with .samples
    and .label; everything is pooled (and optionally z-normalized) first.
    """
    params = params or DtwParams()
    if not train:
        raise DataError("classification needs a non-empty training set")
    prepared = []
    labels = []
    for item in train:
        samples, label = (item.samples, item.label) if hasattr(item, "samples") else item
        w = mean_pool(np.asarray(samples, dtype=np.float64), params.downsample_to)
        prepared.append(_z_normalize(w) if params.z_normalize else w)
        labels.append(int(label))
    q = mean_pool(np.asarray(query, dtype=np.float64), params.downsample_to)
    if params.z_normalize:
        q = _z_normalize(q)
    distances = np.array([dtw_distance(w, q, params) for w in prepared])
    order = np.argsort(distances, kind="stable")
    top = order[: min(params.k_neighbors, order.size)]
    top_labels = np.array([labels[i] for i in top])
    top_dist = distances[top]
    classes, votes = np.unique(top_labels, return_counts=True)
    tied = classes[votes == votes.max()]
    if tied.size == 1:
        return int(tied[0])
    best_per_class = [(float(top_dist[top_labels == c].min()), int(c)) for c in tied]
    return min(best_per_class)[1]


def save_reference(windows: list, path: str, params: DtwParams,
                   header_comments: list[str] | None = None) -> None:
    """Persist pooled labeled reference windows for the neighbor classifier."""
    with open(path, "w", encoding="utf-8") as fh:
        for comment in header_comments or []:
            fh.write(f"# {comment}\n")
        fh.write("# dtw-reference v1\n")
        fh.write(
            f"# params k_neighbors={params.k_neighbors} local_cost={params.local_cost} "
            f"band_radius={params.band_radius} downsample_to={params.downsample_to} "
            f"z_normalize={int(params.z_normalize)}\n"
        )
        for item in windows:
            samples, label = (item.samples, item.label) if hasattr(item, "samples") else item
            start = getattr(item, "start_s", 0.0)
            pooled = mean_pool(np.asarray(samples, dtype=np.float64), params.downsample_to)
            cells = ",".join(repr(float(v)) for v in pooled)
            fh.write(f"{float(start)!r},{int(label)},{cells}\n")


def load_reference(path: str) -> tuple[list[tuple[np.ndarray, int]], DtwParams]:
    """Inverse of save_reference; returns ((samples, label) pairs, params)."""
    windows: list[tuple[np.ndarray, int]] = []
    params_kv: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for raw in fh:
                line = raw.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if body.startswith("params "):
                        for item in body[len("params "):].split():
                            key, _, value = item.partition("=")
                            params_kv[key] = value
                    continue
                cells = line.split(",")
                windows.append(
                    (np.array([float(v) for v in cells[2:]]), int(cells[1]))
                )
    except (ValueError, OSError) as exc:
        raise DataError(f"malformed reference file {path}: {exc}") from exc
    if not windows or not params_kv:
        raise DataError(f"malformed reference file {path}: missing params or windows")
    params = DtwParams(
        k_neighbors=int(params_kv["k_neighbors"]),
        local_cost=params_kv["local_cost"],
        band_radius=None if params_kv["band_radius"] == "None" else int(params_kv["band_radius"]),
        downsample_to=int(params_kv["downsample_to"]),
        z_normalize=bool(int(params_kv["z_normalize"])),
    )
    return windows, params
