"""Descriptor vectors and the fixed distance metrics over them.

A descriptor is a 1-D float64 numpy array. Cosine distance is the metric
used throughout the tracking pipeline; Euclidean distance is kept only
for metric-comparison experiments. Distances exposed to the tracker are
always computed in double precision so that assignment tie behavior is
reproducible.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import DimensionError, InvalidDescriptorError


class DistanceMetric(str, Enum):
    COSINE = "cosine"
    EUCLIDEAN = "euclidean"


def _as_vector(d) -> np.ndarray:
    v = np.asarray(d, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"descriptor must be 1-D, got shape {v.shape}")
    return v


def _check_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    va, vb = _as_vector(a), _as_vector(b)
    if va.shape[0] != vb.shape[0]:
        raise DimensionError(
            f"descriptor lengths differ: {va.shape[0]} vs {vb.shape[0]}"
        )
    if not (np.all(np.isfinite(va)) and np.all(np.isfinite(vb))):
        raise InvalidDescriptorError("descriptor contains NaN or Inf")
    return va, vb


def cosine_distance(a, b) -> float:
    """1 - cos(a, b), clipped to [0, 2] against floating rounding.

    Raises InvalidDescriptorError for zero vectors: the embedding model
    guarantees non-zero outputs, so a zero vector signals an upstream bug
    and must not be silently mapped to a sentinel distance.
    """
    va, vb = _check_pair(a, b)
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise InvalidDescriptorError("zero-vector descriptor")
    d = 1.0 - float(np.dot(va, vb)) / (na * nb)
    return min(max(d, 0.0), 2.0)


def euclidean_distance(a, b) -> float:
    """L2 distance between two equal-length descriptors."""
    va, vb = _check_pair(a, b)
    return float(np.linalg.norm(va - vb))


def cosine_distance_matrix(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Pairwise cosine distances between two stacks of descriptors.

    ``rows`` is (r, n) and ``cols`` is (c, n); the result is (r, c) with
    entry [i, j] = cosine_distance(rows[i], cols[j]). Used by the tracker
    and the miner, which compare every detection against every track or
    buffer head in one shot.
    """
    ra = np.asarray(rows, dtype=np.float64)
    ca = np.asarray(cols, dtype=np.float64)
    if ra.ndim != 2 or ca.ndim != 2:
        raise DimensionError("descriptor stacks must be 2-D")
    if ra.shape[1] != ca.shape[1]:
        raise DimensionError(
            f"descriptor lengths differ: {ra.shape[1]} vs {ca.shape[1]}"
        )
    if not (np.all(np.isfinite(ra)) and np.all(np.isfinite(ca))):
        raise InvalidDescriptorError("descriptor contains NaN or Inf")
    rn = np.linalg.norm(ra, axis=1)
    cn = np.linalg.norm(ca, axis=1)
    if np.any(rn == 0.0) or np.any(cn == 0.0):
        raise InvalidDescriptorError("zero-vector descriptor")
    sim = (ra / rn[:, None]) @ (ca / cn[:, None]).T
    return np.clip(1.0 - sim, 0.0, 2.0)


def metric_function(kind: DistanceMetric):
    if kind == DistanceMetric.COSINE:
        return cosine_distance
    if kind == DistanceMetric.EUCLIDEAN:
        return euclidean_distance
    raise ValueError(f"unknown metric: {kind!r}")
