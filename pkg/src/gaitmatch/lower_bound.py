"""Four-feature lower bound for DTW and the gallery prefilter built on it.

The bound compares the first, last, greatest, and smallest values of two
scalar series; its maximum absolute difference can never exceed the DTW
distance, because every warping path aligns the two first elements, aligns
the two last elements, and visits every index of both series (so the max and
min of one series each get aligned against some element of the other).

Frames here are vectors, so the bound is computed on the per-frame Euclidean
norm series. The chain that keeps this sound for the multivariate engine:

    lb(norms)  <=  scalar DTW on norms  <=  multivariate DTW  <=  banded DTW

The middle step is the reverse triangle inequality applied cell-wise along
the multivariate-optimal path; the last holds because the band only removes
paths. An entry is discarded when the bound already meets the distance cutoff
eps * scale (scale = max(m, n) makes eps comparable across lengths).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySequence
from .keypoints import norm_series


@dataclass(frozen=True)
class LbFeatures:
    """Order statistics of a norm series: first, last, max, min."""

    start: float
    end: float
    greatest: float
    smallest: float

    def __post_init__(self):
        values = (self.start, self.end, self.greatest, self.smallest)
        if not all(np.isfinite(v) for v in values):
            raise ValueError("lower-bound features must be finite")
        if self.smallest > self.greatest:
            raise ValueError("smallest feature exceeds greatest")


def lb_features(series) -> LbFeatures:
    """Extract the four features from a scalar series."""
    values = np.asarray(series, dtype=float)
    if values.ndim != 1:
        raise ValueError("expected a scalar series")
    if values.shape[0] == 0:
        raise EmptySequence("cannot take lower-bound features of an empty series")
    return LbFeatures(
        start=float(values[0]),
        end=float(values[-1]),
        greatest=float(values.max()),
        smallest=float(values.min()),
    )


def lb_kim(a: LbFeatures, b: LbFeatures) -> float:
    """max of the four feature differences; never exceeds the DTW distance."""
    return max(
        abs(a.start - b.start),
        abs(a.end - b.end),
        abs(a.greatest - b.greatest),
        abs(a.smallest - b.smallest),
    )


def sequence_features(seq) -> LbFeatures:
    """Features of a PoseSequence's norm series."""
    return lb_features(norm_series(seq))


def survives(query_features, query_len, entry_features, entry_len, epsilon) -> bool:
    """The one survival rule: bound strictly below epsilon * max(m, n).

    epsilon scales with the longer sequence because the unnormalized DTW
    distance grows with path length. At epsilon = 0 nothing survives (the
    bound is never negative); at epsilon = inf everything does.
    """
    return lb_kim(query_features, entry_features) < epsilon * max(query_len, entry_len)


def _entry_parts(entry):
    if hasattr(entry, "features"):
        return entry.features, len(entry.sequence)
    return sequence_features(entry), len(entry)


def prefilter(query, gallery, epsilon: float):
    """Split a gallery into survivors and a filtered count using the bound.

    gallery entries may be PoseSequence objects or anything exposing cached
    .features and .sequence. Survivor order is unchanged; every non-survivor
    provably has DTW distance at or above its epsilon * max(m, n) cutoff.

    Returns (survivors, filtered_count).
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be non-negative")
    qf = sequence_features(query)
    m = len(query)
    survivors = []
    for entry in gallery:
        feats, n = _entry_parts(entry)
        if survives(qf, m, feats, n, epsilon):
            survivors.append(entry)
    return survivors, len(gallery) - len(survivors)
