"""Query-against-gallery matching and the re-identification evaluation harness.

The pipeline per query: lower-bound prefilter, then banded DTW with early
abandon per survivor. Entries removed by either mechanism are kept in the
ranking at distance +inf (never dropped), so CMC and mAP denominators always
cover the whole gallery and pruned runs stay comparable to unpruned ones.

Both thresholds are also applied to distances that finish the full DP: an
entry can survive the prefilter or complete without abandoning yet still land
at or above the cutoff, and the finite-ranked set is defined as exactly the
entries below both thresholds (epsilon scales with max(m, n); the abandon
threshold is a raw cumulative distance).

Ties rank by gallery ingestion order, which makes every ranking, report, and
sweep row a pure function of its inputs regardless of worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product

import numpy as np

from .dtw import DtwConfig, dtw_distance
from .errors import EmptyGallery, MissingGroundTruth
from .keypoints import PoseSequence, norms_of
from .lower_bound import LbFeatures, lb_features, survives

CMC_RANKS = (1, 5, 10, 20)


@dataclass(frozen=True)
class GalleryEntry:
    """A gallery sequence with its cached norm series and bound features."""

    sequence: PoseSequence
    norms: np.ndarray
    features: LbFeatures

    @classmethod
    def from_sequence(cls, seq: PoseSequence) -> "GalleryEntry":
        norms = norms_of(seq.as_array())
        return cls(sequence=seq, norms=norms, features=lb_features(norms))


def build_gallery(sequences) -> list[GalleryEntry]:
    """Wrap sequences as gallery entries, preserving ingestion order."""
    return [GalleryEntry.from_sequence(s) for s in sequences]


@dataclass(frozen=True)
class RankedList:
    """Ranking of one query over a gallery.

    entries are (gallery_id, distance) pairs ascending by distance, +inf for
    filtered/abandoned/over-threshold entries; indices are the corresponding
    gallery positions (ties resolve to ingestion order).
    """

    query_id: str
    entries: tuple[tuple[str, float], ...]
    indices: tuple[int, ...]


@dataclass(frozen=True)
class ScanResult:
    """Per-entry instrumentation for one query pass over a gallery."""

    query_length: int
    entry_lengths: np.ndarray
    distances: np.ndarray  # effective distances, +inf where excluded
    cells: np.ndarray
    filtered: np.ndarray
    abandoned: np.ndarray


def _scan_chunk(q_arr, q_feats, q_len, gallery, lo, hi, cfg, epsilon):
    rows = []
    for entry in gallery[lo:hi]:
        n = len(entry.sequence)
        cutoff = epsilon * max(q_len, n)
        if not survives(q_feats, q_len, entry.features, n, epsilon):
            rows.append((math.inf, 0, True, False))
            continue
        outcome = dtw_distance(q_arr, entry.sequence.as_array(), cfg, return_path=False)
        if outcome.abandoned:
            rows.append((math.inf, outcome.cells_evaluated, False, True))
            continue
        d = outcome.distance
        if d >= cfg.abandon_threshold or d >= cutoff:
            d = math.inf
        rows.append((d, outcome.cells_evaluated, False, False))
    return rows


def scan_gallery(
    query: PoseSequence,
    gallery,
    cfg: DtwConfig,
    epsilon: float = math.inf,
    workers: int = 1,
) -> ScanResult:
    """Run the prefilter + DTW pipeline for one query and record everything.

    workers > 1 splits the gallery into contiguous chunks scanned by a thread
    pool; per-entry results are merged back in gallery order, so the output is
    identical for any worker count.
    """
    if not gallery:
        raise EmptyGallery("gallery is empty")
    if epsilon < 0.0:
        raise ValueError("epsilon must be non-negative")
    q_arr = query.as_array()
    q_feats = lb_features(norms_of(q_arr))
    q_len = len(query)
    n_entries = len(gallery)
    workers = max(1, min(int(workers), n_entries))
    if workers == 1:
        rows = _scan_chunk(q_arr, q_feats, q_len, gallery, 0, n_entries, cfg, epsilon)
    else:
        bounds = np.linspace(0, n_entries, workers + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(
                    _scan_chunk, q_arr, q_feats, q_len, gallery,
                    int(bounds[i]), int(bounds[i + 1]), cfg, epsilon,
                )
                for i in range(workers)
            ]
            rows = [row for f in futures for row in f.result()]
    dists, cells, filt, aband = zip(*rows)
    return ScanResult(
        query_length=q_len,
        entry_lengths=np.array([len(e.sequence) for e in gallery], dtype=int),
        distances=np.array(dists, dtype=float),
        cells=np.array(cells, dtype=int),
        filtered=np.array(filt, dtype=bool),
        abandoned=np.array(aband, dtype=bool),
    )


def _rank(scan: ScanResult, gallery) -> tuple[tuple[tuple[str, float], ...], tuple[int, ...]]:
    order = sorted(range(len(gallery)), key=lambda i: (scan.distances[i], i))
    entries = tuple((gallery[i].sequence.id, float(scan.distances[i])) for i in order)
    return entries, tuple(order)


def match_query(
    query: PoseSequence,
    gallery,
    cfg: DtwConfig,
    epsilon: float = math.inf,
    top_k: int | None = None,
    workers: int = 1,
) -> RankedList:
    """Rank a gallery against one query; see the module docstring for rules."""
    scan = scan_gallery(query, gallery, cfg, epsilon, workers)
    entries, indices = _rank(scan, gallery)
    if top_k is not None:
        entries = entries[:top_k]
        indices = indices[:top_k]
    return RankedList(query_id=query.id, entries=entries, indices=indices)


@dataclass(frozen=True)
class EvalReport:
    """CMC hit rates at the standard ranks plus mAP and per-query AP."""

    rank_k: dict[int, float]
    mean_ap: float
    per_query_ap: tuple[float, ...]

    def __post_init__(self):
        rates = [self.rank_k[k] for k in sorted(self.rank_k)]
        if any(b < a for a, b in zip(rates, rates[1:])):
            raise ValueError("CMC hit rate must be non-decreasing in k")
        if not 0.0 <= self.mean_ap <= 1.0:
            raise ValueError("mAP must lie in [0, 1]")

    def as_dict(self) -> dict:
        return {
            "rank_k": {str(k): self.rank_k[k] for k in sorted(self.rank_k)},
            "mAP": self.mean_ap,
            "per_query_ap": list(self.per_query_ap),
        }


def _ap_and_first_rank(ranked_ids, query_id):
    relevant_seen = 0
    precisions = []
    first = None
    for rank, gid in enumerate(ranked_ids, start=1):
        if gid == query_id:
            if first is None:
                first = rank
            relevant_seen += 1
            precisions.append(relevant_seen / rank)
    return sum(precisions) / len(precisions), first


def _evaluate_scans(queries, gallery, cfg, epsilon, workers):
    gallery_ids = {e.sequence.id for e in gallery}
    missing = sorted({q.id for q in queries} - gallery_ids)
    if missing:
        raise MissingGroundTruth(f"query identities absent from gallery: {missing}")
    for query in queries:
        yield query, scan_gallery(query, gallery, cfg, epsilon, workers)


def evaluate(
    queries,
    gallery,
    cfg: DtwConfig,
    epsilon: float = math.inf,
    workers: int = 1,
) -> EvalReport:
    """CMC rank-k (k in 1/5/10/20) and mAP over a query set.

    Rank-k is the fraction of queries whose first same-identity entry appears
    at rank <= k; AP per query is the mean of precision@rank over the ranks of
    its same-identity entries. Excluded entries still occupy ranks at +inf.
    """
    report, _ = evaluate_with_cost(queries, gallery, cfg, epsilon, workers)
    return report


def evaluate_with_cost(queries, gallery, cfg, epsilon=math.inf, workers=1):
    """evaluate() plus the total number of DP cells spent, for sweep tables."""
    if not gallery:
        raise EmptyGallery("gallery is empty")
    if not queries:
        raise ValueError("no queries given")
    hits = {k: 0 for k in CMC_RANKS}
    aps = []
    total_cells = 0
    for query, scan in _evaluate_scans(queries, gallery, cfg, epsilon, workers):
        total_cells += int(scan.cells.sum())
        entries, _ = _rank(scan, gallery)
        ap, first = _ap_and_first_rank([gid for gid, _ in entries], query.id)
        aps.append(ap)
        for k in CMC_RANKS:
            if first is not None and first <= k:
                hits[k] += 1
    n_q = len(queries)
    report = EvalReport(
        rank_k={k: hits[k] / n_q for k in CMC_RANKS},
        mean_ap=float(np.mean(aps)),
        per_query_ap=tuple(aps),
    )
    return report, total_cells


def split_by_condition(sequences, query_condition: str | None = None):
    """Split sequences into (queries, gallery) by condition tag.

    The default query condition is the first condition tag in ingestion order;
    everything else forms the gallery (cross-condition matching).
    """
    sequences = list(sequences)
    if not sequences:
        raise ValueError("no sequences to split")
    if query_condition is None:
        query_condition = sequences[0].condition_tag
    tags = {s.condition_tag for s in sequences}
    if query_condition not in tags:
        raise ValueError(
            f"query condition {query_condition!r} not present (have {sorted(tags)})"
        )
    queries = [s for s in sequences if s.condition_tag == query_condition]
    rest = [s for s in sequences if s.condition_tag != query_condition]
    if not rest:
        raise ValueError("all sequences share one condition; nothing to rank against")
    return queries, rest


def sweep_hyperparameters(grid: dict, queries, gallery, workers: int = 1) -> list[dict]:
    """Evaluate the full Cartesian product of a {w, upsilon, epsilon} grid.

    Grid keys: "w" (ints or None for the full band), "upsilon", "epsilon"
    (floats, inf to disable). Returns one row per combination, in product
    order, each with rank-1/5/10/20, mAP, and total DP cells spent.
    """
    for key in ("w", "upsilon", "epsilon"):
        if key not in grid or not grid[key]:
            raise ValueError(f"grid must list values for {key!r}")
    rows = []
    for w, upsilon, epsilon in product(grid["w"], grid["upsilon"], grid["epsilon"]):
        cfg = (
            DtwConfig(window_width=w, abandon_threshold=upsilon)
            if w is not None
            else DtwConfig(window_ratio=1.0, abandon_threshold=upsilon)
        )
        report, cells = evaluate_with_cost(queries, gallery, cfg, epsilon, workers)
        rows.append(
            {
                "w": w,
                "upsilon": upsilon,
                "epsilon": epsilon,
                "rank1": report.rank_k[1],
                "rank5": report.rank_k[5],
                "rank10": report.rank_k[10],
                "rank20": report.rank_k[20],
                "mAP": report.mean_ap,
                "cells": cells,
            }
        )
    return rows
