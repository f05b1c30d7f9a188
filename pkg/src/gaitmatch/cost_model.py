"""Cost accounting for gallery scans, in units of DP cell relaxations.

One cost unit is one cell relaxation in the DTW recurrence. The model
composes three independent reduction factors:

    pairs actually scanned        N - V        (prefilter)
    cells admissible per pair     m*n - S_out  (band)
    fraction of those relaxed     k            (early abandon)

For runs without early abandon the predicted counts are exact, not
approximate: the engine relaxes every admissible cell, so measured cells
equal N*m*n with no strategy, N*(m*n - S_out) with the band alone, and
(N - V)*m*n with the prefilter alone. Early abandon is data dependent, so
k is an empirical per-run mean and predicted costs that include it track
the measurement rather than bound it.

S_out is counted with literally the same band-membership expression the
kernels evaluate, so the census and the engine can never disagree on a cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dtw import DtwConfig
from .retrieval import scan_gallery

STRATEGY_BAND = "band"
STRATEGY_PREFILTER = "prefilter"
STRATEGY_ABANDON = "abandon"
ALL_STRATEGIES = frozenset({STRATEGY_BAND, STRATEGY_PREFILTER, STRATEGY_ABANDON})

_CANONICAL_ORDER = (STRATEGY_BAND, STRATEGY_PREFILTER, STRATEGY_ABANDON)


def strategy_label(strategies) -> str:
    """Canonical label for a strategy set: 'none' or 'band+prefilter+abandon' style."""
    chosen = _validate(strategies)
    if not chosen:
        return "none"
    return "+".join(s for s in _CANONICAL_ORDER if s in chosen)


def _validate(strategies) -> frozenset:
    chosen = frozenset(strategies)
    unknown = chosen - ALL_STRATEGIES
    if unknown:
        raise ValueError(f"unknown strategies: {sorted(unknown)}")
    return chosen


def s_out(m: int, n: int, w: float) -> int:
    """Number of grid cells (x, y) in [1, m] x [1, n] outside the band.

    Uses the identical float expression as the DP kernels (r = y - (n/m)*x,
    inside iff r + w >= 0 and r - w <= 0) so the count matches the engine
    cell for cell.
    """
    if m < 1 or n < 1:
        raise ValueError("sequence lengths must be positive")
    if w < 0:
        raise ValueError("band width must be non-negative")
    xs = np.arange(1, m + 1, dtype=np.float64)
    ys = np.arange(1, n + 1, dtype=np.float64)
    r = ys[None, :] - (n / m) * xs[:, None]
    inside = (r + w >= 0.0) & (r - w <= 0.0)
    return int(m * n - np.count_nonzero(inside))


def predicted_cost(
    strategies,
    gallery_size: int,
    query_len: int,
    entry_len: int,
    out_of_band: int = 0,
    filtered: int = 0,
    abandon_fraction: float = 1.0,
) -> float:
    """Compose the per-factor reductions into a total predicted cell count."""
    chosen = _validate(strategies)
    pairs = gallery_size - filtered if STRATEGY_PREFILTER in chosen else gallery_size
    cells = query_len * entry_len
    if STRATEGY_BAND in chosen:
        cells -= out_of_band
    fraction = abandon_fraction if STRATEGY_ABANDON in chosen else 1.0
    return pairs * cells * fraction


@dataclass(frozen=True)
class CostReport:
    """Measured and predicted cell counts for one instrumented gallery scan.

    entry_len and out_of_band are None when gallery lengths are mixed; the
    predicted table is computed per entry in that case and stays exact.
    """

    strategies: frozenset
    gallery_size: int
    query_len: int
    entry_len: int | None
    out_of_band: int | None
    filtered: int
    abandoned: int
    abandon_fraction: float
    measured_cells: int
    predicted: dict[str, float] = field(repr=False)

    def __post_init__(self):
        if self.filtered > self.gallery_size:
            raise ValueError("filtered count exceeds gallery size")
        if not 0.0 <= self.abandon_fraction <= 1.0:
            raise ValueError("abandon fraction must lie in [0, 1]")
        if self.measured_cells < 0:
            raise ValueError("measured cell count must be non-negative")

    def to_dict(self) -> dict:
        return {
            "strategies": strategy_label(self.strategies),
            "gallery_size": self.gallery_size,
            "query_len": self.query_len,
            "entry_len": self.entry_len,
            "out_of_band": self.out_of_band,
            "filtered": self.filtered,
            "abandoned": self.abandoned,
            "abandon_fraction": self.abandon_fraction,
            "measured_cells": self.measured_cells,
            "predicted": dict(self.predicted),
        }

    def to_text(self) -> str:
        lines = [
            f"strategies        {strategy_label(self.strategies)}",
            f"gallery size      {self.gallery_size}",
            f"query length      {self.query_len}",
            f"entry length      {self.entry_len if self.entry_len is not None else 'mixed'}",
            f"out-of-band cells {self.out_of_band if self.out_of_band is not None else 'mixed'}",
            f"filtered          {self.filtered}",
            f"abandoned         {self.abandoned}",
            f"abandon fraction  {self.abandon_fraction:.4f}",
            f"measured cells    {self.measured_cells}",
            "predicted cells",
        ]
        for label in ("none", "band", "prefilter", "abandon", "band+prefilter+abandon"):
            lines.append(f"  {label:<24} {self.predicted[label]:.1f}")
        return "\n".join(lines)


def measure_run(
    query,
    gallery,
    cfg: DtwConfig,
    strategies,
    epsilon: float = math.inf,
    workers: int = 1,
) -> CostReport:
    """Scan a gallery under a strategy subset and account for every cell.

    Strategies absent from the set are disabled by neutralizing their
    parameter (full band, epsilon = inf, upsilon = inf); cfg and epsilon
    supply the values for the ones present.
    """
    chosen = _validate(strategies)
    if STRATEGY_BAND in chosen:
        eff = DtwConfig(
            window_width=cfg.window_width,
            window_ratio=cfg.window_ratio,
            abandon_threshold=cfg.abandon_threshold if STRATEGY_ABANDON in chosen else math.inf,
        )
    else:
        eff = DtwConfig(
            window_ratio=1.0,
            abandon_threshold=cfg.abandon_threshold if STRATEGY_ABANDON in chosen else math.inf,
        )
    eps_eff = epsilon if STRATEGY_PREFILTER in chosen else math.inf
    if STRATEGY_ABANDON in chosen and not math.isfinite(eff.abandon_threshold):
        raise ValueError("abandon strategy selected but cfg has no finite threshold")
    if STRATEGY_PREFILTER in chosen and not math.isfinite(eps_eff):
        raise ValueError("prefilter strategy selected but epsilon is not finite")

    scan = scan_gallery(query, gallery, eff, eps_eff, workers)
    m = scan.query_length
    lengths = scan.entry_lengths
    n_gallery = len(lengths)
    uniform = int(lengths[0]) if np.all(lengths == lengths[0]) else None

    out_per_entry = np.array(
        [s_out(m, int(n), eff.width_for(m, int(n))) for n in lengths], dtype=int
    )
    in_band = m * lengths - out_per_entry
    evaluated = ~scan.filtered
    n_filtered = int(scan.filtered.sum())
    if evaluated.any():
        k = float(np.mean(scan.cells[evaluated] / in_band[evaluated]))
    else:
        k = 1.0

    full = m * lengths
    survivors = evaluated
    predicted = {
        "none": float(full.sum()),
        "band": float(in_band.sum()),
        "prefilter": float(full[survivors].sum()),
        "abandon": float(k * full.sum()),
        "band+prefilter+abandon": float(k * in_band[survivors].sum()),
    }

    return CostReport(
        strategies=chosen,
        gallery_size=n_gallery,
        query_len=m,
        entry_len=uniform,
        out_of_band=int(out_per_entry[0]) if uniform is not None else None,
        filtered=n_filtered,
        abandoned=int(scan.abandoned.sum()),
        abandon_fraction=k,
        measured_cells=int(scan.cells.sum()),
        predicted=predicted,
    )
