"""Command-line surface: ingest, match, evaluate, bench, synth.

Every command is a pure function of its input files and flags; stdout and any
written files are byte-identical across reruns and across --workers settings.
Timing and log lines go to stderr only, and worker count is deliberately not
echoed into reports.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

from .cost_model import ALL_STRATEGIES, measure_run, strategy_label
from .dataset import load_dataset, write_normalized
from .dtw import DtwConfig
from .errors import GaitMatchError
from .retrieval import build_gallery, evaluate, match_query, split_by_condition
from .synthetic import build_benchmark

REPORT_SCHEMA_VERSION = 1

DEFAULT_WINDOW = 30
DEFAULT_UPSILON = 8.0
DEFAULT_EPSILON = 0.8

log = logging.getLogger("gaitmatch.cli")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this project reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _window_arg(text: str):
    if text.lower() in ("full", "none"):
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid window {text!r}: integer or 'full'")
    if value < 0:
        raise argparse.ArgumentTypeError("window width must be >= 0")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if math.isnan(value) or value <= 0.0:
        raise argparse.ArgumentTypeError("must be a positive number (inf allowed)")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if math.isnan(value) or value < 0.0:
        raise argparse.ArgumentTypeError("must be non-negative (inf allowed)")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _matching_flags(p: argparse.ArgumentParser):
    p.add_argument(
        "--w",
        type=_window_arg,
        default=DEFAULT_WINDOW,
        help="band half-width in cells, or 'full' for no band (default: %(default)s)",
    )
    p.add_argument(
        "--upsilon",
        type=_positive_float,
        default=DEFAULT_UPSILON,
        help="abandon threshold on cumulative distance, inf to disable "
        "(default: %(default)s)",
    )
    p.add_argument(
        "--epsilon",
        type=_nonneg_float,
        default=DEFAULT_EPSILON,
        help="prefilter threshold per unit of max sequence length, inf to disable "
        "(default: %(default)s)",
    )
    p.add_argument(
        "--workers",
        type=_positive_int,
        default=1,
        help="thread count; results are identical for any value (default: %(default)s)",
    )


def _config_dict(args) -> dict:
    return {"w": args.w, "upsilon": args.upsilon, "epsilon": args.epsilon}


def _dtw_config(args) -> DtwConfig:
    if args.w is None:
        return DtwConfig(window_ratio=1.0, abandon_threshold=args.upsilon)
    return DtwConfig(window_width=args.w, abandon_threshold=args.upsilon)


def _warn_epsilon(args):
    if args.epsilon == 0.0:
        log.warning("epsilon is 0: the prefilter removes every gallery entry")


def _json_ready(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    return obj


def _emit_json(payload: dict, path) -> None:
    text = json.dumps(_json_ready(payload), indent=2, sort_keys=True, allow_nan=False)
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _load_sequences(path, confidence_floor=None):
    kwargs = {} if confidence_floor is None else {"confidence_floor": confidence_floor}
    report = load_dataset(path, **kwargs)
    for line_no, reason in report.skipped:
        log.warning("%s:%d skipped: %s", path, line_no, reason)
    return report


def cmd_ingest(args) -> int:
    report = _load_sequences(args.input, args.confidence_floor)
    count = write_normalized(args.output, report.sequences)
    c = report.counts
    print(
        f"ingested {c['sequences'] + c['records_skipped']} records: "
        f"{count} sequences written, {c['records_skipped']} skipped, "
        f"{c['frames_dropped']} degenerate frames dropped"
    )
    return 0


def cmd_match(args) -> int:
    _warn_epsilon(args)
    queries = _load_sequences(args.query_path).sequences
    gallery_seqs = _load_sequences(args.gallery_path).sequences
    if not queries:
        raise GaitMatchError(f"no valid query sequences in {args.query_path}")
    gallery = build_gallery(gallery_seqs)
    cfg = _dtw_config(args)
    results = []
    for q in queries:
        ranked = match_query(q, gallery, cfg, args.epsilon, args.top_k, args.workers)
        results.append(
            {
                "query_id": ranked.query_id,
                "ranking": [
                    {"gallery_id": gid, "gallery_index": idx, "distance": dist}
                    for (gid, dist), idx in zip(ranked.entries, ranked.indices)
                ],
            }
        )
    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": {**_config_dict(args), "top_k": args.top_k},
        "results": results,
    }
    _emit_json(payload, args.out)
    return 0


def cmd_evaluate(args) -> int:
    _warn_epsilon(args)
    sequences = _load_sequences(args.dataset).sequences
    queries, gallery_seqs = split_by_condition(sequences, args.query_condition)
    gallery = build_gallery(gallery_seqs)
    report = evaluate(queries, gallery, _dtw_config(args), args.epsilon, args.workers)
    for k in sorted(report.rank_k):
        print(f"Rank-{k:<3d} {report.rank_k[k]:.4f}")
    print(f"mAP      {report.mean_ap:.4f}")
    sidecar = args.report
    if sidecar is None:
        sidecar = Path(args.dataset).with_suffix(".eval.json")
    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": _config_dict(args),
        "split": {
            "query_condition": queries[0].condition_tag,
            "n_queries": len(queries),
            "n_gallery": len(gallery),
        },
        **report.as_dict(),
    }
    _emit_json(payload, sidecar)
    return 0


def _parse_strategy_sets(specs) -> list[frozenset]:
    sets = []
    for spec in specs:
        tokens = [t.strip() for t in spec.replace("+", ",").split(",") if t.strip()]
        if tokens == ["none"]:
            sets.append(frozenset())
            continue
        unknown = set(tokens) - ALL_STRATEGIES
        if unknown:
            raise GaitMatchError(
                f"unknown strategy tokens {sorted(unknown)}; "
                f"choose from {sorted(ALL_STRATEGIES)} or 'none'"
            )
        sets.append(frozenset(tokens))
    return sets


_CANONICAL_SETS = (
    frozenset(),
    frozenset({"band"}),
    frozenset({"prefilter"}),
    frozenset({"abandon"}),
    frozenset({"band", "prefilter", "abandon"}),
)


def cmd_bench(args) -> int:
    _warn_epsilon(args)
    sequences = _load_sequences(args.dataset).sequences
    queries, gallery_seqs = split_by_condition(sequences, args.query_condition)
    gallery = build_gallery(gallery_seqs)
    cfg = _dtw_config(args)
    sets = (
        list(_CANONICAL_SETS)
        if not args.strategies
        else _parse_strategy_sets(args.strategies)
    )
    rows = []
    for chosen in sets:
        measured = 0
        predicted = 0.0
        filtered = abandoned = 0
        fractions = []
        for q in queries:
            rep = measure_run(q, gallery, cfg, chosen, args.epsilon, args.workers)
            measured += rep.measured_cells
            predicted += rep.predicted[strategy_label(chosen)]
            filtered += rep.filtered
            abandoned += rep.abandoned
            fractions.append(rep.abandon_fraction)
        rows.append(
            {
                "strategies": strategy_label(chosen),
                "measured_cells": measured,
                "predicted_cells": predicted,
                "filtered": filtered,
                "abandoned": abandoned,
                "abandon_fraction": sum(fractions) / len(fractions),
            }
        )
    header = f"{'strategy set':<26}{'measured':>12}{'predicted':>14}{'filtered':>10}{'abandoned':>11}{'k':>9}"
    print(header)
    for r in rows:
        print(
            f"{r['strategies']:<26}{r['measured_cells']:>12d}"
            f"{r['predicted_cells']:>14.1f}{r['filtered']:>10d}"
            f"{r['abandoned']:>11d}{r['abandon_fraction']:>9.4f}"
        )
    verdict = None
    if {r["strategies"] for r in rows} >= {strategy_label(s) for s in _CANONICAL_SETS}:
        by = {r["strategies"]: r["measured_cells"] for r in rows}
        combined = by["band+prefilter+abandon"]
        singles = [by["band"], by["prefilter"], by["abandon"]]
        verdict = all(combined <= s <= by["none"] for s in singles)
        print(f"cost ordering (combined <= each single <= none): {'HOLDS' if verdict else 'VIOLATED'}")
    if args.report is not None:
        payload = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "config": _config_dict(args),
            "rows": rows,
            "ordering_holds": verdict,
        }
        _emit_json(payload, args.report)
    return 0


def cmd_synth(args) -> int:
    result = build_benchmark(
        n_identities=args.identities,
        conditions=args.conditions,
        length=args.frames,
        seed=args.seed,
        noise_sigma=args.noise,
        dropout_rate=args.dropout,
        out_dir=args.out,
    )
    print(
        f"wrote {result.manifest['sequence_count']} sequences "
        f"({args.identities} identities x {args.conditions} conditions) "
        f"to {result.dataset_path}"
    )
    print(f"separation margin delta_sep={result.manifest['delta_sep']:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="gaitmatch",
        description="Skeleton-sequence matching for person re-identification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize raw keypoint JSONL")
    p.add_argument("input", help="raw 17-joint JSONL")
    p.add_argument("output", help="normalized JSONL to write")
    p.add_argument(
        "--confidence-floor",
        type=_nonneg_float,
        default=None,
        help="minimum anchor-joint confidence (default: library default 0.3)",
    )
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("match", help="rank a gallery against queries")
    p.add_argument("query_path")
    p.add_argument("gallery_path")
    _matching_flags(p)
    p.add_argument("--top-k", type=_positive_int, default=None, help="truncate rankings")
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("evaluate", help="CMC and mAP over a dataset split")
    p.add_argument("dataset")
    p.add_argument(
        "--query-condition",
        default=None,
        help="condition tag used as queries (default: first tag in the file)",
    )
    _matching_flags(p)
    p.add_argument("--report", default=None, help="JSON sidecar path (default: <dataset>.eval.json)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="measured vs predicted DP-cell costs")
    p.add_argument("dataset")
    p.add_argument(
        "--query-condition",
        default=None,
        help="condition tag used as queries (default: first tag in the file)",
    )
    _matching_flags(p)
    p.add_argument(
        "--strategies",
        action="append",
        default=None,
        metavar="SET",
        help="strategy set like 'band,prefilter' or 'none'; repeatable "
        "(default: all five canonical sets)",
    )
    p.add_argument("--report", default=None, help="optional JSON report path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic benchmark")
    p.add_argument("--identities", type=_positive_int, default=41)
    p.add_argument("--conditions", type=_positive_int, default=4)
    p.add_argument("--frames", type=_positive_int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=_nonneg_float, default=0.0, help="jitter sigma")
    p.add_argument("--dropout", type=_nonneg_float, default=0.0, help="dropout rate in [0, 1)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,  # rebind to the current stderr on every invocation
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        code = args.func(args)
    except GaitMatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    finally:
        print(f"elapsed {time.perf_counter() - started:.3f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
