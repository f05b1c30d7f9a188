import math

import numpy as np
import pytest

from gaitmatch.dtw import DtwConfig, dtw_distance_unconstrained
from gaitmatch.errors import EmptyGallery, MissingGroundTruth
from gaitmatch.retrieval import (
    EvalReport,
    build_gallery,
    evaluate,
    evaluate_with_cost,
    match_query,
    scan_gallery,
    split_by_condition,
    sweep_hyperparameters,
)

from factories import random_gallery, random_sequence, sequence_from_moving
from oracles import ref_cmc_map

UNPRUNED = DtwConfig(window_ratio=1.0)


def brute_distances(query, gallery):
    return np.array(
        [
            dtw_distance_unconstrained(
                query, e.sequence.as_array(), return_path=False
            ).distance
            for e in gallery
        ]
    )


class TestScanGallery:
    def test_self_scan_hits_zero(self):
        rng = np.random.default_rng(70)
        seq = random_sequence(rng, 12, id="a")
        gallery = build_gallery([seq, random_sequence(rng, 12, id="b")])
        scan = scan_gallery(seq, gallery, UNPRUNED)
        assert scan.distances[0] == 0.0
        assert scan.distances[1] > 0.0
        assert not scan.filtered.any() and not scan.abandoned.any()

    def test_unpruned_matches_brute_force(self):
        rng = np.random.default_rng(71)
        query = random_sequence(rng, 10, id="q")
        gallery = random_gallery(rng, 20)
        scan = scan_gallery(query, gallery, UNPRUNED)
        np.testing.assert_allclose(scan.distances, brute_distances(query, gallery))

    def test_pruned_distances_are_exactly_the_thresholded_truth(self):
        """Finite entries = those strictly under min(upsilon, eps*scale)."""
        rng = np.random.default_rng(72)
        for trial in range(10):
            query = random_sequence(rng, 10, id="q", spread=1.5)
            gallery = random_gallery(rng, 25, spread=1.5)
            truth = brute_distances(query, gallery)
            upsilon = float(rng.uniform(np.min(truth), np.max(truth)))
            epsilon = float(rng.uniform(0.05, 1.0))
            cfg = DtwConfig(window_ratio=1.0, abandon_threshold=upsilon)
            scan = scan_gallery(query, gallery, cfg, epsilon=epsilon)
            scales = np.array(
                [epsilon * max(len(query), len(e.sequence)) for e in gallery]
            )
            keep = (truth < upsilon) & (truth < scales)
            np.testing.assert_allclose(scan.distances[keep], truth[keep])
            assert np.all(np.isinf(scan.distances[~keep]))

    def test_band_only_matches_banded_brute(self):
        rng = np.random.default_rng(73)
        query = random_sequence(rng, 9, id="q")
        gallery = build_gallery(
            [random_sequence(rng, 9, id=f"g{i}") for i in range(10)]
        )
        cfg = DtwConfig(window_width=2)
        scan = scan_gallery(query, gallery, cfg)
        from gaitmatch.dtw import dtw_distance

        for i, entry in enumerate(gallery):
            d = dtw_distance(query, entry.sequence, cfg, return_path=False).distance
            assert scan.distances[i] == d

    def test_worker_counts_agree(self):
        rng = np.random.default_rng(74)
        query = random_sequence(rng, 10, id="q", spread=1.5)
        gallery = random_gallery(rng, 17, spread=1.5)
        cfg = DtwConfig(window_width=4, abandon_threshold=6.0)
        base = scan_gallery(query, gallery, cfg, epsilon=0.4, workers=1)
        for workers in (2, 3, 5, 17, 64):
            other = scan_gallery(query, gallery, cfg, epsilon=0.4, workers=workers)
            np.testing.assert_array_equal(base.distances, other.distances)
            np.testing.assert_array_equal(base.cells, other.cells)
            np.testing.assert_array_equal(base.filtered, other.filtered)
            np.testing.assert_array_equal(base.abandoned, other.abandoned)

    def test_empty_gallery_rejected(self):
        rng = np.random.default_rng(75)
        with pytest.raises(EmptyGallery):
            scan_gallery(random_sequence(rng, 8), [], UNPRUNED)

    def test_negative_epsilon_rejected(self):
        rng = np.random.default_rng(76)
        query = random_sequence(rng, 8)
        gallery = random_gallery(rng, 3)
        with pytest.raises(ValueError):
            scan_gallery(query, gallery, UNPRUNED, epsilon=-1.0)


class TestMatchQuery:
    def test_ranking_matches_stable_sort_oracle(self):
        rng = np.random.default_rng(77)
        query = random_sequence(rng, 10, id="q")
        gallery = random_gallery(rng, 20)
        ranked = match_query(query, gallery, UNPRUNED)
        truth = brute_distances(query, gallery)
        expect = sorted(range(len(gallery)), key=lambda i: (truth[i], i))
        assert list(ranked.indices) == expect
        assert [gid for gid, _ in ranked.entries] == [
            gallery[i].sequence.id for i in expect
        ]
        dists = [d for _, d in ranked.entries]
        assert dists == sorted(dists)

    def test_zero_epsilon_ranks_everything_infinite_in_ingestion_order(self):
        rng = np.random.default_rng(78)
        query = random_sequence(rng, 10, id="q")
        gallery = random_gallery(rng, 12)
        ranked = match_query(query, gallery, UNPRUNED, epsilon=0.0)
        assert all(math.isinf(d) for _, d in ranked.entries)
        assert list(ranked.indices) == list(range(12))

    def test_duplicate_entries_tie_by_ingestion_order(self):
        rng = np.random.default_rng(79)
        seq = random_sequence(rng, 10, id="dup")
        gallery = build_gallery([seq, seq, seq])
        ranked = match_query(seq, gallery, UNPRUNED)
        assert list(ranked.indices) == [0, 1, 2]
        assert all(d == 0.0 for _, d in ranked.entries)

    def test_top_k_truncates(self):
        rng = np.random.default_rng(80)
        query = random_sequence(rng, 10, id="q")
        gallery = random_gallery(rng, 15)
        full = match_query(query, gallery, UNPRUNED)
        top = match_query(query, gallery, UNPRUNED, top_k=4)
        assert top.entries == full.entries[:4]
        assert top.indices == full.indices[:4]

    def test_pruning_never_reorders_the_finite_part(self):
        rng = np.random.default_rng(81)
        query = random_sequence(rng, 10, id="q", spread=1.5)
        gallery = random_gallery(rng, 30, spread=1.5)
        full = match_query(query, gallery, UNPRUNED)
        cfg = DtwConfig(window_ratio=1.0, abandon_threshold=4.0)
        pruned = match_query(query, gallery, cfg, epsilon=0.5)
        finite = [(g, d) for g, d in pruned.entries if math.isfinite(d)]
        assert finite == list(full.entries[: len(finite)])


class TestEvaluate:
    def test_perfect_retrieval_on_disjoint_identities(self):
        rng = np.random.default_rng(82)
        queries, gallery_seqs = [], []
        for i in range(5):
            base = rng.normal(0.0, 1.0, size=(12, 16)) + 8.0 * i
            queries.append(sequence_from_moving(base, id=f"id{i}", condition_tag="a"))
            gallery_seqs.append(
                sequence_from_moving(
                    base + rng.normal(0.0, 0.01, size=(12, 16)),
                    id=f"id{i}",
                    condition_tag="b",
                )
            )
        report = evaluate(queries, build_gallery(gallery_seqs), UNPRUNED)
        assert report.rank_k[1] == 1.0
        assert report.mean_ap == 1.0
        assert report.per_query_ap == (1.0,) * 5

    def test_matches_reference_cmc_map(self):
        rng = np.random.default_rng(83)
        for trial in range(5):
            queries = [random_sequence(rng, 8, id=f"id{i % 4:03d}") for i in range(6)]
            gallery = random_gallery(rng, 20, n_ids=4)
            cfg = DtwConfig(window_width=3, abandon_threshold=7.0)
            report = evaluate(queries, gallery, cfg, epsilon=0.6)
            dists = np.stack(
                [
                    scan_gallery(q, gallery, cfg, epsilon=0.6).distances
                    for q in queries
                ]
            )
            rank_k, mean_ap, aps = ref_cmc_map(
                dists,
                [q.id for q in queries],
                [e.sequence.id for e in gallery],
            )
            assert report.rank_k == rank_k
            assert report.mean_ap == pytest.approx(mean_ap)
            assert list(report.per_query_ap) == pytest.approx(aps)

    def test_all_equal_distances_rank_by_ingestion(self):
        # every gallery entry at distance zero: the first same-identity entry
        # sits wherever ingestion order put it
        rng = np.random.default_rng(84)
        moving = rng.normal(0.0, 1.0, size=(10, 16))
        seq = sequence_from_moving(moving, id="x")
        clones = [
            sequence_from_moving(moving, id=gid) for gid in ("other", "other", "x", "x")
        ]
        gallery = build_gallery(clones)
        report = evaluate([seq], gallery, UNPRUNED)
        # first relevant at rank 3; AP = mean(1/3, 2/4)
        assert report.rank_k[1] == 0.0
        assert report.rank_k[5] == 1.0
        assert report.mean_ap == pytest.approx((1 / 3 + 2 / 4) / 2)

    def test_missing_ground_truth_raises_with_ids(self):
        rng = np.random.default_rng(85)
        queries = [random_sequence(rng, 8, id="ghost"), random_sequence(rng, 8, id="id000")]
        gallery = random_gallery(rng, 6, n_ids=2)
        with pytest.raises(MissingGroundTruth, match="ghost"):
            evaluate(queries, gallery, UNPRUNED)

    def test_empty_inputs_rejected(self):
        rng = np.random.default_rng(86)
        with pytest.raises(EmptyGallery):
            evaluate([random_sequence(rng, 8)], [], UNPRUNED)
        with pytest.raises(ValueError):
            evaluate([], random_gallery(rng, 3), UNPRUNED)

    def test_infinite_and_slack_thresholds_agree(self):
        rng = np.random.default_rng(87)
        queries = [random_sequence(rng, 8, id=f"id{i % 3:03d}") for i in range(4)]
        gallery = random_gallery(rng, 12, n_ids=3)
        loose = DtwConfig(window_ratio=1.0, abandon_threshold=1e9)
        r_inf, c_inf = evaluate_with_cost(queries, gallery, UNPRUNED)
        r_loose, c_loose = evaluate_with_cost(queries, gallery, loose)
        assert r_inf == r_loose
        assert c_inf == c_loose

    def test_worker_counts_agree(self):
        rng = np.random.default_rng(88)
        queries = [random_sequence(rng, 9, id=f"id{i % 3:03d}", spread=1.5) for i in range(5)]
        gallery = random_gallery(rng, 14, n_ids=3, spread=1.5)
        cfg = DtwConfig(window_width=3, abandon_threshold=6.0)
        one = evaluate(queries, gallery, cfg, epsilon=0.5, workers=1)
        many = evaluate(queries, gallery, cfg, epsilon=0.5, workers=4)
        assert one == many


class TestEvalReport:
    def test_cmc_must_be_non_decreasing(self):
        with pytest.raises(ValueError):
            EvalReport(rank_k={1: 0.9, 5: 0.5}, mean_ap=0.5, per_query_ap=(0.5,))

    def test_map_range_enforced(self):
        with pytest.raises(ValueError):
            EvalReport(rank_k={1: 0.5, 5: 0.6}, mean_ap=1.2, per_query_ap=(1.2,))

    def test_as_dict_shape(self):
        report = EvalReport(
            rank_k={1: 0.5, 5: 0.75, 10: 1.0, 20: 1.0},
            mean_ap=0.8,
            per_query_ap=(0.6, 1.0),
        )
        d = report.as_dict()
        assert d["rank_k"] == {"1": 0.5, "5": 0.75, "10": 1.0, "20": 1.0}
        assert d["mAP"] == 0.8
        assert d["per_query_ap"] == [0.6, 1.0]


class TestSplitByCondition:
    def _seqs(self, rng):
        out = []
        for i in range(4):
            for tag in ("walk", "coat", "bag"):
                out.append(random_sequence(rng, 8, id=f"id{i}", condition_tag=tag))
        return out

    def test_default_takes_first_tag_as_queries(self):
        rng = np.random.default_rng(89)
        seqs = self._seqs(rng)
        queries, rest = split_by_condition(seqs)
        assert {s.condition_tag for s in queries} == {"walk"}
        assert {s.condition_tag for s in rest} == {"coat", "bag"}
        assert len(queries) == 4 and len(rest) == 8

    def test_explicit_tag(self):
        rng = np.random.default_rng(90)
        queries, rest = split_by_condition(self._seqs(rng), query_condition="bag")
        assert {s.condition_tag for s in queries} == {"bag"}
        assert all(s.condition_tag != "bag" for s in rest)

    def test_unknown_tag_rejected(self):
        rng = np.random.default_rng(91)
        with pytest.raises(ValueError, match="not present"):
            split_by_condition(self._seqs(rng), query_condition="night")

    def test_single_condition_rejected(self):
        rng = np.random.default_rng(92)
        seqs = [random_sequence(rng, 8, id=f"id{i}", condition_tag="only") for i in range(3)]
        with pytest.raises(ValueError, match="one condition"):
            split_by_condition(seqs)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            split_by_condition([])


class TestSweep:
    def test_row_count_is_the_product_of_the_grid(self):
        rng = np.random.default_rng(93)
        queries = [random_sequence(rng, 8, id=f"id{i % 2:03d}") for i in range(3)]
        # narrow length range keeps the smallest band endpoint-feasible
        gallery = random_gallery(rng, 8, length_range=(8, 10), n_ids=2)
        grid = {"w": [2, None], "upsilon": [5.0, math.inf], "epsilon": [0.5, math.inf, 1.0]}
        rows = sweep_hyperparameters(grid, queries, gallery)
        assert len(rows) == 2 * 2 * 3
        combos = [(r["w"], r["upsilon"], r["epsilon"]) for r in rows]
        assert len(set(combos)) == len(combos)

    def test_singleton_grid_equals_direct_evaluation(self):
        rng = np.random.default_rng(94)
        queries = [random_sequence(rng, 9, id=f"id{i % 2:03d}", spread=1.5) for i in range(4)]
        gallery = random_gallery(rng, 10, n_ids=2, spread=1.5)
        grid = {"w": [3], "upsilon": [6.0], "epsilon": [0.5]}
        (row,) = sweep_hyperparameters(grid, queries, gallery)
        cfg = DtwConfig(window_width=3, abandon_threshold=6.0)
        report, cells = evaluate_with_cost(queries, gallery, cfg, epsilon=0.5)
        assert row["rank1"] == report.rank_k[1]
        assert row["rank20"] == report.rank_k[20]
        assert row["mAP"] == report.mean_ap
        assert row["cells"] == cells

    def test_missing_grid_key_rejected(self):
        rng = np.random.default_rng(95)
        queries = [random_sequence(rng, 8, id="id000")]
        gallery = random_gallery(rng, 4, n_ids=1)
        with pytest.raises(ValueError, match="upsilon"):
            sweep_hyperparameters({"w": [2], "epsilon": [0.5]}, queries, gallery)
        with pytest.raises(ValueError, match="'w'"):
            sweep_hyperparameters(
                {"w": [], "upsilon": [1.0], "epsilon": [0.5]}, queries, gallery
            )
