import json
import math

import numpy as np
import pytest

from gaitmatch.dtw import DtwConfig
from gaitmatch.keypoints import ANCHOR_JOINTS, impute_sequence
from gaitmatch.retrieval import build_gallery, evaluate, split_by_condition
from gaitmatch.synthetic import (
    DEFAULT_SIGMA_LADDER,
    EXPORT_CENTER,
    EXPORT_SCALE,
    MOVING_JOINTS,
    ConditionSpec,
    IdentityModel,
    build_benchmark,
    default_conditions,
    generate_identity,
    render_sequence,
    sequence_to_record,
)

UNPRUNED = DtwConfig(window_ratio=1.0)


class TestConditionSpec:
    def test_invariants(self):
        with pytest.raises(ValueError):
            ConditionSpec(condition_tag="x", noise_sigma=-0.1)
        with pytest.raises(ValueError):
            ConditionSpec(condition_tag="x", dropout_rate=1.0)
        with pytest.raises(ValueError):
            ConditionSpec(condition_tag="x", dropout_rate=-0.2)
        with pytest.raises(ValueError):
            ConditionSpec(condition_tag="x", keypoint_jitter_model="uniform")

    def test_as_dict(self):
        spec = ConditionSpec(condition_tag="walk", noise_sigma=0.3, phase_offset=1.0)
        d = spec.as_dict()
        assert d["condition_tag"] == "walk"
        assert d["noise_sigma"] == 0.3
        assert d["phase_offset"] == 1.0

    def test_default_conditions_grid(self):
        specs = default_conditions(5)
        assert [s.condition_tag for s in specs] == [
            "clothesA-RGB",
            "clothesA-IR",
            "clothesB-RGB",
            "clothesB-IR",
            "clothesC-RGB",
        ]
        for i, s in enumerate(specs):
            assert s.phase_offset == pytest.approx(i * math.pi / 4)
        with pytest.raises(ValueError):
            default_conditions(0)


class TestIdentityModel:
    def test_same_seed_same_model(self):
        a = generate_identity(7)
        b = generate_identity(7)
        np.testing.assert_array_equal(a.base, b.base)
        np.testing.assert_array_equal(a.amplitude, b.amplitude)
        np.testing.assert_array_equal(a.phase, b.phase)
        assert a.frequency == b.frequency

    def test_different_seeds_differ(self):
        a = generate_identity(1)
        b = generate_identity(2)
        assert not np.array_equal(a.base, b.base)

    def test_anchor_geometry(self):
        m = generate_identity(3)
        s_w = m.base[0, 0]
        h_w = m.base[6, 0]
        assert s_w > 0 and h_w > 0
        np.testing.assert_array_equal(m.base[1], (-s_w, -1.0))
        np.testing.assert_array_equal(m.base[0], (s_w, -1.0))
        np.testing.assert_array_equal(m.base[7], (-h_w, 0.0))
        assert np.all(m.amplitude[list(ANCHOR_JOINTS)] == 0.0)
        assert np.all(m.amplitude[list(MOVING_JOINTS)] > 0.0)

    def test_stride_period_from_frequency(self):
        m = generate_identity(4)
        assert m.stride_period == round(1.0 / m.frequency)

    def test_identity_label_format(self):
        assert generate_identity(42).identity_label == "id000042"

    def test_negative_seed_rejected(self):
        with pytest.raises(ValueError):
            generate_identity(-1)

    def test_model_invariants(self):
        m = generate_identity(5)
        bad_amp = m.amplitude.copy()
        bad_amp[0, 0] = 0.1  # an anchor must stay put
        with pytest.raises(ValueError):
            IdentityModel(
                seed=5, base=m.base, amplitude=bad_amp, frequency=m.frequency,
                phase=m.phase,
            )
        with pytest.raises(ValueError):
            IdentityModel(
                seed=5, base=m.base, amplitude=m.amplitude, frequency=0.0,
                phase=m.phase,
            )


class TestRenderSequence:
    def test_deterministic(self):
        model = generate_identity(11)
        cond = ConditionSpec(condition_tag="c", noise_sigma=0.7, dropout_rate=0.2)
        a = render_sequence(model, cond, 30)
        b = render_sequence(model, cond, 30)
        for fa, fb in zip(a.frames, b.frames):
            np.testing.assert_array_equal(fa.joints, fb.joints)
            np.testing.assert_array_equal(fa.valid_mask, fb.valid_mask)

    def test_anchors_static_and_exact(self):
        model = generate_identity(12)
        seq = render_sequence(
            model, ConditionSpec(condition_tag="c", noise_sigma=1.5), 25
        )
        for f in seq.frames:
            for j in ANCHOR_JOINTS:
                np.testing.assert_array_equal(f.joints[j], model.base[j])

    def test_noise_free_motion_bounded_by_amplitude(self):
        model = generate_identity(13)
        seq = render_sequence(model, ConditionSpec(condition_tag="c"), 40)
        for f in seq.frames:
            assert np.all(np.abs(f.joints - model.base) <= model.amplitude + 1e-12)

    def test_common_random_numbers_scale_with_sigma(self):
        # the jitter stream is independent of sigma: doubling sigma doubles
        # the same perturbation instead of redrawing it
        model = generate_identity(14)
        clean = render_sequence(model, ConditionSpec(condition_tag="c"), 20)
        one = render_sequence(
            model, ConditionSpec(condition_tag="c", noise_sigma=1.0), 20
        )
        two = render_sequence(
            model, ConditionSpec(condition_tag="c", noise_sigma=2.0), 20
        )
        for fc, f1, f2 in zip(clean.frames, one.frames, two.frames):
            np.testing.assert_allclose(
                f2.joints - fc.joints, 2.0 * (f1.joints - fc.joints), atol=1e-12
            )

    def test_phase_offset_shifts_the_cycle(self):
        model = generate_identity(15)
        a = render_sequence(model, ConditionSpec(condition_tag="a"), 30)
        b = render_sequence(
            model, ConditionSpec(condition_tag="b", phase_offset=math.pi), 30
        )
        assert not np.array_equal(a.frames[0].joints, b.frames[0].joints)

    def test_dropout_marks_and_zeroes_moving_joints_only(self):
        model = generate_identity(16)
        cond = ConditionSpec(condition_tag="c", dropout_rate=0.5)
        seq = render_sequence(model, cond, 30)
        masks = np.stack([f.valid_mask for f in seq.frames])
        assert masks[:, list(ANCHOR_JOINTS)].all()
        assert not masks[:, list(MOVING_JOINTS)].all()
        # every joint keeps at least one observation, so imputation works
        assert masks.any(axis=0).all()
        for f in seq.frames:
            assert np.all(f.joints[~f.valid_mask] == 0.0)
        imputed = impute_sequence(seq)
        assert imputed.as_array().shape == (30, 24)

    def test_heavy_dropout_still_imputable(self):
        model = generate_identity(17)
        cond = ConditionSpec(condition_tag="c", dropout_rate=0.9)
        seq = render_sequence(model, cond, 40)
        imputed = impute_sequence(seq)
        assert np.isfinite(imputed.as_array()).all()

    def test_camera_tag_follows_modality(self):
        model = generate_identity(18)
        assert render_sequence(model, ConditionSpec(condition_tag="x-IR"), 10).camera_tag == "cam-ir"
        assert render_sequence(model, ConditionSpec(condition_tag="x-RGB"), 10).camera_tag == "cam-rgb"

    def test_frame_rate_caps_at_25(self):
        model = generate_identity(19)
        assert render_sequence(model, ConditionSpec(condition_tag="c"), 10).frame_rate == 10
        assert render_sequence(model, ConditionSpec(condition_tag="c"), 40).frame_rate == 25

    def test_length_validated(self):
        with pytest.raises(ValueError):
            render_sequence(generate_identity(20), ConditionSpec(condition_tag="c"), 0)


class TestSequenceToRecord:
    def test_denormalization_affine(self):
        model = generate_identity(21)
        seq = render_sequence(model, ConditionSpec(condition_tag="c"), 12)
        rec = sequence_to_record(seq)
        assert len(rec["frames"]) == 12
        frame = rec["frames"][0]
        assert len(frame) == 17
        for j in range(12):
            x, y, conf = frame[5 + j]
            assert conf == 1.0
            assert x == pytest.approx(
                seq.frames[0].joints[j, 0] * EXPORT_SCALE + EXPORT_CENTER[0]
            )
            assert y == pytest.approx(
                seq.frames[0].joints[j, 1] * EXPORT_SCALE + EXPORT_CENTER[1]
            )

    def test_head_joints_synthesized_confident(self):
        model = generate_identity(22)
        seq = render_sequence(model, ConditionSpec(condition_tag="c"), 10)
        rec = sequence_to_record(seq)
        for frame in rec["frames"]:
            for j in range(5):
                assert frame[j][2] == 1.0

    def test_dropped_joints_exported_at_center_with_zero_confidence(self):
        model = generate_identity(23)
        seq = render_sequence(
            model, ConditionSpec(condition_tag="c", dropout_rate=0.6), 20
        )
        rec = sequence_to_record(seq)
        found = 0
        for f, raw in zip(seq.frames, rec["frames"]):
            for j in range(12):
                if not f.valid_mask[j]:
                    found += 1
                    assert raw[5 + j] == [EXPORT_CENTER[0], EXPORT_CENTER[1], 0.0]
        assert found > 0


class TestBuildBenchmark:
    def test_small_build_shape_and_order(self):
        result = build_benchmark(3, 2, 24, seed=100)
        assert len(result.sequences) == 6
        seeds = result.manifest["identity_seeds"]
        expect_ids = [f"id{s:06d}" for s in seeds for _ in range(2)]
        assert [s.id for s in result.sequences] == expect_ids
        tags = [s.condition_tag for s in result.sequences[:2]]
        assert tags == ["clothesA-RGB", "clothesA-IR"]

    def test_margin_recorded_and_satisfied(self):
        result = build_benchmark(4, 2, 24, seed=101)
        margin = result.manifest["margin"]
        delta = result.manifest["delta_sep"]
        assert delta == pytest.approx(margin["factor"] * margin["mean_intra"])
        assert margin["min_inter"] >= delta > margin["max_intra"]

    def test_noise_free_retrieval_is_perfect_by_construction(self):
        result = build_benchmark(4, 2, 30, seed=102)
        queries, rest = split_by_condition(result.sequences)
        report = evaluate(queries, build_gallery(rest), UNPRUNED)
        assert report.rank_k[1] == 1.0
        assert report.mean_ap == 1.0

    def test_identity_major_sequence_count(self):
        result = build_benchmark(5, 3, 20, seed=103)
        assert result.manifest["sequence_count"] == 15
        assert len({s.id for s in result.sequences}) == 5

    def test_written_files_are_reproducible(self, tmp_path):
        a_dir = tmp_path / "a"
        b_dir = tmp_path / "b"
        ra = build_benchmark(3, 2, 20, seed=104, out_dir=a_dir)
        rb = build_benchmark(3, 2, 20, seed=104, out_dir=b_dir)
        assert ra.dataset_path.read_bytes() == rb.dataset_path.read_bytes()
        assert ra.manifest_path.read_bytes() == rb.manifest_path.read_bytes()

    def test_manifest_is_valid_json_with_counts(self, tmp_path):
        result = build_benchmark(3, 2, 20, seed=105, out_dir=tmp_path)
        loaded = json.loads(result.manifest_path.read_text())
        assert loaded["sequence_count"] == 6
        assert loaded["dataset"] == "dataset.jsonl"
        assert len(loaded["identity_seeds"]) == 3
        assert loaded["margin"]["resamples"] >= 0

    def test_dropout_survives_the_pipeline(self, tmp_path):
        result = build_benchmark(3, 2, 25, seed=106, dropout_rate=0.4, out_dir=tmp_path)
        for seq in result.sequences:
            assert np.isfinite(seq.as_array()).all()
        text = result.dataset_path.read_text()
        assert "0.0]" in text  # some exported joints carry zero confidence

    def test_noise_hurts_retrieval_eventually(self):
        clean = build_benchmark(6, 2, 30, seed=107)
        noisy = build_benchmark(6, 2, 30, seed=107, noise_sigma=2.5)
        q0, g0 = split_by_condition(clean.sequences)
        q1, g1 = split_by_condition(noisy.sequences)
        r0 = evaluate(q0, build_gallery(g0), UNPRUNED)
        r1 = evaluate(q1, build_gallery(g1), UNPRUNED)
        assert r0.rank_k[1] == 1.0
        assert r1.rank_k[1] < 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            build_benchmark(1, 2, 20)
        with pytest.raises(ValueError):
            build_benchmark(3, 1, 20)
        with pytest.raises(ValueError):
            build_benchmark(
                3,
                [ConditionSpec(condition_tag="same"), ConditionSpec(condition_tag="same")],
                20,
            )


def test_default_sigma_ladder_is_increasing_from_zero():
    assert DEFAULT_SIGMA_LADDER[0] == 0.0
    assert all(a < b for a, b in zip(DEFAULT_SIGMA_LADDER, DEFAULT_SIGMA_LADDER[1:]))
