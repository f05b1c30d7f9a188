"""Deterministic generator of gait-like keypoint sequences.

Each identity is a base skeleton plus sinusoidal limb oscillation; conditions
(clothing or sensor changes) perturb keypoints with a phase offset, Gaussian
jitter, and dropout, never the geometry itself. Anchors (shoulders, hips)
stay pinned at their normalized positions: jitter on the joints that define
the coordinate frame would be absorbed by re-normalization anyway, so the
generator perturbs only the eight moving joints.

Identity separation is enforced, not hoped for. A benchmark build measures
the noise-free intra-identity cross-condition distances, sets the separation
margin to five times their mean, verifies every inter-identity distance
clears it, and re-seeds offending identities until the margin holds. The
margin and the final seeds land in the manifest, which makes perfect rank-1
retrieval on the noise-free set a property of the construction.

Jitter is drawn as unit noise from a stream independent of noise_sigma and
scaled afterwards, so sweeping sigma on a fixed seed perturbs the same
realization by growing amounts (common random numbers).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dtw import DtwConfig, dtw_distance
from .keypoints import (
    ANCHOR_JOINTS,
    KeypointFrame,
    N_BODY_JOINTS,
    PoseSequence,
    impute_sequence,
)

MOVING_JOINTS = tuple(j for j in range(N_BODY_JOINTS) if j not in ANCHOR_JOINTS)

SHOULDER_HALF_WIDTH_RANGE = (0.55, 0.95)
HIP_HALF_WIDTH_RANGE = (0.30, 0.55)
FREQUENCY_RANGE = (0.08, 0.14)  # gait cycles per frame
AMPLITUDE_RANGE = (0.04, 0.10)
DISTAL_AMPLITUDE_GAIN = 1.4  # wrists and ankles travel further
SIGNATURE_RADIUS = 2.0  # identity offset, spread over 16 moving coordinates
MARGIN_FACTOR = 5.0
MAX_MARGIN_ATTEMPTS = 200
_SALT_STEP = 999983

DEFAULT_SIGMA_LADDER = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5)

# Margin bookkeeping mirrors how the benchmark is consumed: intra distances
# under the banded config used for evaluation, inter distances unconstrained
# (a lower bound for any band, so the margin survives tightening w).
_MARGIN_INTRA_CFG = DtwConfig(window_width=30)
_MARGIN_INTER_CFG = DtwConfig(window_ratio=1.0)

MANIFEST_SCHEMA_VERSION = 1
EXPORT_SCALE = 100.0
EXPORT_CENTER = (256.0, 256.0)

# Head joints (discarded by normalization) for the raw 17-joint export,
# relative to the same normalized frame as the body.
_HEAD_TEMPLATE = (
    (0.00, -1.45),  # nose
    (0.07, -1.52),  # left eye
    (-0.07, -1.52),  # right eye
    (0.15, -1.47),  # left ear
    (-0.15, -1.47),  # right ear
)

# Base phase per moving joint: legs anti-phase, arms swing against the
# ipsilateral leg, distal joints lag their parent slightly.
_GAIT_PHASE = {
    2: math.pi,  # left elbow
    3: 0.0,  # right elbow
    4: math.pi + 0.5,  # left wrist
    5: 0.5,  # right wrist
    8: 0.0,  # left knee
    9: math.pi,  # right knee
    10: 0.55,  # left ankle
    11: math.pi + 0.55,  # right ankle
}


@dataclass(frozen=True, eq=False)
class ConditionSpec:
    condition_tag: str
    noise_sigma: float = 0.0
    keypoint_jitter_model: str = "gaussian-per-joint"
    dropout_rate: float = 0.0
    phase_offset: float = 0.0

    def __post_init__(self):
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be non-negative")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.keypoint_jitter_model != "gaussian-per-joint":
            raise ValueError(f"unknown jitter model {self.keypoint_jitter_model!r}")

    def as_dict(self) -> dict:
        return {
            "condition_tag": self.condition_tag,
            "noise_sigma": self.noise_sigma,
            "keypoint_jitter_model": self.keypoint_jitter_model,
            "dropout_rate": self.dropout_rate,
            "phase_offset": self.phase_offset,
        }


def default_conditions(
    count: int, noise_sigma: float = 0.0, dropout_rate: float = 0.0
) -> tuple[ConditionSpec, ...]:
    """Clothing x modality grid: clothesA-RGB, clothesA-IR, clothesB-RGB, ...

    Condition i starts the gait cycle at phase i*pi/4.
    """
    if count < 1:
        raise ValueError("need at least one condition")
    specs = []
    for i in range(count):
        clothes = chr(ord("A") + i // 2)
        modality = "RGB" if i % 2 == 0 else "IR"
        specs.append(
            ConditionSpec(
                condition_tag=f"clothes{clothes}-{modality}",
                noise_sigma=noise_sigma,
                dropout_rate=dropout_rate,
                phase_offset=i * math.pi / 4.0,
            )
        )
    return tuple(specs)


@dataclass(frozen=True, eq=False)
class IdentityModel:
    """Base skeleton plus per-joint oscillation; fully determined by its seed."""

    seed: int
    base: np.ndarray  # (12, 2), anchors exact
    amplitude: np.ndarray  # (12, 2), zero at anchors
    frequency: float  # cycles per frame
    phase: np.ndarray  # (12,) radians
    stride_period: int = field(init=False)

    def __post_init__(self):
        if self.frequency <= 0.0:
            raise ValueError("frequency must be positive")
        if not (np.isfinite(self.base).all() and np.isfinite(self.amplitude).all()):
            raise ValueError("model parameters must be finite")
        if np.any(self.amplitude < 0.0):
            raise ValueError("amplitudes must be non-negative")
        if np.any(self.amplitude[list(ANCHOR_JOINTS)] != 0.0):
            raise ValueError("anchor joints must not oscillate")
        object.__setattr__(self, "stride_period", round(1.0 / self.frequency))

    @property
    def identity_label(self) -> str:
        return f"id{self.seed:06d}"


def generate_identity(seed: int) -> IdentityModel:
    """Draw an identity from its own RNG stream; same seed, same model."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    rng = np.random.default_rng(seed)
    s_w = rng.uniform(*SHOULDER_HALF_WIDTH_RANGE)
    h_w = rng.uniform(*HIP_HALF_WIDTH_RANGE)

    base = np.zeros((N_BODY_JOINTS, 2))
    base[0] = (s_w, -1.0)
    base[1] = (-s_w, -1.0)
    base[6] = (h_w, 0.0)
    base[7] = (-h_w, 0.0)
    base[2] = (s_w + 0.12, -0.50)
    base[3] = (-(s_w + 0.12), -0.50)
    base[4] = (s_w + 0.18, 0.00)
    base[5] = (-(s_w + 0.18), 0.00)
    base[8] = (h_w * 1.05, 0.95)
    base[9] = (-h_w * 1.05, 0.95)
    base[10] = (h_w * 1.15, 1.90)
    base[11] = (-h_w * 1.15, 1.90)

    # Identity signature: a random direction in the 16-dim moving-joint space,
    # pushed out to a fixed radius so two identities differ in every frame by
    # roughly sqrt(2) * radius regardless of their oscillation state.
    direction = rng.standard_normal(2 * len(MOVING_JOINTS))
    direction /= np.linalg.norm(direction)
    base[list(MOVING_JOINTS)] += SIGNATURE_RADIUS * direction.reshape(-1, 2)

    amplitude = np.zeros((N_BODY_JOINTS, 2))
    amplitude[list(MOVING_JOINTS)] = rng.uniform(
        *AMPLITUDE_RANGE, size=(len(MOVING_JOINTS), 2)
    )
    amplitude[[4, 5, 10, 11]] *= DISTAL_AMPLITUDE_GAIN

    frequency = rng.uniform(*FREQUENCY_RANGE)
    phase = np.zeros(N_BODY_JOINTS)
    for j in MOVING_JOINTS:
        phase[j] = _GAIT_PHASE[j] + rng.normal(0.0, 0.1)

    return IdentityModel(
        seed=seed, base=base, amplitude=amplitude, frequency=frequency, phase=phase
    )


def _tag_key(tag: str) -> int:
    return int.from_bytes(hashlib.blake2s(tag.encode(), digest_size=8).digest(), "big")


def render_sequence(model: IdentityModel, cond: ConditionSpec, length: int) -> PoseSequence:
    """Sample the oscillation model under a condition.

    Dropout marks moving joints invalid (coordinates zeroed); at least one
    observation per joint is kept so imputation always succeeds. The result
    passes all sequence invariants once imputed.
    """
    if length < 1:
        raise ValueError("length must be positive")
    t = np.arange(length, dtype=np.float64)
    theta = (
        2.0 * math.pi * model.frequency * t[:, None]
        + model.phase[None, :]
        + cond.phase_offset
    )
    pos = model.base[None, :, :] + model.amplitude[None, :, :] * np.sin(theta)[:, :, None]

    moving = list(MOVING_JOINTS)
    rng_jitter = np.random.default_rng([model.seed, _tag_key(cond.condition_tag), 1])
    unit = rng_jitter.standard_normal((length, len(moving), 2))
    pos[:, moving, :] += cond.noise_sigma * unit

    valid = np.ones((length, N_BODY_JOINTS), dtype=bool)
    if cond.dropout_rate > 0.0:
        rng_drop = np.random.default_rng([model.seed, _tag_key(cond.condition_tag), 2])
        dropped = rng_drop.random((length, len(moving))) < cond.dropout_rate
        dropped[0, dropped.all(axis=0)] = False
        valid[:, moving] = ~dropped
        pos[~valid] = 0.0

    frames = tuple(
        KeypointFrame(joints=pos[i], valid_mask=valid[i], frame_index=i)
        for i in range(length)
    )
    return PoseSequence(
        id=model.identity_label,
        camera_tag="cam-ir" if cond.condition_tag.endswith("-IR") else "cam-rgb",
        frames=frames,
        frame_rate=min(25, length),
        condition_tag=cond.condition_tag,
    )


def _noise_free(cond: ConditionSpec) -> ConditionSpec:
    return replace(cond, noise_sigma=0.0, dropout_rate=0.0)


def sequence_to_record(seq: PoseSequence) -> dict:
    """De-normalize to the raw 17-joint JSONL record format.

    Body joints are scaled and centered; head joints are synthesized from a
    fixed template since normalization discards them. Dropped joints sit at
    the image center with confidence 0.
    """
    frames = []
    for f in seq.frames:
        raw = []
        for hx, hy in _HEAD_TEMPLATE:
            raw.append(
                [
                    hx * EXPORT_SCALE + EXPORT_CENTER[0],
                    hy * EXPORT_SCALE + EXPORT_CENTER[1],
                    1.0,
                ]
            )
        for j in range(N_BODY_JOINTS):
            if f.valid_mask[j]:
                raw.append(
                    [
                        float(f.joints[j, 0]) * EXPORT_SCALE + EXPORT_CENTER[0],
                        float(f.joints[j, 1]) * EXPORT_SCALE + EXPORT_CENTER[1],
                        1.0,
                    ]
                )
            else:
                raw.append([EXPORT_CENTER[0], EXPORT_CENTER[1], 0.0])
        frames.append(raw)
    return {
        "id": seq.id,
        "camera_tag": seq.camera_tag,
        "condition_tag": seq.condition_tag,
        "frame_rate": seq.frame_rate,
        "frames": frames,
    }


@dataclass(frozen=True)
class BenchmarkResult:
    sequences: tuple[PoseSequence, ...]  # imputed, identity-major order
    manifest: dict
    dataset_path: Path | None
    manifest_path: Path | None


def _pairwise_margins(models, conditions, length):
    canon = [
        render_sequence(m, _noise_free(conditions[0]), length).as_array()
        for m in models
    ]
    intra = []
    per_identity_max = []
    for m in models:
        arrs = [
            render_sequence(m, _noise_free(c), length).as_array() for c in conditions
        ]
        dists = [
            dtw_distance(a, b, _MARGIN_INTRA_CFG, return_path=False).distance
            for i, a in enumerate(arrs)
            for b in arrs[i + 1 :]
        ]
        intra.extend(dists)
        per_identity_max.append(max(dists))
    inter = np.full((len(models), len(models)), np.inf)
    for i in range(len(models)):
        for j in range(i + 1, len(models)):
            inter[i, j] = dtw_distance(
                canon[i], canon[j], _MARGIN_INTER_CFG, return_path=False
            ).distance
    return float(np.mean(intra)), float(np.max(intra)), per_identity_max, inter


def build_benchmark(
    n_identities: int,
    conditions,
    length: int,
    seed: int = 0,
    noise_sigma: float = 0.0,
    dropout_rate: float = 0.0,
    out_dir=None,
) -> BenchmarkResult:
    """Generate, margin-check, and optionally write a benchmark dataset.

    conditions may be a count (expanded via default_conditions with the given
    sigma and dropout) or an explicit sequence of ConditionSpec. Identity
    seeds start at seed+1, seed+2, ... and are re-salted individually until
    min inter-identity DTW >= delta_sep > max intra-identity DTW, with
    delta_sep = 5x the mean noise-free intra distance. Building twice with
    the same arguments yields byte-identical files.
    """
    if n_identities < 2:
        raise ValueError("need at least 2 identities")
    if isinstance(conditions, int):
        conditions = default_conditions(conditions, noise_sigma, dropout_rate)
    else:
        conditions = tuple(conditions)
    if len(conditions) < 2:
        raise ValueError("need at least 2 conditions")
    tags = [c.condition_tag for c in conditions]
    if len(set(tags)) != len(tags):
        raise ValueError("condition tags must be unique")

    seeds = [seed + i + 1 for i in range(n_identities)]
    attempts = 0
    while True:
        models = [generate_identity(s) for s in seeds]
        mean_intra, max_intra, per_identity_max, inter = _pairwise_margins(
            models, conditions, length
        )
        delta_sep = MARGIN_FACTOR * mean_intra
        min_inter = float(inter.min())
        if min_inter >= delta_sep > max_intra:
            break
        attempts += 1
        if attempts > MAX_MARGIN_ATTEMPTS:
            raise RuntimeError(
                f"separation margin not reached after {attempts} resamples"
            )
        if delta_sep <= max_intra:
            offender = int(np.argmax(per_identity_max))
        else:
            offender = int(np.unravel_index(np.argmin(inter), inter.shape)[1])
        while True:
            seeds[offender] += _SALT_STEP
            if seeds[offender] not in seeds[:offender] + seeds[offender + 1 :]:
                break

    sequences = []
    records = []
    for model in models:
        for cond in conditions:
            rendered = render_sequence(model, cond, length)
            records.append(sequence_to_record(rendered))
            sequences.append(impute_sequence(rendered))

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "kind": "synthetic-benchmark",
        "seed": seed,
        "identity_seeds": seeds,
        "n_identities": n_identities,
        "conditions": [c.as_dict() for c in conditions],
        "length": length,
        "frame_rate": min(25, length),
        "sequence_count": len(sequences),
        "delta_sep": delta_sep,
        "margin": {
            "mean_intra": mean_intra,
            "max_intra": max_intra,
            "min_inter": min_inter,
            "factor": MARGIN_FACTOR,
            "resamples": attempts,
        },
    }

    dataset_path = manifest_path = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        dataset_path = out / "dataset.jsonl"
        manifest_path = out / "manifest.json"
        with open(dataset_path, "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec, allow_nan=False))
                fh.write("\n")
        manifest["dataset"] = dataset_path.name
        with open(manifest_path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    return BenchmarkResult(
        sequences=tuple(sequences),
        manifest=manifest,
        dataset_path=dataset_path,
        manifest_path=manifest_path,
    )
