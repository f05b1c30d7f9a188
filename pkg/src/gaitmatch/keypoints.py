"""Keypoint time-series types: normalization, imputation, frame distance.

Frames enter as COCO-17 pixel keypoints with per-joint confidences. The five
facial joints carry no gait information and are dropped; the remaining 12 body
joints are expressed in a body-centric frame: hip midpoint at the origin and
the shoulder-midpoint-to-hip-midpoint distance scaled to 1. Coordinates keep
the input axis orientation (image y grows downward, so the shoulder midpoint
lands at (0, -1)).

Low-confidence joints are masked and later filled by linear interpolation in
time; matching operates only on fully valid sequences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFrame, EmptySequence, UnimputableJoint

COCO_JOINT_NAMES = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)

# facial joints (nose, eyes, ears) are dropped during normalization
N_RAW_JOINTS = 17
N_BODY_JOINTS = 12
BODY_JOINT_NAMES = COCO_JOINT_NAMES[5:]

# indices into the 12-joint body set
LEFT_SHOULDER, RIGHT_SHOULDER = 0, 1
LEFT_HIP, RIGHT_HIP = 6, 7
ANCHOR_JOINTS = (LEFT_SHOULDER, RIGHT_SHOULDER, LEFT_HIP, RIGHT_HIP)

DEFAULT_CONFIDENCE_FLOOR = 0.3
DEFAULT_FRAME_RATE = 25

_NORMALIZED_ATOL = 1e-6


@dataclass(frozen=True)
class RawKeypointFrame:
    """One detector frame: 17 (x, y, confidence) triples in COCO order."""

    joints: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        joints = np.asarray(self.joints, dtype=float)
        if joints.shape != (N_RAW_JOINTS, 3):
            raise ValueError(f"expected ({N_RAW_JOINTS}, 3) joints, got {joints.shape}")
        if not np.isfinite(joints[:, :2]).all():
            raise ValueError("keypoint coordinates must be finite")
        conf = joints[:, 2]
        if not ((conf >= 0.0) & (conf <= 1.0)).all():
            raise ValueError("confidences must lie in [0, 1]")
        if self.frame_index < 0:
            raise ValueError("frame_index must be non-negative")
        object.__setattr__(self, "joints", joints)


@dataclass(frozen=True)
class KeypointFrame:
    """Normalized body frame: 12 (x, y) pairs plus a validity mask.

    Invariant: the hip midpoint sits at the origin and the shoulder-to-hip
    midpoint distance is 1 (checked to 1e-6; all construction paths in this
    package are exact to float rounding).
    """

    joints: np.ndarray
    valid_mask: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        joints = np.asarray(self.joints, dtype=float)
        mask = np.asarray(self.valid_mask, dtype=bool)
        if joints.shape != (N_BODY_JOINTS, 2):
            raise ValueError(f"expected ({N_BODY_JOINTS}, 2) joints, got {joints.shape}")
        if mask.shape != (N_BODY_JOINTS,):
            raise ValueError("valid_mask must have one flag per body joint")
        if not np.isfinite(joints).all():
            raise ValueError("normalized coordinates must be finite")
        hip_mid = (joints[LEFT_HIP] + joints[RIGHT_HIP]) / 2.0
        shoulder_mid = (joints[LEFT_SHOULDER] + joints[RIGHT_SHOULDER]) / 2.0
        torso = float(np.hypot(*(shoulder_mid - hip_mid)))
        if np.abs(hip_mid).max() > _NORMALIZED_ATOL or abs(torso - 1.0) > _NORMALIZED_ATOL:
            raise ValueError(
                "frame is not normalized: hip midpoint must be the origin and "
                "the torso length 1"
            )
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "valid_mask", mask)

    @property
    def fully_valid(self) -> bool:
        return bool(self.valid_mask.all())


@dataclass(frozen=True)
class PoseSequence:
    """A labeled sequence of normalized frames for one track.

    frame_rate is the capture rate C; the sequence must span at least one
    second (len(frames) >= frame_rate), and frame indices strictly increase.
    condition_tag names the capture condition (clothes/modality) used for
    query/gallery splits; camera_tag is auxiliary capture metadata.
    """

    id: str
    camera_tag: str
    frames: tuple[KeypointFrame, ...]
    frame_rate: int = DEFAULT_FRAME_RATE
    condition_tag: str = ""

    def __post_init__(self):
        frames = tuple(self.frames)
        if self.frame_rate < 1:
            raise ValueError("frame_rate must be a positive integer")
        if len(frames) < self.frame_rate:
            raise ValueError(
                f"sequence of {len(frames)} frames is shorter than one second "
                f"at frame_rate {self.frame_rate}"
            )
        indices = [f.frame_index for f in frames]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("frame indices must be strictly increasing")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def fully_valid(self) -> bool:
        return all(f.fully_valid for f in self.frames)

    def as_array(self) -> np.ndarray:
        """(t, 24) array of concatenated coordinates; requires full validity."""
        if not self.fully_valid:
            raise ValueError("sequence has masked joints; run impute_sequence first")
        return np.stack([f.joints.ravel() for f in self.frames])


def normalize_frame(
    raw: RawKeypointFrame, confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR
) -> KeypointFrame:
    """Drop facial joints and map the body into the hip-centered unit-torso frame.

    Joints below confidence_floor are masked. Raises DegenerateFrame when the
    torso length is zero or any of the four anchor joints (shoulders, hips) is
    itself below the floor, since the map is undefined without them.
    """
    if not 0.0 <= confidence_floor <= 1.0:
        raise ValueError("confidence_floor must lie in [0, 1]")
    conf = raw.joints[:, 2]
    # raw COCO indices: shoulders 5/6, hips 11/12
    if min(conf[5], conf[6], conf[11], conf[12]) < confidence_floor:
        raise DegenerateFrame(
            f"frame {raw.frame_index}: shoulder/hip anchor below confidence floor"
        )
    hip_mid = (raw.joints[11, :2] + raw.joints[12, :2]) / 2.0
    shoulder_mid = (raw.joints[5, :2] + raw.joints[6, :2]) / 2.0
    torso = float(np.linalg.norm(shoulder_mid - hip_mid))
    if torso == 0.0:
        raise DegenerateFrame(f"frame {raw.frame_index}: zero torso length")
    body = (raw.joints[5:, :2] - hip_mid) / torso
    mask = conf[5:] >= confidence_floor
    return KeypointFrame(joints=body, valid_mask=mask, frame_index=raw.frame_index)


def impute_sequence(seq: PoseSequence) -> PoseSequence:
    """Fill masked joints by linear interpolation between valid neighbors in time.

    Interpolation runs per joint per axis over frame_index, with constant
    extrapolation at the ends. Raises UnimputableJoint when a joint has no
    valid observation anywhere.
    """
    if seq.fully_valid:
        return seq
    t = len(seq)
    coords = np.stack([f.joints for f in seq.frames])  # (t, 12, 2)
    masks = np.stack([f.valid_mask for f in seq.frames])  # (t, 12)
    times = np.array([f.frame_index for f in seq.frames], dtype=float)
    for j in range(N_BODY_JOINTS):
        valid = masks[:, j]
        if valid.all():
            continue
        if not valid.any():
            raise UnimputableJoint(
                f"sequence {seq.id!r}: joint {BODY_JOINT_NAMES[j]!r} has no valid frame"
            )
        for axis in range(2):
            coords[~valid, j, axis] = np.interp(
                times[~valid], times[valid], coords[valid, j, axis]
            )
    frames = tuple(
        KeypointFrame(
            joints=coords[i],
            valid_mask=np.ones(N_BODY_JOINTS, dtype=bool),
            frame_index=seq.frames[i].frame_index,
        )
        for i in range(t)
    )
    return PoseSequence(
        id=seq.id,
        camera_tag=seq.camera_tag,
        frames=frames,
        frame_rate=seq.frame_rate,
        condition_tag=seq.condition_tag,
    )


def frame_distance(a: KeypointFrame, b: KeypointFrame) -> float:
    """Euclidean distance between the 24-dim concatenated coordinate vectors."""
    return float(np.linalg.norm((a.joints - b.joints).ravel()))


def norm_series(seq: PoseSequence) -> np.ndarray:
    """Per-frame Euclidean norms of the 24-dim coordinate vectors.

    This scalar reduction is what makes the four-feature lower bound sound for
    multivariate sequences: |norm(a) - norm(b)| <= frame_distance(a, b).
    """
    return norms_of(seq.as_array())


def norms_of(arr: np.ndarray) -> np.ndarray:
    """Row norms of a (t, dims) array; shared by tests and the gallery cache."""
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[0] == 0:
        raise EmptySequence("cannot take norms of an empty sequence")
    return np.sqrt(np.einsum("ij,ij->i", arr, arr))
