"""JSONL dataset I/O.

Two record shapes share one file format, one JSON object per line:

raw (pose-estimator output):
    {"id": ..., "camera_tag": ..., "condition_tag": ..., "frame_rate": ...,
     "frames": [[[x, y, confidence] * 17] ...]}   joints in COCO-17 order

normalized (ingest output):
    {"normalized": true, "id": ..., "camera_tag": ..., "condition_tag": ...,
     "frame_rate": ..., "frame_indices": [...],
     "frames": [[[x, y] * 12] ...]}               body joints, imputed

The loader auto-detects the shape per line. A line that is not valid JSON
aborts the load (the stream framing is broken); a line that parses but cannot
become a valid sequence is skipped and logged with its line number, and
degenerate frames inside an otherwise good record are dropped individually.
Order of surviving sequences always matches file order.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, DegenerateFrame, EmptySequence, UnimputableJoint
from .keypoints import (
    DEFAULT_CONFIDENCE_FLOOR,
    KeypointFrame,
    N_BODY_JOINTS,
    N_RAW_JOINTS,
    PoseSequence,
    RawKeypointFrame,
    impute_sequence,
    normalize_frame,
)

log = logging.getLogger("gaitmatch.dataset")

_META_KEYS = ("id", "camera_tag", "condition_tag", "frame_rate")


@dataclass
class LoadReport:
    """Outcome of loading one JSONL file."""

    sequences: list[PoseSequence]
    skipped: list[tuple[int, str]]  # (line number, reason)
    frames_dropped: int

    @property
    def counts(self) -> dict:
        return {
            "sequences": len(self.sequences),
            "records_skipped": len(self.skipped),
            "frames_dropped": self.frames_dropped,
        }


def iter_jsonl(path):
    """Yield (line_number, object) pairs; blank lines are allowed."""
    try:
        with open(path) as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    yield line_no, json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataFormatError(f"{path}:{line_no}: invalid JSON: {exc}")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}")


def _check_meta(obj) -> dict:
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    for key in _META_KEYS:
        if key not in obj:
            raise ValueError(f"missing field {key!r}")
    if not isinstance(obj["frame_rate"], int):
        raise ValueError("frame_rate must be an integer")
    frames = obj.get("frames")
    if not isinstance(frames, list) or not frames:
        raise ValueError("frames must be a non-empty list")
    return obj


def raw_record_to_sequence(
    obj, confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR
) -> tuple[PoseSequence, int]:
    """Normalize one raw record; returns (sequence, degenerate frames dropped).

    Raises ValueError / DegenerateFrame / EmptySequence when the record as a
    whole cannot form a valid sequence.
    """
    obj = _check_meta(obj)
    kept = []
    dropped = 0
    for i, triples in enumerate(obj["frames"]):
        arr = np.asarray(triples, dtype=np.float64)
        if arr.shape != (N_RAW_JOINTS, 3):
            raise ValueError(f"frame {i}: expected {N_RAW_JOINTS} [x, y, confidence] joints")
        raw = RawKeypointFrame(joints=arr, frame_index=i)
        try:
            kept.append(normalize_frame(raw, confidence_floor))
        except DegenerateFrame:
            dropped += 1
    if not kept:
        raise EmptySequence("every frame is degenerate")
    seq = PoseSequence(
        id=str(obj["id"]),
        camera_tag=str(obj["camera_tag"]),
        frames=tuple(kept),
        frame_rate=obj["frame_rate"],
        condition_tag=str(obj["condition_tag"]),
    )
    return seq, dropped


def normalized_record_to_sequence(obj) -> PoseSequence:
    obj = _check_meta(obj)
    indices = obj.get("frame_indices")
    if indices is None:
        indices = list(range(len(obj["frames"])))
    if len(indices) != len(obj["frames"]):
        raise ValueError("frame_indices length does not match frames")
    frames = []
    for idx, coords in zip(indices, obj["frames"]):
        arr = np.asarray(coords, dtype=np.float64)
        if arr.shape != (N_BODY_JOINTS, 2):
            raise ValueError(f"frame {idx}: expected {N_BODY_JOINTS} [x, y] joints")
        frames.append(
            KeypointFrame(
                joints=arr,
                valid_mask=np.ones(N_BODY_JOINTS, dtype=bool),
                frame_index=int(idx),
            )
        )
    return PoseSequence(
        id=str(obj["id"]),
        camera_tag=str(obj["camera_tag"]),
        frames=tuple(frames),
        frame_rate=obj["frame_rate"],
        condition_tag=str(obj["condition_tag"]),
    )


def load_dataset(
    path,
    confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR,
    impute: bool = True,
) -> LoadReport:
    """Load a JSONL dataset of either record shape."""
    sequences = []
    skipped = []
    frames_dropped = 0
    for line_no, obj in iter_jsonl(path):
        try:
            if isinstance(obj, dict) and obj.get("normalized") is True:
                seq = normalized_record_to_sequence(obj)
            else:
                seq, dropped = raw_record_to_sequence(obj, confidence_floor)
                frames_dropped += dropped
            if impute:
                seq = impute_sequence(seq)
            sequences.append(seq)
        except (ValueError, DegenerateFrame, EmptySequence, UnimputableJoint) as exc:
            log.warning("%s:%d: skipping record: %s", path, line_no, exc)
            skipped.append((line_no, str(exc)))
    return LoadReport(sequences=sequences, skipped=skipped, frames_dropped=frames_dropped)


def sequence_to_normalized_record(seq: PoseSequence) -> dict:
    """Serialize a fully valid sequence; exact float round-trip via repr."""
    return {
        "normalized": True,
        "id": seq.id,
        "camera_tag": seq.camera_tag,
        "condition_tag": seq.condition_tag,
        "frame_rate": seq.frame_rate,
        "frame_indices": [f.frame_index for f in seq.frames],
        "frames": [[[float(x), float(y)] for x, y in f.joints] for f in seq.frames],
    }


def write_normalized(path, sequences) -> int:
    """Write sequences as normalized JSONL; returns the record count."""
    count = 0
    with open(path, "w") as fh:
        for seq in sequences:
            fh.write(json.dumps(sequence_to_normalized_record(seq), allow_nan=False))
            fh.write("\n")
            count += 1
    return count
