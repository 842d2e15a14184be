"""Text file formats for pose streams and feature matrices.

Pose stream (one frame per line, comma-separated, 42 fields):

    frame_id, label, name1,x1,y1,c1, ..., name10,x10,y10,c10

`label` is empty for unlabeled frames. Joints may appear in any order but
all ten must be present exactly once; readers reject anything else. Floats
are written with repr so parsing them back is bit-exact.

Feature matrix (space-separated):

    header line:  n_rows n_cols has_labels(0|1)
    data lines:   [label] v1 ... v45      (one per row)
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataFormatError
from .types import JOINT_NAMES, Keypoint, PoseFrame


def _fmt(x: float) -> str:
    return repr(float(x))


def pose_record(frame: PoseFrame) -> str:
    """Serialize one frame as a pose-stream line."""
    label = "" if frame.source_label is None else str(frame.source_label)
    fields = [str(frame.frame_id), label]
    for name in JOINT_NAMES:
        kp = frame.joints[name]
        fields += [name, _fmt(kp.x), _fmt(kp.y), _fmt(kp.confidence)]
    return ",".join(fields)


def parse_pose_record(line: str, lineno: int = 0) -> PoseFrame:
    fields = line.rstrip("\n").split(",")
    if len(fields) != 2 + 4 * len(JOINT_NAMES):
        raise DataFormatError(
            f"line {lineno}: expected {2 + 4 * len(JOINT_NAMES)} fields, got {len(fields)}"
        )
    try:
        frame_id = int(fields[0])
        label: Optional[int] = int(fields[1]) if fields[1] else None
        joints: dict[str, Keypoint] = {}
        for k in range(len(JOINT_NAMES)):
            name, xs, ys, cs = fields[2 + 4 * k : 6 + 4 * k]
            if name in joints:
                raise DataFormatError(f"line {lineno}: duplicate joint {name!r}")
            joints[name] = Keypoint(float(xs), float(ys), float(cs))
        return PoseFrame(joints=joints, frame_id=frame_id, source_label=label)
    except DataFormatError:
        raise
    except ValueError as exc:
        raise DataFormatError(f"line {lineno}: {exc}") from exc


def write_pose_stream(path: str | Path, frames: Iterable[PoseFrame]) -> None:
    with open(path, "w") as fh:
        for frame in frames:
            fh.write(pose_record(frame) + "\n")


def read_pose_stream(path: str | Path) -> list[PoseFrame]:
    frames = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                frames.append(parse_pose_record(line, lineno))
    return frames


def write_feature_matrix(
    path: str | Path,
    features: np.ndarray,
    labels: Optional[Sequence[Optional[int]]] = None,
) -> None:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {features.shape}")
    has_labels = labels is not None
    if has_labels and len(labels) != features.shape[0]:
        raise ValueError("labels length must match row count")
    with open(path, "w") as fh:
        fh.write(f"{features.shape[0]} {features.shape[1]} {int(has_labels)}\n")
        for r in range(features.shape[0]):
            row = " ".join(_fmt(v) for v in features[r])
            if has_labels:
                lab = labels[r]
                fh.write(("" if lab is None else str(lab)) + " " + row + "\n")
            else:
                fh.write(row + "\n")


def read_feature_matrix(
    path: str | Path,
) -> tuple[np.ndarray, Optional[list[Optional[int]]]]:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise DataFormatError("feature file: bad header")
        try:
            n_rows, n_cols, has_labels = int(header[0]), int(header[1]), int(header[2])
        except ValueError as exc:
            raise DataFormatError(f"feature file: bad header: {exc}") from exc
        features = np.empty((n_rows, n_cols), dtype=np.float64)
        labels: Optional[list[Optional[int]]] = [] if has_labels else None
        for r in range(n_rows):
            fields = fh.readline().split(" ")
            try:
                if has_labels:
                    if len(fields) != n_cols + 1:
                        raise DataFormatError(f"feature file row {r}: wrong field count")
                    labels.append(int(fields[0]) if fields[0] else None)
                    fields = fields[1:]
                elif len(fields) != n_cols:
                    raise DataFormatError(f"feature file row {r}: wrong field count")
                features[r] = [float(v) for v in fields]
            except ValueError as exc:
                raise DataFormatError(f"feature file row {r}: {exc}") from exc
    return features, labels
