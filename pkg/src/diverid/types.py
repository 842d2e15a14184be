"""Core pose and feature types.

Coordinates follow the image convention: x grows to the right, y grows
downward, so a joint that sits lower on the body has a *larger* y.
Everything here is immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

# The ten body joints kept from a full 17-keypoint skeleton estimate.
JOINT_NAMES: tuple[str, ...] = (
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
)

# Body segments measured from the ten joints, indexed AD1..AD10:
#   AD1 shoulder width, AD2 hip width, AD3/AD4 left/right upper arm,
#   AD5/AD6 left/right lower arm, AD7/AD8 left/right torso side,
#   AD9/AD10 left/right thigh.
AD_SEGMENTS: tuple[tuple[str, str], ...] = (
    ("left_shoulder", "right_shoulder"),
    ("left_hip", "right_hip"),
    ("left_shoulder", "left_elbow"),
    ("right_shoulder", "right_elbow"),
    ("left_elbow", "left_wrist"),
    ("right_elbow", "right_wrist"),
    ("left_shoulder", "left_hip"),
    ("right_shoulder", "right_hip"),
    ("left_hip", "left_knee"),
    ("right_hip", "right_knee"),
)

# Ratio features use every unordered pair of distinct segments, in
# lexicographic order of (i, j) with i < j; the value is AD_i / AD_j.
# Pairs are 0-based here, so (0, 1) is AD1/AD2.
ADR_PAIRS: tuple[tuple[int, int], ...] = tuple(
    (i, j) for i in range(10) for j in range(i + 1, 10)
)

N_AD = 10
N_ADR = 45
EMBED_DIM = 16


@dataclass(frozen=True)
class Keypoint:
    """One 2D joint location in pixels, with detector confidence in [0, 1].

    Confidence is carried through the pipeline but not consulted by the
    filtering rules; it is kept for future thresholding.
    """

    x: float
    y: float
    confidence: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"keypoint coordinates must be finite, got ({self.x}, {self.y})")
        if not (math.isfinite(self.confidence) and 0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")

    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class PoseFrame:
    """The ten selected joints of one person in one image frame.

    `source_label` carries the ground-truth identity for training data and
    is None for frames captured during a mission.
    """

    joints: Mapping[str, Keypoint]
    frame_id: int = 0
    source_label: Optional[int] = None

    def __post_init__(self):
        names = set(self.joints)
        expected = set(JOINT_NAMES)
        if names != expected:
            missing = sorted(expected - names)
            extra = sorted(names - expected)
            raise ValueError(
                f"pose frame must contain exactly the 10 selected joints; "
                f"missing={missing} extra={extra}"
            )
        # Freeze the mapping so instances stay immutable.
        object.__setattr__(self, "joints", dict(self.joints))

    def __getitem__(self, name: str) -> Keypoint:
        return self.joints[name]

    def xy(self, name: str) -> np.ndarray:
        return self.joints[name].xy()


@dataclass(frozen=True)
class IdentityLabel:
    """A participant identity: small non-negative integer id plus kind."""

    id: int
    kind: str = "diver"  # "diver" or "swimmer"

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"identity id must be non-negative, got {self.id}")
        if self.kind not in ("diver", "swimmer"):
            raise ValueError(f"kind must be 'diver' or 'swimmer', got {self.kind!r}")


def pose_scale(frame: PoseFrame, s: float) -> PoseFrame:
    """Scale every joint coordinate by s about the image origin.

    Ratio features are invariant under this map, which is what makes them
    usable across camera distances. Confidence values are unchanged.
    """
    if not (math.isfinite(s) and s > 0):
        raise ValueError(f"scale factor must be finite and > 0, got {s}")
    scaled = {
        name: Keypoint(kp.x * s, kp.y * s, kp.confidence)
        for name, kp in frame.joints.items()
    }
    return PoseFrame(joints=scaled, frame_id=frame.frame_id, source_label=frame.source_label)


def segment_length(frame: PoseFrame, joint_a: str, joint_b: str) -> float:
    """Euclidean pixel distance between two joints."""
    a = frame.joints[joint_a]
    b = frame.joints[joint_b]
    return math.hypot(a.x - b.x, a.y - b.y)
