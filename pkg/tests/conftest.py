"""Shared fixtures: hand-built poses used across the test modules."""

import pytest

from diverid.types import Keypoint, PoseFrame


def build_frame(coords, frame_id=0, label=None):
    """PoseFrame from a {joint: (x, y)} dict, confidence 1."""
    joints = {name: Keypoint(float(x), float(y)) for name, (x, y) in coords.items()}
    return PoseFrame(joints=joints, frame_id=frame_id, source_label=label)


# A frontal skeleton that satisfies every plausibility condition:
#   shoulder width 40, hip width 40, upper arms 30, lower arms 25,
#   torso sides 60, thighs 50 (pixels). Verified by hand against each
#   condition: upper/lower = 1.2 and torso/shoulder = 1.5 both inside
#   [1.0, 1.6]; torso 60 < 2 * thigh 100; torso 60 > all arm segments.
CANONICAL_COORDS = {
    "left_shoulder": (100, 100),
    "right_shoulder": (140, 100),
    "left_elbow": (100, 130),
    "right_elbow": (140, 130),
    "left_wrist": (100, 155),
    "right_wrist": (140, 155),
    "left_hip": (100, 160),
    "right_hip": (140, 160),
    "left_knee": (100, 210),
    "right_knee": (140, 210),
}


@pytest.fixture
def canonical_frame():
    return build_frame(CANONICAL_COORDS)
