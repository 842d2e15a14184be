"""Synthetic bodies: anthropometry, skeleton geometry, camera projection.

A body is ten true segment lengths in meters. The skeleton builder places
the ten joints in a frontal body frame (x lateral, y downward) so that
every measured segment equals its drawn length exactly; a weak-perspective
pinhole camera then maps meters to pixels at a given distance, optionally
adding Gaussian keypoint noise and occasional structured corruption that
mimics pose-estimator failures (limb swaps, collapsed detections).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import compute_adr
from .types import IdentityLabel, Keypoint, PoseFrame

# Per-segment population statistics in meters (mean, standard deviation),
# loosely following published adult surface-anthropometry tables. Torso is
# drawn once per body; arms and thighs get an extra per-side asymmetry
# factor of 1 + N(0, ASYMMETRY_SD).
SEGMENT_STATS = {
    "shoulder_width": (0.39, 0.025),
    "hip_width": (0.33, 0.022),
    "upper_arm": (0.33, 0.020),
    "lower_arm": (0.26, 0.016),
    "torso_side": (0.52, 0.030),
    "thigh": (0.45, 0.028),
}
ASYMMETRY_SD = 0.015

# Bands the realized lengths must respect, with margin left for pixel
# noise, so rendered frames survive the plausibility filter:
#   upper/lower arm and torso/shoulder ratios inside the "slightly
#   longer" band, torso under twice the thigh, torso above every arm
#   segment, left/right pairs close.
_SLIGHT_LO, _SLIGHT_HI = 1.10, 1.50
_TORSO_THIGH_MAX = 1.75
_TORSO_ARM_MIN = 1.15
_PAIR_MAX = 1.25


@dataclass(frozen=True)
class AnthropometrySpec:
    """True segment lengths of one identity, in AD1..AD10 order (meters)."""

    label: IdentityLabel
    lengths: tuple

    def __post_init__(self):
        if len(self.lengths) != 10 or any(v <= 0 for v in self.lengths):
            raise ValueError("a body needs 10 positive segment lengths")

    def adr_signature(self) -> np.ndarray:
        """The 45 true ratios this identity projects to at any distance."""
        return compute_adr(np.asarray(self.lengths, dtype=np.float64))


def sample_lengths(rng: np.random.Generator) -> tuple:
    """Draw one body's ten segment lengths (AD1..AD10 order)."""
    def draw(name):
        mean, sd = SEGMENT_STATS[name]
        return rng.normal(mean, sd)

    def sided(base):
        return (base * (1.0 + rng.normal(0.0, ASYMMETRY_SD)),
                base * (1.0 + rng.normal(0.0, ASYMMETRY_SD)))

    sw = draw("shoulder_width")
    hw = draw("hip_width")
    upper_l, upper_r = sided(draw("upper_arm"))
    lower_l, lower_r = sided(draw("lower_arm"))
    torso = draw("torso_side")
    thigh_l, thigh_r = sided(draw("thigh"))
    return (sw, hw, upper_l, upper_r, lower_l, lower_r, torso, torso,
            thigh_l, thigh_r)


def lengths_plausible(lengths) -> bool:
    """True when the drawn lengths sit safely inside the filter bands.

    The skeleton builder additionally needs the torso longer than the
    half-width mismatch between shoulders and hips, checked last.
    """
    sw, hw, ul, ur, ll, lr, tl, tr, hl, hr = lengths
    if min(lengths) <= 0:
        return False
    pairs_ok = (max(hl, hr) / min(hl, hr) <= _PAIR_MAX
                and max(ll, lr) / min(ll, lr) <= _PAIR_MAX)
    slight_ok = all(_SLIGHT_LO <= a / b <= _SLIGHT_HI
                    for a, b in ((ul, ll), (ur, lr), (tl, sw), (tr, sw)))
    torso_ok = (max(tl, tr) <= _TORSO_THIGH_MAX * min(hl, hr)
                and min(tl, tr) >= _TORSO_ARM_MIN * max(ul, ur, ll, lr))
    drop_sq = min(tl, tr) ** 2 - (0.5 * (sw - hw)) ** 2
    return pairs_ok and slight_ok and torso_ok and drop_sq > 1e-6


def skeleton_points(spec: AnthropometrySpec) -> dict:
    """Joint positions in the body frame (meters, y grows downward).

    Shoulders sit on y = 0; hips hang level below them; elbows, wrists
    and knees drop vertically. Measuring any AD segment on the returned
    points reproduces spec.lengths exactly.
    """
    sw, hw, ul, ur, ll, lr, torso, _, hl, hr = spec.lengths
    drop_sq = torso ** 2 - (0.5 * (sw - hw)) ** 2
    if drop_sq <= 0:
        raise ValueError("torso too short to reach the hip line")
    h = math.sqrt(drop_sq)
    return {
        "left_shoulder": (-sw / 2, 0.0),
        "right_shoulder": (sw / 2, 0.0),
        "left_elbow": (-sw / 2, ul),
        "right_elbow": (sw / 2, ur),
        "left_wrist": (-sw / 2, ul + ll),
        "right_wrist": (sw / 2, ur + lr),
        "left_hip": (-hw / 2, h),
        "right_hip": (hw / 2, h),
        "left_knee": (-hw / 2, h + hl),
        "right_knee": (hw / 2, h + hr),
    }


@dataclass(frozen=True)
class CameraModel:
    """Weak-perspective pinhole camera: pixels = focal * meters / distance."""

    focal_px: float = 800.0
    cx: float = 320.0
    cy: float = 240.0

    def __post_init__(self):
        if not (self.focal_px > 0 and math.isfinite(self.focal_px)):
            raise ValueError(f"focal length must be positive, got {self.focal_px}")


@dataclass(frozen=True)
class NoiseModel:
    """Keypoint perturbations applied after projection.

    sigma_px is i.i.d. Gaussian noise per coordinate; with probability
    p_corrupt a frame gets one structured corruption drawn from `kinds`
    (None means all of CORRUPTION_KINDS).
    """

    sigma_px: float = 2.0
    p_corrupt: float = 0.1
    kinds: tuple = None

    def __post_init__(self):
        if self.sigma_px < 0 or not 0.0 <= self.p_corrupt <= 1.0:
            raise ValueError("sigma_px must be >= 0 and p_corrupt in [0, 1]")
        if self.kinds is not None:
            unknown = set(self.kinds) - set(CORRUPTION_KINDS)
            if unknown:
                raise ValueError(f"unknown corruption kinds: {sorted(unknown)}")


ZERO_NOISE = NoiseModel(sigma_px=0.0, p_corrupt=0.0)


def _corrupt_hips_above_shoulders(pts, rng):
    shift = max(p[1] for p in pts.values()) + 10.0
    for name in ("left_hip", "right_hip"):
        x, y = pts[name]
        pts[name] = (x, y - shift)


def _corrupt_knees_above_hips(pts, rng):
    hip_top = min(pts["left_hip"][1], pts["right_hip"][1])
    for name in ("left_knee", "right_knee"):
        x, _ = pts[name]
        pts[name] = (x, hip_top - 5.0)


def _corrupt_wrist_flyaway(pts, rng):
    # one wrist detection latches onto something far away, breaking the
    # left/right lower-arm agreement
    side = "left_wrist" if rng.random() < 0.5 else "right_wrist"
    x, y = pts[side]
    pts[side] = (x + 200.0, y + 150.0)


def _corrupt_collapsed_shoulders(pts, rng):
    mx = 0.5 * (pts["left_shoulder"][0] + pts["right_shoulder"][0])
    for name in ("left_shoulder", "right_shoulder"):
        _, y = pts[name]
        pts[name] = (mx + rng.uniform(-1.0, 1.0), y)


CORRUPTION_KINDS = {
    "hips_above_shoulders": _corrupt_hips_above_shoulders,
    "knees_above_hips": _corrupt_knees_above_hips,
    "wrist_flyaway": _corrupt_wrist_flyaway,
    "collapsed_shoulders": _corrupt_collapsed_shoulders,
}


def project_pose(spec: AnthropometrySpec, distance: float,
                 camera: CameraModel = CameraModel(),
                 noise: NoiseModel = ZERO_NOISE,
                 rng: np.random.Generator | None = None,
                 frame_id: int = 0,
                 bearing: float = 0.0,
                 attach_label: bool = True) -> PoseFrame:
    """Render one pose frame of a body seen at `distance` meters.

    `bearing` shifts the projection horizontally (radians off the optical
    axis). Noise requires an rng; zero-noise projection is deterministic.
    """
    if not (distance > 0 and math.isfinite(distance)):
        raise ValueError(f"distance must be positive, got {distance}")
    if rng is None and (noise.sigma_px > 0 or noise.p_corrupt > 0):
        raise ValueError("noisy projection needs an rng")
    scale = camera.focal_px / distance
    offset_x = camera.focal_px * math.tan(bearing)
    pts = {
        name: (scale * bx + camera.cx + offset_x, scale * by + camera.cy)
        for name, (bx, by) in skeleton_points(spec).items()
    }
    if noise.sigma_px > 0:
        for name, (x, y) in pts.items():
            pts[name] = (x + rng.normal(0.0, noise.sigma_px),
                         y + rng.normal(0.0, noise.sigma_px))
    if noise.p_corrupt > 0 and rng.random() < noise.p_corrupt:
        kinds = tuple(noise.kinds) if noise.kinds is not None else tuple(CORRUPTION_KINDS)
        kind = kinds[int(rng.integers(len(kinds)))]
        CORRUPTION_KINDS[kind](pts, rng)
    joints = {name: Keypoint(x, y) for name, (x, y) in pts.items()}
    label = spec.label.id if attach_label else None
    return PoseFrame(joints=joints, frame_id=frame_id, source_label=label)


def observed_shoulder_px(spec: AnthropometrySpec, distance: float,
                         camera: CameraModel = CameraModel()) -> float:
    """Noise-free projected shoulder width, the DRP pose-source input."""
    return camera.focal_px * spec.lengths[0] / distance


def body_extent_m(spec: AnthropometrySpec) -> float:
    """Shoulder-to-knee height of the body, the bounding-box proxy size."""
    pts = skeleton_points(spec)
    return max(p[1] for p in pts.values()) - min(p[1] for p in pts.values())
