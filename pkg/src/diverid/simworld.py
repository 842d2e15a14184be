"""Planar multi-diver world for mission simulation.

World frame: x east, y north, angles counterclockwise from +x. Divers
hover at fixed positions; the robot is a unicycle (forward speed + yaw
rate). Range and bearing estimates come from the same weak-perspective
camera that renders pose frames: at close range the estimator inverts
the projected shoulder width, further out it falls back to the projected
body height, a stand-in for a bounding-box detector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .body import (
    AnthropometrySpec,
    CameraModel,
    NoiseModel,
    body_extent_m,
    project_pose,
)
from .errors import DataFormatError
from .types import IdentityLabel, PoseFrame

_SCENE_MARKER = "diverid-scene-v1"


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    return math.atan2(math.sin(a), math.cos(a))


@dataclass
class RobotPose:
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0

    def advance(self, v: float, yaw_rate: float, dt: float) -> None:
        self.x += v * math.cos(self.yaw) * dt
        self.y += v * math.sin(self.yaw) * dt
        self.yaw = wrap_angle(self.yaw + yaw_rate * dt)


@dataclass(frozen=True)
class DiverPlacement:
    spec: AnthropometrySpec
    x: float
    y: float


@dataclass
class WorldScene:
    """Divers + robot + sensing model; owns the episode's random stream."""

    divers: list
    robot: RobotPose = field(default_factory=RobotPose)
    fov_half: float = 0.35
    pose_range_m: float = 3.0
    max_range_m: float = 10.0
    camera: CameraModel = CameraModel()
    noise: NoiseModel = NoiseModel()
    seed: int = 0

    def __post_init__(self):
        ids = [d.spec.label.id for d in self.divers]
        if len(set(ids)) != len(ids):
            raise ValueError(f"diver identities must be distinct, got {ids}")
        for d in self.divers:
            if not (math.isfinite(d.x) and math.isfinite(d.y)):
                raise ValueError("diver placements must be finite")
        self.rng = np.random.default_rng(self.seed)

    def range_bearing(self, idx: int):
        """True range and robot-relative bearing of one diver."""
        d = self.divers[idx]
        dx = d.x - self.robot.x
        dy = d.y - self.robot.y
        rng_m = math.hypot(dx, dy)
        bearing = wrap_angle(math.atan2(dy, dx) - self.robot.yaw)
        return rng_m, bearing

    def visible(self, idx: int) -> bool:
        rng_m, bearing = self.range_bearing(idx)
        return rng_m <= self.max_range_m and abs(bearing) <= self.fov_half

    def visible_divers(self) -> list:
        """(index, range, bearing) of every diver in view, nearest first."""
        out = [(i, *self.range_bearing(i)) for i in range(len(self.divers))
               if self.visible(i)]
        out.sort(key=lambda t: (t[1], t[0]))
        return out


@dataclass(frozen=True)
class DrpEstimate:
    """Diver-relative position: sensed distance and bearing."""

    available: bool
    distance: float = 0.0
    bearing: float = 0.0
    source: str = "none"  # "pose", "bounding_box" or "none"
    diver_index: int = -1

    def __post_init__(self):
        if self.available and not (self.distance > 0 and math.isfinite(self.distance)):
            raise ValueError(f"available estimate needs positive distance, "
                             f"got {self.distance}")


def drp_update(scene: WorldScene, diver_index: int | None = None) -> DrpEstimate:
    """Estimate range and bearing of a diver in view.

    Follows the nearest visible diver unless an index is pinned. Within
    pose_range_m the distance inverts the projected shoulder width
    (known true width over observed pixels); beyond it the projected
    body height stands in for a bounding box. Pixel noise from the scene
    noise model perturbs the observed extent; at zero noise the
    inversion is exact.
    """
    if diver_index is None:
        vis = scene.visible_divers()
        if not vis:
            return DrpEstimate(False)
        idx, true_range, true_bearing = vis[0]
    else:
        if not scene.visible(diver_index):
            return DrpEstimate(False)
        idx = diver_index
        true_range, true_bearing = scene.range_bearing(idx)

    spec = scene.divers[idx].spec
    if true_range <= scene.pose_range_m:
        source = "pose"
        true_extent_m = spec.lengths[0]  # shoulder width
    else:
        source = "bounding_box"
        true_extent_m = body_extent_m(spec)
    observed_px = scene.camera.focal_px * true_extent_m / true_range
    if scene.noise.sigma_px > 0:
        # the extent is a difference of two noisy keypoint coordinates
        observed_px += scene.rng.normal(0.0, scene.noise.sigma_px * math.sqrt(2))
        observed_px = max(observed_px, 1.0)
    distance = scene.camera.focal_px * true_extent_m / observed_px
    bearing = true_bearing
    if scene.noise.sigma_px > 0:
        bearing += scene.rng.normal(
            0.0, scene.noise.sigma_px / scene.camera.focal_px)
    return DrpEstimate(True, distance, bearing, source, idx)


def capture_frame(scene: WorldScene, diver_index: int, frame_id: int) -> PoseFrame:
    """Render one unlabelled pose frame of a diver at its current range."""
    true_range, bearing = scene.range_bearing(diver_index)
    return project_pose(scene.divers[diver_index].spec, true_range,
                        camera=scene.camera, noise=scene.noise,
                        rng=scene.rng, frame_id=frame_id,
                        bearing=bearing, attach_label=False)


def generate_diver_frames(scene: WorldScene, diver_index: int, n: int,
                          start_frame_id: int = 0) -> list:
    """n consecutive pose frames of one visible diver."""
    if not scene.visible(diver_index):
        raise ValueError(f"diver {diver_index} is not in the field of view")
    return [capture_frame(scene, diver_index, start_frame_id + k)
            for k in range(n)]


def make_scene(population, diver_ids, seed: int = 0,
               radius_range=(4.0, 5.5), first_bearing: float = 0.45,
               separation: float = 1.25, fov_half: float = 0.35,
               noise: NoiseModel = NoiseModel(),
               camera: CameraModel = CameraModel()) -> WorldScene:
    """Arrange chosen identities on an arc in front of the robot.

    Divers sit at bearings first_bearing + k * separation (radii drawn
    from radius_range), far enough apart that at most one is ever inside
    the field of view. The robot starts at the origin facing +x.
    """
    if separation < 2.0 * fov_half:
        raise ValueError("diver separation must exceed the field of view")
    by_id = {spec.label.id: spec for spec in population}
    rng = np.random.default_rng(seed)
    placements = []
    for k, ident in enumerate(diver_ids):
        r = rng.uniform(*radius_range)
        a = first_bearing + k * separation
        placements.append(DiverPlacement(by_id[ident],
                                         r * math.cos(a), r * math.sin(a)))
    return WorldScene(placements, fov_half=fov_half, noise=noise,
                      camera=camera, seed=seed)


def clone_scene(template: WorldScene, seed: int) -> WorldScene:
    """A fresh scene sharing the template's placements, reseeded.

    The robot restarts from the template's current pose, so clone from a
    scene that has not been driven yet.
    """
    return WorldScene(
        divers=list(template.divers),
        robot=RobotPose(template.robot.x, template.robot.y, template.robot.yaw),
        fov_half=template.fov_half,
        pose_range_m=template.pose_range_m,
        max_range_m=template.max_range_m,
        camera=template.camera,
        noise=template.noise,
        seed=seed,
    )


# -- scene files -------------------------------------------------------------


def save_scene(scene: WorldScene, path) -> None:
    doc = {
        "format": _SCENE_MARKER,
        "seed": scene.seed,
        "fov_half": scene.fov_half,
        "pose_range_m": scene.pose_range_m,
        "max_range_m": scene.max_range_m,
        "camera": {"focal_px": scene.camera.focal_px,
                   "cx": scene.camera.cx, "cy": scene.camera.cy},
        "noise": {"sigma_px": scene.noise.sigma_px,
                  "p_corrupt": scene.noise.p_corrupt},
        "robot": {"x": scene.robot.x, "y": scene.robot.y, "yaw": scene.robot.yaw},
        "divers": [
            {
                "id": d.spec.label.id,
                "kind": d.spec.label.kind,
                "lengths": [repr(v) for v in d.spec.lengths],
                "x": d.x,
                "y": d.y,
            }
            for d in scene.divers
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_scene(path) -> WorldScene:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DataFormatError(f"{path}: scene file not found")
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not valid JSON: {exc}") from exc
    if doc.get("format") != _SCENE_MARKER:
        raise DataFormatError(f"{path}: unknown scene format")
    try:
        divers = [
            DiverPlacement(
                AnthropometrySpec(IdentityLabel(d["id"], d["kind"]),
                                  tuple(float(v) for v in d["lengths"])),
                float(d["x"]), float(d["y"]))
            for d in doc["divers"]
        ]
        cam = CameraModel(**doc["camera"])
        noise = NoiseModel(**doc["noise"])
        robot = RobotPose(**doc["robot"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: malformed scene: {exc}") from exc
    return WorldScene(divers, robot=robot, fov_half=doc["fov_half"],
                      pose_range_m=doc["pose_range_m"],
                      max_range_m=doc["max_range_m"],
                      camera=cam, noise=noise, seed=doc["seed"])
