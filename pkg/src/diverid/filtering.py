"""Anthropometric plausibility filtering of pose estimates.

Eleven conditions reject implausible skeletons before features are
computed. Identifiers C1..C11 (image convention, larger y = lower):

  C1  both hips lie below both shoulders
  C2  both knees lie below both hips
  C3  hip width > hw_min
  C4  left and right hip-to-knee lengths are similar
  C5  left and right elbow-to-wrist lengths are similar
  C6  each upper arm is slightly longer than the same-side lower arm
  C7  knee-to-knee distance > k_th
  C8  each shoulder-to-hip length is slightly longer than the shoulder width
  C9  each shoulder-to-hip length is less than twice the same-side
      hip-to-knee length
  C10 shoulder width > sw_min
  C11 each shoulder-to-hip length exceeds every upper- and lower-arm length

"similar" means max/min <= similarity_band; "slightly longer" means the
ratio falls inside [slight_lower, slight_upper]. A zero-length denominator
in any ratio check counts as a violation of that condition rather than a
division fault. All conditions are evaluated (no short-circuit) so a report
lists every violation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .types import PoseFrame, segment_length

# Below this length a segment is treated as zero for ratio checks.
_EPS_LEN = 1e-9

CONDITION_IDS: tuple[str, ...] = tuple(f"C{i}" for i in range(1, 12))


@dataclass(frozen=True)
class FilterConfig:
    """Thresholds for the filtering conditions.

    The three pixel thresholds default to 10, the value used when building
    the reference dataset. The two band parameters bound the "similar" and
    "slightly longer" ratio checks and are configurable because no exact
    bounds were published.
    """

    hw_min: float = 10.0
    k_th: float = 10.0
    sw_min: float = 10.0
    similarity_band: float = 1.43
    slight_lower: float = 1.0
    slight_upper: float = 1.6

    def __post_init__(self):
        if min(self.hw_min, self.k_th, self.sw_min) <= 0:
            raise ValueError("hw_min, k_th and sw_min must be positive")
        if self.similarity_band < 1.0:
            raise ValueError(f"similarity_band must be >= 1, got {self.similarity_band}")
        if not (1.0 <= self.slight_lower < self.slight_upper):
            raise ValueError(
                f"need 1 <= slight_lower < slight_upper, got "
                f"({self.slight_lower}, {self.slight_upper})"
            )

    @classmethod
    def from_mapping(cls, cfg: Mapping[str, str]) -> "FilterConfig":
        """Build from `filter.*` keys of a parsed key=value config file."""
        defaults = cls()
        def get(key: str, fallback: float) -> float:
            raw = cfg.get(f"filter.{key}")
            return fallback if raw is None else float(raw)
        return cls(
            hw_min=get("hw_min", defaults.hw_min),
            k_th=get("k_th", defaults.k_th),
            sw_min=get("sw_min", defaults.sw_min),
            similarity_band=get("similarity_band", defaults.similarity_band),
            slight_lower=get("slight_lower", defaults.slight_lower),
            slight_upper=get("slight_upper", defaults.slight_upper),
        )


@dataclass(frozen=True)
class FilterReport:
    """Outcome of filtering one frame: accepted iff no condition violated."""

    accepted: bool
    violated: tuple[str, ...]

    def __post_init__(self):
        if self.accepted != (len(self.violated) == 0):
            raise ValueError("accepted flag must match emptiness of violated list")


def _similar(a: float, b: float, band: float) -> bool:
    lo, hi = min(a, b), max(a, b)
    if lo <= _EPS_LEN:
        return False
    return hi / lo <= band


def _slightly_longer(longer: float, shorter: float, cfg: FilterConfig) -> bool:
    if shorter <= _EPS_LEN:
        return False
    ratio = longer / shorter
    return cfg.slight_lower <= ratio <= cfg.slight_upper


def filter_pose(frame: PoseFrame, cfg: FilterConfig = FilterConfig()) -> FilterReport:
    """Evaluate all eleven conditions on one frame.

    Pure function: malformed geometry yields a rejection, never an
    exception.
    """
    j = frame.joints
    ls, rs = j["left_shoulder"], j["right_shoulder"]
    lh, rh = j["left_hip"], j["right_hip"]
    lk, rk = j["left_knee"], j["right_knee"]

    shoulder_width = segment_length(frame, "left_shoulder", "right_shoulder")
    hip_width = segment_length(frame, "left_hip", "right_hip")
    knee_dist = segment_length(frame, "left_knee", "right_knee")
    upper_l = segment_length(frame, "left_shoulder", "left_elbow")
    upper_r = segment_length(frame, "right_shoulder", "right_elbow")
    lower_l = segment_length(frame, "left_elbow", "left_wrist")
    lower_r = segment_length(frame, "right_elbow", "right_wrist")
    torso_l = segment_length(frame, "left_shoulder", "left_hip")
    torso_r = segment_length(frame, "right_shoulder", "right_hip")
    thigh_l = segment_length(frame, "left_hip", "left_knee")
    thigh_r = segment_length(frame, "right_hip", "right_knee")

    checks = {
        "C1": min(lh.y, rh.y) > max(ls.y, rs.y),
        "C2": min(lk.y, rk.y) > max(lh.y, rh.y),
        "C3": hip_width > cfg.hw_min,
        "C4": _similar(thigh_l, thigh_r, cfg.similarity_band),
        "C5": _similar(lower_l, lower_r, cfg.similarity_band),
        "C6": (_slightly_longer(upper_l, lower_l, cfg)
               and _slightly_longer(upper_r, lower_r, cfg)),
        "C7": knee_dist > cfg.k_th,
        "C8": (_slightly_longer(torso_l, shoulder_width, cfg)
               and _slightly_longer(torso_r, shoulder_width, cfg)),
        "C9": torso_l < 2.0 * thigh_l and torso_r < 2.0 * thigh_r,
        "C10": shoulder_width > cfg.sw_min,
        "C11": (min(torso_l, torso_r)
                > max(upper_l, upper_r, lower_l, lower_r)),
    }
    violated = tuple(cid for cid in CONDITION_IDS if not checks[cid])
    return FilterReport(accepted=not violated, violated=violated)


def filter_stream(
    frames: Iterable[PoseFrame], cfg: FilterConfig = FilterConfig()
) -> Iterator[PoseFrame]:
    """Yield exactly the frames that pass all conditions, order preserved."""
    for frame in frames:
        if filter_pose(frame, cfg).accepted:
            yield frame
