"""Eight-state diver identification mission.

The robot sweeps for divers, approaches the nearest unexamined one,
collects F filtered feature rows, and identifies. Offline missions carry
pre-trained classifiers and a known target label; online missions first
sample every diver present, train the online-capable classifiers on the
stacked (F * X, 45) features with pseudo-labels in visit order, get a
target assigned, and then follow the offline logic.

The loop is a fixed-step synchronous simulation: every tick runs the
relative-position estimator first, then one state handler, then the
unicycle kinematics. All randomness comes from the scene's seeded
stream, so a mission log is a pure function of (scene, config, models).
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .classifiers import HeadConfig, IdentModel, build_variant, identify, parse_variant
from .embedding import EmbedNet
from .errors import IllegalTransitionError
from .features import frame_adr
from .filtering import FilterConfig, filter_pose
from .simworld import WorldScene, capture_frame, drp_update
from .types import N_ADR


class MissionState(Enum):
    INIT = "INIT"
    SEARCH = "SEARCH"
    APPROACH = "APPROACH"
    DATA_COLLECTION = "DATA_COLLECTION"
    ANGLE_YAW = "ANGLE_YAW"
    MODEL_TRAINING = "MODEL_TRAINING"
    IDENTIFICATION = "IDENTIFICATION"
    CONCLUSION = "CONCLUSION"


_EDGES = frozenset({
    (MissionState.INIT, MissionState.SEARCH),
    (MissionState.SEARCH, MissionState.APPROACH),
    (MissionState.APPROACH, MissionState.DATA_COLLECTION),
    (MissionState.APPROACH, MissionState.SEARCH),            # timeout
    (MissionState.DATA_COLLECTION, MissionState.IDENTIFICATION),
    (MissionState.DATA_COLLECTION, MissionState.ANGLE_YAW),  # online, more to sample
    (MissionState.DATA_COLLECTION, MissionState.MODEL_TRAINING),
    (MissionState.DATA_COLLECTION, MissionState.SEARCH),     # timeout
    (MissionState.MODEL_TRAINING, MissionState.INIT),
    (MissionState.IDENTIFICATION, MissionState.CONCLUSION),
    (MissionState.IDENTIFICATION, MissionState.ANGLE_YAW),
    (MissionState.ANGLE_YAW, MissionState.SEARCH),
})


def transitions() -> frozenset:
    """The legal (from, to) state pairs."""
    return _EDGES


class StateMachine:
    """Current state plus a transition log; rejects undeclared edges."""

    def __init__(self, initial: MissionState = MissionState.INIT):
        self.state = initial
        self.history = []  # (sim time, from, to)

    def to(self, new_state: MissionState, t: float) -> None:
        if (self.state, new_state) not in _EDGES:
            raise IllegalTransitionError(
                f"{self.state.value} -> {new_state.value} is not a legal edge")
        self.history.append((t, self.state, new_state))
        self.state = new_state


class PidController:
    """Clamped PID with integral anti-windup at the output limits."""

    def __init__(self, kp: float, ki: float = 0.0, kd: float = 0.0,
                 out_min: float = -math.inf, out_max: float = math.inf):
        if not out_min < out_max:
            raise ValueError(f"need out_min < out_max, got [{out_min}, {out_max}]")
        self.kp, self.ki, self.kd = kp, ki, kd
        self.out_min, self.out_max = out_min, out_max
        self.integral = 0.0
        self.prev_error = None

    def reset(self) -> None:
        self.integral = 0.0
        self.prev_error = None

    def step(self, error: float, dt: float) -> float:
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.integral += error * dt
        if self.ki > 0:
            bound = max(abs(self.out_min), abs(self.out_max))
            if math.isfinite(bound):
                lim = bound / self.ki
                self.integral = min(max(self.integral, -lim), lim)
        derivative = 0.0 if self.prev_error is None else (error - self.prev_error) / dt
        self.prev_error = error
        u = self.kp * error + self.ki * self.integral + self.kd * derivative
        return min(max(u, self.out_min), self.out_max)


@dataclass(frozen=True)
class MissionConfig:
    """Knobs of one mission episode."""

    mode: str = "offline"
    frames_per_identification: int = 50
    desired_distance: float = 2.0
    band_frac: float = 0.1
    n_divers_known: int | None = None
    target: int | None = None  # offline: real label; online: pseudo-label override
    yaw_rate: float = 0.4  # sweep speed, rad/s
    dt: float = 0.1
    state_timeout: float = 60.0
    global_timeout: float = 600.0
    identify_with: str = "All_NN_SVM"
    online_variants: tuple = ("All_KNN", "All_SVM", "All_NN_KNN", "All_NN_SVM")
    dist_gains: tuple = (0.8, 0.1, 0.05)
    dist_limits: tuple = (-0.4, 1.0)
    yaw_gains: tuple = (1.5, 0.0, 0.1)
    yaw_limits: tuple = (-0.8, 0.8)

    def __post_init__(self):
        if self.mode not in ("offline", "online"):
            raise ValueError(f"mode must be offline or online, got {self.mode!r}")
        if self.frames_per_identification < 1:
            raise ValueError("frames_per_identification must be >= 1")
        if self.desired_distance <= 0 or self.dt <= 0:
            raise ValueError("desired_distance and dt must be positive")
        for name in self.online_variants:
            if not parse_variant(name).online_capable:
                raise ValueError(f"{name} cannot be trained online")


@dataclass(frozen=True)
class TickRecord:
    t: float
    state: str
    drp_available: bool
    drp_distance: float
    drp_bearing: float
    drp_source: str
    v: float
    w: float
    x: float
    y: float
    yaw: float


@dataclass(frozen=True)
class IdentificationEvent:
    t: float
    diver_index: int
    true_label: int
    predicted_label: int
    target_label: int
    outcome: str  # TP / TN / FP / FN
    votes: dict


@dataclass
class MissionLog:
    mode: str
    seed: int
    target_label: int | None = None
    outcome: str = "timeout"  # success / wrong_diver / failure / timeout
    concluded_diver: int | None = None
    transition_log: list = field(default_factory=list)
    ticks: list = field(default_factory=list)
    events: list = field(default_factory=list)
    counts: dict = field(default_factory=lambda: {"TP": 0, "TN": 0, "FP": 0, "FN": 0})
    sim_time: float = 0.0
    state_sim_time: dict = field(default_factory=dict)
    training_matrix_shape: tuple | None = None
    # wall-clock numbers vary run to run, so they stay off the serialized form
    state_wall_time: dict = field(default_factory=dict)
    training_wall_time: float | None = None

    def accuracy(self) -> float | None:
        total = sum(self.counts.values())
        if total == 0:
            return None
        return (self.counts["TP"] + self.counts["TN"]) / total


def _classify_event(is_target_truth: bool, claimed: bool) -> str:
    if is_target_truth:
        return "TP" if claimed else "FN"
    return "FP" if claimed else "TN"


def run_mission(scene: WorldScene, cfg: MissionConfig = MissionConfig(),
                models: dict | None = None,
                embed_net: EmbedNet | None = None,
                head_cfg: HeadConfig = HeadConfig(),
                filter_cfg: FilterConfig = FilterConfig(),
                record_ticks: bool = True) -> MissionLog:
    """Run one episode to CONCLUSION, exhaustion or the global timeout.

    Offline mode needs `models` (name -> IdentModel, containing
    cfg.identify_with) and cfg.target. Online mode needs `embed_net`
    whenever an online variant uses the embedding; classifiers are fit
    inside MODEL_TRAINING.
    """
    n_known = cfg.n_divers_known if cfg.n_divers_known is not None else len(scene.divers)
    if n_known < 1 or n_known > len(scene.divers):
        raise ValueError(f"n_divers_known={n_known} out of range")
    if cfg.mode == "offline":
        if models is None or cfg.identify_with not in models:
            raise ValueError(f"offline mission needs models including "
                             f"{cfg.identify_with!r}")
        if cfg.target is None:
            raise ValueError("offline mission needs a target label")
        if not any(d.spec.label.id == cfg.target for d in scene.divers):
            raise ValueError(f"target {cfg.target} is not in the scene")
    else:
        if cfg.identify_with not in cfg.online_variants:
            raise ValueError(f"{cfg.identify_with!r} is not among the online variants")
        needs_embed = any(parse_variant(n).uses_embedding
                          for n in cfg.online_variants)
        if needs_embed and embed_net is None:
            raise ValueError("online mission needs the pre-trained embedding net")

    F = cfg.frames_per_identification
    log = MissionLog(mode=cfg.mode, seed=scene.seed, target_label=cfg.target)
    sm = StateMachine(MissionState.INIT)
    pid_v = PidController(*cfg.dist_gains,
                          out_min=cfg.dist_limits[0], out_max=cfg.dist_limits[1])
    pid_w = PidController(*cfg.yaw_gains,
                          out_min=cfg.yaw_limits[0], out_max=cfg.yaw_limits[1])

    locked: int | None = None
    last_bearing = 0.0
    buffer: list[np.ndarray] = []
    pending: np.ndarray | None = None
    visited: set[int] = set()
    sampled: list[int] = []
    blocks: dict[int, np.ndarray] = {}
    online_models: dict[str, IdentModel] | None = None
    trained = cfg.mode == "offline"
    target = cfg.target
    frame_counter = 0
    t = 0.0
    state_entry = 0.0
    done = False

    def goto(new_state: MissionState) -> None:
        nonlocal state_entry
        sm.to(new_state, t)
        state_entry = t

    def current_model() -> IdentModel:
        return (models if cfg.mode == "offline" else online_models)[cfg.identify_with]

    def truth_is_target(diver_idx: int) -> bool:
        if cfg.mode == "offline":
            return scene.divers[diver_idx].spec.label.id == target
        return sampled.index(diver_idx) == target

    def timed_out() -> bool:
        return t - state_entry >= cfg.state_timeout

    while t < cfg.global_timeout and not done:
        wall_start = time.perf_counter()
        state = sm.state
        drp = drp_update(scene, locked)
        v = w = 0.0

        if state == MissionState.INIT:
            buffer.clear()
            visited.clear()
            locked = None
            pending = None
            pid_v.reset()
            pid_w.reset()
            goto(MissionState.SEARCH)

        elif state == MissionState.SEARCH:
            w = cfg.yaw_rate
            excluded = visited if trained else set(sampled)
            if drp.available and drp.diver_index not in excluded:
                locked = drp.diver_index
                last_bearing = drp.bearing
                buffer.clear()
                pid_v.reset()
                pid_w.reset()
                goto(MissionState.APPROACH)

        elif state == MissionState.APPROACH:
            if drp.available:
                last_bearing = drp.bearing
                err = drp.distance - cfg.desired_distance
                v = pid_v.step(err, cfg.dt)
                w = pid_w.step(drp.bearing, cfg.dt)
                if abs(err) <= cfg.band_frac * cfg.desired_distance:
                    buffer.clear()
                    goto(MissionState.DATA_COLLECTION)
            else:
                w = math.copysign(cfg.yaw_rate, last_bearing)
            if sm.state == MissionState.APPROACH and timed_out():
                locked = None
                goto(MissionState.SEARCH)

        elif state == MissionState.DATA_COLLECTION:
            if drp.available:
                last_bearing = drp.bearing
                w = pid_w.step(drp.bearing, cfg.dt)
            if locked is not None and scene.visible(locked):
                frame = capture_frame(scene, locked, frame_counter)
                frame_counter += 1
                if filter_pose(frame, filter_cfg).accepted:
                    buffer.append(frame_adr(frame))
            if len(buffer) >= F:
                feats = np.vstack(buffer[:F])
                buffer.clear()
                if trained:
                    pending = feats
                    goto(MissionState.IDENTIFICATION)
                else:
                    blocks[locked] = feats
                    sampled.append(locked)
                    if len(sampled) >= n_known:
                        goto(MissionState.MODEL_TRAINING)
                    else:
                        goto(MissionState.ANGLE_YAW)
            elif timed_out():
                buffer.clear()
                locked = None
                goto(MissionState.SEARCH)

        elif state == MissionState.ANGLE_YAW:
            w = cfg.yaw_rate
            if locked is None or not scene.visible(locked) or timed_out():
                locked = None
                goto(MissionState.SEARCH)

        elif state == MissionState.MODEL_TRAINING:
            t0 = time.perf_counter()
            x = np.vstack([blocks[d] for d in sampled])
            y = np.repeat(np.arange(len(sampled)), F)
            log.training_matrix_shape = x.shape
            assert x.shape == (F * len(sampled), N_ADR)
            online_models = {
                name: build_variant(parse_variant(name), x, y,
                                    pretrained_embed=embed_net,
                                    cfg=head_cfg, online=True)
                for name in cfg.online_variants
            }
            if target is None:
                target = int(scene.rng.integers(len(sampled)))
            log.training_wall_time = time.perf_counter() - t0
            log.target_label = target
            trained = True
            goto(MissionState.INIT)

        elif state == MissionState.IDENTIFICATION:
            res = identify(current_model(), pending)
            pending = None
            claimed = res.label == target
            is_target = truth_is_target(locked)
            outcome = _classify_event(is_target, claimed)
            log.counts[outcome] += 1
            true_label = (scene.divers[locked].spec.label.id
                          if cfg.mode == "offline" else sampled.index(locked))
            log.events.append(IdentificationEvent(
                t, locked, true_label, res.label, target, outcome, res.votes))
            visited.add(locked)
            if claimed:
                log.concluded_diver = locked
                log.outcome = "success" if is_target else "wrong_diver"
                goto(MissionState.CONCLUSION)
                done = True
            elif len(visited) >= n_known:
                # every diver checked, none matched: the failure terminal
                log.outcome = "failure"
                goto(MissionState.CONCLUSION)
                done = True
            else:
                goto(MissionState.ANGLE_YAW)

        scene.robot.advance(v, w, cfg.dt)
        if record_ticks:
            log.ticks.append(TickRecord(
                round(t, 6), state.value, drp.available, drp.distance,
                drp.bearing, drp.source, v, w,
                scene.robot.x, scene.robot.y, scene.robot.yaw))
        wall = time.perf_counter() - wall_start
        log.state_wall_time[state.value] = (
            log.state_wall_time.get(state.value, 0.0) + wall)
        log.state_sim_time[state.value] = (
            log.state_sim_time.get(state.value, 0.0) + cfg.dt)
        t = round(t + cfg.dt, 6)

    log.sim_time = t
    log.transition_log = [(tt, a.value, b.value) for tt, a, b in sm.history]
    return log


# -- log files ---------------------------------------------------------------


def write_mission_log(log: MissionLog, path, include_ticks: bool = True) -> None:
    """Line-delimited JSON: header, transitions, ticks, events, summary.

    Wall-clock timings are deliberately left out so identical seeds give
    byte-identical files.
    """
    lines = [json.dumps({
        "type": "header", "mode": log.mode, "seed": log.seed,
        "target": log.target_label}, sort_keys=True)]
    for tt, a, b in log.transition_log:
        lines.append(json.dumps(
            {"type": "transition", "t": tt, "from": a, "to": b}, sort_keys=True))
    if include_ticks:
        for tick in log.ticks:
            lines.append(json.dumps({
                "type": "tick", "t": tick.t, "state": tick.state,
                "drp": [tick.drp_available, tick.drp_distance, tick.drp_bearing,
                        tick.drp_source],
                "cmd": [tick.v, tick.w],
                "pose": [tick.x, tick.y, tick.yaw]}, sort_keys=True))
    for ev in log.events:
        lines.append(json.dumps({
            "type": "event", "t": ev.t, "diver": ev.diver_index,
            "true": ev.true_label, "pred": ev.predicted_label,
            "target": ev.target_label, "outcome": ev.outcome,
            "votes": {str(k): v for k, v in sorted(ev.votes.items())}},
            sort_keys=True))
    acc = log.accuracy()
    lines.append(json.dumps({
        "type": "summary", "outcome": log.outcome,
        "concluded_diver": log.concluded_diver, "counts": log.counts,
        "accuracy": acc, "sim_time": log.sim_time,
        "state_sim_time": log.state_sim_time,
        "training_matrix_shape": (list(log.training_matrix_shape)
                                  if log.training_matrix_shape else None)},
        sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


def read_mission_summary(path) -> dict:
    """The summary record of a mission log file."""
    last = Path(path).read_text().strip().splitlines()[-1]
    doc = json.loads(last)
    if doc.get("type") != "summary":
        raise ValueError(f"{path}: last record is not a summary")
    return doc
