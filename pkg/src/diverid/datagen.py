"""Seeded synthetic dataset generation.

Stands in for a captured keypoint corpus: sample a population of bodies
whose ratio signatures are provably separated, render labelled pose
frames of each at varying camera distances, and split the extracted
features for training. Every step is deterministic per seed; identities
get independent sub-streams so per-identity rendering order never
matters.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .body import (
    AnthropometrySpec,
    CameraModel,
    NoiseModel,
    lengths_plausible,
    project_pose,
    sample_lengths,
)
from .errors import DataFormatError, PopulationSamplingError
from .features import extract_batch, labeled_matrix
from .filtering import FilterConfig
from .types import IdentityLabel, PoseFrame

DEFAULT_DISTANCE_RANGE = (1.5, 4.0)
DELTA_MIN = 0.5  # least allowed distance between two identities' signatures

_MANIFEST_MARKER = "diverid-dataset-v1"


def sample_population(n_divers: int, n_swimmers: int, seed: int = 0,
                      delta_min: float = DELTA_MIN,
                      max_attempts: int = 1000) -> list:
    """Draw n_divers + n_swimmers bodies with separated ratio signatures.

    Divers take labels 0..n_divers-1, swimmers the following ids. Bodies
    are redrawn until they sit inside the filter bands and at least
    delta_min (Euclidean, in ratio space) from everyone already accepted.
    """
    if n_divers + n_swimmers < 1 or min(n_divers, n_swimmers) < 0:
        raise ValueError("population needs at least one identity")
    rng = np.random.default_rng(seed)
    specs = []
    signatures = []
    kinds = ["diver"] * n_divers + ["swimmer"] * n_swimmers
    for ident, kind in enumerate(kinds):
        for _ in range(max_attempts):
            lengths = sample_lengths(rng)
            if not lengths_plausible(lengths):
                continue
            spec = AnthropometrySpec(IdentityLabel(ident, kind), tuple(lengths))
            sig = spec.adr_signature()
            if all(np.linalg.norm(sig - s) >= delta_min for s in signatures):
                specs.append(spec)
                signatures.append(sig)
                break
        else:
            raise PopulationSamplingError(
                f"could not place identity {ident} after {max_attempts} draws "
                f"(delta_min={delta_min})")
    return specs


def render_identity(spec: AnthropometrySpec, n_frames: int,
                    rng: np.random.Generator,
                    distance_range=DEFAULT_DISTANCE_RANGE,
                    camera: CameraModel = CameraModel(),
                    noise: NoiseModel = NoiseModel(),
                    start_frame_id: int = 0) -> list:
    """Render n labelled frames of one body at uniform random distances."""
    lo, hi = distance_range
    if not 0 < lo <= hi:
        raise ValueError(f"bad distance range {distance_range}")
    frames = []
    for k in range(n_frames):
        d = rng.uniform(lo, hi)
        frames.append(project_pose(spec, d, camera=camera, noise=noise,
                                   rng=rng, frame_id=start_frame_id + k))
    return frames


def _identity_streams(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def render_dataset(population, frames_per_identity: int, out_dir,
                   distance_range=DEFAULT_DISTANCE_RANGE,
                   camera: CameraModel = CameraModel(),
                   noise: NoiseModel = NoiseModel(),
                   seed: int = 0) -> dict:
    """Write one pose-stream file per identity plus a manifest.

    Returns the manifest dictionary (also stored as manifest.json).
    """
    from .io import write_pose_stream

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    streams = _identity_streams(seed, len(population))
    entries = []
    for spec, rng in zip(population, streams):
        fname = f"poses_{spec.label.id}.csv"
        frames = render_identity(spec, frames_per_identity, rng,
                                 distance_range, camera, noise)
        write_pose_stream(out_dir / fname, frames)
        entries.append({
            "id": spec.label.id,
            "kind": spec.label.kind,
            "lengths": [repr(v) for v in spec.lengths],
            "file": fname,
        })
    manifest = {
        "format": _MANIFEST_MARKER,
        "seed": seed,
        "frames_per_identity": frames_per_identity,
        "distance_range": [repr(float(distance_range[0])),
                           repr(float(distance_range[1]))],
        "camera": {"focal_px": camera.focal_px, "cx": camera.cx, "cy": camera.cy},
        "noise": {"sigma_px": noise.sigma_px, "p_corrupt": noise.p_corrupt},
        "identities": entries,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def load_manifest(dataset_dir) -> dict:
    path = Path(dataset_dir) / "manifest.json"
    try:
        manifest = json.loads(path.read_text())
    except FileNotFoundError:
        raise DataFormatError(f"{path}: no manifest found")
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not valid JSON: {exc}") from exc
    if manifest.get("format") != _MANIFEST_MARKER:
        raise DataFormatError(f"{path}: unknown manifest format")
    return manifest


def population_from_manifest(manifest: dict) -> list:
    return [
        AnthropometrySpec(
            IdentityLabel(e["id"], e["kind"]),
            tuple(float(v) for v in e["lengths"]),
        )
        for e in manifest["identities"]
    ]


def kind_of_labels(population) -> dict:
    """Map identity id -> kind for dataset-view filtering."""
    return {spec.label.id: spec.label.kind for spec in population}


def select_kind(x: np.ndarray, y: np.ndarray, kinds: dict, which: str):
    """Rows whose label has the given kind ('diver' keeps the Diver view)."""
    mask = np.array([kinds[int(lab)] == which for lab in y], dtype=bool)
    return x[mask], y[mask]


def load_dataset_features(dataset_dir, filter_cfg: FilterConfig = FilterConfig()):
    """Read a rendered dataset and extract accepted, labelled feature rows.

    Returns (x, y, population).
    """
    from .io import read_pose_stream

    dataset_dir = Path(dataset_dir)
    manifest = load_manifest(dataset_dir)
    population = population_from_manifest(manifest)
    frames: list[PoseFrame] = []
    for entry in manifest["identities"]:
        frames.extend(read_pose_stream(dataset_dir / entry["file"]))
    feats, labels = extract_batch(frames, filter_cfg)
    x, y = labeled_matrix(feats, labels)
    return x, y, population


def make_feature_dataset(population, frames_per_identity: int, seed: int = 0,
                         distance_range=DEFAULT_DISTANCE_RANGE,
                         camera: CameraModel = CameraModel(),
                         noise: NoiseModel = NoiseModel(),
                         filter_cfg: FilterConfig = FilterConfig()):
    """In-memory pipeline: render, filter, extract. Returns (x, y)."""
    streams = _identity_streams(seed, len(population))
    blocks = []
    labels = []
    for spec, rng in zip(population, streams):
        frames = render_identity(spec, frames_per_identity, rng,
                                 distance_range, camera, noise)
        feats, labs = extract_batch(frames, filter_cfg)
        x, y = labeled_matrix(feats, labs)
        blocks.append(x)
        labels.append(y)
    return np.vstack(blocks), np.concatenate(labels)


def split(x: np.ndarray, y: np.ndarray, fraction: float, seed: int = 0):
    """Stratified split: per class, `fraction` of rows go to train.

    Returns (x_train, y_train, x_test, y_test); every class keeps at
    least one row on each side.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    x = np.asarray(x)
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    train_idx = []
    test_idx = []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if idx.size < 2:
            raise ValueError(f"class {cls} has {idx.size} sample(s); need >= 2")
        perm = idx[rng.permutation(idx.size)]
        n_train = min(max(int(round(idx.size * fraction)), 1), idx.size - 1)
        train_idx.append(perm[:n_train])
        test_idx.append(perm[n_train:])
    tr = np.concatenate(train_idx)
    te = np.concatenate(test_idx)
    return x[tr], y[tr], x[te], y[te]
