"""Segment lengths and their ratio features.

A filtered frame yields 10 segment lengths (pixels). Dividing every
unordered pair gives 45 dimensionless ratios that do not change with
camera distance; those ratios are the classifier input.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegeneratePoseError
from .filtering import FilterConfig, filter_pose
from .types import AD_SEGMENTS, ADR_PAIRS, N_AD, N_ADR, PoseFrame, segment_length

# Segments shorter than this (pixels) mean the frame slipped past filtering.
EPSILON_LEN = 1e-6

_ADR_I = np.array([i for i, _ in ADR_PAIRS])
_ADR_J = np.array([j for _, j in ADR_PAIRS])


def compute_ad(frame: PoseFrame) -> np.ndarray:
    """The 10 Euclidean segment lengths of a frame, in AD1..AD10 order.

    Raises DegeneratePoseError if any segment is shorter than EPSILON_LEN;
    frames accepted by the filter cannot trigger this.
    """
    values = np.array(
        [segment_length(frame, a, b) for a, b in AD_SEGMENTS], dtype=np.float64
    )
    if np.any(values < EPSILON_LEN):
        bad = int(np.argmin(values))
        raise DegeneratePoseError(
            f"frame {frame.frame_id}: segment AD{bad + 1} has near-zero length "
            f"{values[bad]:.3g} px"
        )
    return values


def compute_adr(ad: np.ndarray) -> np.ndarray:
    """The 45 pairwise ratios AD_i / AD_j, (i, j) lexicographic with i < j."""
    ad = np.asarray(ad, dtype=np.float64)
    if ad.shape != (N_AD,):
        raise ValueError(f"expected {N_AD} segment lengths, got shape {ad.shape}")
    if not np.all(np.isfinite(ad)) or np.any(ad <= 0):
        raise ValueError("segment lengths must be finite and strictly positive")
    return ad[_ADR_I] / ad[_ADR_J]


def frame_adr(frame: PoseFrame) -> np.ndarray:
    """Ratio features of a single frame."""
    return compute_adr(compute_ad(frame))


def extract_batch(
    frames: Iterable[PoseFrame], cfg: FilterConfig = FilterConfig()
) -> tuple[np.ndarray, list[Optional[int]]]:
    """Filter a frame sequence and compute one ratio row per accepted frame.

    Returns an (F, 45) matrix plus the source labels of the accepted
    frames, in input order. Degenerate segments propagate as
    DegeneratePoseError tagged with the offending frame id.
    """
    rows: list[np.ndarray] = []
    labels: list[Optional[int]] = []
    for frame in frames:
        if not filter_pose(frame, cfg).accepted:
            continue
        rows.append(frame_adr(frame))
        labels.append(frame.source_label)
    if not rows:
        return np.empty((0, N_ADR), dtype=np.float64), []
    return np.vstack(rows), labels


def labeled_matrix(
    features: np.ndarray, labels: Sequence[Optional[int]]
) -> tuple[np.ndarray, np.ndarray]:
    """Drop unlabeled rows and return (features, int labels)."""
    mask = np.array([lab is not None for lab in labels], dtype=bool)
    y = np.array([lab for lab in labels if lab is not None], dtype=np.int64)
    return features[mask], y
