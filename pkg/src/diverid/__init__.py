"""Diver identification from pose-keypoint streams.

Pipeline: filter implausible skeletons, turn the survivors into 45
scale-free body-ratio features, embed them with a triplet-trained
network, classify with a small zoo of heads, and drive the whole thing
from an eight-state robot mission against a simulated multi-diver
scene.
"""

from .types import (
    AD_SEGMENTS,
    ADR_PAIRS,
    EMBED_DIM,
    JOINT_NAMES,
    N_AD,
    N_ADR,
    IdentityLabel,
    Keypoint,
    PoseFrame,
    pose_scale,
    segment_length,
)
from .filtering import CONDITION_IDS, FilterConfig, FilterReport, filter_pose, filter_stream
from .features import compute_ad, compute_adr, extract_batch, frame_adr
from .embedding import (
    EmbedNet,
    TrainConfig,
    cosine_distance,
    embed,
    load_embedding,
    param_hash,
    save_embedding,
    train_embedding,
    triplet_loss_batch,
)
from .classifiers import (
    VARIANT_NAMES,
    VARIANTS,
    IdentModel,
    KnnModel,
    ModelVariant,
    SoftmaxHead,
    SvmModel,
    build_variant,
    identify,
    knn_fit,
    load_bundle,
    parse_variant,
    save_bundle,
    softmax_fit,
    svm_fit,
)
from .body import AnthropometrySpec, CameraModel, NoiseModel, project_pose
from .datagen import make_feature_dataset, render_dataset, sample_population, split
from .simworld import (
    DrpEstimate,
    WorldScene,
    clone_scene,
    drp_update,
    generate_diver_frames,
    load_scene,
    make_scene,
    save_scene,
)
from .mission import (
    MissionConfig,
    MissionLog,
    MissionState,
    PidController,
    run_mission,
    transitions,
    write_mission_log,
)
from .reporting import (
    accuracy_vs_frames,
    classification_accuracy,
    cosine_silhouette,
    prediction_accuracy,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
