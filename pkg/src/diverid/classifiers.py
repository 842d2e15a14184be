"""Identification heads and the ten-variant model grid.

Three head types sit behind an optional frozen embedding network:

* k-nearest-neighbour with Euclidean distance (k = 5),
* one-vs-rest linear SVMs trained with a seeded hinge-loss SGD,
* a two-layer softmax network (only ever used on 16-d embeddings).

Variant names follow the All_/Diver_ x head naming used throughout the
project (All_KNN, Diver_NN_SVM, ...). Heads with the plain nn softmax
cannot be trained online; everything else can.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import json

import numpy as np

from . import nnops
from .embedding import EmbedNet, embed, param_hash
from .errors import DataFormatError, InvalidVariantError

_BUNDLE_MARKER = "diverid-model-v1"


# -- variant grid -----------------------------------------------------------


@dataclass(frozen=True)
class ModelVariant:
    """One cell of the model grid."""

    dataset_kind: str  # "all_class" or "diver"
    uses_embedding: bool
    head: str  # "knn", "svm" or "nn"

    def __post_init__(self):
        if self.dataset_kind not in ("all_class", "diver"):
            raise InvalidVariantError(f"unknown dataset kind {self.dataset_kind!r}")
        if self.head not in ("knn", "svm", "nn"):
            raise InvalidVariantError(f"unknown head {self.head!r}")
        if self.head == "nn" and not self.uses_embedding:
            raise InvalidVariantError("the softmax nn head requires the embedding")

    @property
    def name(self) -> str:
        prefix = "All" if self.dataset_kind == "all_class" else "Diver"
        if self.uses_embedding:
            return f"{prefix}_NN" if self.head == "nn" else f"{prefix}_NN_{self.head.upper()}"
        return f"{prefix}_{self.head.upper()}"

    @property
    def online_capable(self) -> bool:
        return self.head != "nn"


def _grid():
    out = {}
    for kind in ("all_class", "diver"):
        for head in ("knn", "svm"):
            v = ModelVariant(kind, False, head)
            out[v.name] = v
        for head in ("knn", "svm", "nn"):
            v = ModelVariant(kind, True, head)
            out[v.name] = v
    return out


VARIANTS = _grid()
VARIANT_NAMES = tuple(VARIANTS)  # 10 names


def parse_variant(name: str) -> ModelVariant:
    try:
        return VARIANTS[name]
    except KeyError:
        valid = ", ".join(VARIANT_NAMES)
        raise InvalidVariantError(f"unknown variant {name!r}; valid names: {valid}")


# -- KNN ---------------------------------------------------------------------


class KnnModel:
    """Exact k-nearest-neighbour, Euclidean by default.

    Neighbour order is (distance, insertion index); a vote tie picks the
    lowest label id.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray, k: int = 5,
                 metric: str = "euclidean"):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if x.ndim != 2 or y.shape != (x.shape[0],):
            raise ValueError("x must be 2-D with one label per row")
        if not 1 <= k <= x.shape[0]:
            raise ValueError(f"k={k} must be in [1, {x.shape[0]}]")
        if metric not in ("euclidean", "cosine"):
            raise ValueError(f"unknown metric {metric!r}")
        if np.any(y < 0):
            raise ValueError("labels must be nonnegative integers")
        self.x = x
        self.y = y
        self.k = int(k)
        self.metric = metric

    def _distances(self, q: np.ndarray) -> np.ndarray:
        if self.metric == "euclidean":
            diff = self.x - q
            return np.einsum("ij,ij->i", diff, diff)
        from .embedding import cosine_distance_matrix

        return cosine_distance_matrix(q[None, :], self.x)[0]

    def predict_one(self, q: np.ndarray) -> int:
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (self.x.shape[1],):
            raise ValueError(f"query dimension {q.shape} != {self.x.shape[1]}")
        d = self._distances(q)
        order = np.lexsort((np.arange(d.size), d))
        votes = np.bincount(self.y[order[: self.k]])
        return int(votes.argmax())

    def predict(self, q: np.ndarray) -> np.ndarray:
        q = np.atleast_2d(np.asarray(q, dtype=np.float64))
        return np.array([self.predict_one(row) for row in q], dtype=np.int64)


def knn_fit(x: np.ndarray, y: np.ndarray, k: int = 5,
            metric: str = "euclidean") -> KnnModel:
    return KnnModel(x, y, k=k, metric=metric)


# -- linear SVM ---------------------------------------------------------------


@dataclass(frozen=True)
class SvmConfig:
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 0.05
    reg: float = 1e-4
    seed: int = 0


class SvmModel:
    """One-vs-rest linear hinge classifiers on standardized inputs."""

    def __init__(self, w: np.ndarray, b: np.ndarray, classes: np.ndarray,
                 mu: np.ndarray, sigma: np.ndarray):
        self.w = w  # (n_classes, D)
        self.b = b  # (n_classes,)
        self.classes = classes  # sorted label ids
        self.mu = mu
        self.sigma = sigma

    def scores(self, q: np.ndarray) -> np.ndarray:
        q = np.atleast_2d(np.asarray(q, dtype=np.float64))
        z = (q - self.mu) / self.sigma
        return z @ self.w.T + self.b

    def predict(self, q: np.ndarray) -> np.ndarray:
        s = self.scores(q)
        # argmax returns the first maximum; classes are sorted, so ties
        # resolve to the lowest label id
        return self.classes[np.argmax(s, axis=1)]

    def predict_one(self, q: np.ndarray) -> int:
        return int(self.predict(q)[0])


def svm_fit(x: np.ndarray, y: np.ndarray, cfg: SvmConfig = SvmConfig()) -> SvmModel:
    """Seeded minibatch subgradient descent on the hinge loss."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("SVM training needs at least 2 classes")
    mu = x.mean(axis=0)
    sigma = x.std(axis=0)
    sigma = np.where(sigma < 1e-12, 1.0, sigma)
    z = (x - mu) / sigma
    n, d = z.shape
    w = np.zeros((classes.size, d))
    b = np.zeros(classes.size)
    targets = np.where(y[:, None] == classes[None, :], 1.0, -1.0)  # (n, C)
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            zb = z[idx]
            tb = targets[idx]
            margins = zb @ w.T + b  # (B, C)
            viol = (tb * margins < 1.0).astype(np.float64)
            coeff = viol * tb / idx.size  # (B, C)
            grad_w = -(coeff.T @ zb) + cfg.reg * w
            grad_b = -coeff.sum(axis=0)
            w -= cfg.learning_rate * grad_w
            b -= cfg.learning_rate * grad_b
    return SvmModel(w, b, classes, mu, sigma)


# -- softmax head --------------------------------------------------------------


@dataclass(frozen=True)
class SoftmaxConfig:
    hidden: int = 64
    epochs: int = 300
    batch_size: int = 128
    learning_rate: float = 0.05
    slope: float = 0.01
    seed: int = 0


class SoftmaxHead:
    """Linear(D, hidden) + leaky ReLU + Linear(hidden, C) with softmax."""

    def __init__(self, w1, b1, w2, b2, classes, slope: float = 0.01):
        self.w1, self.b1, self.w2, self.b2 = w1, b1, w2, b2
        self.classes = classes
        self.slope = slope

    def logits(self, q: np.ndarray) -> np.ndarray:
        q = np.atleast_2d(np.asarray(q, dtype=np.float64))
        if q.shape[1] != self.w1.shape[0]:
            raise ValueError(
                f"input width {q.shape[1]} != expected {self.w1.shape[0]}")
        h, _ = nnops.linear_forward(q, self.w1, self.b1)
        h, _ = nnops.leaky_relu_forward(h, self.slope)
        out, _ = nnops.linear_forward(h, self.w2, self.b2)
        return out

    def probabilities(self, q: np.ndarray) -> np.ndarray:
        return nnops.softmax(self.logits(q))

    def predict(self, q: np.ndarray) -> np.ndarray:
        p = self.probabilities(q)
        return self.classes[np.argmax(p, axis=1)]

    def predict_one(self, q: np.ndarray):
        p = self.probabilities(q)[0]
        return int(self.classes[int(np.argmax(p))]), p


def softmax_fit(x: np.ndarray, y: np.ndarray,
                cfg: SoftmaxConfig = SoftmaxConfig()) -> SoftmaxHead:
    """Cross-entropy SGD on a fixed two-layer net."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("softmax training needs at least 2 classes")
    class_index = {c: i for i, c in enumerate(classes)}
    t = np.array([class_index[c] for c in y], dtype=np.int64)
    n, d = x.shape
    rng = np.random.default_rng(cfg.seed)
    w1, b1 = nnops.init_linear(rng, d, cfg.hidden)
    w2, b2 = nnops.init_linear(rng, cfg.hidden, classes.size)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, tb = x[idx], t[idx]
            h1, c1 = nnops.linear_forward(xb, w1, b1)
            a1, cr = nnops.leaky_relu_forward(h1, cfg.slope)
            logits, c2 = nnops.linear_forward(a1, w2, b2)
            _, dlogits = nnops.cross_entropy_loss(logits, tb)
            da1, dw2, db2 = nnops.linear_backward(dlogits, c2, w2)
            dh1 = nnops.leaky_relu_backward(da1, cr, cfg.slope)
            _, dw1, db1 = nnops.linear_backward(dh1, c1, w1)
            w1 -= cfg.learning_rate * dw1
            b1 -= cfg.learning_rate * db1
            w2 -= cfg.learning_rate * dw2
            b2 -= cfg.learning_rate * db2
    return SoftmaxHead(w1, b1, w2, b2, classes, cfg.slope)


# -- assembled identification model ---------------------------------------------


@dataclass
class IdentModel:
    """A head plus the optional frozen embedding in front of it."""

    variant: ModelVariant
    head_model: object
    embed_net: EmbedNet | None = None
    embed_hash: str | None = None

    def _project(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if self.variant.uses_embedding:
            return embed(self.embed_net, features)
        return features

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(self.head_model.predict(self._project(features)),
                          dtype=np.int64)


@dataclass(frozen=True)
class HeadConfig:
    """Per-head hyperparameters used by build_variant."""

    knn_k: int = 5
    knn_metric: str = "euclidean"
    svm: SvmConfig = SvmConfig()
    softmax: SoftmaxConfig = SoftmaxConfig()

    def reseeded(self, seed: int) -> "HeadConfig":
        return HeadConfig(self.knn_k, self.knn_metric,
                          replace(self.svm, seed=seed),
                          replace(self.softmax, seed=seed))


def build_variant(variant: ModelVariant, features: np.ndarray, labels: np.ndarray,
                  pretrained_embed: EmbedNet | None = None,
                  cfg: HeadConfig = HeadConfig(),
                  online: bool = False) -> IdentModel:
    """Fit one grid cell on 45-d feature rows.

    Embedding variants map the rows through the frozen net first; the
    softmax nn head is rejected in online mode since it cannot be
    trained mid-mission.
    """
    if online and not variant.online_capable:
        raise InvalidVariantError(
            f"{variant.name} cannot be trained online (softmax head)")
    if variant.uses_embedding and pretrained_embed is None:
        raise InvalidVariantError(
            f"{variant.name} needs a pre-trained embedding network")
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if variant.uses_embedding:
        x = embed(pretrained_embed, x)
    if variant.head == "knn":
        head = knn_fit(x, y, k=cfg.knn_k, metric=cfg.knn_metric)
    elif variant.head == "svm":
        head = svm_fit(x, y, cfg.svm)
    else:
        head = softmax_fit(x, y, cfg.softmax)
    digest = param_hash(pretrained_embed) if variant.uses_embedding else None
    return IdentModel(variant, head, pretrained_embed, digest)


@dataclass
class IdentifyResult:
    label: int
    votes: dict
    per_frame: np.ndarray


def identify(model: IdentModel, features: np.ndarray) -> IdentifyResult:
    """Majority vote over per-frame predictions; ties pick the lowest id."""
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[0] < 1:
        raise ValueError("identify needs at least one feature row")
    preds = model.predict(features)
    counts = np.bincount(preds)
    label = int(counts.argmax())
    votes = {int(c): int(n) for c, n in enumerate(counts) if n > 0}
    return IdentifyResult(label, votes, preds)


# -- bundle persistence -----------------------------------------------------------


def save_bundle(model: IdentModel, path) -> None:
    """Write variant descriptor + head parameters to an npz bundle.

    Embedding weights are not copied into the bundle; only the state
    hash of the net the model was built with is recorded.
    """
    meta = {
        "format": _BUNDLE_MARKER,
        "variant": {
            "dataset_kind": model.variant.dataset_kind,
            "uses_embedding": model.variant.uses_embedding,
            "head": model.variant.head,
        },
        "embed_sha256": model.embed_hash,
    }
    arrays = {}
    head = model.head_model
    if model.variant.head == "knn":
        meta["knn"] = {"k": head.k, "metric": head.metric}
        arrays["x"] = head.x
        arrays["y"] = head.y
    elif model.variant.head == "svm":
        arrays["w"] = head.w
        arrays["b"] = head.b
        arrays["classes"] = head.classes
        arrays["mu"] = head.mu
        arrays["sigma"] = head.sigma
    else:
        meta["nn"] = {"slope": head.slope}
        arrays["w1"] = head.w1
        arrays["b1"] = head.b1
        arrays["w2"] = head.w2
        arrays["b2"] = head.b2
        arrays["classes"] = head.classes
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_bundle(path, embed_net: EmbedNet | None = None) -> IdentModel:
    """Read a bundle; embedding variants verify the supplied net's hash."""
    try:
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
    except (OSError, ValueError) as exc:
        raise DataFormatError(f"cannot read model bundle {path}: {exc}") from exc
    if "meta" not in arrays:
        raise DataFormatError(f"{path}: missing meta block")
    try:
        meta = json.loads(bytes(arrays["meta"]).decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: unreadable meta block") from exc
    if meta.get("format") != _BUNDLE_MARKER:
        raise DataFormatError(f"{path}: not a model bundle")
    v = meta["variant"]
    variant = ModelVariant(v["dataset_kind"], bool(v["uses_embedding"]), v["head"])
    embed_hash = meta.get("embed_sha256")
    if variant.uses_embedding:
        if embed_net is None:
            raise DataFormatError(
                f"{path}: bundle needs its embedding network (hash {embed_hash})")
        if param_hash(embed_net) != embed_hash:
            raise DataFormatError(
                f"{path}: embedding network hash does not match the bundle")
    try:
        if variant.head == "knn":
            head = KnnModel(arrays["x"], arrays["y"], k=int(meta["knn"]["k"]),
                            metric=meta["knn"]["metric"])
        elif variant.head == "svm":
            head = SvmModel(arrays["w"], arrays["b"],
                            arrays["classes"].astype(np.int64),
                            arrays["mu"], arrays["sigma"])
        else:
            head = SoftmaxHead(arrays["w1"], arrays["b1"], arrays["w2"],
                               arrays["b2"], arrays["classes"].astype(np.int64),
                               slope=float(meta["nn"]["slope"]))
    except KeyError as exc:
        raise DataFormatError(f"{path}: bundle is missing arrays: {exc}") from exc
    return IdentModel(variant, head,
                      embed_net if variant.uses_embedding else None, embed_hash)
