"""Metric-learning embedding network trained with a triplet loss.

The network maps 45-dimensional body-ratio vectors to 16-dimensional
embeddings. Architecture: three hidden blocks of linear / leaky-ReLU /
batch-norm (1024, 512, 256 units) followed by a plain linear output layer.
Distances between embeddings are cosine distances, 1 - cos(u, v).

Everything here is float64 numpy with hand-written backprop; the only
randomness flows through a single seeded Generator so that training is
bitwise reproducible.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, DegenerateEmbeddingError, TrainingDegenerateError
from . import nnops
from .types import EMBED_DIM, N_ADR

DEFAULT_DIMS = (N_ADR, 1024, 512, 256, EMBED_DIM)

_FORMAT_MARKER = "diverid-embed-v1"
_NORM_FLOOR = 1e-12


class EmbedNet:
    """Feed-forward embedding network with per-block batch norm.

    dims gives the layer widths including input and output; there are
    len(dims) - 1 linear layers and each non-final layer is followed by
    leaky ReLU then batch normalization.
    """

    def __init__(self, dims=DEFAULT_DIMS, seed: int = 0,
                 slope: float = 0.01, eps: float = 1e-5, momentum: float = 0.1):
        dims = tuple(int(d) for d in dims)
        if len(dims) < 2 or any(d <= 0 for d in dims):
            raise ValueError(f"bad layer widths: {dims}")
        self.dims = dims
        self.slope = float(slope)
        self.eps = float(eps)
        self.momentum = float(momentum)
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        self.gammas = []
        self.betas = []
        self.run_mean = []
        self.run_var = []
        for i in range(self.n_layers):
            w, b = nnops.init_linear(rng, dims[i], dims[i + 1])
            self.weights.append(w)
            self.biases.append(b)
            if i < self.n_layers - 1:
                width = dims[i + 1]
                self.gammas.append(np.ones(width))
                self.betas.append(np.zeros(width))
                self.run_mean.append(np.zeros(width))
                self.run_var.append(np.ones(width))

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    # -- forward ---------------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode forward using running batch-norm statistics."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        h = x
        for i in range(self.n_layers):
            h, _ = nnops.linear_forward(h, self.weights[i], self.biases[i])
            if i < self.n_layers - 1:
                h, _ = nnops.leaky_relu_forward(h, self.slope)
                h = nnops.batchnorm_forward_eval(
                    h, self.gammas[i], self.betas[i],
                    self.run_mean[i], self.run_var[i], self.eps)
        return h

    def forward_train(self, x: np.ndarray, update_stats: bool = True):
        """Train-mode forward; returns (output, caches) for backprop.

        Batch statistics normalize each block; running statistics are
        updated in place unless update_stats is False (finite-difference
        probing must not mutate the net).
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 2:
            raise TrainingDegenerateError(
                "train-mode forward needs a batch of at least 2 rows")
        n = x.shape[0]
        caches = []
        h = x
        for i in range(self.n_layers):
            h, lin_cache = nnops.linear_forward(h, self.weights[i], self.biases[i])
            if i < self.n_layers - 1:
                h, relu_cache = nnops.leaky_relu_forward(h, self.slope)
                h, bn_cache, (mu, var) = nnops.batchnorm_forward_train(
                    h, self.gammas[i], self.betas[i], self.eps)
                if update_stats:
                    m = self.momentum
                    unbiased = var * n / (n - 1)
                    self.run_mean[i] = (1 - m) * self.run_mean[i] + m * mu
                    self.run_var[i] = (1 - m) * self.run_var[i] + m * unbiased
                caches.append((lin_cache, relu_cache, bn_cache))
            else:
                caches.append((lin_cache, None, None))
        return h, caches

    def backward(self, dy: np.ndarray, caches):
        """Gradients of all trained parameters given d(loss)/d(output)."""
        grads_w = [None] * self.n_layers
        grads_b = [None] * self.n_layers
        grads_g = [None] * (self.n_layers - 1)
        grads_be = [None] * (self.n_layers - 1)
        d = dy
        for i in reversed(range(self.n_layers)):
            lin_cache, relu_cache, bn_cache = caches[i]
            if i < self.n_layers - 1:
                d, dg, dbe = nnops.batchnorm_backward(d, bn_cache, self.gammas[i])
                grads_g[i] = dg
                grads_be[i] = dbe
                d = nnops.leaky_relu_backward(d, relu_cache, self.slope)
            d, dw, db = nnops.linear_backward(d, lin_cache, self.weights[i])
            grads_w[i] = dw
            grads_b[i] = db
        return grads_w, grads_b, grads_g, grads_be

    # -- parameter plumbing ----------------------------------------------

    def _param_arrays(self):
        out = []
        for i in range(self.n_layers):
            out.append(self.weights[i])
            out.append(self.biases[i])
            if i < self.n_layers - 1:
                out.append(self.gammas[i])
                out.append(self.betas[i])
        return out

    def _state_arrays(self):
        return self._param_arrays() + list(self.run_mean) + list(self.run_var)

    def get_flat_params(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self._param_arrays()])

    def set_flat_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        offset = 0
        for a in self._param_arrays():
            a[...] = flat[offset:offset + a.size].reshape(a.shape)
            offset += a.size
        if offset != flat.size:
            raise ValueError(f"expected {offset} values, got {flat.size}")

    def apply_grads(self, grads, lr: float) -> None:
        gw, gb, gg, gbe = grads
        for i in range(self.n_layers):
            self.weights[i] -= lr * gw[i]
            self.biases[i] -= lr * gb[i]
            if i < self.n_layers - 1:
                self.gammas[i] -= lr * gg[i]
                self.betas[i] -= lr * gbe[i]

    def flat_grads(self, grads) -> np.ndarray:
        gw, gb, gg, gbe = grads
        parts = []
        for i in range(self.n_layers):
            parts.append(gw[i].ravel())
            parts.append(gb[i].ravel())
            if i < self.n_layers - 1:
                parts.append(gg[i].ravel())
                parts.append(gbe[i].ravel())
        return np.concatenate(parts)


def param_hash(net: EmbedNet) -> str:
    """SHA-256 over every state array (weights, norms, running stats)."""
    h = hashlib.sha256()
    for a in net._state_arrays():
        h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return h.hexdigest()


def embed(net: EmbedNet, x: np.ndarray) -> np.ndarray:
    """Eval-mode embeddings; a 1-D input yields a 1-D output."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    y = net.forward(x)
    return y[0] if single else y


# -- cosine geometry ------------------------------------------------------


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - cos(u, v); raises on a vanishing vector."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu < _NORM_FLOOR or nv < _NORM_FLOOR:
        raise DegenerateEmbeddingError("cosine distance of a zero-norm vector")
    return float(1.0 - (u @ v) / (nu * nv))


def cosine_distance_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise 1 - cos between rows of a and rows of b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na < _NORM_FLOOR) or np.any(nb < _NORM_FLOOR):
        raise DegenerateEmbeddingError("cosine distance of a zero-norm vector")
    return 1.0 - (a @ b.T) / np.outer(na, nb)


def _cosine_grad(u: np.ndarray, v: np.ndarray):
    """Gradients of D(u, v) = 1 - cos(u, v) with respect to u and v."""
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu < _NORM_FLOOR or nv < _NORM_FLOOR:
        raise DegenerateEmbeddingError("cosine gradient of a zero-norm vector")
    s = (u @ v) / (nu * nv)
    du = s * u / (nu * nu) - v / (nu * nv)
    dv = s * v / (nv * nv) - u / (nu * nv)
    return du, dv


def triplet_loss_batch(y: np.ndarray, triplets: np.ndarray, margin: float):
    """Mean hinge triplet loss over embeddings y and index triplets.

    triplets is an integer array of shape (T, 3) holding (anchor,
    positive, negative) row indices into y. Returns (loss, dY,
    n_active); the hinge contributes zero gradient when inactive.
    """
    y = np.asarray(y, dtype=np.float64)
    triplets = np.asarray(triplets, dtype=np.int64)
    n_trip = triplets.shape[0]
    if n_trip == 0:
        raise TrainingDegenerateError("no triplets to score")
    dy = np.zeros_like(y)
    total = 0.0
    active = 0
    for ia, ip, in_ in triplets:
        a, p, n = y[ia], y[ip], y[in_]
        d_ap = cosine_distance(a, p)
        d_an = cosine_distance(a, n)
        viol = d_ap - d_an + margin
        if viol > 0.0:
            total += viol
            active += 1
            dap_da, dap_dp = _cosine_grad(a, p)
            dan_da, dan_dn = _cosine_grad(a, n)
            dy[ia] += (dap_da - dan_da) / n_trip
            dy[ip] += dap_dp / n_trip
            dy[in_] -= dan_dn / n_trip
    return total / n_trip, dy, active


def mine_triplets(labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random in-batch mining: one triplet per eligible anchor.

    Each sample acts as an anchor; a positive is drawn uniformly from the
    other samples sharing its label and a negative uniformly from the
    rest. Anchors without both candidate pools are skipped.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    out = []
    for i in range(n):
        pos = np.flatnonzero(labels == labels[i])
        pos = pos[pos != i]
        neg = np.flatnonzero(labels != labels[i])
        if pos.size == 0 or neg.size == 0:
            continue
        out.append((i, int(rng.choice(pos)), int(rng.choice(neg))))
    return np.asarray(out, dtype=np.int64).reshape(-1, 3)


# -- training --------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for triplet training (plain SGD)."""

    epochs: int = 1000
    batch_size: int = 512
    learning_rate: float = 5e-4
    margin: float = 0.3
    seed: int = 0
    dims: tuple = DEFAULT_DIMS
    min_epochs: int = 200
    patience: int = 50
    rel_tol: float = 1e-3

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 2:
            raise ValueError("epochs must be >= 0 and batch_size >= 2")
        if not (self.learning_rate > 0 and self.margin >= 0):
            raise ValueError("learning_rate must be positive, margin nonnegative")


@dataclass
class TrainResult:
    epochs_run: int
    stop_reason: str
    loss_history: list = field(default_factory=list)


def train_embedding(features: np.ndarray, labels: np.ndarray,
                    cfg: TrainConfig = TrainConfig(),
                    net: EmbedNet | None = None):
    """Train an EmbedNet on labelled ratio vectors.

    Stops at cfg.epochs, or earlier once at least cfg.min_epochs have
    run and the epoch-mean loss has not improved by a relative rel_tol
    for cfg.patience consecutive epochs (the plateau rule). Returns
    (net, TrainResult). Identical inputs and config reproduce the
    trained weights bit for bit.

    Pass an existing `net` to resume training it for another cfg.epochs
    rounds; its layer widths must match cfg.dims.
    """
    x = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] != labels.shape[0]:
        raise ValueError("features must be 2-D with one label per row")
    if x.shape[1] != cfg.dims[0]:
        raise ValueError(
            f"feature width {x.shape[1]} does not match input width {cfg.dims[0]}")
    if cfg.epochs > 0 and np.unique(labels).size < 2:
        raise TrainingDegenerateError("triplet training needs at least 2 identities")
    if net is not None and tuple(net.dims) != tuple(cfg.dims):
        raise ValueError(
            f"resumed net dims {tuple(net.dims)} do not match cfg.dims {tuple(cfg.dims)}")

    rng = np.random.default_rng(cfg.seed)
    if net is None:
        net = EmbedNet(cfg.dims, seed=cfg.seed)
    n = x.shape[0]
    history = []
    best = np.inf
    stale = 0
    stop_reason = "epochs"
    epochs_run = 0

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        epoch_batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if idx.size < 2:
                continue
            xb = x[idx]
            lb = labels[idx]
            triplets = mine_triplets(lb, rng)
            if triplets.shape[0] == 0:
                continue
            y, caches = net.forward_train(xb)
            loss, dy, _ = triplet_loss_batch(y, triplets, cfg.margin)
            grads = net.backward(dy, caches)
            net.apply_grads(grads, cfg.learning_rate)
            epoch_loss += loss
            epoch_batches += 1
        if epoch_batches == 0:
            raise TrainingDegenerateError(
                "no usable triplet batches; check labels and batch size")
        mean_loss = epoch_loss / epoch_batches
        history.append(mean_loss)
        epochs_run = epoch + 1
        if mean_loss < best * (1.0 - cfg.rel_tol):
            best = mean_loss
            stale = 0
        else:
            stale += 1
        if epochs_run >= cfg.min_epochs and stale >= cfg.patience:
            stop_reason = (
                f"plateau: no {cfg.rel_tol:g} relative improvement for "
                f"{cfg.patience} epochs")
            break

    return net, TrainResult(epochs_run, stop_reason, history)


# -- persistence ------------------------------------------------------------


def save_embedding(net: EmbedNet, path) -> str:
    """Write the net to an npz file; returns the state hash."""
    digest = param_hash(net)
    meta = {
        "format": _FORMAT_MARKER,
        "dims": list(net.dims),
        "slope": net.slope,
        "eps": net.eps,
        "momentum": net.momentum,
        "param_sha256": digest,
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    for i in range(net.n_layers):
        arrays[f"w{i}"] = net.weights[i]
        arrays[f"b{i}"] = net.biases[i]
        if i < net.n_layers - 1:
            arrays[f"g{i}"] = net.gammas[i]
            arrays[f"be{i}"] = net.betas[i]
            arrays[f"rm{i}"] = net.run_mean[i]
            arrays[f"rv{i}"] = net.run_var[i]
    np.savez(path, **arrays)
    return digest


def load_embedding(path) -> EmbedNet:
    """Read an npz written by save_embedding, verifying the state hash."""
    try:
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
    except (OSError, ValueError) as exc:
        raise DataFormatError(f"cannot read embedding file {path}: {exc}") from exc
    if "meta" not in arrays:
        raise DataFormatError(f"{path}: missing meta block")
    try:
        meta = json.loads(bytes(arrays["meta"]).decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: unreadable meta block") from exc
    if meta.get("format") != _FORMAT_MARKER:
        raise DataFormatError(f"{path}: not an embedding file")
    net = EmbedNet(tuple(meta["dims"]), seed=0, slope=meta["slope"],
                   eps=meta["eps"], momentum=meta["momentum"])
    try:
        for i in range(net.n_layers):
            net.weights[i][...] = arrays[f"w{i}"]
            net.biases[i][...] = arrays[f"b{i}"]
            if i < net.n_layers - 1:
                net.gammas[i][...] = arrays[f"g{i}"]
                net.betas[i][...] = arrays[f"be{i}"]
                net.run_mean[i][...] = arrays[f"rm{i}"]
                net.run_var[i][...] = arrays[f"rv{i}"]
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"{path}: arrays do not match layer widths") from exc
    digest = param_hash(net)
    if digest != meta.get("param_sha256"):
        raise DataFormatError(f"{path}: state hash mismatch, file corrupted")
    return net
