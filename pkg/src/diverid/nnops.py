"""Hand-rolled neural-network primitives (float64 numpy).

Forward functions return whatever the matching backward needs as a cache
tuple. Batch-norm follows the usual convention: normalization uses the
biased batch variance, the running variance is updated with the unbiased
estimate.
"""

from __future__ import annotations

import numpy as np


def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """y = x @ w + b, w shaped (fan_in, fan_out)."""
    return x @ w + b, x


def linear_backward(dy: np.ndarray, cache, w: np.ndarray):
    x = cache
    dw = x.T @ dy
    db = dy.sum(axis=0)
    dx = dy @ w.T
    return dx, dw, db


def leaky_relu_forward(x: np.ndarray, slope: float):
    return np.where(x > 0, x, slope * x), x


def leaky_relu_backward(dy: np.ndarray, cache, slope: float):
    x = cache
    return dy * np.where(x > 0, 1.0, slope)


def batchnorm_forward_train(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    eps: float,
):
    """Normalize with batch statistics; needs at least 2 rows."""
    mu = x.mean(axis=0)
    var = x.var(axis=0)  # biased
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    out = gamma * xhat + beta
    return out, (xhat, inv_std), (mu, var)


def batchnorm_forward_eval(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    eps: float,
) -> np.ndarray:
    xhat = (x - running_mean) / np.sqrt(running_var + eps)
    return gamma * xhat + beta


def batchnorm_backward(dy: np.ndarray, cache, gamma: np.ndarray):
    xhat, inv_std = cache
    n = dy.shape[0]
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * gamma
    dx = (inv_std / n) * (
        n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
    )
    return dx, dgamma, dbeta


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shift-stabilized."""
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy_loss(logits: np.ndarray, targets: np.ndarray):
    """Mean negative log-likelihood; targets are class indices.

    Returns (loss, dlogits) with dlogits already divided by the batch size.
    """
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(n), targets]))
    probs = softmax(logits)
    probs[np.arange(n), targets] -= 1.0
    return loss, probs / n


def init_linear(rng: np.random.Generator, fan_in: int, fan_out: int):
    """Uniform +-sqrt(1/fan_in) for both weights and bias."""
    bound = np.sqrt(1.0 / fan_in)
    w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
    b = rng.uniform(-bound, bound, size=fan_out)
    return w, b


def finite_difference_gradient(f, params: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    grad = np.empty_like(params)
    for i in range(params.size):
        saved = params[i]
        params[i] = saved + step
        f_plus = f(params)
        params[i] = saved - step
        f_minus = f(params)
        params[i] = saved
        grad[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def relative_gradient_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """L2 relative disagreement between two gradient vectors."""
    denom = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), 1e-12)
    return float(np.linalg.norm(analytic - numeric)) / denom
