"""Binary cross-entropy over logits with the logistic link."""

import numpy as np

from ..errors import ContractError


CLAMP = 30.0  # symmetric logit clamp; keeps log() finite, perturbs grads by < 1e-13


def sigmoid(z):
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_bce(logits, labels, sample_weights=None):
    """Mean binary cross-entropy and its gradient w.r.t. the logits.

    loss = -(1/N) sum_i [y_i log g(z_i) + (1-y_i) log(1-g(z_i))]
    grad_i = (g(z_i) - y_i) / N

    Logits are clamped to [-CLAMP, CLAMP] before evaluation.  Optional
    per-sample weights rescale each term (the 1/N stays).
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if logits.shape != labels.shape or logits.ndim != 2 or logits.shape[1] != 1:
        raise ContractError(
            f"logits/labels must both be (batch, 1); got {logits.shape} and {labels.shape}")
    n = logits.shape[0]
    if n < 1:
        raise ContractError("batch axis must be non-empty")
    y = labels.astype(np.float64)
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ContractError("labels must be exactly 0 or 1")
    if not np.all(np.isfinite(logits)):
        raise ContractError("logits contain non-finite values")

    z = np.clip(logits.astype(np.float64), -CLAMP, CLAMP)
    per = np.logaddexp(0.0, z) - y * z          # = -[y log g + (1-y) log(1-g)]
    grad = (sigmoid(z) - y) / n
    if sample_weights is not None:
        w = np.asarray(sample_weights, dtype=np.float64).reshape(n, 1)
        per = per * w
        grad = grad * w
    loss = float(per.sum() / n)
    dtype = logits.dtype if logits.dtype in (np.float32, np.float64) else np.float64
    return loss, grad.astype(dtype)
