"""SGD with classical momentum over named parameter stores."""

import numpy as np

from ..errors import ContractError


def init_velocity(params):
    """Zero velocity state aligned with a parameter store."""
    return {name: np.zeros_like(arr) for name, arr in params.items()}


def sgd_step(params, grads, learning_rate, momentum_coeff, velocity):
    """In-place update: v <- momentum*v + grad; p <- p - lr*v.

    All three stores must share keys and per-key shapes.
    """
    if not learning_rate > 0:
        raise ContractError("learning_rate must be positive")
    if not (0.0 <= momentum_coeff < 1.0):
        raise ContractError("momentum_coeff must lie in [0, 1)")
    if set(params) != set(grads) or set(params) != set(velocity):
        missing = set(params) ^ set(grads) | set(params) ^ set(velocity)
        raise ContractError(f"parameter/gradient/velocity stores misaligned on keys: {sorted(missing)}")
    for name, p in params.items():
        g = grads[name]
        v = velocity[name]
        if g.shape != p.shape or v.shape != p.shape:
            raise ContractError(f"shape mismatch for {name!r}: param {p.shape}, grad {g.shape}, velocity {v.shape}")
        v *= momentum_coeff
        v += g.astype(v.dtype, copy=False)
        p -= (learning_rate * v).astype(p.dtype, copy=False)
