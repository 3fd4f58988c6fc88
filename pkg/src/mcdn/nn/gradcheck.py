"""Central-finite-difference verification of analytic gradients.

A fragment is any object exposing

    parameters()      -> dict of name -> float64 ndarray (live, perturbable)
    forward_sum(x)    -> float, deterministic scalar reduction of the forward pass
    analytic_grads(x) -> dict of name -> gradient of forward_sum w.r.t. that tensor

Fragments must run entirely in float64 and keep any batch-norm running
statistics frozen while checked.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import GradCheckAbortedError
from . import layers

REL_FLOOR = 1e-6  # denominators below this are treated as zero-vs-zero


@dataclass
class TensorCheck:
    name: str
    max_rel_err: float

    def passed(self, tolerance):
        return self.max_rel_err < tolerance


@dataclass
class GradCheckReport:
    checks: list
    step: float
    tolerance: float

    @property
    def passed(self):
        return all(c.passed(self.tolerance) for c in self.checks)

    @property
    def worst(self):
        return max((c.max_rel_err for c in self.checks), default=0.0)

    def lines(self):
        for c in self.checks:
            status = "ok" if c.passed(self.tolerance) else "FAIL"
            yield f"{c.name:<40s} max_rel_err={c.max_rel_err:.3e}  {status}"


def _rel_err(analytic, numeric):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def finite_diff_check(fragment, x, step=1e-3, tolerance=1e-4):
    """Compare every parameter gradient against central differences.

    Raises GradCheckAbortedError if two identical forward passes disagree.
    """
    f0 = fragment.forward_sum(x)
    f1 = fragment.forward_sum(x)
    if f0 != f1:
        raise GradCheckAbortedError(
            f"fragment is not deterministic: repeated forward passes gave {f0!r} then {f1!r}")

    analytic = fragment.analytic_grads(x)
    checks = []
    for name, param in fragment.parameters().items():
        grad = np.asarray(analytic[name], dtype=np.float64)
        numeric = np.empty(param.size, dtype=np.float64)
        flat = param.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = fragment.forward_sum(x)
            flat[i] = orig - step
            down = fragment.forward_sum(x)
            flat[i] = orig
            numeric[i] = (up - down) / (2.0 * step)
        checks.append(TensorCheck(name, _rel_err(grad.reshape(-1), numeric)))
    return GradCheckReport(checks=checks, step=step, tolerance=tolerance)


class LinearFragment:
    """Wraps one linear layer; the checked scalar is the output sum."""

    def __init__(self, params: layers.LinearParams):
        self._params = layers.LinearParams(
            weights=params.weights.astype(np.float64),
            bias=params.bias.astype(np.float64),
        )

    def parameters(self):
        return {"weights": self._params.weights, "bias": self._params.bias}

    def forward_sum(self, x):
        out, _ = layers.linear_forward(x.astype(np.float64), self._params)
        return float(out.sum())

    def analytic_grads(self, x):
        out, cache = layers.linear_forward(x.astype(np.float64), self._params)
        _, grads = layers.linear_backward(np.ones_like(out), cache)
        return grads


class ConvUnitFragment:
    """Wraps one conv unit in train mode with frozen running statistics."""

    def __init__(self, params: layers.ConvUnitParams):
        self._params = layers.ConvUnitParams(
            weights=params.weights.astype(np.float64),
            bias=params.bias.astype(np.float64),
            bn_gamma=params.bn_gamma.astype(np.float64),
            bn_beta=params.bn_beta.astype(np.float64),
            bn_running_mean=params.bn_running_mean.astype(np.float64),
            bn_running_var=params.bn_running_var.astype(np.float64),
            bn_epsilon=params.bn_epsilon,
            bn_momentum=params.bn_momentum,
            stride=params.stride,
            padding=params.padding,
        )

    def parameters(self):
        p = self._params
        return {"weights": p.weights, "bias": p.bias,
                "bn_gamma": p.bn_gamma, "bn_beta": p.bn_beta}

    def forward_sum(self, x):
        out, _ = layers.conv_unit_forward(x.astype(np.float64), self._params,
                                          mode="train", update_running=False)
        return float(out.sum())

    def analytic_grads(self, x):
        out, cache = layers.conv_unit_forward(x.astype(np.float64), self._params,
                                              mode="train", update_running=False)
        _, grads = layers.conv_unit_backward(np.ones_like(out), cache)
        return grads
