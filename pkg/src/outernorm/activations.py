"""Scalar activations used by the two-layer networks, with hand-coded derivatives.

All functions accept scalars or numpy arrays and broadcast elementwise.
"""

from enum import Enum

import numpy as np
from scipy.special import expit


class ActivationKind(str, Enum):
    SIGMOID = "sigmoid"
    RELU = "relu"
    STEP = "step"
    SATURATED_RELU = "srelu"
    SOFTPLUS = "softplus"
    GAUSSIAN = "gaussian"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown activation {value!r}; expected one of {names}") from None


class UnsupportedDerivative(ValueError):
    pass


# Kinds whose outputs lie in [0, 1]; used by the bound machinery for the range constant.
BOUNDED_UNIT_RANGE = frozenset(
    {ActivationKind.SIGMOID, ActivationKind.STEP, ActivationKind.SATURATED_RELU}
)
HOMOGENEOUS = frozenset({ActivationKind.RELU, ActivationKind.STEP})


def _check_finite(x):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("activation input must be finite")
    return x


def _sigmoid(x):
    # expit is overflow-safe at both tails and much faster than a two-branch numpy form
    return expit(x)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _apply(kind, x):
    if kind is ActivationKind.SIGMOID:
        return _sigmoid(x)
    if kind is ActivationKind.RELU:
        return np.maximum(x, 0.0)
    if kind is ActivationKind.STEP:
        return (x >= 0).astype(np.float64)
    if kind is ActivationKind.SATURATED_RELU:
        return np.clip(x, 0.0, 1.0)
    if kind is ActivationKind.SOFTPLUS:
        return _softplus(x)
    if kind is ActivationKind.GAUSSIAN:
        return np.exp(-x * x)
    raise ValueError(f"unhandled activation {kind}")


def _apply_derivative(kind, x):
    if kind is ActivationKind.SIGMOID:
        s = _sigmoid(x)
        return s * (1.0 - s)
    if kind is ActivationKind.RELU:
        # kink at 0 takes the left limit
        return (x > 0).astype(np.float64)
    if kind is ActivationKind.SATURATED_RELU:
        return ((x > 0) & (x <= 1)).astype(np.float64)
    if kind is ActivationKind.SOFTPLUS:
        return _sigmoid(x)
    if kind is ActivationKind.GAUSSIAN:
        return -2.0 * x * np.exp(-x * x)
    if kind is ActivationKind.STEP:
        raise UnsupportedDerivative("step activation has zero derivative a.e.; gradient training is not supported")
    raise ValueError(f"unhandled activation {kind}")


def evaluate(kind, x):
    """Evaluate the activation ``kind`` at ``x`` (scalar or array).

    Raises ValueError on non-finite input.
    """
    kind = ActivationKind.parse(kind)
    arr = _check_finite(x)
    out = _apply(kind, np.atleast_1d(arr))
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def evaluate_derivative(kind, x):
    """Derivative of the activation; subgradient 0 at the ReLU/saturated-ReLU kinks."""
    kind = ActivationKind.parse(kind)
    arr = _check_finite(x)
    out = _apply_derivative(kind, np.atleast_1d(arr))
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def apply_unchecked(kind, z):
    """Vectorised evaluation without the finiteness check, for hot loops."""
    return _apply(kind, z)


def derivative_unchecked(kind, z):
    return _apply_derivative(kind, z)
