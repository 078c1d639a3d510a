"""Outer-norm bounds for two-layer networks with non-negative output weights."""

from .activations import ActivationKind
from .network import TwoLayerNet, empirical_risk, outer_norm, predict

__all__ = ["ActivationKind", "TwoLayerNet", "empirical_risk", "outer_norm", "predict"]
