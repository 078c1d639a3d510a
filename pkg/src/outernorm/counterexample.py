"""Signed cancelling units: with output weights of both signs, a network can keep its
training error while its outer norm grows without bound."""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .network import TwoLayerNet, empirical_risk, outer_norm


@dataclass(frozen=True)
class CounterexampleSpec:
    teacher: TwoLayerNet
    z: int
    nu: float
    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=np.float64).reshape(-1)
        if self.z < 1:
            raise ValueError("z must be >= 1")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if v.shape[0] != self.teacher.d:
            raise ValueError(f"v has length {v.shape[0]}, teacher dimension is {self.teacher.d}")
        if not np.linalg.norm(v) > 0:
            raise ValueError("v must be non-zero")
        object.__setattr__(self, "v", v)


def build_inflated_student(spec):
    """Teacher units followed by 2z copies of row v with weights +nu / -nu.

    Unit j (1-based over the whole net) gets +nu when j is even and -nu when odd. The
    extra units sit at the end so the pairwise summation in ``predict`` adds each
    +nu/-nu pair first, which cancels exactly.
    """
    t = spec.teacher
    m_star = t.width
    j = np.arange(m_star + 1, m_star + 2 * spec.z + 1)
    extra_a = np.where(j % 2 == 0, spec.nu, -spec.nu)
    a = np.concatenate([t.a, extra_a])
    W = np.vstack([t.W, np.tile(spec.v, (2 * spec.z, 1))])
    return TwoLayerNet(t.activation, a, W, meta={"z": spec.z, "nu": spec.nu})


def exact_l1(a):
    """||a||_1 as an exact rational (every float is one)."""
    return sum((Fraction(abs(float(x))) for x in a), Fraction(0))


def verify_invariance(spec, data):
    """Risks of teacher and inflated net on ``data`` plus the exact outer-norm growth."""
    inflated = build_inflated_student(spec)
    growth = exact_l1(inflated.a) - exact_l1(spec.teacher.a)
    return {
        "risk_teacher": empirical_risk(spec.teacher, data),
        "risk_inflated": empirical_risk(inflated, data),
        "outer_norm_teacher": outer_norm(spec.teacher),
        "outer_norm_inflated": outer_norm(inflated),
        "norm_growth": float(growth),
    }
