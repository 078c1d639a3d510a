"""Two-layer networks x -> sum_j a_j * sigma(w_j . x) and their risks."""

import json
from dataclasses import dataclass, field

import numpy as np

from .activations import ActivationKind, HOMOGENEOUS, apply_unchecked

# rows per block when evaluating on large sample sets
EVAL_CHUNK = 8192


class ShapeError(ValueError):
    pass


def pair_reduce(contrib):
    """Sum the last axis by repeatedly adding adjacent pairs, aligned from the end.

    Pairs are (m-2, m-1), (m-4, m-3), ... at every level, so two trailing units whose
    contributions are exact negatives of each other add to exactly 0.0. The result does
    not depend on BLAS threading.
    """
    c = np.asarray(contrib, dtype=np.float64)
    if c.shape[-1] == 0:
        return np.zeros(c.shape[:-1])
    while c.shape[-1] > 1:
        if c.shape[-1] % 2:
            pad = np.zeros(c.shape[:-1] + (1,))
            c = np.concatenate([pad, c], axis=-1)
        c = c[..., 0::2] + c[..., 1::2]
    return c[..., 0]


@dataclass(frozen=True)
class TwoLayerNet:
    """Output weights ``a`` (length m) and inner weights ``W`` (m x d).

    ``nonneg`` and ``unit_rows`` are checked at construction; nothing is clamped.
    """

    activation: ActivationKind
    a: np.ndarray
    W: np.ndarray
    nonneg: bool = False
    unit_rows: bool = False
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        act = ActivationKind.parse(self.activation)
        a = np.array(self.a, dtype=np.float64).reshape(-1)
        W = np.array(self.W, dtype=np.float64)
        if W.ndim == 1:
            W = W.reshape(1, -1)
        if W.ndim != 2 or W.shape[0] != a.shape[0]:
            raise ShapeError(f"a has length {a.shape[0]} but W has shape {W.shape}")
        if a.shape[0] < 1:
            raise ShapeError("network needs at least one hidden unit")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(W))):
            raise ValueError("network weights must be finite")
        if self.nonneg and np.any(a < 0):
            raise ValueError(f"nonneg network has negative output weight {a.min()}")
        if self.unit_rows:
            norms = np.linalg.norm(W, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-10):
                raise ValueError("unit_rows network has a row with norm != 1")
        a.setflags(write=False)
        W.setflags(write=False)
        object.__setattr__(self, "activation", act)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "W", W)

    @property
    def width(self):
        return self.a.shape[0]

    @property
    def d(self):
        return self.W.shape[1]

    def features(self, X):
        """Hidden-layer outputs sigma(X W^T), shape (N, m)."""
        X = self._check_inputs(X)
        return apply_unchecked(self.activation, X @ self.W.T)

    def _check_inputs(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[-1] != self.d:
            raise ShapeError(f"input dimension {X.shape[-1]} != network dimension {self.d}")
        return X

    def __call__(self, X):
        return predict(self, X)

    def to_dict(self):
        return {"activation": self.activation.value, "a": self.a.tolist(), "W": self.W.tolist()}

    @classmethod
    def from_dict(cls, payload, **flags):
        return cls(ActivationKind.parse(payload["activation"]), payload["a"], payload["W"], **flags)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text, **flags):
        return cls.from_dict(json.loads(text), **flags)


def predict(net, X):
    """Network outputs for a batch of inputs (N x d); returns a length-N array."""
    X = net._check_inputs(X)
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], EVAL_CHUNK):
        block = X[start:start + EVAL_CHUNK]
        phi = apply_unchecked(net.activation, block @ net.W.T)
        out[start:start + EVAL_CHUNK] = pair_reduce(phi * net.a)
    return out


def forward(net, x):
    """Single-input forward pass; ``x`` must have length d."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("forward takes a single input vector; use predict for batches")
    return float(predict(net, x)[0])


def residuals(net, X, Y):
    return np.asarray(Y, dtype=np.float64) - predict(net, X)


def empirical_risk(net, data):
    """Mean squared residual over a dataset (anything with X and Y attributes)."""
    if data.X.shape[0] == 0:
        raise ValueError("empirical risk of an empty dataset")
    r = residuals(net, data.X, data.Y)
    return float(np.sum(r * r) / r.shape[0])


def outer_norm(net):
    return float(np.sum(np.abs(net.a)))


def normalize_relu(net):
    """Equivalent net with unit-norm rows (ReLU pushes the norm into a; Step keeps a).

    Zero rows become e_1 with output weight 0.
    """
    if net.activation not in HOMOGENEOUS:
        raise ValueError(f"normalize_relu needs a relu or step network, got {net.activation.value}")
    norms = np.linalg.norm(net.W, axis=1)
    zero = norms == 0
    safe = np.where(zero, 1.0, norms)
    W = net.W / safe[:, None]
    a = net.a.copy()
    if net.activation is ActivationKind.RELU:
        a = a * norms
    W[zero] = 0.0
    W[zero, 0] = 1.0
    a[zero] = 0.0
    # re-normalise so the unit-row check holds to the last bit the division allows
    W = W / np.linalg.norm(W, axis=1)[:, None]
    return TwoLayerNet(net.activation, a, W, nonneg=net.nonneg, unit_rows=True)


def rescale_rows(net, target_norm):
    """Scale every row to norm ``target_norm`` and compensate in ``a`` (ReLU homogeneity).

    For the saturated ReLU the same weights are reused with the rescaled rows; the
    outputs agree with the ReLU net wherever |w_j . x| <= 1.
    """
    if net.activation not in (ActivationKind.RELU, ActivationKind.SATURATED_RELU):
        raise ValueError(f"rescale_rows needs a relu or srelu network, got {net.activation.value}")
    if not target_norm > 0:
        raise ValueError("target_norm must be positive")
    norms = np.linalg.norm(net.W, axis=1)
    if np.any(norms == 0):
        unit = normalize_relu(TwoLayerNet(ActivationKind.RELU, net.a, net.W, nonneg=net.nonneg))
        norms = np.ones(net.width)
        W, a = unit.W, unit.a
    else:
        W, a = net.W, net.a
    scale = target_norm / norms
    return TwoLayerNet(net.activation, a / scale, W * scale[:, None], nonneg=net.nonneg)


def population_risk_mc(net, dist, n_mc, seed):
    """Monte-Carlo estimate of E[(Y - net(X))^2] on fresh draws from ``dist``."""
    est, _ = population_risk_mc_se(net, dist, n_mc, seed)
    return est


def population_risk_mc_se(net, dist, n_mc, seed):
    """As population_risk_mc, also returning the standard error of the estimate."""
    from .data import sample_dataset

    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    data = sample_dataset(dist, n_mc, seed)
    r = residuals(net, data.X, data.Y)
    sq = r * r
    mean = float(np.sum(sq) / n_mc)
    se = float(np.std(sq, ddof=1) / np.sqrt(n_mc)) if n_mc > 1 else float("inf")
    return mean, se
