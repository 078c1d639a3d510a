"""Trainers producing networks with non-negative output weights.

Two instruments: non-negative least squares over fixed random features, and projected
gradient descent on (a, W) that clamps a at zero after every step.
"""

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .activations import (
    ActivationKind,
    HOMOGENEOUS,
    UnsupportedDerivative,
    apply_unchecked,
    derivative_unchecked,
)
from .network import TwoLayerNet, empirical_risk, predict

METHODS = ("nnls_random_features", "projected_gd")


@dataclass
class TrainConfig:
    method: str = "nnls_random_features"
    m_bar: int = 100
    lr: Optional[float] = None  # None -> 0.1 / m_bar
    max_iters: int = 5000
    tol: float = 0.0
    seed: int = 0
    row_norm: bool = False
    kkt_tol: float = 1e-9

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown training method {self.method!r}")
        if self.m_bar < 1:
            raise ValueError("m_bar must be >= 1")
        if self.lr is not None and self.lr < 0:
            raise ValueError("lr must be non-negative")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")

    @property
    def step_size(self):
        return 0.1 / self.m_bar if self.lr is None else self.lr

    @classmethod
    def from_dict(cls, payload):
        known = {k: payload[k] for k in cls.__dataclass_fields__ if k in payload}
        return cls(**known)

    def to_dict(self):
        return asdict(self)


@dataclass
class FitResult:
    net: TwoLayerNet
    risk: float
    n_iter: int
    converged: bool
    flag: Optional[str] = None
    kkt_residual: Optional[float] = None
    history: list = field(default_factory=list, repr=False)


def random_features(activation, m, d, rng):
    """Inner weights for random-feature fits: unit sphere for ReLU/Step, N(0, I/d) otherwise."""
    G = rng.standard_normal((m, d))
    if ActivationKind.parse(activation) in HOMOGENEOUS:
        return G / np.linalg.norm(G, axis=1, keepdims=True)
    return G / math.sqrt(d)


def kkt_residual(a, grad):
    """Largest violation of the NNLS optimality conditions at ``a``."""
    active = a > 0
    res = np.where(active, np.abs(grad), np.maximum(-grad, 0.0))
    return float(res.max()) if res.size else 0.0


def _nnls_gram(G, b, c, max_iters, kkt_tol, stall_rtol=1e-10, patience=20):
    """Minimise a'Ga - 2b'a + c over a >= 0 by accelerated projected gradient.

    Momentum is reset whenever a step would raise the objective, and the fallback plain
    projected step backtracks on the Lipschitz estimate, so accepted iterates never
    increase the objective.
    """
    m = b.shape[0]

    def obj(a):
        return float(a @ (G @ a) - 2.0 * (b @ a) + c)

    def grad(a):
        return 2.0 * (G @ a - b)

    # power iteration for the top eigenvalue of G; the factor covers the underestimate
    v = np.ones(m) / math.sqrt(m)
    lam = 0.0
    for _ in range(30):
        w = G @ v
        nrm = np.linalg.norm(w)
        if nrm == 0:
            break
        lam = float(v @ w)
        v = w / nrm
    L = 2.0 * max(lam, 1e-300) * 1.1

    # G @ y is carried along linearly so each iteration costs one matrix-vector product
    x = np.zeros(m)
    Gx = np.zeros(m)
    fx = c
    history = [fx]
    y, Gy = x, Gx
    t = 1.0
    stall = 0
    n_iter = 0
    gx = -2.0 * b
    res = kkt_residual(x, gx)
    for n_iter in range(1, max_iters + 1):
        if res <= kkt_tol:
            n_iter -= 1
            break
        x_new = np.maximum(y - 2.0 * (Gy - b) / L, 0.0)
        Gx_new = G @ x_new
        f_new = float(x_new @ Gx_new - 2.0 * (b @ x_new) + c)
        if f_new > fx:
            t = 1.0
            while True:
                x_new = np.maximum(x - gx / L, 0.0)
                Gx_new = G @ x_new
                f_new = float(x_new @ Gx_new - 2.0 * (b @ x_new) + c)
                if f_new <= fx or L > 1e300:
                    break
                L *= 2.0
            if f_new > fx:
                break
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_new
        y = x_new + beta * (x_new - x)
        Gy = Gx_new + beta * (Gx_new - Gx)
        decrease = fx - f_new
        x, Gx, fx, t = x_new, Gx_new, f_new, t_new
        history.append(fx)
        gx = 2.0 * (Gx - b)
        res = kkt_residual(x, gx)
        if decrease <= stall_rtol * max(abs(fx), 1e-300):
            stall += 1
            if stall >= patience:
                break
        else:
            stall = 0

    # exact solve on the detected support; kept only if it is feasible and no worse
    support = x > 0
    if support.any():
        sol, *_ = np.linalg.lstsq(G[np.ix_(support, support)], b[support], rcond=None)
        if np.all(sol > 0):
            cand = np.zeros(m)
            cand[support] = sol
            f_cand = obj(cand)
            g_cand = grad(cand)
            r_cand = kkt_residual(cand, g_cand)
            if f_cand <= fx and r_cand <= res:
                x, fx, res = cand, f_cand, r_cand
                history.append(fx)
    return x, fx, res, n_iter, history


def nnls_fit(data, W, activation, config=None):
    """Fit a >= 0 minimising the empirical risk over fixed inner weights W.

    Returns a FitResult whose ``converged`` is True when the KKT residual is <= 1e-6.
    """
    config = config or TrainConfig()
    act = ActivationKind.parse(activation)
    W = np.asarray(W, dtype=np.float64)
    if not np.all(np.isfinite(W)):
        raise ValueError("inner weights must be finite")
    unit = False
    if act in HOMOGENEOUS:
        norms = np.linalg.norm(W, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise ValueError("relu/step features need unit-norm rows")
        unit = True
    N = data.N
    Phi = apply_unchecked(act, data.X @ W.T)
    G = (Phi.T @ Phi) / N
    b = (Phi.T @ data.Y) / N
    c = float(data.Y @ data.Y) / N
    a, _, res, n_iter, history = _nnls_gram(G, b, c, config.max_iters, config.kkt_tol)
    net = TwoLayerNet(act, a, W, nonneg=True, unit_rows=unit)
    converged = res <= 1e-6
    return FitResult(
        net=net,
        risk=empirical_risk(net, data),
        n_iter=n_iter,
        converged=converged,
        flag=None if converged else "not-converged",
        kkt_residual=res,
        history=history,
    )


def grad_empirical_risk(net, data):
    """Gradients of the empirical risk w.r.t. a and W."""
    if net.activation is ActivationKind.STEP:
        raise UnsupportedDerivative("no gradient for step networks")
    Z = data.X @ net.W.T
    phi = apply_unchecked(net.activation, Z)
    dphi = derivative_unchecked(net.activation, Z)
    r = data.Y - predict(net, data.X)
    N = data.N
    grad_a = -(2.0 / N) * (phi.T @ r)
    grad_W = -(2.0 / N) * ((dphi * r[:, None]).T @ data.X) * net.a[:, None]
    return grad_a, grad_W


def projected_gd(data, activation, config=None):
    """Joint gradient descent on (a, W) with a clamped to >= 0 after each step.

    Steps that raise the risk are rejected and the step size halved.
    """
    config = config or TrainConfig(method="projected_gd")
    act = ActivationKind.parse(activation)
    if act is ActivationKind.STEP:
        raise UnsupportedDerivative("projected_gd cannot train step networks; use nnls_fit")
    rng = np.random.default_rng(config.seed)
    G = rng.standard_normal((config.m_bar, data.d))
    W = G / np.linalg.norm(G, axis=1, keepdims=True)
    a = np.full(config.m_bar, 1.0 / config.m_bar)
    net = TwoLayerNet(act, a, W, nonneg=True)
    risk = empirical_risk(net, data)
    initial = risk
    history = [risk]
    lr = config.step_size
    flag = None
    n_iter = 0
    for n_iter in range(1, config.max_iters + 1):
        if risk <= config.tol:
            n_iter -= 1
            break
        ga, gW = grad_empirical_risk(net, data)
        a_new = np.maximum(net.a - lr * ga, 0.0)
        W_new = net.W - lr * gW
        if config.row_norm:
            norms = np.linalg.norm(W_new, axis=1, keepdims=True)
            W_new = W_new / np.where(norms == 0, 1.0, norms)
        cand = TwoLayerNet(act, a_new, W_new, nonneg=True)
        cand_risk = empirical_risk(cand, data)
        if not np.isfinite(cand_risk) or cand_risk > 1e3 * initial:
            flag = "diverged"
            break
        if cand_risk > risk:
            lr *= 0.5
            continue
        net, risk = cand, cand_risk
        history.append(risk)
    converged = risk <= config.tol
    if flag is None and not converged:
        flag = "max-iters"
    return FitResult(net=net, risk=risk, n_iter=n_iter, converged=converged, flag=flag, history=history)


def fit(data, activation, config):
    """Dispatch on ``config.method``; random features are drawn from ``config.seed``."""
    if config.method == "projected_gd":
        return projected_gd(data, activation, config)
    rng = np.random.default_rng(config.seed)
    W = random_features(activation, config.m_bar, data.d, rng)
    return nnls_fit(data, W, activation, config)
