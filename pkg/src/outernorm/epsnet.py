"""Epsilon-nets of Euclidean balls: the (3R/eps)^d covering bound, a greedy packing
construction, and probe-based verification of covering and of the net events used in
the outer-norm arguments."""

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

MAX_NET_DIM = 8


class CoveringBound(NamedTuple):
    log_value: float
    value: float


def covering_bound(R, eps, d):
    """Upper bound (3R/eps)^d on the eps-covering number of B(0, R), valid for R >= 1."""
    if R < 1:
        raise ValueError("the covering bound needs R >= 1")
    if eps <= 0 or d < 1:
        raise ValueError("need eps > 0 and d >= 1")
    log_value = d * math.log(3.0 * R / eps)
    try:
        value = math.exp(log_value)
    except OverflowError:
        value = math.inf
    return CoveringBound(log_value, value)


@dataclass(frozen=True)
class EpsNet:
    """Net points with the ball radius and the covering scale they are certified at.

    ``separation`` is the packing distance used to build the net (pairwise distances
    exceed it); ``scale`` is the covering radius claimed for it.
    """

    points: np.ndarray
    radius: float
    scale: float
    separation: float = 0.0
    complete: bool = True

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"p_{i + 1}" for i in range(self.d)])
            for row in self.points:
                writer.writerow([repr(float(v)) for v in row])


def uniform_ball(rng, n, d, R):
    """n points uniform in B(0, R): Gaussian direction times R * U^(1/d)."""
    G = rng.standard_normal((n, d))
    norms = np.linalg.norm(G, axis=1, keepdims=True)
    G = G / np.where(norms == 0, 1.0, norms)
    return G * (R * rng.random((n, 1)) ** (1.0 / d))


def build_greedy_net(R, eps, d, seed, max_points=200_000, min_run=1000):
    """Greedy random packing of B(0, R) at separation eps, reported as a 2*eps-net.

    Candidates are drawn uniformly from the ball and admitted when farther than eps
    from every admitted point. Construction stops after max(10 * |net|, min_run)
    consecutive rejections, or at ``max_points`` (then ``complete`` is False).
    """
    if d > MAX_NET_DIM:
        raise ValueError(f"net construction is limited to d <= {MAX_NET_DIM}")
    if eps <= 0 or R <= 0:
        raise ValueError("need eps > 0 and R > 0")
    rng = np.random.default_rng(seed)
    points = []
    run = 0
    complete = True
    done = False
    while not done:
        batch = uniform_ball(rng, max(1024, len(points)), d, R)
        if points:
            tree = cKDTree(np.asarray(points))
            dist, _ = tree.query(batch, k=1, distance_upper_bound=eps * (1 + 1e-12) + 1e-300)
            # rejected iff some admitted point lies within eps (inclusive)
            rejected = dist <= eps
        else:
            rejected = np.zeros(batch.shape[0], dtype=bool)
        fresh = []  # points admitted from this batch, not yet in the tree
        last = -1
        for idx in np.nonzero(~rejected)[0]:
            threshold = max(10 * len(points), min_run)
            gap = idx - last - 1
            if run + gap >= threshold:
                done = True
                break
            run += gap
            last = idx
            cand = batch[idx]
            if fresh and np.min(np.linalg.norm(np.asarray(fresh) - cand, axis=1)) <= eps:
                run += 1
                continue
            points.append(cand)
            fresh.append(cand)
            run = 0
            if len(points) >= max_points:
                complete = False
                done = True
                break
        else:
            threshold = max(10 * len(points), min_run)
            run += batch.shape[0] - last - 1
            if run >= threshold:
                done = True
    pts = np.asarray(points).reshape(-1, d)
    return EpsNet(pts, float(R), 2.0 * eps, separation=float(eps), complete=complete)


def direction_net(n, d, seed):
    """n random unit directions packaged as an EpsNet (no covering scale certified)."""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, d))
    return EpsNet(G / np.linalg.norm(G, axis=1, keepdims=True), 1.0, math.nan, complete=False)


class CoveringReport(NamedTuple):
    max_gap: float
    ok: bool


def verify_covering(net, n_probes, seed):
    """Largest distance from uniform probes in B(0, R) to the net; ok if <= net.scale."""
    if n_probes < 1:
        raise ValueError("n_probes must be >= 1")
    if net.size == 0:
        return CoveringReport(math.inf, False)
    rng = np.random.default_rng(seed)
    probes = uniform_ball(rng, n_probes, net.d, net.radius)
    dist, _ = cKDTree(net.points).query(probes, k=1)
    gap = float(dist.max())
    return CoveringReport(gap, bool(gap <= net.scale))


class EventReport(NamedTuple):
    min_over_net: float
    threshold: float
    ok: bool


def verify_event_E1(net, data, mode, param=None):
    """Check the union-over-the-net event for one activation family.

    mode "sigmoid_sign": every net point w has #{i: w.X_i >= 0} >= N/3.
    mode "relu_mean": sum_i ReLU(w.X_i) >= mu* N / 2 (``param`` = mu*).
    mode "step_tail": #{i: w.X_i >= eta} >= eta N / 2 (``param`` = eta).
    """
    pts = net.points if isinstance(net, EpsNet) else np.asarray(net, dtype=np.float64)
    N = data.N
    P = data.X @ pts.T
    if mode == "sigmoid_sign":
        stats = np.count_nonzero(P >= 0, axis=0).astype(np.float64)
        threshold = N / 3.0
    elif mode == "relu_mean":
        if param is None or param <= 0:
            raise ValueError("relu_mean needs mu_star > 0")
        stats = np.maximum(P, 0.0).sum(axis=0)
        threshold = param * N / 2.0
    elif mode == "step_tail":
        if param is None or param <= 0:
            raise ValueError("step_tail needs eta > 0")
        stats = np.count_nonzero(P >= param, axis=0).astype(np.float64)
        threshold = param * N / 2.0
    else:
        raise ValueError(f"unknown event mode {mode!r}")
    low = float(stats.min())
    return EventReport(low, threshold, bool(low >= threshold))
