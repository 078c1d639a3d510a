"""Synthetic input/label distributions and Monte-Carlo estimators of their constants.

Sphere infima/suprema (mu*, eta, the MGF bounds, lambda(d)) are approximated over a finite
set of sampled unit directions. For mu*, the MGF bounds and lambda(d) the extremal
direction is picked on one sample and its value re-estimated on a fresh one, so the
reported number is an unbiased estimate at a concrete direction (an upper bound on the
true infimum, a lower bound on the true supremum) rather than a min/max of noisy means.
"""

import csv
import math
import warnings
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .activations import ActivationKind, HOMOGENEOUS
from .network import TwoLayerNet, predict

DEFAULT_DIRECTIONS = 256
DEFAULT_MGF_S = 1.0
DEFAULT_BUDGET_C = 0.5
_DIRECTION_BLOCK = 32


class SpecError(ValueError):
    pass


class BudgetError(ValueError):
    pass


# -- custom samplers -------------------------------------------------------------------

INPUT_SAMPLERS: dict = {}
LABEL_SAMPLERS: dict = {}


def register_input_sampler(name, fn=None):
    """Register ``fn(rng, N, d) -> X``; usable as a decorator."""
    def deco(f):
        INPUT_SAMPLERS[name] = f
        return f
    return deco(fn) if fn is not None else deco


def register_label_sampler(name, fn=None):
    """Register ``fn(rng, X) -> Y``; usable as a decorator."""
    def deco(f):
        LABEL_SAMPLERS[name] = f
        return f
    return deco(fn) if fn is not None else deco


@register_input_sampler("zero")
def _zero_inputs(rng, N, d):
    return np.zeros((N, d))


@register_input_sampler("rademacher")
def _rademacher_inputs(rng, N, d):
    return rng.choice([-1.0, 1.0], size=(N, d))


@register_input_sampler("sphere")
def _sphere_inputs(rng, N, d):
    Z = rng.standard_normal((N, d))
    return math.sqrt(d) * Z / np.linalg.norm(Z, axis=1, keepdims=True)


@register_label_sampler("zero")
def _zero_labels(rng, X):
    return np.zeros(X.shape[0])


@register_label_sampler("one")
def _one_labels(rng, X):
    return np.ones(X.shape[0])


@register_label_sampler("uniform_pm1")
def _uniform_labels(rng, X):
    return rng.uniform(-1.0, 1.0, size=X.shape[0])


@register_label_sampler("sign_first")
def _sign_labels(rng, X):
    return np.where(X[:, 0] >= 0, 1.0, -1.0)


# -- specs and datasets ----------------------------------------------------------------

def make_teacher(activation, d, width, seed, total_weight=1.0):
    """Random teacher with equal non-negative output weights summing to ``total_weight``.

    Rows are uniform on the unit sphere for homogeneous activations and N(0, I/d)
    otherwise.
    """
    act = ActivationKind.parse(activation)
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((width, d))
    if act in HOMOGENEOUS:
        W = G / np.linalg.norm(G, axis=1, keepdims=True)
        unit = True
    else:
        W = G / math.sqrt(d)
        unit = False
    a = np.full(width, total_weight / width)
    return TwoLayerNet(act, a, W, nonneg=True, unit_rows=unit)


@dataclass(frozen=True)
class DistributionSpec:
    """Joint law of (X, Y).

    input_kind: "gaussian_iso", "gaussian_cov" (needs ``cov``) or "custom" (``input_sampler``).
    label_kind: "teacher" (needs ``teacher``, optional ``clip``) or "custom" (``label_sampler``).
    """

    d: int
    input_kind: str = "gaussian_iso"
    cov: Optional[np.ndarray] = None
    input_sampler: Optional[str] = None
    label_kind: str = "teacher"
    teacher: Optional[TwoLayerNet] = None
    clip: Optional[float] = None
    label_sampler: Optional[str] = None
    _chol: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d < 1:
            raise SpecError("dimension must be >= 1")
        if self.input_kind == "gaussian_cov":
            if self.cov is None:
                raise SpecError("gaussian_cov needs a covariance matrix")
            S = np.array(self.cov, dtype=np.float64)
            if S.shape != (self.d, self.d):
                raise SpecError(f"covariance shape {S.shape} does not match d={self.d}")
            if not np.allclose(S, S.T, atol=1e-12, rtol=0):
                raise SpecError("covariance is not symmetric")
            vals, vecs = np.linalg.eigh(S)
            if vals.min() < -1e-10 * max(1.0, abs(vals.max())):
                raise SpecError("covariance is not positive semidefinite")
            root = vecs * np.sqrt(np.clip(vals, 0.0, None))
            object.__setattr__(self, "cov", S)
            object.__setattr__(self, "_chol", root)
        elif self.input_kind == "custom":
            if self.input_sampler not in INPUT_SAMPLERS:
                raise SpecError(f"unknown input sampler {self.input_sampler!r}")
        elif self.input_kind != "gaussian_iso":
            raise SpecError(f"unknown input kind {self.input_kind!r}")

        if self.label_kind == "teacher":
            if self.teacher is None:
                raise SpecError("teacher labels need a teacher network")
            if self.teacher.d != self.d:
                raise SpecError("teacher dimension does not match d")
            if self.clip is not None and not self.clip > 0:
                raise SpecError("label clip must be positive")
        elif self.label_kind == "custom":
            if self.label_sampler not in LABEL_SAMPLERS:
                raise SpecError(f"unknown label sampler {self.label_sampler!r}")
        else:
            raise SpecError(f"unknown label kind {self.label_kind!r}")

    @property
    def label_bound(self):
        """Almost-sure bound on |Y| when one is known, else None."""
        if self.label_kind == "teacher":
            return self.clip
        return {"zero": 0.0, "one": 1.0, "uniform_pm1": 1.0, "sign_first": 1.0}.get(self.label_sampler)

    def sample_inputs(self, rng, N):
        if self.input_kind == "gaussian_iso":
            return rng.standard_normal((N, self.d))
        if self.input_kind == "gaussian_cov":
            return rng.standard_normal((N, self.d)) @ self._chol.T
        return np.asarray(INPUT_SAMPLERS[self.input_sampler](rng, N, self.d), dtype=np.float64)

    def labels_for(self, rng, X):
        if self.label_kind == "teacher":
            Y = predict(self.teacher, X)
            if self.clip is not None:
                Y = np.clip(Y, -self.clip, self.clip)
            return Y
        return np.asarray(LABEL_SAMPLERS[self.label_sampler](rng, X), dtype=np.float64)

    def to_dict(self):
        out = {"d": self.d}
        if self.input_kind == "gaussian_cov":
            out["input"] = {"kind": "gaussian_cov", "cov": self.cov.tolist()}
        elif self.input_kind == "custom":
            out["input"] = {"kind": "custom", "sampler": self.input_sampler}
        else:
            out["input"] = {"kind": "gaussian_iso"}
        if self.label_kind == "teacher":
            out["label"] = {"kind": "teacher", "net": self.teacher.to_dict(), "clip": self.clip}
        else:
            out["label"] = {"kind": "custom", "sampler": self.label_sampler}
        return out

    @classmethod
    def from_dict(cls, payload):
        """Build from the JSON config form.

        The teacher may be given explicitly (``net``) or generated from
        ``activation``/``width``/``seed`` via make_teacher.
        """
        try:
            d = int(payload["d"])
            inp = payload.get("input", {"kind": "gaussian_iso"})
            lab = payload.get("label", {"kind": "custom", "sampler": "zero"})
        except (KeyError, TypeError) as exc:
            raise SpecError(f"malformed distribution spec: {exc}") from None
        kwargs = {"d": d, "input_kind": inp.get("kind", "gaussian_iso")}
        if kwargs["input_kind"] == "gaussian_cov":
            kwargs["cov"] = np.asarray(inp["cov"], dtype=np.float64)
        elif kwargs["input_kind"] == "custom":
            kwargs["input_sampler"] = inp.get("sampler")
        kind = lab.get("kind", "custom")
        kwargs["label_kind"] = kind
        if kind == "teacher":
            if "net" in lab:
                teacher = TwoLayerNet.from_dict(lab["net"])
            else:
                teacher = make_teacher(
                    lab.get("activation", "sigmoid"), d, int(lab.get("width", 5)),
                    int(lab.get("seed", 0)), float(lab.get("total_weight", 1.0)),
                )
            kwargs["teacher"] = teacher
            kwargs["clip"] = lab.get("clip")
        else:
            kwargs["label_sampler"] = lab.get("sampler")
        return cls(**kwargs)


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        Y = np.asarray(self.Y, dtype=np.float64).reshape(-1)
        if X.ndim != 2 or X.shape[0] != Y.shape[0]:
            raise ValueError(f"X shape {X.shape} incompatible with {Y.shape[0]} labels")
        if X.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("dataset entries must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x_{i + 1}" for i in range(self.d)] + ["y"])
            for row, y in zip(self.X, self.Y):
                writer.writerow([repr(float(v)) for v in row] + [repr(float(y))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        body = np.array(rows[1:], dtype=np.float64)
        return cls(body[:, :-1], body[:, -1])


def sample_budget_ok(N, d, c=DEFAULT_BUDGET_C):
    """Sample-size budget N <= exp(c d)."""
    return math.log(N) <= c * d


def sample_dataset(spec, N, seed, enforce_budget=False, budget_c=DEFAULT_BUDGET_C):
    """Draw N i.i.d. pairs; identical output for identical (spec, N, seed)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if enforce_budget and not sample_budget_ok(N, spec.d, budget_c):
        raise BudgetError(f"N={N} exceeds the budget exp({budget_c}*{spec.d})")
    rng = np.random.default_rng(seed)
    X = spec.sample_inputs(rng, N)
    Y = spec.labels_for(rng, X)
    return Dataset(X, Y)


# -- estimators ------------------------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    """A Monte-Carlo estimate with its standard error and an optional warning flag."""

    value: float
    se: float = 0.0
    flag: Optional[str] = None

    def __float__(self):
        return float(self.value)


@dataclass
class DistributionParams:
    C: Optional[float] = None
    C_err: Optional[float] = None
    M: Optional[float] = None
    M_err: Optional[float] = None
    mu_star: Optional[float] = None
    mu_star_se: Optional[float] = None
    eta: Optional[float] = None
    eta_err: Optional[float] = None
    s: float = DEFAULT_MGF_S
    mgf_plus: Optional[float] = None
    mgf_plus_se: Optional[float] = None
    mgf_minus: Optional[float] = None
    mgf_minus_se: Optional[float] = None
    lambda_d: Optional[float] = None
    lambda_se: Optional[float] = None

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value is not None and value < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.eta is not None and self.eta > 1:
            raise ValueError("eta must lie in (0, 1]")

    def to_dict(self):
        return asdict(self)


def _unit_directions(rng, n, d):
    G = rng.standard_normal((n, d))
    norms = np.linalg.norm(G, axis=1, keepdims=True)
    return G / np.where(norms == 0, 1.0, norms)


def _per_direction_means(X, dirs, stat):
    """Mean of stat(X @ w) for each direction w (rows of dirs)."""
    out = np.empty(dirs.shape[0])
    for start in range(0, dirs.shape[0], _DIRECTION_BLOCK):
        P = X @ dirs[start:start + _DIRECTION_BLOCK].T
        out[start:start + _DIRECTION_BLOCK] = stat(P, X).mean(axis=0)
    return out


def _two_stage(spec, n_directions, n_mc, seed, stat, pick, scale=1.0):
    """Choose the extremal direction on one sample, re-estimate it on a fresh one."""
    if n_directions < 1 or n_mc < 2:
        raise ValueError("need n_directions >= 1 and n_mc >= 2")
    ss = np.random.SeedSequence(seed)
    dir_seq, sel_seq, eval_seq = ss.spawn(3)
    dirs = scale * _unit_directions(np.random.default_rng(dir_seq), n_directions, spec.d)
    X_sel = spec.sample_inputs(np.random.default_rng(sel_seq), n_mc)
    with np.errstate(over="ignore", invalid="ignore"):
        means = _per_direction_means(X_sel, dirs, stat)
        means = np.where(np.isnan(means), np.inf, means)
        j = int(pick(means))
        X_eval = spec.sample_inputs(np.random.default_rng(eval_seq), n_mc)
        vals = stat((X_eval @ dirs[j])[:, None], X_eval)[:, 0]
    if not np.all(np.isfinite(vals)):
        return Estimate(float("inf"), float("inf"), "overflow")
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_mc)))


def estimate_C(spec, n_mc, target_tail, seed, grid_step=0.1):
    """Smallest grid value C with empirical P(|X|^2 <= C d) >= 1 - target_tail."""
    if n_mc < 1000:
        raise ValueError("estimate_C needs n_mc >= 1000")
    if not 0 <= target_tail < 1:
        raise ValueError("target_tail must lie in [0, 1)")
    X = spec.sample_inputs(np.random.default_rng(seed), n_mc)
    r = np.sort(np.einsum("ij,ij->i", X, X) / spec.d)
    need = math.ceil((1.0 - target_tail) * n_mc - 1e-9)
    q = r[max(need, 1) - 1]
    k = max(1, math.ceil(q / grid_step - 1e-9))
    while np.count_nonzero(r <= k * grid_step) < need:
        k += 1
    return round(k * grid_step, 12)


def estimate_mu_star(spec, n_directions=DEFAULT_DIRECTIONS, n_mc=100_000, seed=0):
    """Estimate inf over unit w of E[ReLU(w . X)] (see the module docstring)."""
    return _two_stage(spec, n_directions, n_mc, seed,
                      lambda P, X: np.maximum(P, 0.0), np.argmin)


def estimate_eta(spec, n_directions=DEFAULT_DIRECTIONS, n_mc=100_000, seed=0, grid_step=0.01):
    """Largest grid eta with min over sampled directions of P(w . X >= eta) >= eta.

    Returns Estimate(0, flag="no-eta") when no grid point qualifies.
    """
    if n_directions < 1 or n_mc < 1:
        raise ValueError("need n_directions >= 1 and n_mc >= 1")
    ss = np.random.SeedSequence(seed)
    dir_seq, x_seq = ss.spawn(2)
    dirs = _unit_directions(np.random.default_rng(dir_seq), n_directions, spec.d)
    X = spec.sample_inputs(np.random.default_rng(x_seq), n_mc)
    n_grid = int(round(1.0 / grid_step))
    grid = np.array([round(k * grid_step, 10) for k in range(n_grid, 0, -1)])
    worst = np.full(grid.shape, np.inf)
    for start in range(0, n_directions, _DIRECTION_BLOCK):
        P = np.sort(X @ dirs[start:start + _DIRECTION_BLOCK].T, axis=0)
        for col in P.T:
            frac = (n_mc - np.searchsorted(col, grid, side="left")) / n_mc
            np.minimum(worst, frac, out=worst)
    ok = np.nonzero(worst >= grid)[0]
    if ok.size == 0:
        warnings.warn("no grid value of eta satisfies the step-network condition")
        return Estimate(0.0, 0.0, "no-eta")
    eta = float(grid[ok[0]])
    p = float(worst[ok[0]])
    return Estimate(eta, math.sqrt(p * (1 - p) / n_mc))


def estimate_mgf_bounds(spec, s=DEFAULT_MGF_S, n_directions=DEFAULT_DIRECTIONS, n_mc=100_000, seed=0):
    """Estimates of sup_w E[exp(s w.X)] and sup_w E[exp(-s w.X)] over unit directions."""
    if not s >= 0:
        raise ValueError("s must be non-negative")
    plus = _two_stage(spec, n_directions, n_mc, [seed, 0],
                      lambda P, X: np.exp(s * P), np.argmax)
    minus = _two_stage(spec, n_directions, n_mc, [seed, 1],
                       lambda P, X: np.exp(-s * P), np.argmax)
    return plus, minus


def estimate_lambda(spec, C, n_directions=DEFAULT_DIRECTIONS, n_mc=100_000, seed=0):
    """Estimate sup over |w| = 1/sqrt(C d) of E[(w.X)^2 1{|X|^2 > C d}]."""
    if not C > 0:
        raise ValueError("C must be positive")
    thresh = C * spec.d

    def stat(P, X):
        tail = np.einsum("ij,ij->i", X, X) > thresh
        return P * P * tail[:, None]

    return _two_stage(spec, n_directions, n_mc, seed, stat, np.argmax,
                      scale=1.0 / math.sqrt(C * spec.d))


def symmetry_margin(spec, n_directions=DEFAULT_DIRECTIONS, n_mc=100_000, seed=0):
    """min over sampled directions of P(w.X >= 0), with its standard error."""
    return _two_stage(spec, n_directions, n_mc, seed,
                      lambda P, X: (P >= 0).astype(np.float64), np.argmin)


def check_events(data, C, M):
    """(E0, E2): sum |Y_i| <= 2MN and max |X_i|^2 <= C d."""
    e0 = bool(np.sum(np.abs(data.Y)) <= 2.0 * M * data.N)
    e2 = bool(np.max(np.einsum("ij,ij->i", data.X, data.X)) <= C * data.d)
    return e0, e2
