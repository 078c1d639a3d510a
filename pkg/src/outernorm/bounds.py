"""Closed-form evaluators for the outer-norm, failure-probability, fat-shattering and
generalization bounds.

Anything that can overflow is carried as a natural log; probabilities are reported
both as a log and as a linear value clipped to [0, 1]. The universal constant ``c`` and
the Theta(.) exponents have no known values and are explicit inputs.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from .activations import ActivationKind

E = math.e


class HypothesisError(ValueError):
    """A bound was requested without a parameter it depends on."""


@dataclass(frozen=True)
class ThetaConstants:
    tail_N: float = 0.01  # exp(-Theta(N)) -> exp(-tail_N * N)
    tail_d: float = 0.1   # exp(-Theta(d)) -> exp(-tail_d * d)

    def __post_init__(self):
        if not (self.tail_N > 0 and self.tail_d > 0):
            raise ValueError("theta constants must be positive")


@dataclass(frozen=True)
class BoundInput:
    delta: float = 0.0
    M: float = 1.0
    C: float = 1.0
    R: float = 1.0
    mu_star: Optional[float] = None
    eta: Optional[float] = None
    d: int = 1
    N: float = 1
    alpha: float = 1.0
    gamma: float = 1.0
    Mcal: float = 1.0
    A: float = 1.0
    c_universal: float = 1.0
    theta: ThetaConstants = field(default_factory=ThetaConstants)
    labels_bounded: bool = True

    def __post_init__(self):
        for name in ("delta", "M", "C", "R", "d", "N", "alpha", "gamma", "A", "c_universal"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and non-negative, got {v}")
        for name in ("mu_star", "eta"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ValueError(f"{name} must be non-negative, got {v}")
        if not self.Mcal > 0:
            raise ValueError("Mcal must be positive")
        if isinstance(self.theta, dict):
            object.__setattr__(self, "theta", ThetaConstants(**self.theta))

    def replace(self, **changes):
        payload = asdict(self)
        payload["theta"] = self.theta
        payload.update(changes)
        return BoundInput(**payload)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, payload):
        known = {k: v for k, v in payload.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class BoundReport:
    formula: str
    value: float
    log_value: Optional[float] = None
    valid: bool = True
    flags: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _safe_log(x):
    return math.log(x) if x > 0 else -math.inf


def _prob_from_log(log_p):
    if log_p >= 0:
        return 1.0
    return math.exp(log_p)


def _logaddexp(*terms):
    finite = [t for t in terms if t != -math.inf]
    if not finite:
        return -math.inf
    top = max(finite)
    if top == math.inf:
        return math.inf
    return top + math.log(sum(math.exp(t - top) for t in finite))


def _need(inp, name):
    v = getattr(inp, name)
    if v is None or not v > 0:
        raise HypothesisError(f"{name} must be given and positive for this bound")
    return v


def outer_norm_bound(activation, inp):
    """Cap on ||a||_1 for non-negative-output networks with training error <= delta^2."""
    act = ActivationKind.parse(activation)
    s = inp.delta + 2.0 * inp.M
    if act is ActivationKind.SIGMOID:
        value, formula = 3.0 * (1.0 + E) * s, "3(1+e)(delta+2M)"
    elif act is ActivationKind.RELU:
        value, formula = 4.0 * s / _need(inp, "mu_star"), "4(delta+2M)/mu*"
    elif act is ActivationKind.STEP:
        value, formula = 2.0 * s / _need(inp, "eta"), "2(delta+2M)/eta"
    else:
        raise HypothesisError(f"no outer-norm bound for activation {act.value}")
    return BoundReport(formula, value, _safe_log(value), inputs=inp.to_dict())


def _net_log_base(act, inp):
    root = math.sqrt(inp.C * inp.d)
    if act is ActivationKind.SIGMOID:
        return math.log(3.0 * inp.R * root) if inp.R * root > 0 else -math.inf
    if act is ActivationKind.RELU:
        return math.log(12.0 * root / _need(inp, "mu_star")) if root > 0 else -math.inf
    if act is ActivationKind.STEP:
        return math.log(6.0 * root / _need(inp, "eta")) if root > 0 else -math.inf
    raise HypothesisError(f"no failure probability for activation {act.value}")


def outer_norm_failure_prob(activation, inp):
    """Probability that the outer-norm bound fails, with Theta(N), Theta(d) set by ``theta``.

    log p = logaddexp(d ln(base) - tail_N N, ln N - tail_d d), where base is
    3R sqrt(Cd), 12 sqrt(Cd)/mu* or 6 sqrt(Cd)/eta. The o_N(1) term from the label
    law of large numbers is not quantified; it is dropped when labels are bounded.
    """
    act = ActivationKind.parse(activation)
    th = inp.theta
    net_term = inp.d * _net_log_base(act, inp) - th.tail_N * inp.N
    sample_term = _safe_log(inp.N) - th.tail_d * inp.d
    log_p = _logaddexp(net_term, sample_term)
    return BoundReport(
        f"{act.value}-failure",
        _prob_from_log(log_p),
        log_p,
        flags={"o_N(1)": "dropped" if inp.labels_bounded else "unquantified"},
        extra={"net_term_log": net_term, "sample_term_log": sample_term,
               "theta": asdict(th)},
        inputs=inp.to_dict(),
    )


def fsd_bound(inp):
    """c Mcal^2 A^2 d / gamma^2 * ln(Mcal A / gamma); valid for gamma <= Mcal A, A >= 1."""
    if not inp.gamma > 0:
        raise ValueError("gamma must be positive")
    scale = inp.Mcal * inp.A
    value = inp.c_universal * scale ** 2 * inp.d / inp.gamma ** 2 * math.log(scale / inp.gamma) if scale > 0 else -math.inf
    flags = {"gamma<=Mcal*A": inp.gamma <= scale, "A>=1": inp.A >= 1}
    return BoundReport("fsd", value, _safe_log(value), valid=all(flags.values()),
                       flags=flags, inputs=inp.to_dict())


def xi_value(alpha, M, Mcal, A, c=1.0):
    """(2/ln2) c 128^2 Mcal^6 A^6 max{Mcal A, 2M}^2 / alpha^2 * ln(128 Mcal^3 A^3 max{Mcal A, 2M} / alpha)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    big = max(Mcal * A, 2.0 * M)
    lead = (2.0 / math.log(2.0)) * c * 128.0 ** 2 * Mcal ** 6 * A ** 6 * big ** 2 / alpha ** 2
    arg = 128.0 * Mcal ** 3 * A ** 3 * big / alpha
    return lead * math.log(arg), arg


def xi(inp):
    value, arg = xi_value(inp.alpha, inp.M, inp.Mcal, inp.A, inp.c_universal)
    return BoundReport("xi", value, _safe_log(value), valid=arg > 1,
                       flags={"log_arg>1": arg > 1}, extra={"log_arg": arg}, inputs=inp.to_dict())


def zeta_exponent(alpha, M, A, N, d, c=1.0):
    """Exponent of zeta: xi(alpha, M, 2, A) d ln^2(2304 N A^2 max{2A,M}/alpha) - alpha^2 N / (64 max{2A,M}^2)."""
    if not N >= 1:
        raise ValueError("N must be >= 1")
    x, _ = xi_value(alpha, M, 2.0, A, c)
    big = max(2.0 * A, M)
    ln = math.log(2304.0 * N * A * A * big / alpha)
    return x * d * ln * ln - alpha * alpha * N / (64.0 * big * big)


def zeta_crossover(alpha, M, A, d, c=1.0):
    """Smallest integer N >= 1 at which the zeta exponent is negative (bisection)."""
    f = lambda n: zeta_exponent(alpha, M, A, n, d, c)
    if f(1.0) < 0:
        return 1
    lo, hi = 1.0, 2.0
    while f(hi) >= 0:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            return math.inf
    # f is concave on N >= 1 once ln(2304 N ...) > 1, so there is a single crossing in (lo, hi]
    while hi - lo > 1.0 and hi - lo > 1e-15 * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0:
            lo = mid
        else:
            hi = mid
    n = math.ceil(lo)
    while f(n) >= 0:
        n += 1
    return int(n) if n < 2 ** 63 else float(n)


def zeta(inp):
    """zeta(alpha, M, A, N) as a log (the exponent) and a linear value clipped to [0, 1]."""
    expo = zeta_exponent(inp.alpha, inp.M, inp.A, inp.N, inp.d, inp.c_universal)
    n_star = zeta_crossover(inp.alpha, inp.M, inp.A, inp.d, inp.c_universal)
    return BoundReport("zeta", _prob_from_log(expo), expo,
                       flags={"N>=N*": inp.N >= n_star},
                       extra={"N_star": n_star}, inputs=inp.to_dict())


def haussler_prob(cover_log, alpha, T, N):
    """log(4 exp(cover_log) exp(-alpha^2 N / (64 T^2)))."""
    if not (alpha > 0 and T > 0):
        raise ValueError("alpha and T must be positive")
    return math.log(4.0) + cover_log - alpha * alpha * N / (64.0 * T * T)


def norm_cap(activation, inp):
    """The outer-norm cap A fed into the generalization bound for each activation.

    ReLU rows are rescaled to norm 1/sqrt(Cd), which multiplies the cap by sqrt(Cd).
    """
    act = ActivationKind.parse(activation)
    base = outer_norm_bound(act, inp).value
    if act is ActivationKind.RELU:
        return base * math.sqrt(inp.C * inp.d)
    return base


def min_sample_size(A, M, alpha, d, c=1.0):
    """c 2^21 A^6 max{A,M}^2 / alpha^2 * d."""
    return c * 2.0 ** 21 * A ** 6 * max(A, M) ** 2 / alpha ** 2 * d


def generalization_bound(activation, inp):
    """Population-risk cap alpha + delta^2 (+ exp(-tail_d d) for ReLU) and its failure probability.

    The failure probability is zeta at the activation's norm cap plus the outer-norm
    failure probability (union bound), carried as a log.
    """
    act = ActivationKind.parse(activation)
    if not inp.alpha > 0:
        raise ValueError("alpha must be positive")
    A = norm_cap(act, inp)
    cap = inp.alpha + inp.delta ** 2
    if act is ActivationKind.RELU:
        cap += math.exp(-inp.theta.tail_d * inp.d)
    n_min = min_sample_size(A, inp.M, inp.alpha, inp.d, inp.c_universal)
    flags = {
        "N>=min_N": inp.N >= n_min,
        "alpha<=2^11 A^3 max{A,M}": inp.alpha <= 2.0 ** 11 * A ** 3 * max(A, inp.M),
        "labels_bounded": inp.labels_bounded,
    }
    z = zeta_exponent(inp.alpha, inp.M, A, max(inp.N, 1), inp.d, inp.c_universal)
    fail = outer_norm_failure_prob(act, inp).log_value
    log_p = _logaddexp(z, fail)
    return BoundReport(
        f"{act.value}-generalization",
        cap,
        _safe_log(cap),
        valid=all(flags.values()),
        flags=flags,
        extra={"A": A, "min_N": n_min, "zeta_log": z, "outer_failure_log": fail,
               "failure_log": log_p, "failure_prob": _prob_from_log(log_p)},
        inputs=inp.to_dict(),
    )


def scaling_report(activation, inp, K=None):
    """Order-level sample size at dimension d, with unit constants.

    Sigmoid and Step: d ln^2 d. Sigmoid with R = exp(d^K): d^(K+1). ReLU: d^6 ln^3 d.
    """
    act = ActivationKind.parse(activation)
    d = inp.d
    ln = math.log(d) if d > 0 else 0.0
    if act is ActivationKind.SIGMOID and K is not None:
        regime, formula, n = f"R=exp(d^{K})", "d^(K+1)", d ** (K + 1)
    elif act in (ActivationKind.SIGMOID, ActivationKind.STEP):
        regime, formula, n = "near-linear", "d ln^2 d", d * ln ** 2
    elif act is ActivationKind.RELU:
        regime, formula, n = "polynomial", "d^6 ln^3 d", d ** 6 * ln ** 3
    else:
        raise HypothesisError(f"no scaling regime for activation {act.value}")
    return {"activation": act.value, "regime": regime, "min_N_formula": formula,
            "d": d, "min_N_at_d": math.ceil(n)}
