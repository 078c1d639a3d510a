import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
import scipy.optimize
from hypothesis import assume, given, strategies as st

from outernorm.bounds import (
    BoundInput,
    HypothesisError,
    ThetaConstants,
    fsd_bound,
    generalization_bound,
    haussler_prob,
    min_sample_size,
    norm_cap,
    outer_norm_bound,
    outer_norm_failure_prob,
    scaling_report,
    xi,
    xi_value,
    zeta,
    zeta_crossover,
    zeta_exponent,
)

MU = 1 / math.sqrt(2 * math.pi)
pos = st.floats(0.05, 20)


def xi_oracle(alpha, M, Mcal, A, c):
    getcontext().prec = 50
    D = lambda v: Decimal(repr(v))
    big = max(D(Mcal) * D(A), 2 * D(M))
    lead = 2 / Decimal(2).ln() * D(c) * 128 ** 2 * D(Mcal) ** 6 * D(A) ** 6 * big ** 2 / D(alpha) ** 2
    return float(lead * (128 * D(Mcal) ** 3 * D(A) ** 3 * big / D(alpha)).ln())


def test_outer_norm_examples():
    assert outer_norm_bound("sigmoid", BoundInput(delta=0.5, M=1)).value == pytest.approx(3 * (1 + math.e) * 2.5, abs=1e-12)
    assert outer_norm_bound("relu", BoundInput(delta=0.5, M=1, mu_star=MU)).value == pytest.approx(10 * math.sqrt(2 * math.pi), rel=1e-14)
    assert outer_norm_bound("step", BoundInput(delta=0.5, M=1, eta=0.3)).value == pytest.approx(2 * 2.5 / 0.3, rel=1e-14)


def test_outer_norm_needs_parameters():
    with pytest.raises(HypothesisError):
        outer_norm_bound("relu", BoundInput(delta=0.5))
    with pytest.raises(HypothesisError):
        outer_norm_bound("step", BoundInput(delta=0.5, eta=0.0))
    with pytest.raises(HypothesisError):
        outer_norm_bound("softplus", BoundInput())


@given(st.floats(0, 5), st.floats(0, 5), st.floats(0.05, 2), st.floats(0.05, 1))
def test_outer_norm_monotone(delta, M, mu, eta):
    base = BoundInput(delta=delta, M=M, mu_star=mu, eta=eta)
    for act in ("sigmoid", "relu", "step"):
        v = outer_norm_bound(act, base).value
        assert outer_norm_bound(act, base.replace(delta=delta + 0.1)).value > v
        assert outer_norm_bound(act, base.replace(M=M + 0.1)).value > v
    if delta + M > 0:
        assert outer_norm_bound("relu", base.replace(mu_star=mu * 1.1)).value < outer_norm_bound("relu", base).value
        assert outer_norm_bound("step", base.replace(eta=eta * 0.9)).value > outer_norm_bound("step", base).value


def test_evaluators_are_pure():
    inp = BoundInput(delta=0.3, M=1, mu_star=0.4, eta=0.2, d=7, N=1234, alpha=0.3, A=2.0, C=2.0)
    for act in ("sigmoid", "relu", "step"):
        assert generalization_bound(act, inp).to_dict() == generalization_bound(act, inp).to_dict()


def test_failure_prob_sigmoid_term():
    rep = outer_norm_failure_prob("sigmoid", BoundInput(R=1, C=2, d=10, N=10_000))
    expect = 10 * math.log(3 * math.sqrt(20)) - 100
    assert rep.extra["net_term_log"] == pytest.approx(expect, abs=1e-12)
    assert rep.extra["net_term_log"] == pytest.approx(-74.035, abs=1e-3)
    assert rep.extra["sample_term_log"] == pytest.approx(math.log(10_000) - 1.0)
    assert rep.log_value == pytest.approx(np.logaddexp(expect, math.log(10_000) - 1.0))
    assert rep.value == 1.0 and rep.flags["o_N(1)"] == "dropped"
    assert rep.extra["theta"] == {"tail_N": 0.01, "tail_d": 0.1}


def test_failure_prob_relu_step_bases():
    inp = BoundInput(C=2, d=10, N=10_000, mu_star=0.4, eta=0.3)
    relu = outer_norm_failure_prob("relu", inp).extra["net_term_log"]
    step = outer_norm_failure_prob("step", inp).extra["net_term_log"]
    assert relu - step == pytest.approx(10 * (math.log(12 / 0.4) - math.log(6 / 0.3)), abs=1e-10)


def test_failure_prob_decreases_in_N():
    reps = [outer_norm_failure_prob("sigmoid", BoundInput(R=1, C=2, d=40, N=n)) for n in (1e3, 1e4, 1e5, 1e6)]
    logs = [r.extra["net_term_log"] for r in reps]
    assert all(b < a for a, b in zip(logs, logs[1:]))
    assert logs[-1] < -9000
    # the N exp(-tail_d d) term grows with N, so the total only falls once d is large
    assert outer_norm_failure_prob("step", BoundInput(eta=0.3, d=400, N=1e6)).value < 1e-10


def test_theta_validation():
    with pytest.raises(ValueError):
        ThetaConstants(0.0, 0.1)
    with pytest.raises(ValueError):
        BoundInput(delta=-1)


def test_fsd_examples():
    rep = fsd_bound(BoundInput(c_universal=1, Mcal=2, A=1, d=10, gamma=1))
    assert rep.value == pytest.approx(40 * math.log(2), rel=1e-14) and rep.valid
    assert fsd_bound(BoundInput(Mcal=2, A=1.5, d=10, gamma=3)).value == 0.0
    twice = fsd_bound(BoundInput(Mcal=2, A=1, d=20, gamma=0.5)).value
    assert twice == 2 * fsd_bound(BoundInput(Mcal=2, A=1, d=10, gamma=0.5)).value


def test_fsd_hypothesis_flags():
    assert not fsd_bound(BoundInput(Mcal=1, A=1, gamma=2)).valid
    assert not fsd_bound(BoundInput(Mcal=4, A=0.5, gamma=1)).valid


def test_xi_reference_value():
    # ln(2048) / ln 2 = 11, so the value is the integer 2 * 16384 * 64 * 4 * 11
    assert xi(BoundInput(alpha=1, M=1, Mcal=2, A=1, c_universal=1)).value == pytest.approx(92274688, rel=1e-12)


@given(pos, pos, st.floats(0.1, 5), st.floats(1, 5), st.floats(0.1, 3))
def test_xi_matches_oracle(alpha, M, Mcal, A, c):
    assert xi_value(alpha, M, Mcal, A, c)[0] == pytest.approx(xi_oracle(alpha, M, Mcal, A, c), rel=1e-6)


@given(pos, pos, st.floats(1, 5))
def test_xi_scaling_properties(alpha, M, A):
    v, arg = xi_value(alpha, M, 2.0, A)
    assume(arg / 2 > math.e)
    assert xi_value(2 * alpha, M, 2.0, A)[0] < v
    assert xi_value(alpha, M, 2.0, A, c=2.0)[0] == pytest.approx(2 * v, rel=1e-15)
    assert xi_value(alpha, M, 2.0, A * 1.01)[0] > v


def test_xi_domain():
    with pytest.raises(ValueError):
        xi(BoundInput(alpha=0))


def test_zeta_exponent_formula():
    inp = BoundInput(alpha=0.7, M=1.3, A=1.1, N=5e5, d=3, c_universal=0.5)
    x, _ = xi_value(0.7, 1.3, 2, 1.1, 0.5)
    big = max(2.2, 1.3)
    expect = x * 3 * math.log(2304 * 5e5 * 1.1 ** 2 * big / 0.7) ** 2 - 0.49 * 5e5 / (64 * big ** 2)
    assert zeta(inp).log_value == pytest.approx(expect, rel=1e-13)


def test_zeta_crossover_against_root_finder():
    f = lambda n: zeta_exponent(1, 1, 1, n, 1, 1)
    n_star = zeta_crossover(1, 1, 1, 1, 1)
    root = scipy.optimize.brentq(f, 1e6, 1e20, xtol=1.0, rtol=1e-15)
    assert abs(n_star - root) <= 2 + 1e-12 * root
    assert f(n_star) < 0 <= f(n_star - 1)
    rep = zeta(BoundInput(alpha=1, M=1, A=1, d=1, N=n_star))
    assert rep.extra["N_star"] == n_star and rep.log_value < 0


def test_zeta_decreasing_past_crossover():
    n_star = zeta_crossover(1, 1, 1, 1, 1)
    vals = [zeta_exponent(1, 1, 1, n_star * k, 1, 1) for k in (1, 2, 4, 8, 16)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert zeta_exponent(1, 1, 1, 1e30, 1, 1) < -1e20


def test_haussler():
    assert haussler_prob(0.0, 1, 1, 6400) == pytest.approx(math.log(4) - 100, abs=1e-12)
    assert haussler_prob(3.5, 0.2, 1.7, 0) == pytest.approx(math.log(4) + 3.5)
    a = haussler_prob(2.0, 0.5, 1.0, 1000)
    assert haussler_prob(2.0, 0.5, 2.0, 4000) == pytest.approx(a, rel=1e-14)
    with pytest.raises(ValueError):
        haussler_prob(0.0, 0.0, 1, 10)


def test_min_sample_size():
    assert min_sample_size(1, 1, 1, 1) == 2 ** 21
    rep = generalization_bound("sigmoid", BoundInput(delta=0.5, M=1, alpha=1, d=1, N=2 ** 21))
    assert rep.extra["min_N"] == pytest.approx(2 ** 21 * (3 * (1 + math.e) * 2.5) ** 8)


def test_generalization_caps():
    rep = generalization_bound("sigmoid", BoundInput(alpha=0.1, delta=0.5))
    assert rep.value == pytest.approx(0.35, abs=1e-15)
    relu = generalization_bound("relu", BoundInput(alpha=0.1, delta=0.5, mu_star=MU, d=20, C=2))
    assert relu.value == pytest.approx(0.35 + math.exp(-2.0), abs=1e-15)
    step = generalization_bound("step", BoundInput(alpha=0.1, delta=0.5, eta=0.3))
    assert step.value == pytest.approx(0.35, abs=1e-15)
    assert not rep.valid and not rep.flags["N>=min_N"]


def test_generalization_norm_caps():
    inp = BoundInput(delta=0.5, M=1, mu_star=MU, eta=0.3, C=2, d=8)
    assert norm_cap("sigmoid", inp) == pytest.approx(3 * (1 + math.e) * 2.5)
    assert norm_cap("relu", inp) == pytest.approx(4 * 4 * 2.5 / MU)
    assert norm_cap("step", inp) == pytest.approx(5 / 0.3)


def test_generalization_failure_is_union():
    inp = BoundInput(delta=0.5, M=1, alpha=0.5, d=5, N=1e9, R=1, C=2)
    rep = generalization_bound("sigmoid", inp)
    z = rep.extra["zeta_log"]
    f = rep.extra["outer_failure_log"]
    assert rep.extra["failure_log"] == pytest.approx(np.logaddexp(z, f))


def test_scaling_reports():
    step = scaling_report("step", BoundInput(d=100))
    assert step["min_N_at_d"] == math.ceil(100 * math.log(100) ** 2) == 2121
    sig = scaling_report("sigmoid", BoundInput(d=30), K=1)
    assert sig["min_N_formula"] == "d^(K+1)" and sig["min_N_at_d"] == 900
    relu = scaling_report("relu", BoundInput(d=10))
    assert relu["min_N_at_d"] == pytest.approx(1e6 * math.log(10) ** 3, rel=1e-6)
    assert scaling_report("sigmoid", BoundInput(d=100))["regime"] == "near-linear"
