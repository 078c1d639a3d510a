"""Seeded Monte-Carlo campaigns: fit many non-negative-output networks and check the
outer-norm caps, the population-risk cap, and the decay of the truncated second moment.

Every (trial, m_bar) cell draws its randomness from SeedSequence([master_seed, trial,
m_index]) and runs with BLAS pinned to one thread, so results do not depend on how
cells are scheduled across worker processes.
"""

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from .activations import ActivationKind
from .bounds import BoundInput, ThetaConstants, outer_norm_bound
from .data import (
    DistributionParams,
    DistributionSpec,
    check_events,
    estimate_C,
    estimate_eta,
    estimate_lambda,
    estimate_mu_star,
    sample_budget_ok,
    sample_dataset,
)
from .network import empirical_risk, outer_norm, population_risk_mc_se
from .trainer import TrainConfig, fit

DEFAULT_N_MC = 100_000
DEFAULT_C = 2.0


@dataclass
class ExperimentConfig:
    spec: DistributionSpec
    activation: ActivationKind
    N: int
    m_grid: list = field(default_factory=lambda: [10, 100, 1000])
    delta: float = 0.5
    n_trials: int = 100
    master_seed: int = 0
    trainer: TrainConfig = field(default_factory=TrainConfig)
    params: DistributionParams = field(default_factory=DistributionParams)
    alpha: float = 0.5
    n_mc: int = DEFAULT_N_MC
    theta: ThetaConstants = field(default_factory=ThetaConstants)
    enforce_budget: bool = True

    def __post_init__(self):
        self.activation = ActivationKind.parse(self.activation)
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not self.m_grid or any(m < 1 for m in self.m_grid):
            raise ValueError("m_grid must be a non-empty list of positive widths")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.enforce_budget and not sample_budget_ok(self.N, self.d):
            raise ValueError(f"N={self.N} exceeds the sample budget exp(0.5 d) at d={self.d}")

    @property
    def d(self):
        return self.spec.d

    @property
    def label_bound(self):
        M = self.spec.label_bound
        if M is None:
            M = self.params.M
        if M is None:
            raise ValueError("the label bound M is unknown; clip the teacher or set params.M")
        return float(M)

    def to_dict(self):
        return {
            "schema": 1,
            "distribution": self.spec.to_dict(),
            "activation": self.activation.value,
            "N": self.N,
            "m_grid": list(self.m_grid),
            "delta": self.delta,
            "n_trials": self.n_trials,
            "master_seed": self.master_seed,
            "trainer": self.trainer.to_dict(),
            "params": self.params.to_dict(),
            "alpha": self.alpha,
            "n_mc": self.n_mc,
            "theta": asdict(self.theta),
            "enforce_budget": self.enforce_budget,
        }

    @classmethod
    def from_dict(cls, payload):
        p = dict(payload)
        if "distribution" not in p:
            raise ValueError("config needs a 'distribution' section")
        spec = DistributionSpec.from_dict(p.pop("distribution"))
        if "d" in p and int(p.pop("d")) != spec.d:
            raise ValueError("config d does not match the distribution dimension")
        kwargs = {"spec": spec}
        if "trainer" in p:
            kwargs["trainer"] = TrainConfig.from_dict(p.pop("trainer"))
        if "params" in p:
            raw = p.pop("params")
            kwargs["params"] = DistributionParams(**{k: v for k, v in raw.items()
                                                     if k in DistributionParams.__dataclass_fields__})
        if "theta" in p:
            kwargs["theta"] = ThetaConstants(**p.pop("theta"))
        names = {f.name for f in fields(cls)}
        kwargs.update({k: v for k, v in p.items() if k in names})
        return cls(**kwargs)


@dataclass
class TrialResult:
    trial: int
    m_bar: int
    seed: int
    achieved_risk: float
    outer_norm: float
    min_a: float
    bound_value: float
    applicable: bool
    within_bound: Optional[bool]
    converged: bool
    flag: Optional[str] = None
    population_risk: Optional[float] = None
    population_se: Optional[float] = None
    gap: Optional[float] = None
    gen_cap: Optional[float] = None
    within_gen_cap: Optional[bool] = None
    E0: Optional[bool] = None
    E2: Optional[bool] = None


CSV_COLUMNS = [f.name for f in fields(TrialResult)]


def cell_seeds(master_seed, trial, m_index):
    """(data_seed, fit_seed, mc_seed) for one campaign cell."""
    state = np.random.SeedSequence([master_seed, trial, m_index]).generate_state(3, dtype=np.uint64)
    return tuple(int(s) for s in state)


def analytic_params(spec):
    """Known constants for standard Gaussian inputs: mu* = 1/sqrt(2 pi), eta = 0.3, C = 2."""
    if spec.input_kind != "gaussian_iso":
        raise ValueError("analytic constants are only known for gaussian_iso inputs")
    return DistributionParams(C=DEFAULT_C, mu_star=1.0 / math.sqrt(2.0 * math.pi), eta=0.3)


def resolve_params(cfg):
    """Fill mu*, eta and C where the activation needs them: analytic for isotropic
    Gaussian inputs, Monte-Carlo estimates (seeded by master_seed) otherwise."""
    p = replace(cfg.params)
    iso = cfg.spec.input_kind == "gaussian_iso"
    base = analytic_params(cfg.spec) if iso else None
    if p.C is None:
        p.C = base.C if iso else estimate_C(cfg.spec, DEFAULT_N_MC, 0.01, cfg.master_seed)
    if cfg.activation is ActivationKind.RELU and p.mu_star is None:
        p.mu_star = base.mu_star if iso else estimate_mu_star(cfg.spec, seed=cfg.master_seed).value
    if cfg.activation is ActivationKind.STEP and p.eta is None:
        p.eta = base.eta if iso else estimate_eta(cfg.spec, seed=cfg.master_seed).value
    return p


def _bound_for(cfg, params):
    inp = BoundInput(delta=cfg.delta, M=cfg.label_bound, C=params.C or DEFAULT_C,
                     mu_star=params.mu_star, eta=params.eta, d=cfg.d, N=cfg.N,
                     alpha=cfg.alpha, theta=cfg.theta)
    return outer_norm_bound(cfg.activation, inp).value


def gen_cap(cfg):
    cap = cfg.alpha + cfg.delta ** 2
    if cfg.activation is ActivationKind.RELU:
        cap += math.exp(-cfg.theta.tail_d * cfg.d)
    return cap


def _run_cell(args):
    cfg, params, trial, m_index, with_population = args
    m_bar = cfg.m_grid[m_index]
    data_seed, fit_seed, mc_seed = cell_seeds(cfg.master_seed, trial, m_index)
    bound = _bound_for(cfg, params)
    with threadpool_limits(limits=1):
        data = sample_dataset(cfg.spec, cfg.N, data_seed)
        tcfg = replace(cfg.trainer, m_bar=m_bar, seed=fit_seed)
        try:
            res = fit(data, cfg.activation, tcfg)
        except (ValueError, FloatingPointError) as exc:
            return TrialResult(trial, m_bar, data_seed, math.nan, math.nan, math.nan, bound,
                               False, None, False, flag=f"fit-error: {exc}")
        risk = res.risk
        norm = outer_norm(res.net)
        applicable = bool(risk <= cfg.delta ** 2)
        e0, e2 = check_events(data, params.C or DEFAULT_C, cfg.label_bound)
        out = TrialResult(
            trial=trial, m_bar=m_bar, seed=data_seed, achieved_risk=risk, outer_norm=norm,
            min_a=float(res.net.a.min()), bound_value=bound, applicable=applicable,
            within_bound=bool(norm <= bound) if applicable else None,
            converged=res.converged, flag=res.flag, E0=e0, E2=e2,
        )
        if with_population:
            pop, se = population_risk_mc_se(res.net, cfg.spec, cfg.n_mc, mc_seed)
            cap = gen_cap(cfg)
            out.population_risk = pop
            out.population_se = se
            out.gap = abs(risk - pop)
            out.gen_cap = cap
            out.within_gen_cap = bool(pop <= cap) if applicable else None
    return out


def _run(cfg, with_population, jobs):
    params = resolve_params(cfg)
    cells = [(cfg, params, t, k, with_population)
             for t in range(cfg.n_trials) for k in range(len(cfg.m_grid))]
    if jobs is None or jobs <= 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map preserves submission order, i.e. (trial, m_index)
        return list(pool.map(_run_cell, cells, chunksize=max(1, len(cells) // (4 * jobs))))


def run_norm_verification(cfg, jobs=1):
    """Fit every (trial, m_bar) cell and compare the outer norm with its cap.

    Cells whose fit leaves training error above delta^2 are kept but marked not
    applicable; within_bound is None for them.
    """
    return _run(cfg, False, jobs)


def run_generalization_gap(cfg, alpha=None, n_mc=None, jobs=1):
    """As run_norm_verification, plus a Monte-Carlo population risk for every fit."""
    if cfg.spec.label_bound is None:
        raise ValueError("generalization campaigns need bounded labels")
    if alpha is not None or n_mc is not None:
        cfg = replace(cfg, alpha=cfg.alpha if alpha is None else alpha,
                      n_mc=cfg.n_mc if n_mc is None else n_mc)
    return _run(cfg, True, jobs)


def generalization_gap(net, data, dist, n_mc, seed):
    """|empirical risk on data - Monte-Carlo population risk under dist|."""
    pop, _ = population_risk_mc_se(net, dist, n_mc, seed)
    return abs(empirical_risk(net, data) - pop)


def _spec_at_dim(spec, d):
    if spec.input_kind == "gaussian_iso":
        return DistributionSpec(d, "gaussian_iso", label_kind="custom", label_sampler="zero")
    if spec.input_kind == "custom":
        return DistributionSpec(d, "custom", input_sampler=spec.input_sampler,
                                label_kind="custom", label_sampler="zero")
    raise ValueError("lambda decay needs an input law defined in every dimension")


def run_lambda_decay(spec, C, d_grid, n_directions=256, n_mc=DEFAULT_N_MC, seed=0):
    """Estimate lambda(d) over d_grid and the least-squares slope of ln lambda vs d.

    The slope is nan when fewer than two estimates are positive.
    """
    d_grid = list(d_grid)
    if any(b <= a for a, b in zip(d_grid, d_grid[1:])):
        raise ValueError("d_grid must be strictly increasing")
    rows = []
    for i, d in enumerate(d_grid):
        est = estimate_lambda(_spec_at_dim(spec, d), C, n_directions, n_mc,
                              seed=int(np.random.SeedSequence([seed, i]).generate_state(1)[0]))
        rows.append({"d": d, "lambda": est.value, "se": est.se, "flag": est.flag})
    pos = [(r["d"], math.log(r["lambda"])) for r in rows if r["lambda"] > 0]
    slope = math.nan
    if len(pos) >= 2:
        x, y = np.array(pos).T
        slope = float(np.polyfit(x, y, 1)[0])
    return {"rows": rows, "slope": slope, "C": C}


def _quantiles(values):
    v = np.asarray([x for x in values if x is not None and math.isfinite(x)], dtype=np.float64)
    if v.size == 0:
        return None
    q = np.quantile(v, [0.25, 0.5, 0.75])
    return {"q25": float(q[0]), "q50": float(q[1]), "q75": float(q[2])}


def _rates(rows, key):
    app = [r for r in rows if r.applicable]
    bad = sum(1 for r in app if getattr(r, key) is False)
    return len(app), bad, (bad / len(app) if app else math.nan)


def summarize(results):
    """Applicable count, violations and violation rate, overall and per m_bar."""
    if not results:
        raise ValueError("cannot summarize an empty result list")
    n_app, bad, rate = _rates(results, "within_bound")
    out = {
        "cells": len(results),
        "applicable": n_app,
        "violations": bad,
        "violation_rate": rate,
        "outer_norm": _quantiles(r.outer_norm for r in results if r.applicable),
        "per_m_bar": {},
    }
    if any(r.population_risk is not None for r in results):
        _, gbad, grate = _rates(results, "within_gen_cap")
        out["gen_violations"] = gbad
        out["gen_violation_rate"] = grate
        out["gap"] = _quantiles(r.gap for r in results if r.applicable)
    for m in sorted({r.m_bar for r in results}):
        rows = [r for r in results if r.m_bar == m]
        a, b, p = _rates(rows, "within_bound")
        entry = {"cells": len(rows), "applicable": a, "violations": b, "violation_rate": p,
                 "outer_norm": _quantiles(r.outer_norm for r in rows if r.applicable)}
        if any(r.gap is not None for r in rows):
            entry["gap"] = _quantiles(r.gap for r in rows if r.applicable)
        out["per_m_bar"][str(m)] = entry
    return out


def overparameterization_ok(summary):
    """True when no m_bar's violation rate exceeds the smallest m_bar's by more than two
    binomial standard errors (pooled rate)."""
    per = summary["per_m_bar"]
    keys = sorted(per, key=int)
    base = per[keys[0]]
    total_app = sum(per[k]["applicable"] for k in keys)
    if total_app == 0:
        return True
    pooled = sum(per[k]["violations"] for k in keys) / total_app
    for k in keys[1:]:
        n = per[k]["applicable"]
        if n == 0 or base["applicable"] == 0:
            continue
        se = math.sqrt(pooled * (1 - pooled) * (1 / n + 1 / base["applicable"]))
        if per[k]["violation_rate"] > base["violation_rate"] + 2 * se:
            return False
    return True


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results_csv(results, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in results:
            writer.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])


def _clean(o):
    # JSON has no NaN; undefined rates are written as null
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, float) and not math.isfinite(o):
        return None
    return o


def write_summary_json(summary, path):
    with open(path, "w") as fh:
        json.dump(_clean(summary), fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
