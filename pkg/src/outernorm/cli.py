"""Command-line entry point: ``python -m outernorm <subcommand> ...``.

Exit codes: 0 success, 1 a hypothesis check failed under --strict, 2 usage or config error.
"""

import argparse
import json
import math
import sys
from dataclasses import asdict

import numpy as np

from . import bounds as B
from .activations import ActivationKind
from .counterexample import CounterexampleSpec, verify_invariance
from .data import (
    DistributionSpec,
    estimate_C,
    estimate_eta,
    estimate_lambda,
    estimate_mgf_bounds,
    estimate_mu_star,
    make_teacher,
    sample_dataset,
    symmetry_margin,
)
from .experiments import (
    ExperimentConfig,
    overparameterization_ok,
    run_generalization_gap,
    run_lambda_decay,
    run_norm_verification,
    summarize,
    write_results_csv,
    write_summary_json,
)
from .network import outer_norm
from .trainer import TrainConfig, fit

SCHEMA = 1


class ConfigError(Exception):
    pass


def _dump(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _clean(o):
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (np.floating, np.integer)):
        o = o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return None if math.isnan(o) else ("inf" if o > 0 else "-inf")
    if isinstance(o, ActivationKind):
        return o.value
    return o


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_value(raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_config(path, overrides=()):
    """Read a JSON config and apply ``key=value`` overrides (values parsed as JSON)."""
    payload = {}
    if path:
        try:
            with open(path) as fh:
                payload = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise ConfigError("config must be a JSON object")
    schema = payload.pop("schema", SCHEMA)
    if schema != SCHEMA:
        raise ConfigError(f"unsupported config schema {schema!r}; expected {SCHEMA}")
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        payload[key.strip()] = _parse_value(raw)
    return payload


def _experiment_config(args):
    payload = load_config(args.config, args.set)
    if args.seed is not None:
        payload["master_seed"] = args.seed
    try:
        return ExperimentConfig.from_dict(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad experiment config: {exc}") from None


def _bound_input(args):
    theta = B.ThetaConstants(args.theta_N, args.theta_d)
    return B.BoundInput(delta=args.delta, M=args.M, C=args.C, R=args.R, mu_star=args.mu_star,
                        eta=args.eta, d=args.d, N=args.N, alpha=args.alpha, gamma=args.gamma,
                        Mcal=args.Mcal, A=args.A, c_universal=args.c, theta=theta)


# -- subcommands ------------------------------------------------------------------------

def cmd_bounds(args):
    inp = _bound_input(args)
    kinds = ["outer_norm", "failure", "fsd", "xi", "zeta", "generalization"] if args.kind == "all" else [args.kind]
    reports = {}
    for kind in kinds:
        if kind == "outer_norm":
            reports[kind] = B.outer_norm_bound(args.activation, inp)
        elif kind == "failure":
            reports[kind] = B.outer_norm_failure_prob(args.activation, inp)
        elif kind == "fsd":
            reports[kind] = B.fsd_bound(inp)
        elif kind == "xi":
            reports[kind] = B.xi(inp)
        elif kind == "zeta":
            reports[kind] = B.zeta(inp)
        elif kind == "generalization":
            reports[kind] = B.generalization_bound(args.activation, inp)
    if len(reports) == 1:
        body = reports[kinds[0]].to_dict()
    else:
        body = {k: r.to_dict() for k, r in reports.items()}
    _emit(_dump(body), args.out)
    if args.strict and not all(r.valid for r in reports.values()):
        return 1
    return 0


def cmd_scaling(args):
    lines = ["activation,regime,min_N_formula,d,min_N_at_d"]
    for act in args.activations:
        for d in args.d_grid:
            rep = B.scaling_report(act, B.BoundInput(d=d), K=args.K)
            lines.append(",".join(str(rep[k]) for k in
                                  ("activation", "regime", "min_N_formula", "d", "min_N_at_d")))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _spec_from_args(args):
    payload = load_config(args.config, args.set)
    if "distribution" in payload:
        payload = payload["distribution"]
    if not payload:
        payload = {"d": args.d, "input": {"kind": "gaussian_iso"}}
    try:
        return DistributionSpec.from_dict(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad distribution config: {exc}") from None


def cmd_estimate_params(args):
    spec = _spec_from_args(args)
    seed = args.seed or 0
    kw = {"n_directions": args.n_directions, "n_mc": args.n_mc}
    C = estimate_C(spec, args.n_mc, args.target_tail, seed)
    mu = estimate_mu_star(spec, seed=seed + 1, **kw)
    eta = estimate_eta(spec, seed=seed + 2, **kw)
    plus, minus = estimate_mgf_bounds(spec, s=args.s, seed=seed + 3, **kw)
    lam = estimate_lambda(spec, C, seed=seed + 4, **kw)
    sym = symmetry_margin(spec, seed=seed + 5, **kw)
    body = {"d": spec.d, "C": C, "mu_star": asdict(mu), "eta": asdict(eta),
            "s": args.s, "mgf_plus": asdict(plus), "mgf_minus": asdict(minus),
            "lambda_d": asdict(lam), "symmetry_margin": asdict(sym), "label_bound": spec.label_bound}
    _emit(_dump(body), args.out)
    return 0


def cmd_net(args):
    net = make_teacher(args.activation, args.d, args.width, args.seed or 0, args.total_weight)
    _emit(_dump(net.to_dict()), args.out)
    return 0


def cmd_train(args):
    payload = load_config(args.config, args.set)
    if args.seed is not None:
        payload["seed"] = args.seed
    try:
        spec = DistributionSpec.from_dict(payload["distribution"])
        N = int(payload.get("N", 1000))
        activation = ActivationKind.parse(payload.get("activation", "sigmoid"))
        tcfg = TrainConfig.from_dict(payload.get("trainer", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad train config: {exc}") from None
    seed = int(payload.get("seed", 0))
    seeds = np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)
    data = sample_dataset(spec, N, int(seeds[0]))
    tcfg.seed = int(seeds[1])
    res = fit(data, activation, tcfg)
    body = {"risk": res.risk, "outer_norm": outer_norm(res.net), "n_iter": res.n_iter,
            "converged": res.converged, "flag": res.flag, "kkt_residual": res.kkt_residual,
            "m_bar": tcfg.m_bar, "method": tcfg.method, "N": N, "d": spec.d}
    if args.net_out:
        _emit(_dump(res.net.to_dict()), args.net_out)
    _emit(_dump(body), args.out)
    return 0


def _campaign(args, with_population):
    cfg = _experiment_config(args)
    if with_population:
        results = run_generalization_gap(cfg, jobs=args.jobs)
    else:
        results = run_norm_verification(cfg, jobs=args.jobs)
    summary = summarize(results)
    summary["overparameterization_ok"] = overparameterization_ok(summary)
    if args.out:
        write_results_csv(results, args.out)
    if args.summary:
        write_summary_json(summary, args.summary)
    if not args.out and not args.summary:
        sys.stdout.write(_dump(summary))
    key = "gen_violations" if with_population else "violations"
    if args.strict and (summary.get(key) or not summary["overparameterization_ok"]):
        return 1
    return 0


def cmd_verify_norm(args):
    return _campaign(args, False)


def cmd_verify_gen(args):
    return _campaign(args, True)


def cmd_lambda_decay(args):
    spec = DistributionSpec(args.d_grid[0], "gaussian_iso", label_kind="custom", label_sampler="zero")
    table = run_lambda_decay(spec, args.C, args.d_grid, args.n_directions, args.n_mc, args.seed or 0)
    _emit(_dump(table), args.out)
    if args.strict and not table["slope"] < 0:
        return 1
    return 0


def cmd_counterexample(args):
    seed = args.seed or 0
    s_teacher, s_v, s_data = np.random.SeedSequence(seed).generate_state(3, dtype=np.uint64)
    teacher = make_teacher(args.activation, args.d, args.width, int(s_teacher), args.total_weight)
    v = np.random.default_rng(int(s_v)).standard_normal(args.d)
    spec = CounterexampleSpec(teacher, args.z, args.nu, v)
    dist = DistributionSpec(args.d, "gaussian_iso", teacher=teacher)
    report = verify_invariance(spec, sample_dataset(dist, args.N, int(s_data)))
    report.update({"z": args.z, "nu": args.nu, "m_star": teacher.width})
    _emit(_dump(report), args.out)
    return 0


# -- parser -----------------------------------------------------------------------------

def _common(p, config=True):
    if config:
        p.add_argument("--config", help="JSON config file (schema 1)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a top-level config key; VALUE is parsed as JSON")
    p.add_argument("--out", help="write the main output here instead of stdout")
    p.add_argument("--seed", type=int, default=None, help="seed for every random draw")
    p.add_argument("--strict", action="store_true",
                   help="exit 1 when a hypothesis check or verification fails")


def build_parser():
    parser = argparse.ArgumentParser(prog="outernorm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="subcommand")
    sub.required = True
    acts = [a.value for a in (ActivationKind.SIGMOID, ActivationKind.RELU, ActivationKind.STEP)]

    p = sub.add_parser("bounds", help="evaluate outer-norm caps, failure probabilities, FSD, xi, zeta, generalization caps",
                       description="Outer-norm caps 3(1+e)(delta+2M), 4(delta+2M)/mu*, 2(delta+2M)/eta; "
                                   "their failure probabilities; the fat-shattering bound; xi and zeta; "
                                   "the population-risk cap alpha+delta^2. Prints JSON.")
    _common(p, config=False)
    p.add_argument("--activation", choices=acts, default="sigmoid")
    p.add_argument("--kind", default="outer_norm",
                   choices=["outer_norm", "failure", "fsd", "xi", "zeta", "generalization", "all"])
    for name, default in (("delta", 0.0), ("M", 1.0), ("C", 1.0), ("R", 1.0), ("alpha", 1.0),
                          ("gamma", 1.0), ("Mcal", 1.0), ("A", 1.0), ("c", 1.0)):
        p.add_argument(f"--{name}", type=float, default=default)
    p.add_argument("--mu-star", dest="mu_star", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--N", type=float, default=1)
    p.add_argument("--theta-N", dest="theta_N", type=float, default=0.01)
    p.add_argument("--theta-d", dest="theta_d", type=float, default=0.1)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("scaling", help="order-level sample sizes per activation (CSV)",
                       description="Sample-size regimes with unit constants: d ln^2 d (sigmoid, step), "
                                   "d^(K+1) (sigmoid with R = exp(d^K)), d^6 ln^3 d (ReLU).")
    _common(p, config=False)
    p.add_argument("--activations", nargs="+", choices=acts, default=acts)
    p.add_argument("--d-grid", dest="d_grid", nargs="+", type=int, default=[10, 100, 1000])
    p.add_argument("--K", type=float, default=None, help="sigmoid weight radius R = exp(d^K)")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("estimate-params", help="Monte-Carlo estimates of C, mu*, eta, MGF bounds, lambda(d)",
                       description="Estimate the distribution constants: tail constant C, "
                                   "mu* = inf_w E[ReLU(w.X)], eta with inf_w P(w.X >= eta) >= eta, "
                                   "the MGF bounds at s, and lambda(d). Uses the config's "
                                   "'distribution' section, or isotropic Gaussian at --d.")
    _common(p)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--n-mc", dest="n_mc", type=int, default=100_000)
    p.add_argument("--n-directions", dest="n_directions", type=int, default=256)
    p.add_argument("--target-tail", dest="target_tail", type=float, default=0.01)
    p.add_argument("--s", type=float, default=1.0)
    p.set_defaults(func=cmd_estimate_params)

    p = sub.add_parser("net", help="build a teacher network and print it as JSON",
                       description="Teacher two-layer network with equal non-negative output weights.")
    _common(p, config=False)
    p.add_argument("--activation", choices=[a.value for a in ActivationKind], default="sigmoid")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--width", type=int, default=5)
    p.add_argument("--total-weight", dest="total_weight", type=float, default=1.0)
    p.set_defaults(func=cmd_net)

    p = sub.add_parser("train", help="fit one non-negative-output network",
                       description="Sample a dataset from the config's distribution and fit it with "
                                   "NNLS over random features or projected gradient descent.")
    _common(p)
    p.add_argument("--net-out", dest="net_out", help="write the fitted network JSON here")
    p.set_defaults(func=cmd_train)

    for name, func, text in (
        ("verify-norm", cmd_verify_norm,
         "campaign checking that fits with training error <= delta^2 respect the outer-norm cap"),
        ("verify-gen", cmd_verify_gen,
         "campaign checking population risk <= alpha + delta^2 and the generalization gap"),
    ):
        p = sub.add_parser(name, help=text, description=text[0].upper() + text[1:] + ". "
                           "Writes one CSV row per (trial, m_bar) cell and a JSON summary.")
        _common(p)
        p.add_argument("--summary", help="write the JSON summary here")
        p.add_argument("--jobs", type=int, default=1, help="worker processes; output does not depend on it")
        p.set_defaults(func=func)

    p = sub.add_parser("lambda-decay", help="lambda(d) over a grid of dimensions, with the ln-slope",
                       description="lambda(d) = sup_w E[(w.X)^2 1{|X|^2 > C d}] at |w| = 1/sqrt(C d) "
                                   "for isotropic Gaussian X, and the least-squares slope of ln lambda vs d.")
    _common(p, config=False)
    p.add_argument("--C", type=float, default=2.0)
    p.add_argument("--d-grid", dest="d_grid", nargs="+", type=int, default=[10, 20, 40])
    p.add_argument("--n-mc", dest="n_mc", type=int, default=100_000)
    p.add_argument("--n-directions", dest="n_directions", type=int, default=256)
    p.set_defaults(func=cmd_lambda_decay)

    p = sub.add_parser("counterexample", help="inflate a teacher with cancelling +nu/-nu units",
                       description="Append 2z units with a shared row and weights +nu/-nu to a teacher: "
                                   "training error is unchanged while ||a||_1 grows by exactly 2 z nu.")
    _common(p, config=False)
    p.add_argument("--z", type=int, default=3)
    p.add_argument("--nu", type=float, default=10.0)
    p.add_argument("--activation", choices=[a.value for a in ActivationKind], default="sigmoid")
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--width", type=int, default=5)
    p.add_argument("--total-weight", dest="total_weight", type=float, default=1.0)
    p.add_argument("--N", type=int, default=1000)
    p.set_defaults(func=cmd_counterexample)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (B.HypothesisError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
