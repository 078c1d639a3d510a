"""Outer-norm campaigns for sigmoid, ReLU and step students (configs/norm_*.json).

Writes results/norm_<activation>.csv and .json and prints one summary line per activation.
"""

import argparse
import json
from pathlib import Path

from outernorm.experiments import (
    ExperimentConfig,
    overparameterization_ok,
    run_norm_verification,
    summarize,
    write_results_csv,
    write_summary_json,
)

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--activations", nargs="+", default=["sigmoid", "relu", "step"])
    ap.add_argument("--trials", type=int, default=None, help="override n_trials")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out-dir", default=str(ROOT / "results"))
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for act in args.activations:
        payload = json.loads((ROOT / "configs" / f"norm_{act}.json").read_text())
        if args.trials:
            payload["n_trials"] = args.trials
        cfg = ExperimentConfig.from_dict(payload)
        results = run_norm_verification(cfg, jobs=args.jobs)
        summary = summarize(results)
        summary["overparameterization_ok"] = overparameterization_ok(summary)
        write_results_csv(results, out / f"norm_{act}.csv")
        write_summary_json(summary, out / f"norm_{act}.json")
        per = {m: (v["violations"], v["applicable"], v["outer_norm"]["q50"]) for m, v in summary["per_m_bar"].items()}
        print(f"{act:8s} bound {results[0].bound_value:.3f}  violations {summary['violations']}/"
              f"{summary['applicable']}  per m_bar (viol, applicable, median ||a||_1) {per}")


if __name__ == "__main__":
    main()
