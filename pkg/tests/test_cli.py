import json
import subprocess
import sys

import pytest

from outernorm.cli import build_parser, main
from outernorm.experiments import ExperimentConfig
from outernorm.trainer import TrainConfig

from conftest import teacher_spec

SUBCOMMANDS = ["bounds", "scaling", "estimate-params", "net", "train", "verify-norm", "verify-gen",
               "lambda-decay", "counterexample"]


def run_json(capsys, argv):
    assert main(argv) == 0
    return json.loads(capsys.readouterr().out)


def campaign_config(tmp_path):
    cfg = ExperimentConfig(spec=teacher_spec("relu", d=5, width=3, seed=2, clip=1.0), activation="relu",
                           N=150, m_grid=[5, 30], n_trials=2, trainer=TrainConfig(max_iters=200),
                           enforce_budget=False, n_mc=2000)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    return path


def test_bounds_relu_example(capsys):
    body = run_json(capsys, ["bounds", "--activation", "relu", "--delta", "0.5", "--M", "1",
                             "--mu-star", "0.3989"])
    assert body["value"] == pytest.approx(4 * 2.5 / 0.3989, rel=1e-12)
    assert abs(body["value"] - 25.066) < 5e-3


def test_bounds_all_kinds(capsys):
    body = run_json(capsys, ["bounds", "--kind", "all", "--d", "10", "--N", "1000"])
    assert set(body) == {"outer_norm", "failure", "fsd", "xi", "zeta", "generalization"}


def test_bounds_strict_flags(capsys):
    # gamma > Mcal*A breaks the FSD hypothesis
    assert main(["bounds", "--kind", "fsd", "--gamma", "5", "--strict"]) == 1
    assert main(["bounds", "--kind", "fsd", "--gamma", "5"]) == 0


def test_counterexample_growth(capsys):
    body = run_json(capsys, ["counterexample", "--z", "3", "--nu", "10", "--d", "4", "--N", "200"])
    assert body["norm_growth"] == 60.0
    assert abs(body["risk_teacher"] - body["risk_inflated"]) <= 1e-12


def test_scaling_csv(capsys):
    assert main(["scaling", "--activations", "sigmoid", "--d-grid", "100"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("activation,") and len(lines) == 2


def test_missing_config_exit_2(tmp_path, capsys):
    assert main(["verify-norm", "--config", str(tmp_path / "nope.json")]) == 2
    assert "config" in capsys.readouterr().err


def test_bad_schema_exit_2(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"schema": 7}))
    assert main(["verify-norm", "--config", str(path)]) == 2
    path.write_text("{not json")
    assert main(["train", "--config", str(path)]) == 2


def test_unknown_subcommand_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2


def test_entry_point_unknown_subcommand():
    proc = subprocess.run([sys.executable, "-m", "outernorm", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 2


@pytest.mark.parametrize("name", SUBCOMMANDS)
def test_help(name, capsys):
    with pytest.raises(SystemExit) as exc:
        main([name, "--help"])
    assert exc.value.code == 0
    assert "usage" in capsys.readouterr().out
    assert name in build_parser().format_help()


def test_campaign_byte_identical(tmp_path, capsys):
    cfg = campaign_config(tmp_path)
    outs = []
    for tag, jobs in (("a", "1"), ("b", "2"), ("c", "1")):
        out, summ = tmp_path / f"{tag}.csv", tmp_path / f"{tag}.json"
        assert main(["verify-norm", "--config", str(cfg), "--out", str(out), "--summary", str(summ),
                     "--seed", "9", "--jobs", jobs]) == 0
        outs.append((out.read_bytes(), summ.read_bytes()))
    assert outs[0] == outs[1] == outs[2]
    summary = json.loads(outs[0][1])
    assert summary["cells"] == 4 and summary["overparameterization_ok"]


def test_set_override_changes_output(tmp_path):
    cfg = campaign_config(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["verify-norm", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["verify-norm", "--config", str(cfg), "--set", "master_seed=3", "--out", str(b)]) == 0
    assert a.read_bytes() != b.read_bytes()


def test_train_and_net(tmp_path, capsys):
    cfg = campaign_config(tmp_path)
    body = run_json(capsys, ["train", "--config", str(cfg), "--seed", "1"])
    assert body["risk"] >= 0 and body["outer_norm"] >= 0
    net = run_json(capsys, ["net", "--d", "3", "--width", "2", "--seed", "4"])
    assert len(net["a"]) == 2
