"""Command-line checks, driven through main() in-process: every subcommand
end to end on a small dataset, exit codes, and report validity."""

import json

import jsonschema
import numpy as np
import pytest

from repseg.cli import main
from repseg.dataio import REPORT_SCHEMA, load_checkpoint, read_report
from repseg.synth import CLASS_NAMES

CONFIG = {
    "model": dict(d_model=8, n_heads=2, n_layers=1, dropout=0.0,
                  window_len=80, ffn_dim=16, tcn_layers=3, tcn_channels=4),
    "train": dict(batch_size=8, epochs=2, seed=0, mask_ratio=0.5,
                  patch_len=10, learning_rate=3e-3),
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One generated dataset + config file shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    code = main(["generate", "--subjects", "3", "--seed", "11",
                 "--plan", "1:2,4:1", "--out", str(root / "data")])
    assert code == 0
    (root / "config.json").write_text(json.dumps(CONFIG))
    return root


def test_generate_is_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["generate", "--subjects", "2", "--seed", "3",
                     "--plan", "4:2", "--out", str(tmp_path / name)]) == 0
    out = capsys.readouterr().out
    assert CLASS_NAMES[4] in out and CLASS_NAMES[5] in out
    for f in ["manifest.json", "s00.csv", "s01.csv"]:
        assert (tmp_path / "a" / f).read_bytes() \
            == (tmp_path / "b" / f).read_bytes()


def test_generate_chair_pairing(tmp_path, capsys):
    assert main(["generate", "--subjects", "1", "--seed", "0",
                 "--plan", "4:5", "--out", str(tmp_path / "d")]) == 0
    out = capsys.readouterr().out
    manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
    counts = manifest["subjects"][0]["segment_counts"]
    assert counts["4"] == 5 and counts["5"] == 5
    assert "sit_to_stand" in out


def test_generate_bad_plan_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--plan", "banana", "--out", str(tmp_path / "x")])
    assert exc.value.code == 2


def test_train_losocv_writes_checkpoints_and_report(workspace):
    out = workspace / "run"
    code = main(["train", "--data", str(workspace / "data"),
                 "--config", str(workspace / "config.json"),
                 "--losocv", "--out", str(out)])
    assert code == 0
    report = read_report(out / "train_report.json")
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["command"] == "train"
    assert [f["test_subject"] for f in report["folds"]] \
        == ["s00", "s01", "s02"]
    assert "loa" in report and "aggregate" in report
    for fold in report["folds"]:
        model = load_checkpoint(out / fold["checkpoint"])
        assert model.config.d_model == 8
        curves = fold["loss_curves"]
        assert len(curves["loss"]) == len(curves["epoch"]) == 2


def test_train_single_model(workspace, tmp_path):
    code = main(["train", "--data", str(workspace / "data"),
                 "--config", str(workspace / "config.json"),
                 "--epochs", "1", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "model.json").exists()
    report = read_report(tmp_path / "train_report.json")
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["train_config"]["epochs"] == 1  # flag overrode the file


def test_train_enumerates_config_violations(workspace, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": {"d_model": 9, "n_heads": 2},
                               "train": {"epochs": 0}}))
    code = main(["train", "--data", str(workspace / "data"),
                 "--config", str(bad), "--out", str(tmp_path / "o")])
    assert code == 3
    err = capsys.readouterr().err
    assert "model config" in err and "train config" in err


def test_evaluate_checkpoints(workspace, capsys):
    run = workspace / "run"
    ckpts = sorted(str(p) for p in run.glob("fold_*.json"))
    report_path = workspace / "eval_report.json"
    code = main(["evaluate", "--data", str(workspace / "data"),
                 "--checkpoints", *ckpts,
                 "--report", str(report_path)])
    assert code == 0
    report = read_report(report_path)
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["iou_threshold"] == 0.75
    assert len(report["checkpoints"]) == 3
    out = capsys.readouterr().out
    assert "fold_s00.json" in out
    for row in report["checkpoints"]:
        assert "loa" in row
        assert len(row["confusion"]) == 6


def test_evaluate_oracle_is_perfect(workspace, tmp_path):
    report_path = tmp_path / "oracle.json"
    code = main(["evaluate", "--data", str(workspace / "data"),
                 "--oracle", "--report", str(report_path)])
    assert code == 0
    report = read_report(report_path)
    jsonschema.validate(report, REPORT_SCHEMA)
    row = report["checkpoints"][0]
    assert row["sample_accuracy"] == 1.0
    for score in row["sample_f1"]["per_class"].values():
        if score is not None:
            assert score["f1"] == 1.0
    assert row["sample_f1"]["macro_f1"] == 1.0
    assert row["segmental"]["macro_f1"] == 1.0
    for entry in row["loa"]["per_class"].values():
        assert entry["mean_diff"] == 0.0
        assert entry["std_diff"] == 0.0
        assert entry["lower"] == 0.0 and entry["upper"] == 0.0


def test_evaluate_without_checkpoints_errors(workspace, capsys):
    code = main(["evaluate", "--data", str(workspace / "data")])
    assert code == 3
    assert "--checkpoints or --oracle" in capsys.readouterr().err


def test_velocity_true_labels(workspace, capsys):
    report_path = workspace / "vel_report.json"
    code = main(["velocity", "--data", str(workspace / "data"),
                 "--subject", "s00", "--use-true-labels",
                 "--report", str(report_path)])
    assert code == 0
    report = read_report(report_path)
    jsonschema.validate(report, REPORT_SCHEMA)
    vel = report["velocity"]
    assert len(vel["repetitions"]) == 2  # one chair pair in the plan
    rec_rows = json.loads(
        (workspace / "data" / "manifest.json").read_text()
    )["subjects"][0]["rows"]
    assert len(vel["velocity"]) == rec_rows  # trace covers the recording
    out = capsys.readouterr().out
    assert "g' =" in out and "sit_to_stand" in out


def test_velocity_predicted_labels(workspace):
    ckpt = workspace / "run" / "fold_s00.json"
    code = main(["velocity", "--data", str(workspace / "data"),
                 "--subject", "s00", "--checkpoint", str(ckpt)])
    assert code == 0


def test_velocity_without_chair_segments(tmp_path, capsys):
    assert main(["generate", "--subjects", "1", "--seed", "2",
                 "--plan", "1:3", "--out", str(tmp_path / "d")]) == 0
    code = main(["velocity", "--data", str(tmp_path / "d"),
                 "--subject", "s00", "--use-true-labels",
                 "--report", str(tmp_path / "r.json")])
    assert code == 0
    report = read_report(tmp_path / "r.json")
    assert report["velocity"]["repetitions"] == []
    assert "no chair-rising segments" in report["notes"]
    assert "no chair-rising segments" in capsys.readouterr().out


def test_velocity_still_window_failure_exit_code(tmp_path, capsys):
    # recording whose vertical axis never goes quiet
    import csv
    rng = np.random.default_rng(0)
    d = tmp_path / "d"
    assert main(["generate", "--subjects", "1", "--seed", "2",
                 "--plan", "4:1", "--out", str(d)]) == 0
    rows = list(csv.reader((d / "s00.csv").read_text().splitlines()))
    for i, row in enumerate(rows[1:]):
        row[1] = repr(float(9.6 + 2.0 * np.sin(i / 3.0)
                            + rng.normal(0, 0.4)))
    (d / "s00.csv").write_text(
        "\n".join(",".join(r) for r in rows) + "\n")
    code = main(["velocity", "--data", str(d), "--subject", "s00",
                 "--use-true-labels"])
    assert code == 4
    assert "--still-window" in capsys.readouterr().err


def test_missing_dataset_is_data_error(tmp_path, capsys):
    code = main(["evaluate", "--data", str(tmp_path / "nope"), "--oracle"])
    assert code == 3
    assert "error:" in capsys.readouterr().err
