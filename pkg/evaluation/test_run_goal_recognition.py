#!/usr/bin/env python3
"""End-to-end tests of the command line entry point."""

import hashlib
import logging

import joblib
import pandas as pd
import pytest

import run_goal_recognition
from evaluation.bench_runner import SUMMARY_FILE
from utils import settings

SMALL_GEN = ["gen", "--domain", "hanoi34", "--problems", "2", "--train-goals", "12", "--unknown-goals", "6",
             "--traces-per-goal", "1", "--seed", "7"]


@pytest.fixture(autouse=True)
def isolated_data(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "MODELS_DIR", tmp_path / "models")
    monkeypatch.setattr(settings, "RESULTS_DIR", tmp_path / "results")
    monkeypatch.setattr(settings, "SHOW_PROGRESS", False)


def _gen(out):
    assert run_goal_recognition.main(["--quiet"] + SMALL_GEN + ["--out", str(out)]) == 0
    return out / "hanoi34_s7.jsonl"


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_missing_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as e:
        run_goal_recognition.main([])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        run_goal_recognition.main(["gen", "--domain", "sokoban"])
    assert e.value.code == 1


def test_gen_is_deterministic(tmp_path):
    first = _gen(tmp_path / "a")
    second = _gen(tmp_path / "b")
    assert _digest(first) == _digest(second)
    assert (tmp_path / "a" / "hanoi34_s7.manifest.json").exists()


def test_train_writes_a_checkpoint(tmp_path):
    dataset = _gen(tmp_path / "data")
    out = tmp_path / "model.joblib"
    code = run_goal_recognition.main(["train", "--dataset", str(dataset), "--epochs", "2",
                                      "--embed-dim", "8", "--hidden-dim", "8", "--out", str(out)])
    assert code == 0
    payload = joblib.load(out)
    assert payload["shape"]["embed_dim"] == 8
    assert (settings.RESULTS_DIR / "training_runs.csv").exists()


@pytest.mark.slow
def test_full_scale_checkpoint(tmp_path):
    dataset = _gen(tmp_path / "data")
    out = tmp_path / "model.joblib"
    assert run_goal_recognition.main(["train", "--dataset", str(dataset), "--epochs", "1",
                                      "--paper-scale", "--out", str(out)]) == 0
    shape = joblib.load(out)["shape"]
    assert (shape["embed_dim"], shape["hidden_dim"]) == (1000, 512)


def test_corrupted_dataset_names_the_line(tmp_path, caplog):
    dataset = _gen(tmp_path / "data")
    lines = dataset.read_text(encoding="utf-8").splitlines()
    lines[1] = lines[1][:-5]
    dataset.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with caplog.at_level(logging.ERROR):
        code = run_goal_recognition.main(["train", "--dataset", str(dataset), "--epochs", "1"])
    assert code == 2
    assert f"{dataset}:2:" in caplog.text


def test_missing_dataset_is_a_usage_error(tmp_path):
    assert run_goal_recognition.main(["train", "--dataset", str(tmp_path / "none.jsonl")]) == 1


def test_bench_end_to_end(tmp_path):
    dataset = _gen(tmp_path / "data")
    out = tmp_path / "bench"
    code = run_goal_recognition.main(["bench", "--dataset", str(dataset), "--recognizers", "pom_gc,rg",
                                      "--levels", "100", "30", "--out", str(out), "--format", "csv"])
    assert code == 0
    summary = pd.read_csv(out / SUMMARY_FILE)
    assert list(summary["recognizer"].unique()) == ["pom_gc_t0", "pom_gc_t10", "rg"]
    full = summary[summary["level"] == 100].set_index("recognizer")
    assert full.at["pom_gc_t0", "accuracy"] == 100.0


def test_bench_config_errors_exit_with_one(tmp_path):
    dataset = _gen(tmp_path / "data")
    assert run_goal_recognition.main(["bench", "--dataset", str(dataset), "--recognizers", ""]) == 1
    # lstm selected and no checkpoint anywhere
    assert run_goal_recognition.main(["bench", "--dataset", str(dataset), "--recognizers", "lstm"]) == 1


def test_unknown_report(tmp_path):
    dataset = _gen(tmp_path / "data")
    model = tmp_path / "models" / "lstm_hanoi34_s0.joblib"
    assert run_goal_recognition.main(["train", "--dataset", str(dataset), "--epochs", "2",
                                      "--embed-dim", "8", "--hidden-dim", "8", "--out", str(model)]) == 0
    assert run_goal_recognition.main(["unknown", "--dataset", str(dataset), "--out", str(tmp_path / "r")]) == 0
    report = pd.read_csv(tmp_path / "r" / "unknown_goals.csv")
    assert report.loc[0, "records"] == 30
    assert 0 <= report.loc[0, "exact_predictions"] <= 100


def test_seed_selects_the_checkpoint(tmp_path):
    dataset = _gen(tmp_path / "data")
    assert run_goal_recognition.main(["train", "--dataset", str(dataset), "--epochs", "2", "--seed", "3",
                                      "--embed-dim", "8", "--hidden-dim", "8"]) == 0
    assert (settings.MODELS_DIR / "lstm_hanoi34_s3.joblib").exists()

    bench = ["bench", "--dataset", str(dataset), "--recognizers", "lstm", "--levels", "100",
             "--out", str(tmp_path / "bench")]
    assert run_goal_recognition.main(bench + ["--seed", "3"]) == 0
    assert run_goal_recognition.main(bench + ["--seed", "4"]) == 1
    # newest checkpoint when no seed is given
    assert run_goal_recognition.main(bench) == 0

    unknown = ["unknown", "--dataset", str(dataset), "--out", str(tmp_path / "r")]
    assert run_goal_recognition.main(unknown + ["--seed", "3"]) == 0
    assert run_goal_recognition.main(unknown + ["--seed", "4"]) == 1


def test_oracle_codec_suite_passes():
    assert run_goal_recognition.main(["oracle", "--suite", "codec"]) == 0
    assert run_goal_recognition.main(["oracle", "--suite", "codec", "--seed", "5"]) == 0


def test_oracle_failure_exits_with_two(monkeypatch):
    from planning import search_planner
    monkeypatch.setattr(search_planner, "_progress", lambda facts, action: facts | action.add)
    assert run_goal_recognition.main(["oracle", "--suite", "planner"]) == 2


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
