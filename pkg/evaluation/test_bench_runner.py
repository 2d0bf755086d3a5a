#!/usr/bin/env python3
"""Tests for the recognition benchmark and the unknown-goal report."""

import dataclasses
import json

import pandas as pd
import pytest

from evaluation.bench_runner import (
    DETAIL_FILE,
    SUMMARY_FILE,
    TIMINGS_FILE,
    BenchConfig,
    BenchConfigError,
    BenchRunner,
    check_theta_nesting,
    problem_from_record,
    render,
    unknown_goal_report,
    write_outputs,
)
from modeling.state_codec import decode
from modeling.train_lstm import TrainConfig, train
from tracegen.dataset_pipeline import Dataset, DatasetConfig, DatasetInvariantError, DatasetPipeline

FAST = TrainConfig(max_epochs=3, embed_dim=8, hidden_dim=8, seed=2)
PLANNING = ("pom_gc", "pom_uniq", "rg")


@pytest.fixture(scope="module")
def hanoi_dataset():
    cfg = DatasetConfig(domain="hanoi34", n_problems=3, traces_per_goal=1, n_train_goals=20,
                        n_unknown_goals=6, seed=7)
    return DatasetPipeline(cfg).build()


@pytest.fixture(scope="module")
def hanoi_model(hanoi_dataset):
    model, _ = train(hanoi_dataset, FAST)
    return model


@pytest.fixture(scope="module")
def bench(hanoi_dataset):
    return BenchRunner(BenchConfig(recognizers=PLANNING), [hanoi_dataset]).run()


def test_config_validation():
    with pytest.raises(BenchConfigError):
        BenchConfig(recognizers=())
    with pytest.raises(BenchConfigError):
        BenchConfig(recognizers=("pom_gc", "hsp"))
    with pytest.raises(BenchConfigError):
        BenchConfig(thetas=(0, 150))
    with pytest.raises(BenchConfigError):
        BenchConfig(levels=(20,))
    with pytest.raises(BenchConfigError):
        BenchConfig(output_format="xml")


def test_recognizer_keys():
    assert BenchConfig().recognizer_keys() == ["pom_gc_t0", "pom_gc_t10", "pom_uniq_t0", "pom_uniq_t10",
                                               "rg", "lstm"]
    assert BenchConfig(recognizers=("rg",), thetas=(0, 2.5)).recognizer_keys() == ["rg"]
    assert BenchConfig(recognizers=("pom_gc",), thetas=(2.5,)).recognizer_keys() == ["pom_gc_t2.5"]


def test_lstm_needs_a_checkpoint(hanoi_dataset):
    with pytest.raises(BenchConfigError):
        BenchRunner(BenchConfig(recognizers=("lstm",)), [hanoi_dataset])
    with pytest.raises(BenchConfigError):
        BenchRunner(BenchConfig(domains=("eight_puzzle",)), [hanoi_dataset])


def test_problem_from_record(hanoi_dataset):
    record = hanoi_dataset.split("test")[0]
    problem = problem_from_record(record)
    assert len(problem.candidates) == len(record.candidates) == 4
    assert problem.hidden_goal == record.candidates.index(record.goal_code)
    assert problem.task.init.true_facts == decode("hanoi34", record.trace_states[0]).true_facts
    assert [a.name for a in problem.observations] == record.observed_actions()
    assert problem.level == record.level


def test_detail_has_one_row_per_recognition(bench, hanoi_dataset):
    n_records = len(hanoi_dataset.split("test"))
    assert not bench.failures
    assert len(bench.detail) == n_records * 5
    assert (bench.detail["spread"] >= 1).all()
    assert (bench.detail["time"] >= 0).all()


def test_full_observability_finds_the_hidden_goal(bench):
    summary = bench.summary()
    full = summary[summary["level"] == 100].set_index("recognizer")
    assert full.at["pom_gc_t0", "accuracy"] == 100.0
    assert full.at["rg", "accuracy"] == 100.0


def test_accuracy_columns(bench):
    summary = bench.summary()
    assert summary["accuracy"].between(0, 100).all()
    assert (summary["strict_accuracy"] <= summary["accuracy"]).all()
    assert (summary["spread"] >= 1).all()
    assert set(summary["level"]) == {10, 30, 50, 70, 100}


def test_larger_theta_never_loses_accuracy(bench):
    assert check_theta_nesting(bench.summary(), (0, 10)) == []


def test_theta_violations_are_reported():
    summary = pd.DataFrame([
        {"domain": "hanoi34", "level": 100, "recognizer": "pom_gc_t0", "accuracy": 100.0, "spread": 2.0},
        {"domain": "hanoi34", "level": 100, "recognizer": "pom_gc_t10", "accuracy": 50.0, "spread": 2.0},
    ])
    assert check_theta_nesting(summary, (0, 10)) == ["hanoi34 level 100: accuracy of pom_gc_t10 below pom_gc_t0"]


def test_outputs_are_reproducible(hanoi_dataset, bench, tmp_path):
    first = write_outputs(bench, tmp_path / "a")
    again = BenchRunner(BenchConfig(recognizers=PLANNING), [hanoi_dataset]).run()
    second = write_outputs(again, tmp_path / "b")
    assert [p.name for p in first] == [SUMMARY_FILE, TIMINGS_FILE, DETAIL_FILE]
    assert first[0].read_bytes() == second[0].read_bytes()
    assert first[2].read_bytes() == second[2].read_bytes()
    assert "time" not in pd.read_csv(first[2]).columns
    assert list(pd.read_csv(first[1]).columns) == ["domain", "level", "recognizer", "mean_time", "max_time"]


def test_render_formats(bench):
    assert "pom_gc_t0 acc" in render(bench, "table")
    payload = json.loads(render(bench, "json"))
    assert {row["recognizer"] for row in payload["summary"]} == {"pom_gc_t0", "pom_gc_t10", "pom_uniq_t0",
                                                                 "pom_uniq_t10", "rg"}
    assert render(bench, "csv").startswith("domain,n_candidates,level")


def test_lstm_returns_one_goal(hanoi_dataset, hanoi_model):
    cfg = BenchConfig(recognizers=("lstm",), levels=(100, 10))
    result = BenchRunner(cfg, [hanoi_dataset], {"hanoi34": hanoi_model}).run()
    assert set(result.detail["level"]) == {100, 10}
    assert (result.detail["spread"] == 1).all()
    assert (result.summary()["spread"] == 1.0).all()


def test_unknown_goal_report(hanoi_dataset, hanoi_model):
    report = unknown_goal_report(hanoi_dataset, hanoi_model)
    row = report.iloc[0]
    assert row["domain"] == "hanoi34"
    assert row["records"] == len(hanoi_dataset.split("unknown_goal_test")) == 30
    assert row["problems"] == 6
    assert 0 <= row["reconstruction_accuracy"] <= 100
    assert 0 <= row["exact_predictions"] <= 100
    assert 0 <= row["candidate_hits"] <= 100


def test_unknown_goal_report_checks_hygiene(hanoi_dataset, hanoi_model):
    training_only = Dataset("hanoi34", hanoi_dataset.split("train", "validation"))
    with pytest.raises(DatasetInvariantError):
        unknown_goal_report(training_only, hanoi_model)

    leaked_goal = hanoi_dataset.split("train")[0].goal_code
    records = [dataclasses.replace(r, goal_code=leaked_goal) if r.split == "unknown_goal_test" else r
               for r in hanoi_dataset.records]
    with pytest.raises(DatasetInvariantError, match="also appears in training"):
        unknown_goal_report(Dataset("hanoi34", records, hanoi_dataset.manifest), hanoi_model)


@pytest.mark.slow
def test_eight_puzzle_benchmark_accuracy_and_cost():
    cfg = DatasetConfig(domain="eight_puzzle", n_problems=6, traces_per_goal=1, n_train_goals=12,
                        n_unknown_goals=0, seed=3)
    dataset = DatasetPipeline(cfg).build()
    assert len(dataset.problems("test")) == 6
    result = BenchRunner(BenchConfig(recognizers=("pom_gc", "rg"), thetas=(0, 10)), [dataset]).run()
    assert not result.failures
    full = result.summary().query("level == 100").set_index("recognizer")
    assert full.at["pom_gc_t0", "accuracy"] == 100.0
    assert full.at["rg", "accuracy"] == 100.0
    assert check_theta_nesting(result.summary(), (0, 10)) == []
    # compiled-task planning costs at least five times the landmark pass
    timings = result.timings().groupby("recognizer")["mean_time"].mean()
    assert timings["rg"] >= 5 * timings["pom_gc_t0"]


@pytest.mark.slow
def test_lstm_known_goal_accuracy_on_default_hanoi_corpus():
    dataset = DatasetPipeline(DatasetConfig(domain="hanoi34", n_problems=30, seed=7)).build()
    assert len(dataset.goal_codes("train", "validation")) == 64
    model, _ = train(dataset, TrainConfig(seed=0))
    result = BenchRunner(BenchConfig(recognizers=("lstm",)), [dataset], {"hanoi34": model}).run()
    top1 = result.summary().set_index("level")["strict_accuracy"]
    for level in (50, 70, 100):
        assert top1[level] >= 80.0, level
    assert top1[10] >= 60.0


@pytest.mark.slow
def test_lstm_cannot_name_unknown_puzzle_goals():
    dataset = DatasetPipeline(DatasetConfig(domain="eight_puzzle", seed=7)).build()
    model, _ = train(dataset, TrainConfig(seed=0, patience=20))
    row = unknown_goal_report(dataset, model).iloc[0]
    assert row["problems"] == 6
    assert row["exact_predictions"] <= 20.0
    assert 35.0 <= row["reconstruction_accuracy"] <= 75.0


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
