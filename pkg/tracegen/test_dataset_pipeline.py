#!/usr/bin/env python3
"""Tests for dataset assembly, persistence and invariant checks."""

import json
from dataclasses import replace

import pytest

from tracegen.dataset_pipeline import (
    DatasetConfig,
    DatasetFormatError,
    DatasetInvariantError,
    DatasetPipeline,
    InsufficientGoalsError,
    check_dataset,
    ensure_valid,
    load_dataset,
    manifest_path,
    save_dataset,
)

SMALL_HANOI = DatasetConfig(domain="hanoi34", n_problems=3, traces_per_goal=1, n_train_goals=20,
                            n_unknown_goals=6, seed=7)


@pytest.fixture(scope="module")
def hanoi_dataset():
    return DatasetPipeline(SMALL_HANOI).build()


def test_small_hanoi_layout(hanoi_dataset):
    assert not check_dataset(hanoi_dataset)
    test = hanoi_dataset.split("test")
    assert len(test) == 3 * 5
    unknown = hanoi_dataset.split("unknown_goal_test")
    assert len(unknown) == 6 * 5
    assert len(hanoi_dataset.problems("unknown_goal_test")) == 6
    for r in test + unknown:
        assert len(r.candidates) == 4
        assert r.candidates.count(r.goal_code) == 1
    assert hanoi_dataset.split("validation")


def test_training_traces_carry_every_training_level(hanoi_dataset):
    for trace_id in hanoi_dataset.traces("train", "validation"):
        levels = sorted(r.level for r in hanoi_dataset.records if r.trace_id == trace_id)
        assert levels == [10, 30, 50, 70, 100]
        splits = {r.split for r in hanoi_dataset.records if r.trace_id == trace_id}
        assert len(splits) == 1


def test_split_hygiene(hanoi_dataset):
    train_goals = hanoi_dataset.goal_codes("train", "validation")
    assert not hanoi_dataset.goal_codes("unknown_goal_test") & train_goals
    train_keys = {r.trace_key for r in hanoi_dataset.split("train", "validation")}
    assert not any(r.trace_key in train_keys for r in hanoi_dataset.split("test"))


def test_manifest_counts(hanoi_dataset):
    counts = hanoi_dataset.manifest["counts"]
    assert counts["test"]["records"] == 15
    assert counts["unknown_goal_test"]["goals"] == 6
    assert hanoi_dataset.manifest["n_candidates"] == 4
    assert hanoi_dataset.manifest["config"]["rounding"] == "round"
    assert counts["train"]["mean_plan_length"] > 0


def test_save_is_byte_deterministic(tmp_path):
    paths = []
    for name in ("a", "b"):
        dataset = DatasetPipeline(SMALL_HANOI).build()
        paths.append(save_dataset(dataset, tmp_path / name))
    (records_a, meta_a), (records_b, meta_b) = paths
    assert records_a.read_bytes() == records_b.read_bytes()
    assert meta_a.read_bytes() == meta_b.read_bytes()
    assert json.loads(meta_a.read_text())["files"]["sha256"]


def test_load_round_trip(hanoi_dataset, tmp_path):
    records_path, meta_path = save_dataset(hanoi_dataset, tmp_path)
    assert meta_path == manifest_path(records_path)
    loaded = load_dataset(records_path)
    assert loaded.records == hanoi_dataset.records
    assert loaded.manifest["seed"] == 7
    assert load_dataset(tmp_path).records == loaded.records
    first = json.loads(records_path.read_text().splitlines()[0])
    assert list(first) == ["domain", "problem_id", "split", "trace_id", "goal_code", "candidates",
                           "trace_states", "trace_actions", "level", "kept_indices"]
    assert len(first["goal_code"]) == 9


def test_corrupted_line_is_named(hanoi_dataset, tmp_path):
    records_path, _ = save_dataset(hanoi_dataset, tmp_path)
    lines = records_path.read_text().splitlines()
    lines[3] = lines[3][:-5]
    records_path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError) as err:
        load_dataset(records_path)
    assert err.value.line == 4
    assert ":4:" in str(err.value)


def test_bad_code_is_a_format_error(tmp_path):
    path = tmp_path / "bad.jsonl"
    record = {"domain": "hanoi34", "problem_id": "x", "split": "test", "trace_id": 0,
              "goal_code": "zz", "candidates": [], "trace_states": [], "trace_actions": [],
              "level": 100, "kept_indices": []}
    path.write_text(json.dumps(record) + "\n")
    with pytest.raises(DatasetFormatError):
        load_dataset(path)


def test_check_dataset_reports_tampering(hanoi_dataset):
    train = next(r for r in hanoi_dataset.split("train") if len(r.trace_actions) >= 2)
    unknown = hanoi_dataset.split("unknown_goal_test")[0]
    leaked = replace(unknown, goal_code=train.goal_code,
                     candidates=(train.goal_code,) + unknown.candidates[1:])
    shuffled = replace(train, kept_indices=tuple(reversed(range(len(train.trace_actions)))))
    broken = replace(hanoi_dataset, records=hanoi_dataset.records + [leaked, shuffled])
    violations = check_dataset(broken)
    assert any("also appears in training" in v for v in violations)
    assert any("not a subsequence" in v for v in violations)
    assert any("does not reach its goal" in v for v in violations)
    with pytest.raises(DatasetInvariantError):
        ensure_valid(broken)


def test_insufficient_goals():
    cfg = DatasetConfig(domain="hanoi34", n_candidates=10, n_train_goals=5, traces_per_goal=1)
    with pytest.raises(InsufficientGoalsError):
        DatasetPipeline(cfg).build()


def test_run_collects_failures(tmp_path):
    cfg = DatasetConfig(domain="hanoi34", n_candidates=10, n_train_goals=5, traces_per_goal=1)
    results = DatasetPipeline(cfg).run(tmp_path)
    assert not results['success']
    assert isinstance(results['error'], InsufficientGoalsError)


def test_config_validation():
    assert DatasetConfig(domain="eight_puzzle").candidate_count == 6
    assert DatasetConfig().candidate_count == 4
    with pytest.raises(ValueError):
        DatasetConfig(n_problems=0)
    with pytest.raises(ValueError):
        DatasetConfig(levels=(25,))
    with pytest.raises(ValueError):
        DatasetConfig(validation_fraction=1.0)
    with pytest.raises(ValueError):
        DatasetConfig(domain="blocks")


def test_eight_puzzle_dataset_is_sound():
    cfg = DatasetConfig(domain="eight_puzzle", n_problems=2, n_train_goals=8, traces_per_goal=1,
                        n_unknown_goals=2, unknown_depth=(9, 10), seed=3)
    dataset = DatasetPipeline(cfg).build()
    ensure_valid(dataset)
    assert all(len(r.candidates) == 6 for r in dataset.split("test"))
    # held-out goals sit beyond every walk-based training goal
    unknown = dataset.problems("unknown_goal_test")
    assert len(unknown) == 2
    assert all(len(records[0].trace_actions) >= 7 for records in unknown.values())


def test_per_domain_defaults():
    hanoi = DatasetConfig()
    assert (hanoi.trace_count, hanoi.unknown_goal_count, hanoi.unknown_goal_depth) == (25, 0, None)
    assert hanoi.goal_pool_size == 64
    puzzle = DatasetConfig(domain="eight_puzzle")
    assert (puzzle.trace_count, puzzle.unknown_goal_count, puzzle.unknown_goal_depth) == (3, 6, (14, 16))
    assert DatasetConfig(n_unknown_goals=0, domain="lights_out4").unknown_goal_count == 0
    assert puzzle.to_dict()["unknown_depth"] == [14, 16]
    with pytest.raises(ValueError):
        DatasetConfig(unknown_depth=(6, 2))


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
