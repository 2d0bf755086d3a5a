#!/usr/bin/env python3
"""Tests for LSTM training, checkpoints and goal prediction."""

import logging

import numpy as np
import pandas as pd
import pytest

from modeling import train_lstm
from modeling.goal_prediction_service import GoalPredictionService, predict_goal
from modeling.lstm_model import LstmParams, LstmShape
from modeling.state_codec import code_bits
from modeling.train_lstm import (
    TrainConfig,
    append_training_run,
    dataset_loss,
    fit,
    load_checkpoint,
    make_batches,
    save_checkpoint,
    train,
)
from tracegen.dataset_pipeline import Dataset, DatasetConfig, DatasetPipeline, InsufficientGoalsError

GOAL_A = 0x012345678
GOAL_B = 0x812345670
TOY_CONFIG = TrainConfig(learning_rate=1e-2, max_epochs=500, patience=500, clip_norm=None,
                         embed_dim=8, hidden_dim=16, seed=0)
FAST = TrainConfig(max_epochs=3, embed_dim=8, hidden_dim=8, seed=2)


def toy_examples():
    """Ten sequences, two goals, told apart by their tokens."""
    examples = []
    for length in range(2, 7):
        examples.append((tuple([2] * (length - 1) + [1]), code_bits(GOAL_A).astype(float)))
        examples.append((tuple([3] * (length - 1) + [4]), code_bits(GOAL_B).astype(float)))
    return examples


def toy_params(cfg=TOY_CONFIG):
    return LstmParams.init(cfg.shape(4), seed=cfg.seed)


@pytest.fixture(scope="module")
def small_dataset():
    cfg = DatasetConfig(domain="hanoi34", n_problems=3, traces_per_goal=1, n_train_goals=20, seed=7)
    return DatasetPipeline(cfg).build()


@pytest.fixture(scope="module")
def trained(small_dataset):
    return train(small_dataset, FAST)


def test_batches_have_one_length_each():
    batches = make_batches(toy_examples(), 32, np.random.default_rng(0))
    assert len(batches) == 5
    for ids, targets in batches:
        assert ids.shape == (2, ids.shape[1])
        assert targets.shape == (2, 36)
    again = make_batches(toy_examples(), 32, np.random.default_rng(0))
    assert all(np.array_equal(a[0], b[0]) for a, b in zip(batches, again))


def test_toy_set_is_overfit():
    examples = toy_examples()
    params, report = fit(toy_params(), examples, examples, TOY_CONFIG)
    assert report.best_validation_loss < 0.05
    assert dataset_loss(params, examples) == pytest.approx(report.best_validation_loss)
    assert report.best_validation_loss < report.validation_loss[0]


def test_early_stopping_returns_the_best_epoch():
    examples = toy_examples()
    # swapped labels: validation loss falls while shared bits are learnt, then rises
    swapped = [(ids, examples[k ^ 1][1]) for k, (ids, _) in enumerate(examples)]
    cfg = TrainConfig(learning_rate=1e-2, max_epochs=500, patience=3, embed_dim=8, hidden_dim=16)
    params, report = fit(toy_params(cfg), examples, swapped, cfg)
    assert report.stopping_epoch < 500
    assert report.stopping_epoch - report.best_epoch == 3
    best = report.validation_loss[report.best_epoch]
    assert all(best <= later for later in report.validation_loss[report.best_epoch:])
    assert dataset_loss(params, swapped) == pytest.approx(best)


def test_training_is_deterministic():
    cfg = TrainConfig(learning_rate=1e-2, max_epochs=15, embed_dim=8, hidden_dim=16, seed=4)
    _, first = fit(toy_params(cfg), toy_examples(), toy_examples(), cfg)
    _, second = fit(toy_params(cfg), toy_examples(), toy_examples(), cfg)
    assert first.checksum == second.checksum
    assert first.validation_loss == second.validation_loss


def test_non_finite_gradient_aborts_the_epoch(monkeypatch, caplog):
    def broken(params, ids, targets):
        return float("nan"), {name: np.full_like(t, np.nan) for name, t in params.tensors.items()}

    monkeypatch.setattr(train_lstm, "loss_and_gradients", broken)
    params = toy_params()
    cfg = TrainConfig(max_epochs=3, patience=10, embed_dim=8, hidden_dim=16)
    with caplog.at_level(logging.ERROR):
        best, report = fit(params, toy_examples(), toy_examples(), cfg)
    assert report.aborted_epochs == [1, 2, 3]
    assert best.checksum() == params.checksum()
    assert "W_" in caplog.text or "embedding" in caplog.text


def test_train_on_dataset(trained, small_dataset):
    model, report = trained
    assert model.domain == "hanoi34"
    assert model.include_initial_state
    assert model.params.shape.vocab_size == len(model.vocab)
    assert set(model.vocab.codes) <= {c for r in small_dataset.split("train") for c in r.trace_states}
    assert len(report.validation_loss) == report.stopping_epoch + 1
    assert "seconds" not in model.history


def test_checkpoint_round_trip(trained, tmp_path):
    model, _ = trained
    path = save_checkpoint(model, tmp_path / "lstm_hanoi34_s2.joblib")
    loaded = load_checkpoint(path)
    assert loaded.params.checksum() == model.params.checksum()
    assert loaded.vocab.codes == model.vocab.codes
    assert loaded.train_config == model.train_config
    codes = model.vocab.codes[:3]
    candidates = model.vocab.codes[:4]
    assert predict_goal(loaded, codes, candidates).result.returned == \
        predict_goal(model, codes, candidates).result.returned


def test_equal_seeds_give_identical_checkpoints(small_dataset, tmp_path):
    paths = []
    for name in ("a", "b"):
        model, _ = train(small_dataset, FAST)
        paths.append(save_checkpoint(model, tmp_path / name / "model.joblib"))
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_full_scale_shape():
    cfg = TrainConfig.full_scale(seed=3)
    shape = cfg.shape(10)
    assert (shape.embed_dim, shape.hidden_dim) == (1000, 512)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(validation_fraction=0.0)
    with pytest.raises(ValueError):
        TrainConfig(patience=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)


def test_single_goal_dataset_is_rejected(small_dataset):
    goal = small_dataset.split("train")[0].goal_code
    one_goal = Dataset("hanoi34", [r for r in small_dataset.split("train", "validation") if r.goal_code == goal])
    with pytest.raises(InsufficientGoalsError):
        train(one_goal, FAST)


def test_training_runs_are_appended(trained, small_dataset, tmp_path):
    model, report = trained
    path = tmp_path / "training_runs.csv"
    append_training_run(model, report, small_dataset, path)
    append_training_run(model, report, small_dataset, path)
    runs = pd.read_csv(path)
    assert len(runs) == 2
    assert runs["domain"].tolist() == ["hanoi34", "hanoi34"]


def test_single_candidate_is_returned(trained):
    model, _ = trained
    prediction = predict_goal(model, model.vocab.codes[:2], [GOAL_A], true_code=GOAL_A)
    assert prediction.result.returned == (0,)
    assert prediction.result.spread == 1
    assert 0.0 <= prediction.reconstruction <= 1.0


def test_empty_sequence_is_rejected(trained):
    model, _ = trained
    with pytest.raises(ValueError):
        predict_goal(model, [], [GOAL_A])


def test_service_predicts_every_test_record(trained, small_dataset, tmp_path):
    model, _ = trained
    save_checkpoint(model, tmp_path / "lstm_hanoi34_s2.joblib")
    service = GoalPredictionService(tmp_path)
    assert service.load_model(domain="hanoi34")
    frame = service.predict_split(small_dataset, "test")
    assert len(frame) == len(small_dataset.split("test"))
    assert frame["reconstruction"].between(0, 1).all()
    assert not GoalPredictionService(tmp_path).load_model(domain="eight_puzzle")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
