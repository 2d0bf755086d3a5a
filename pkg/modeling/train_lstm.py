#!/usr/bin/env python3
"""
Train and Save the LSTM Goal Classifier

Turns the train/validation splits of a dataset into (state-id sequence,
36-bit goal code) examples, fits the LSTM with RMSprop and early stopping,
and writes a joblib checkpoint that the prediction service loads.
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import joblib
import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split
from tqdm import tqdm

from modeling.lstm_model import LstmParams, LstmShape, bce_loss, forward, loss_and_gradients
from modeling.rmsprop import NonFiniteGradientError, RmspropConfig, init_state, rmsprop_step
from modeling.state_codec import Vocabulary, code_bits
from tracegen.dataset_pipeline import Dataset, InsufficientGoalsError, ensure_valid
from utils import settings
from utils.settings import ensure_dir

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "goalrec-lstm"
CHECKPOINT_VERSION = 1

Example = Tuple[Tuple[int, ...], np.ndarray]


class CheckpointError(ValueError):
    def __init__(self, path: Union[str, Path], reason: str):
        self.path = Path(path)
        super().__init__(f"{path}: {reason}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8
    max_epochs: int = 10_000
    patience: int = 50
    validation_fraction: float = 0.1
    batch_size: int = 32
    clip_norm: Optional[float] = 5.0
    seed: int = 0
    embed_dim: int = 64
    hidden_dim: int = 128
    include_initial_state: bool = True

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError(f"validation_fraction must be in (0, 1), got {self.validation_fraction}")
        if self.patience < 1:
            raise ValueError(f"patience must be at least 1, got {self.patience}")
        if self.max_epochs < 1 or self.batch_size < 1:
            raise ValueError("max_epochs and batch_size must be positive")
        self.optimizer()

    @classmethod
    def full_scale(cls, **kwargs) -> "TrainConfig":
        return cls(embed_dim=1000, hidden_dim=512, **kwargs)

    def optimizer(self) -> RmspropConfig:
        return RmspropConfig(self.learning_rate, self.rho, self.eps, self.clip_norm)

    def shape(self, vocab_size: int) -> LstmShape:
        return LstmShape(vocab_size, self.embed_dim, self.hidden_dim)


@dataclass
class TrainReport:
    train_loss: List[float] = field(default_factory=list)
    validation_loss: List[float] = field(default_factory=list)
    best_epoch: int = 0
    stopping_epoch: int = 0
    seconds: float = 0.0
    checksum: str = ""
    aborted_epochs: List[int] = field(default_factory=list)

    @property
    def best_validation_loss(self) -> float:
        return self.validation_loss[self.best_epoch]

    def history(self) -> Dict[str, Any]:
        """Everything but the wall-clock time, which would break byte-identical checkpoints."""
        data = asdict(self)
        data.pop("seconds")
        return data


@dataclass
class LstmModel:
    params: LstmParams
    vocab: Vocabulary
    domain: str
    include_initial_state: bool = True
    train_config: Optional[TrainConfig] = None
    history: Dict[str, Any] = field(default_factory=dict)

    def token_ids(self, codes: Sequence[int]) -> List[int]:
        return self.vocab.ids(codes)


# === Examples and batching ===

def record_examples(records, vocab: Vocabulary, include_initial_state: bool) -> List[Example]:
    examples = []
    for record in records:
        ids = tuple(vocab.ids(record.observed_states(include_initial_state)))
        if ids:
            examples.append((ids, code_bits(record.goal_code).astype(np.float64)))
    return examples


def _stack(examples: Sequence[Example]) -> Tuple[np.ndarray, np.ndarray]:
    return (np.array([ids for ids, _ in examples], dtype=np.int64),
            np.stack([target for _, target in examples]))


def make_batches(examples: Sequence[Example], batch_size: int,
                 rng: Optional[np.random.Generator] = None) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Group examples into equal-length batches.

    With an rng the examples are shuffled before bucketing and the batch
    order is shuffled afterwards; without one the order is by length.
    """
    order = rng.permutation(len(examples)) if rng is not None else np.arange(len(examples))
    buckets: Dict[int, List[Example]] = {}
    for k in order:
        buckets.setdefault(len(examples[k][0]), []).append(examples[k])
    batches = []
    for length in sorted(buckets):
        bucket = buckets[length]
        for start in range(0, len(bucket), batch_size):
            batches.append(_stack(bucket[start:start + batch_size]))
    if rng is not None:
        batches = [batches[k] for k in rng.permutation(len(batches))]
    return batches


def dataset_loss(params: LstmParams, examples: Sequence[Example], batch_size: int = 256) -> float:
    """Mean per-sequence loss."""
    if not examples:
        raise ValueError("cannot compute a loss over zero examples")
    total = 0.0
    for ids, targets in make_batches(examples, batch_size):
        total += bce_loss(forward(params, ids).probs, targets)
    return total / len(examples)


# === Training loop ===

def fit(params: LstmParams, train: Sequence[Example], validation: Sequence[Example],
        cfg: TrainConfig = TrainConfig()) -> Tuple[LstmParams, TrainReport]:
    """
    RMSprop with early stopping on validation loss.

    Returns the parameters of the best validation epoch (epoch 0 is the
    untrained model) and the report. An epoch hitting a non-finite gradient
    is rolled back to its starting parameters.
    """
    if not train:
        raise ValueError("no training examples")
    opt_cfg = cfg.optimizer()
    rng = np.random.default_rng([cfg.seed, 1])
    started = time.perf_counter()

    report = TrainReport()
    report.train_loss.append(dataset_loss(params, train))
    report.validation_loss.append(dataset_loss(params, validation))
    best_params, best_loss, wait = params.copy(), report.validation_loss[0], 0
    state = init_state(params)
    logger.info(f"🚀 Training on {len(train)} sequences, validating on {len(validation)} "
                f"(epoch 0 validation loss {best_loss:.4f})")

    epoch = 0
    for epoch in tqdm(range(1, cfg.max_epochs + 1), desc="epochs", disable=not settings.SHOW_PROGRESS):
        epoch_params, epoch_state = params, state
        seen, total = 0, 0.0
        for ids, targets in make_batches(train, cfg.batch_size, rng):
            loss, grads = loss_and_gradients(params, ids, targets)
            try:
                params, state = rmsprop_step(params, grads, state, opt_cfg)
            except NonFiniteGradientError as e:
                logger.error(f"❌ Epoch {epoch} aborted: {e}")
                params, state = epoch_params, epoch_state
                report.aborted_epochs.append(epoch)
                break
            seen += len(ids)
            total += loss * len(ids)
        report.train_loss.append(total / seen if seen else report.train_loss[-1])
        val = dataset_loss(params, validation)
        report.validation_loss.append(val)

        if val < best_loss:
            best_params, best_loss, wait = params.copy(), val, 0
            report.best_epoch = epoch
        else:
            wait += 1
            if wait >= cfg.patience:
                logger.info(f"⏹️ Early stop at epoch {epoch}, best epoch {report.best_epoch}")
                break
    report.stopping_epoch = epoch
    report.seconds = time.perf_counter() - started
    report.checksum = best_params.checksum()
    return best_params, report


def log_train_config(cfg: TrainConfig) -> None:
    logger.info(f"⚙️ LSTM config: embed_dim={cfg.embed_dim} hidden_dim={cfg.hidden_dim} "
                f"lr={cfg.learning_rate} rho={cfg.rho} eps={cfg.eps} batch={cfg.batch_size} "
                f"clip={cfg.clip_norm} patience={cfg.patience} max_epochs={cfg.max_epochs} "
                f"seed={cfg.seed} include_initial_state={cfg.include_initial_state}")


def split_examples(dataset: Dataset, cfg: TrainConfig):
    """Training and validation records; datasets without a validation split get one by trace."""
    train_records = dataset.split("train")
    validation_records = dataset.split("validation")
    if not validation_records:
        trace_ids = sorted(dataset.traces("train"))
        _, held = train_test_split(trace_ids, test_size=cfg.validation_fraction, random_state=cfg.seed)
        held = set(held)
        validation_records = [r for r in train_records if r.trace_id in held]
        train_records = [r for r in train_records if r.trace_id not in held]
    return train_records, validation_records


def train(dataset: Dataset, cfg: TrainConfig = TrainConfig()) -> Tuple[LstmModel, TrainReport]:
    ensure_valid(dataset)
    goals = dataset.goal_codes("train")
    if len(goals) < 2:
        raise InsufficientGoalsError(dataset.domain, 2, len(goals), "training goals")
    log_train_config(cfg)

    train_records, validation_records = split_examples(dataset, cfg)
    vocab = Vocabulary.from_codes(c for r in train_records for c in r.trace_states)
    train_set = record_examples(train_records, vocab, cfg.include_initial_state)
    validation_set = record_examples(validation_records, vocab, cfg.include_initial_state)
    params = LstmParams.init(cfg.shape(len(vocab)), seed=cfg.seed)
    logger.info(f"📊 Vocabulary: {len(vocab)} state codes, {len(goals)} training goals")

    params, report = fit(params, train_set, validation_set, cfg)
    model = LstmModel(params, vocab, dataset.domain, cfg.include_initial_state, cfg, report.history())
    logger.info(f"✅ Training finished in {report.seconds:.2f}s: best epoch {report.best_epoch}, "
                f"stopped at {report.stopping_epoch}, validation loss {report.best_validation_loss:.4f}")
    return model, report


# === Checkpoints ===

def save_checkpoint(model: LstmModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "shape": asdict(model.params.shape),
        "tensors": {name: np.ascontiguousarray(t) for name, t in model.params.tensors.items()},
        "vocabulary": [int(c) for c in model.vocab.codes],
        "domain": model.domain,
        "train_config": asdict(model.train_config) if model.train_config else None,
        "include_initial_state": model.include_initial_state,
        "history": model.history,
    }
    joblib.dump(payload, path)
    logger.info(f"💾 Saved checkpoint to {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> LstmModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = joblib.load(path)
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(path, "not an LSTM goal classifier checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(path, f"unsupported checkpoint version {payload.get('version')}")
    try:
        params = LstmParams(LstmShape(**payload["shape"]), payload["tensors"])
    except (TypeError, ValueError) as e:
        raise CheckpointError(path, str(e)) from None
    vocab = Vocabulary.from_codes(payload["vocabulary"])
    if len(vocab) != params.shape.vocab_size:
        raise CheckpointError(path, "vocabulary size does not match the embedding table")
    cfg = TrainConfig(**payload["train_config"]) if payload.get("train_config") else None
    logger.info(f"Loaded {payload['domain']} LSTM from {path}")
    return LstmModel(params, vocab, payload["domain"], payload["include_initial_state"], cfg,
                     payload.get("history", {}))


def default_checkpoint_path(domain: str, seed: int) -> Path:
    return settings.MODELS_DIR / f"lstm_{domain}_s{seed}.joblib"


def append_training_run(model: LstmModel, report: TrainReport, dataset: Dataset,
                        path: Optional[Path] = None) -> Path:
    """Append one row per training run to results/training_runs.csv."""
    path = Path(path or settings.RESULTS_DIR / "training_runs.csv")
    ensure_dir(path.parent)
    train_records = dataset.split("train", "validation")
    row = pd.DataFrame([{
        "domain": model.domain,
        "traces": len(dataset.traces("train", "validation")),
        "records": len(train_records),
        "vocab_size": len(model.vocab),
        "embed_dim": model.params.shape.embed_dim,
        "hidden_dim": model.params.shape.hidden_dim,
        "epochs": len(report.validation_loss) - 1,
        "best_epoch": report.best_epoch,
        "stopping_epoch": report.stopping_epoch,
        "best_validation_loss": round(report.best_validation_loss, 6),
        "seconds": round(report.seconds, 3),
        "checksum": report.checksum,
    }])
    row.to_csv(path, mode="a", header=not path.exists(), index=False)
    return path


def print_training_summary(model: LstmModel, report: TrainReport) -> None:
    print(f"\n🧠 LSTM TRAINING SUMMARY - {model.domain}")
    print("=" * 50)
    print(f"   Shape: V={model.params.shape.vocab_size} E={model.params.shape.embed_dim} "
          f"H={model.params.shape.hidden_dim}")
    print(f"   Epochs run: {len(report.validation_loss) - 1} (stopped at {report.stopping_epoch})")
    print(f"   Best epoch: {report.best_epoch}  validation loss {report.best_validation_loss:.4f} "
          f"(epoch 0: {report.validation_loss[0]:.4f})")
    print(f"   Training time: {report.seconds:.2f} seconds")
    if report.aborted_epochs:
        print(f"   ⚠️ Aborted epochs: {report.aborted_epochs}")
    print(f"   Checksum: {report.checksum[:16]}")
