#!/usr/bin/env python3
"""
Goal Prediction Service

Loads a trained LSTM checkpoint and predicts hidden goals from observed
state-code sequences. The network output is decoded to the nearest
candidate code, so exactly one goal is returned per problem.
"""

import logging
import time
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np
import pandas as pd

from modeling.lstm_model import forward
from modeling.state_codec import CODE_BITS, bits_to_code, code_bits, nearest_valid, reconstruction_accuracy
from modeling.train_lstm import LstmModel, load_checkpoint
from recognition.recognition_problem import RecognitionResult
from tracegen.dataset_pipeline import Dataset, DatasetRecord
from utils import settings

logger = logging.getLogger(__name__)

RECOGNIZER_NAME = "lstm"


class GoalPrediction(NamedTuple):
    result: RecognitionResult
    probs: np.ndarray
    predicted_code: int
    reconstruction: Optional[float]


def predict_goal(model: LstmModel, codes: Sequence[int], candidates: Sequence[int],
                 true_code: Optional[int] = None) -> GoalPrediction:
    """
    Score candidates by closeness to the predicted 36-bit goal code.

    Args:
        model: Trained classifier
        codes: Observed state codes, oldest first
        candidates: Candidate goal codes
        true_code: Hidden goal, when known, for the reconstruction accuracy

    Returns:
        GoalPrediction whose result returns the single nearest candidate.
        Scores are 1 - expected Hamming distance / 36.

    Raises:
        ValueError: If the sequence or the candidate list is empty
    """
    if len(codes) == 0:
        raise ValueError("cannot predict a goal from an empty observation sequence")
    if len(candidates) == 0:
        raise ValueError("predict_goal needs at least one candidate")
    started = time.perf_counter()
    probs = forward(model.params, model.token_ids(codes)).probs[0]
    nearest = nearest_valid(probs, candidates)
    table = np.stack([code_bits(c) for c in candidates]).astype(float)
    distances = np.abs(table - probs).sum(axis=1)
    scores = {i: float(1.0 - d / CODE_BITS) for i, d in enumerate(distances)}
    elapsed = time.perf_counter() - started
    result = RecognitionResult(
        RECOGNIZER_NAME, scores, (nearest.index,), elapsed,
        details={"distance": nearest.distance, "bit_match": nearest.bit_match},
    )
    recon = reconstruction_accuracy(probs, true_code) if true_code is not None else None
    return GoalPrediction(result, probs, bits_to_code(nearest.thresholded), recon)


def predict_record(model: LstmModel, record: DatasetRecord) -> GoalPrediction:
    codes = record.observed_states(model.include_initial_state)
    return predict_goal(model, codes, record.candidates, record.goal_code)


class GoalPredictionService:
    """Checkpoint loading plus batch prediction over dataset problems."""

    def __init__(self, models_dir: Optional[Path] = None):
        self.models_dir = Path(models_dir or settings.MODELS_DIR)
        self.model: Optional[LstmModel] = None

    def load_model(self, model_path: Union[str, Path, None] = None, domain: Optional[str] = None) -> bool:
        """Load a checkpoint, or the newest one for `domain` in the models directory."""
        try:
            if model_path:
                model_file = Path(model_path)
            else:
                pattern = f"lstm_{domain}_*.joblib" if domain else "lstm_*.joblib"
                model_files = list(self.models_dir.glob(pattern))
                if not model_files:
                    logger.error(f"No checkpoint matching {pattern} in {self.models_dir}")
                    return False
                model_file = max(model_files, key=lambda p: p.stat().st_mtime)
            self.model = load_checkpoint(model_file)
            if domain and self.model.domain != domain:
                logger.error(f"Checkpoint {model_file} is for {self.model.domain}, not {domain}")
                self.model = None
                return False
            return True
        except (OSError, ValueError) as e:
            logger.error(f"Error loading model: {e}")
            return False

    def predict(self, codes: Sequence[int], candidates: Sequence[int],
                true_code: Optional[int] = None) -> GoalPrediction:
        if self.model is None:
            raise ValueError("Model not loaded")
        return predict_goal(self.model, codes, candidates, true_code)

    def predict_split(self, dataset: Dataset, split: str) -> pd.DataFrame:
        """One row per record of a problem split."""
        if self.model is None:
            raise ValueError("Model not loaded")
        rows: List[dict] = []
        for record in dataset.split(split):
            prediction = predict_record(self.model, record)
            hidden = record.candidates.index(record.goal_code)
            rows.append({
                "problem_id": record.problem_id,
                "level": record.level,
                "hidden": hidden,
                "returned": prediction.result.returned[0],
                "correct": prediction.result.contains(hidden),
                "exact": prediction.predicted_code == record.goal_code,
                "reconstruction": prediction.reconstruction,
                "time": prediction.result.elapsed,
            })
        logger.info(f"Generated {len(rows)} {split} predictions")
        return pd.DataFrame(rows)
