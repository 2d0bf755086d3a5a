#!/usr/bin/env python3
"""
RMSprop Optimizer for the LSTM Goal Classifier

Per-parameter adaptive step sizes from a running average of squared
gradients, with optional global-norm clipping before each update.

Update rule (elementwise):
    s     <- rho * s + (1 - rho) * g^2
    theta <- theta - lr * g / (sqrt(s) + eps)
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from modeling.lstm_model import LstmParams

logger = logging.getLogger(__name__)

OptimizerState = Dict[str, np.ndarray]


class NonFiniteGradientError(ValueError):
    def __init__(self, tensor_name: str):
        self.tensor_name = tensor_name
        super().__init__(f"non-finite gradient in {tensor_name}")


@dataclass(frozen=True)
class RmspropConfig:
    learning_rate: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8
    clip_norm: Optional[float] = 5.0

    def __post_init__(self):
        if not self.learning_rate > 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must be in [0, 1), got {self.rho}")
        if not self.eps > 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.clip_norm is not None and not self.clip_norm > 0.0:
            raise ValueError(f"clip_norm must be positive or None, got {self.clip_norm}")


def init_state(params: LstmParams) -> OptimizerState:
    return {name: np.zeros_like(t) for name, t in params.tensors.items()}


def check_finite(grads: Dict[str, np.ndarray]) -> None:
    """Raise NonFiniteGradientError naming the first tensor holding NaN or inf."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(name)


def clip_by_global_norm(grads: Dict[str, np.ndarray], max_norm: float) -> Tuple[Dict[str, np.ndarray], float]:
    """
    Scale all gradients together so their joint L2 norm is at most max_norm.

    Args:
        grads: Gradient tensors by name
        max_norm: Largest allowed global norm

    Returns:
        (clipped gradients, norm before clipping). Gradients are returned
        unchanged when already within the bound.

    Examples:
        >>> g, norm = clip_by_global_norm({"w": np.array([3.0, 4.0])}, 10.0)
        >>> norm, g["w"].tolist()
        (5.0, [3.0, 4.0])
    """
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if norm <= max_norm or norm == 0.0:
        return grads, norm
    scale = max_norm / norm
    return {name: g * scale for name, g in grads.items()}, norm


def rmsprop_step(
    params: LstmParams,
    grads: Dict[str, np.ndarray],
    state: OptimizerState,
    cfg: RmspropConfig = RmspropConfig(),
) -> Tuple[LstmParams, OptimizerState]:
    """
    Apply one RMSprop update.

    Args:
        params: Current parameters (left untouched)
        grads: Gradients with the same names and shapes as params
        state: Running mean of squared gradients from the previous step
        cfg: Learning rate, decay, epsilon and clipping bound

    Returns:
        (new parameters, new optimizer state)

    Raises:
        NonFiniteGradientError: If any gradient entry is NaN or infinite
        ValueError: If a gradient is missing or has the wrong shape
    """
    for name, tensor in params.tensors.items():
        if name not in grads or grads[name].shape != tensor.shape:
            raise ValueError(f"gradient for {name} missing or misshaped")
    check_finite(grads)
    if cfg.clip_norm is not None:
        grads, norm = clip_by_global_norm(grads, cfg.clip_norm)
        if norm > cfg.clip_norm:
            logger.debug(f"gradient norm {norm:.3f} clipped to {cfg.clip_norm}")

    new_tensors = {}
    new_state = {}
    for name, tensor in params.tensors.items():
        g = grads[name]
        s = cfg.rho * state[name] + (1.0 - cfg.rho) * g * g
        new_state[name] = s
        new_tensors[name] = tensor - cfg.learning_rate * g / (np.sqrt(s) + cfg.eps)
    return LstmParams(params.shape, new_tensors), new_state
