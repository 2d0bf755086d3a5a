#!/usr/bin/env python3
"""
Observation Sampler

Prunes a plan trace to a given observability level. Kept positions are drawn
uniformly without replacement and always index actions; the action view keeps
those actions and the state view keeps the states they lead to.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from tracegen.trace_generator import PlanTrace
from utils.settings import OBSERVABILITY_LEVELS

logger = logging.getLogger(__name__)

OBSERVATION_KINDS = ("action_obs", "state_obs")
ROUNDING_RULES = ("round", "ceil")


@dataclass(frozen=True)
class ObservationSequence:
    kind: str
    items: Tuple
    level: int
    kept_indices: Tuple[int, ...]
    flags: Tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.items)


def observation_count(length: int, level: int, rounding: str = "round") -> int:
    """
    Number of kept observations: max(1, round(level / 100 * length)), capped at
    `length`. `round` is half-up; `ceil` rounds any fraction up. Zero-length
    traces keep nothing.
    """
    if rounding not in ROUNDING_RULES:
        raise ValueError(f"rounding must be one of {ROUNDING_RULES}, got {rounding!r}")
    if length == 0:
        return 0
    exact = level * length / 100
    n = math.ceil(exact) if rounding == "ceil" else int(math.floor(exact + 0.5))
    return min(length, max(1, n))


def observation_rng(seed: int, trace_index: int, level: int) -> np.random.Generator:
    return np.random.default_rng([seed, trace_index, level])


def sample_indices(length: int, level: int, rng: np.random.Generator,
                   rounding: str = "round") -> Tuple[int, ...]:
    if level not in OBSERVABILITY_LEVELS:
        raise ValueError(f"level must be one of {OBSERVABILITY_LEVELS}, got {level}")
    k = observation_count(length, level, rounding)
    if k == length:
        return tuple(range(length))
    return tuple(int(i) for i in np.sort(rng.choice(length, size=k, replace=False)))


def sample_observations(trace: PlanTrace, kind: str, level: int, seed: int = 0, trace_index: int = 0,
                        rounding: str = "round",
                        state_encoder: Optional[Callable] = None) -> ObservationSequence:
    """
    Observation sequence of `trace` at `level` percent.

    The draw depends only on (seed, trace_index, level), so the action and
    state views of one trace keep the same positions. State observations are
    `state_encoder(state)` codes when an encoder is given, else State objects.
    """
    if kind not in OBSERVATION_KINDS:
        raise ValueError(f"kind must be one of {OBSERVATION_KINDS}, got {kind!r}")
    kept = sample_indices(len(trace), level, observation_rng(seed, trace_index, level), rounding)
    return observations_at(trace, kind, level, kept, state_encoder)


def observations_at(trace: PlanTrace, kind: str, level: int, kept: Sequence[int],
                    state_encoder: Optional[Callable] = None) -> ObservationSequence:
    kept = tuple(kept)
    if kind == "action_obs":
        items = tuple(trace.actions[i] for i in kept)
    else:
        encode = state_encoder or (lambda s: s)
        items = tuple(encode(trace.states[i + 1]) for i in kept)
    flags = ("empty_trace",) if len(trace) == 0 else ()
    return ObservationSequence(kind, items, level, kept, flags)


def is_subsequence(kept: Sequence[int], length: int) -> bool:
    """Kept positions are strictly increasing and inside the trace."""
    return all(0 <= i < length for i in kept) and all(a < b for a, b in zip(kept, kept[1:]))
