#!/usr/bin/env python3
"""
State Codec

Injective mapping between benchmark states and 36-bit goal codes, plus the
integer vocabulary that feeds state sequences to the LSTM.

Layouts (payload right-aligned, first slot most significant, upper bits zero):
- eight_puzzle: 9 cells x 4-bit tile number (0 = blank), all 36 bits
- lights_out4:  16 cells x 1 bit (1 = on), bits 16..35 zero
- hanoi34:      3 disks x 2-bit peg number (p1 = 0), bits 6..35 zero

Codes serialize as 9 lower-case hex digits. As a bit vector, index 0 holds the
most significant of the 36 bits.
"""

import logging
from typing import Dict, Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

from planning.strips_task import State
from tracegen.domain_builder import MalformedStateError, build_domain

logger = logging.getLogger(__name__)

CODE_BITS = 36
CODE_HEX_DIGITS = 9

# kind -> (number of fields, bits per field)
FIELD_LAYOUT: Dict[str, Tuple[int, int]] = {
    "hanoi34": (3, 2),
    "eight_puzzle": (9, 4),
    "lights_out4": (16, 1),
}


class InvalidCodeError(ValueError):
    def __init__(self, kind: str, code, reason: str):
        self.kind = kind
        self.code = code
        self.reason = reason
        shown = f"{code:09x}" if isinstance(code, int) and code >= 0 else repr(code)
        super().__init__(f"invalid {kind} code {shown}: {reason}")


def _layout(kind: str) -> Tuple[int, int]:
    try:
        return FIELD_LAYOUT[kind]
    except KeyError:
        raise ValueError(f"no code layout for domain {kind!r}") from None


def pack(kind: str, assignment: Sequence[int]) -> int:
    n_fields, width = _layout(kind)
    if len(assignment) != n_fields:
        raise ValueError(f"{kind} packs {n_fields} fields, got {len(assignment)}")
    code = 0
    for value in assignment:
        if not 0 <= value < (1 << width):
            raise ValueError(f"field value {value} does not fit in {width} bits")
        code = (code << width) | int(value)
    return code


def unpack(kind: str, code: int) -> Tuple[int, ...]:
    """Field values of `code`; raises InvalidCodeError on padding or bad fields."""
    n_fields, width = _layout(kind)
    if not isinstance(code, (int, np.integer)) or not 0 <= code < (1 << CODE_BITS):
        raise InvalidCodeError(kind, code, f"not a {CODE_BITS}-bit value")
    code = int(code)
    payload = n_fields * width
    if code >> payload:
        raise InvalidCodeError(kind, code, f"padding bits {payload}..{CODE_BITS - 1} must be zero")
    mask = (1 << width) - 1
    fields = tuple((code >> (width * (n_fields - 1 - i))) & mask for i in range(n_fields))
    try:
        build_domain(kind).check_assignment(fields)
    except MalformedStateError as e:
        raise InvalidCodeError(kind, code, str(e)) from None
    return fields


def encode(kind: str, state: State) -> int:
    """
    Code of a complete state of domain `kind`.

    Raises:
        MalformedStateError: the state misses a slot or fills one twice
    """
    return pack(kind, build_domain(kind).assignment_of(state))


def decode(kind: str, code: int) -> State:
    return build_domain(kind).state_from_assignment(unpack(kind, code))


def is_valid_code(kind: str, code: int) -> bool:
    try:
        unpack(kind, code)
    except InvalidCodeError:
        return False
    return True


# === Text and bit-vector forms ===

def format_code(code: int) -> str:
    return f"{int(code):0{CODE_HEX_DIGITS}x}"


def parse_code(text: str) -> int:
    if not isinstance(text, str) or len(text) != CODE_HEX_DIGITS:
        raise InvalidCodeError("any", text, f"expected {CODE_HEX_DIGITS} hex digits")
    try:
        return int(text, 16)
    except ValueError:
        raise InvalidCodeError("any", text, "not hexadecimal") from None


def code_bits(code: int) -> np.ndarray:
    """36-element 0/1 vector, index 0 = most significant bit."""
    shifts = np.arange(CODE_BITS - 1, -1, -1, dtype=np.int64)
    return ((np.int64(code) >> shifts) & 1).astype(np.uint8)


def bits_to_code(bits: Sequence[int]) -> int:
    code = 0
    for b in bits:
        code = (code << 1) | int(bool(b))
    return code


# === Decoding network outputs ===

class NearestCode(NamedTuple):
    code: int
    index: int
    distance: float
    thresholded: np.ndarray
    bit_match: float


def nearest_valid(probs: Sequence[float], candidates: Sequence[int]) -> NearestCode:
    """
    Candidate code closest to a 36-bit probability vector.

    The distance is the expected Hamming distance sum_b |p_b - bit_b(c)|;
    ties go to the lowest candidate index. Also reports the probabilities
    thresholded at 0.5 and their per-bit match rate with the chosen code.
    """
    if len(candidates) == 0:
        raise ValueError("nearest_valid needs at least one candidate")
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (CODE_BITS,):
        raise ValueError(f"expected {CODE_BITS} probabilities, got shape {probs.shape}")
    table = np.stack([code_bits(c) for c in candidates]).astype(float)
    distances = np.abs(table - probs).sum(axis=1)
    best = int(np.argmin(distances))
    thresholded = (probs >= 0.5).astype(np.uint8)
    match = float(np.mean(thresholded == table[best]))
    return NearestCode(int(candidates[best]), best, float(distances[best]), thresholded, match)


def reconstruction_accuracy(probs: Sequence[float], true_code: int) -> float:
    """Fraction of the 36 thresholded output bits that match `true_code`."""
    thresholded = (np.asarray(probs, dtype=float) >= 0.5).astype(np.uint8)
    return float(np.mean(thresholded == code_bits(true_code)))


# === Vocabulary ===

class Vocabulary:
    """
    State code -> integer id (1-based). Id 0 is reserved for codes never seen
    while building; once frozen no code can be added.
    """

    OOV = 0

    def __init__(self):
        self._ids: Dict[int, int] = {}
        self._codes: List[int] = []
        self.frozen = False

    @classmethod
    def from_codes(cls, codes: Iterable[int]) -> "Vocabulary":
        vocab = cls()
        for code in sorted(set(int(c) for c in codes)):
            vocab.add(code)
        return vocab.freeze()

    def add(self, code: int) -> int:
        code = int(code)
        if code in self._ids:
            return self._ids[code]
        if self.frozen:
            raise ValueError(f"vocabulary is frozen, cannot add {format_code(code)}")
        self._codes.append(code)
        self._ids[code] = len(self._codes)
        return self._ids[code]

    def freeze(self) -> "Vocabulary":
        self.frozen = True
        return self

    def lookup(self, code: int) -> int:
        return self._ids.get(int(code), self.OOV)

    def ids(self, codes: Iterable[int]) -> List[int]:
        return [self.lookup(c) for c in codes]

    def code_of(self, token: int) -> int:
        if not 1 <= token <= len(self._codes):
            raise KeyError(f"token {token} has no code")
        return self._codes[token - 1]

    @property
    def codes(self) -> List[int]:
        return list(self._codes)

    def __len__(self) -> int:
        return len(self._codes)

    def __contains__(self, code: int) -> bool:
        return int(code) in self._ids
