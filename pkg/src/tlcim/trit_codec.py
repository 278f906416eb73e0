"""Balanced-ternary encoding, line/state codings, and the 8-bit to 5-trit
weight/input quantization pipeline.

Conventions used throughout the package:

* A trit is a plain int in {-1, 0, +1}.
* Words are little-endian: index k carries positional weight 3**k.
* The text form is most-significant-trit first over the alphabet '-', '0',
  '+' (value 5 -> "00+--").
* "Truncation" of an 8-bit value to a trit word saturates to the word's
  range (+-121 for width 5); it never wraps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

TRIT_VALUES = (-1, 0, 1)
DEFAULT_WIDTH = 5

_TRIT_CHARS = {-1: "-", 0: "0", 1: "+"}
_CHAR_TRITS = {v: k for k, v in _TRIT_CHARS.items()}

# State coding of one weight trit in the two SRAM bits (Q1, Q2).  (0, 1) is
# not a legal pair.
_WEIGHT_TRIT_TO_BITS = {1: (0, 0), 0: (1, 0), -1: (1, 1)}
_BITS_TO_WEIGHT_TRIT = {v: k for k, v in _WEIGHT_TRIT_TO_BITS.items()}


def max_value(width: int) -> int:
    """Largest magnitude representable by a width-`width` balanced word."""
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    return (3**width - 1) // 2


def _check_trit(t: int) -> int:
    if t not in TRIT_VALUES:
        raise ValueError(f"not a trit: {t!r}")
    return int(t)


@dataclass(frozen=True)
class TritWord:
    """Fixed-width balanced-ternary word, little-endian (trits[0] is 3**0)."""

    trits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "trits", tuple(_check_trit(t) for t in self.trits))
        if len(self.trits) < 1:
            raise ValueError("empty trit word")

    @property
    def width(self) -> int:
        return len(self.trits)

    @property
    def value(self) -> int:
        return sum(t * 3**k for k, t in enumerate(self.trits))

    def negate(self) -> "TritWord":
        return TritWord(tuple(-t for t in self.trits))

    def __str__(self) -> str:
        return "".join(_TRIT_CHARS[t] for t in reversed(self.trits))

    @classmethod
    def from_string(cls, text: str) -> "TritWord":
        """Parse the most-significant-first text form, e.g. "00+--"."""
        try:
            trits = tuple(_CHAR_TRITS[c] for c in reversed(text))
        except KeyError as exc:
            raise ValueError(f"bad trit character {exc.args[0]!r} in {text!r}") from None
        return cls(trits)


@dataclass(frozen=True)
class WeightBitPair:
    """SRAM bit pair backing one weight trit; (0, 1) is unrepresentable."""

    q1: int
    q2: int

    def __post_init__(self):
        if (self.q1, self.q2) not in _BITS_TO_WEIGHT_TRIT:
            raise ValueError(f"illegal weight bit pair ({self.q1}, {self.q2})")

    @property
    def trit(self) -> int:
        return _BITS_TO_WEIGHT_TRIT[(self.q1, self.q2)]


@dataclass(frozen=True)
class InputLinePattern:
    """Differential input-line levels driving one input trit."""

    in1: int
    in2: int
    inb1: int
    inb2: int

    def __post_init__(self):
        if self.inb1 != 1 - self.in1 or self.inb2 != 1 - self.in2:
            raise ValueError("input lines must be complementary")
        if (self.in1, self.in2) == (0, 1):
            raise ValueError("illegal input line pair (0, 1)")


def to_balanced_ternary(v: int, width: int = DEFAULT_WIDTH) -> TritWord:
    """Encode an integer as a width-`width` balanced-ternary word.

    Raises ValueError when |v| exceeds (3**width - 1) / 2; every in-range
    value has exactly one encoding.
    """
    v = int(v)
    limit = max_value(width)
    if abs(v) > limit:
        raise ValueError(f"{v} out of range [-{limit}, {limit}] for width {width}")
    trits = []
    rest = v
    for _ in range(width):
        r = (rest + 1) % 3 - 1
        trits.append(r)
        rest = (rest - r) // 3
    return TritWord(tuple(trits))


def from_balanced_ternary(word: TritWord | Sequence[int]) -> int:
    """Decode a trit word (or raw little-endian trit sequence) to an int."""
    if isinstance(word, TritWord):
        return word.value
    return sum(_check_trit(t) * 3**k for k, t in enumerate(word))


def truncate_to_trits(v8: int, width: int = DEFAULT_WIDTH) -> TritWord:
    """Truncate a signed 8-bit value to a trit word by saturation."""
    v8 = int(v8)
    if not -128 <= v8 <= 127:
        raise ValueError(f"{v8} outside signed 8-bit range")
    limit = max_value(width)
    return to_balanced_ternary(min(max(v8, -limit), limit), width)


def weight_trit_to_bits(t: int) -> WeightBitPair:
    """State coding of a weight trit: +1 -> (0,0), 0 -> (1,0), -1 -> (1,1)."""
    return WeightBitPair(*_WEIGHT_TRIT_TO_BITS[_check_trit(t)])


def input_trit_to_lines(t: int) -> InputLinePattern:
    """Line coding of an input trit: +1 -> 1/1, 0 -> 1/0, -1 -> 0/0."""
    in1, in2 = {1: (1, 1), 0: (1, 0), -1: (0, 0)}[_check_trit(t)]
    return InputLinePattern(in1, in2, 1 - in1, 1 - in2)


def round_half_away(x):
    """Round half away from zero (sign-symmetric), elementwise."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_weight_tensor(values: Iterable[float], scale: float) -> list[TritWord]:
    """Quantize float weights: value/scale rounded, saturated to 8 bit, then
    truncated to trit words.

    Rounding is half-away-from-zero so the pipeline is sign-symmetric.
    """
    if not (scale > 0 and math.isfinite(scale)):
        raise ValueError(f"scale must be a positive finite float, got {scale}")
    arr = np.asarray(list(values), dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("weight values must be finite")
    q8 = np.clip(round_half_away(arr / scale), -128, 127).astype(np.int64)
    return [truncate_to_trits(v) for v in q8]


# Bulk (numpy) variants used on weight/input tensors.  Trit axes are always
# the last axis, little-endian like TritWord.


def encode_array(values: np.ndarray, width: int = DEFAULT_WIDTH) -> np.ndarray:
    """Encode an integer array to trits; output shape is shape + (width,)."""
    v = np.asarray(values, dtype=np.int64)
    limit = max_value(width)
    if np.any(np.abs(v) > limit):
        bad = v[np.abs(v) > limit].ravel()[0]
        raise ValueError(f"{bad} out of range [-{limit}, {limit}] for width {width}")
    out = np.empty(v.shape + (width,), dtype=np.int8)
    rest = v.copy()
    for k in range(width):
        r = (rest + 1) % 3 - 1
        out[..., k] = r
        rest = (rest - r) // 3
    return out


def decode_array(trits: np.ndarray) -> np.ndarray:
    """Decode a trit array (last axis little-endian) to int64 values."""
    t = np.asarray(trits, dtype=np.int64)
    weights = 3 ** np.arange(t.shape[-1], dtype=np.int64)
    return t @ weights


def truncate_array(v8: np.ndarray, width: int = DEFAULT_WIDTH) -> np.ndarray:
    """Bulk truncate_to_trits: saturate signed-8-bit values, then encode."""
    v = np.asarray(v8, dtype=np.int64)
    if np.any(v < -128) or np.any(v > 127):
        raise ValueError("values outside signed 8-bit range")
    limit = max_value(width)
    return encode_array(np.clip(v, -limit, limit), width)
