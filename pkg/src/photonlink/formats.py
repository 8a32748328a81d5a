"""Modulation formats: alphabets, bit mappings and spectral efficiency.

The symbol-level reference codec in this module is deliberately scalar and
explicit; the Monte Carlo engine carries vectorized twins that are checked
against it. Bit conventions:

* QPSK is Gray mapped: 00 -> (1+1j)/sqrt(2), 01 -> (-1+1j)/sqrt(2),
  11 -> (-1-1j)/sqrt(2), 10 -> (1-1j)/sqrt(2); the first bit is the sign of
  the imaginary part, the second the sign of the real part.
* PPM slot indices use the natural big-endian binary map.
* 3-PSK carries 1.5 bits/symbol through a block code: 3 bits select one of
  8 ordered pairs of 3-PSK symbols (lexicographic, the pair (2, 2) is never
  transmitted).  A received pair that hard-decides to the unused pair is
  re-decided to the nearest used pair by total angular distance.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_SQRT_HALF = math.sqrt(0.5)

# Index = integer value of the Gray bit pair (first bit MSB).
QPSK_POINTS = np.array(
    [1.0 + 1.0j, -1.0 + 1.0j, 1.0 - 1.0j, -1.0 - 1.0j]
) * _SQRT_HALF

# Points at angles 0, +2pi/3, -2pi/3.
THREE_PSK_POINTS = np.exp(2j * math.pi * np.arange(3) / 3.0)

# 3-bit word -> ordered pair of 3-PSK symbol indices; (2, 2) stays unused.
THREE_PSK_WORD_TO_PAIR: tuple[tuple[int, int], ...] = tuple(
    (v // 3, v % 3) for v in range(8)
)
THREE_PSK_PAIR_TO_WORD = {pair: v for v, pair in enumerate(THREE_PSK_WORD_TO_PAIR)}
THREE_PSK_UNUSED_PAIR = (2, 2)

VALID_PPM_ORDERS = (2, 4, 8, 16, 32, 64, 128, 256, 512, 1024)


class FormatKind(enum.Enum):
    BPSK = "bpsk"
    QPSK = "qpsk"
    THREE_PSK = "3psk"
    PPM = "ppm"
    PPM_QPSK = "ppmqpsk"


class Metric(enum.Enum):
    """Slot-decision statistic for PPM-family formats."""

    ENVELOPE = "envelope"
    COHERENT_REAL = "coherent"


@dataclass(frozen=True)
class FormatSpec:
    kind: FormatKind
    order: int | None = None

    def __post_init__(self) -> None:
        if self.kind in (FormatKind.PPM, FormatKind.PPM_QPSK):
            if self.order not in VALID_PPM_ORDERS:
                raise ValueError(
                    f"PPM order must be a power of two in {VALID_PPM_ORDERS}, got {self.order!r}"
                )
        elif self.order is not None:
            raise ValueError(f"{self.kind.value} takes no order")

    @property
    def bits_per_symbol(self) -> float:
        if self.kind is FormatKind.BPSK:
            return 1.0
        if self.kind is FormatKind.QPSK:
            return 2.0
        if self.kind is FormatKind.THREE_PSK:
            return 1.5
        if self.kind is FormatKind.PPM:
            return float(round(math.log2(self.order)))
        return float(round(math.log2(self.order))) + 2.0

    @property
    def slots_per_symbol(self) -> int:
        if self.kind in (FormatKind.PPM, FormatKind.PPM_QPSK):
            return self.order
        return 1

    @property
    def symbols_per_block(self) -> int:
        """Symbols in the smallest bit-aligned group (2 for 3-PSK, else 1)."""
        return 2 if self.kind is FormatKind.THREE_PSK else 1

    @property
    def bits_per_block(self) -> int:
        return int(round(self.bits_per_symbol * self.symbols_per_block))

    @property
    def cli_name(self) -> str:
        if self.kind in (FormatKind.PPM, FormatKind.PPM_QPSK):
            return f"{self.kind.value}:{self.order}"
        return self.kind.value

    def __str__(self) -> str:
        return self.cli_name


def bpsk() -> FormatSpec:
    return FormatSpec(FormatKind.BPSK)


def qpsk() -> FormatSpec:
    return FormatSpec(FormatKind.QPSK)


def three_psk() -> FormatSpec:
    return FormatSpec(FormatKind.THREE_PSK)


def ppm(order: int) -> FormatSpec:
    return FormatSpec(FormatKind.PPM, order)


def ppm_qpsk(order: int) -> FormatSpec:
    return FormatSpec(FormatKind.PPM_QPSK, order)


def parse_format(name: str) -> FormatSpec:
    """Parse the CLI spelling: bpsk, qpsk, 3psk, ppm:<M>, ppmqpsk:<M>."""
    token = name.strip().lower()
    if token in ("bpsk", "qpsk", "3psk"):
        return FormatSpec(FormatKind(token))
    if ":" in token:
        head, _, tail = token.partition(":")
        if head in ("ppm", "ppmqpsk"):
            try:
                order = int(tail)
            except ValueError:
                raise ValueError(f"bad PPM order in format {name!r}") from None
            return FormatSpec(FormatKind(head), order)
    raise ValueError(f"unknown format {name!r}")


def spectral_efficiency(fmt: FormatSpec, code_rate: float) -> float:
    """Information bits/(s*Hz) including FEC overhead."""
    if not 0 < code_rate <= 1:
        raise ValueError(f"code rate must be in (0, 1], got {code_rate!r}")
    return code_rate * fmt.bits_per_symbol / fmt.slots_per_symbol


@dataclass
class SymbolFrame:
    """Complex field samples of one symbol, one entry per slot."""

    slots: np.ndarray
    occupied_slot: int | None = None

    def energy(self) -> float:
        return float(np.sum(np.abs(self.slots) ** 2))


def _check_bits(bits: Sequence[int] | np.ndarray) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.int64)
    if arr.ndim != 1 or not np.all((arr == 0) | (arr == 1)):
        raise ValueError("bits must be a flat 0/1 sequence")
    return arr


def _bits_to_int(bits: np.ndarray) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.int64)


def modulate(fmt: FormatSpec, bits: Sequence[int] | np.ndarray, amplitude: float) -> list[SymbolFrame]:
    """Map a bit sequence to noiseless symbol frames of energy amplitude**2."""
    arr = _check_bits(bits)
    block = fmt.bits_per_block
    if len(arr) % block:
        raise ValueError(f"bit count {len(arr)} not divisible by {block} for {fmt}")
    if not (math.isfinite(amplitude) and amplitude >= 0):
        raise ValueError("amplitude must be finite and >= 0")

    frames: list[SymbolFrame] = []
    for start in range(0, len(arr), block):
        group = arr[start : start + block]
        if fmt.kind is FormatKind.BPSK:
            point = amplitude * (1.0 - 2.0 * group[0])
            frames.append(SymbolFrame(np.array([point], dtype=complex)))
        elif fmt.kind is FormatKind.QPSK:
            point = amplitude * QPSK_POINTS[_bits_to_int(group)]
            frames.append(SymbolFrame(np.array([point], dtype=complex)))
        elif fmt.kind is FormatKind.THREE_PSK:
            m1, m2 = THREE_PSK_WORD_TO_PAIR[_bits_to_int(group)]
            for m in (m1, m2):
                frames.append(SymbolFrame(np.array([amplitude * THREE_PSK_POINTS[m]], dtype=complex)))
        else:
            order = fmt.order
            n_slot_bits = int(round(math.log2(order)))
            slot = _bits_to_int(group[:n_slot_bits])
            slots = np.zeros(order, dtype=complex)
            if fmt.kind is FormatKind.PPM:
                slots[slot] = amplitude
            else:
                slots[slot] = amplitude * QPSK_POINTS[_bits_to_int(group[n_slot_bits:])]
            frames.append(SymbolFrame(slots, occupied_slot=slot))
    return frames


def _decide_qpsk_bits(sample: complex) -> np.ndarray:
    return np.array([1 if sample.imag < 0 else 0, 1 if sample.real < 0 else 0], dtype=np.int64)


def _argmax_with_ties(values: np.ndarray, rng: np.random.Generator | None) -> int:
    best = np.max(values)
    ties = np.flatnonzero(values == best)
    if len(ties) == 1:
        return int(ties[0])
    if rng is None:
        raise ValueError("tie-break needs a decision RNG stream")
    return int(rng.choice(ties))


def _wrap_angle(theta: float) -> float:
    return math.remainder(theta, 2.0 * math.pi)


_THREE_PSK_SECTOR = 2.0 * math.pi / 3.0


def _nearest_three_psk(sample: complex) -> int:
    theta = math.atan2(sample.imag, sample.real)
    return int(round(theta / _THREE_PSK_SECTOR)) % 3


def three_psk_decide_pair(sample1: complex, sample2: complex) -> tuple[int, int]:
    """Joint decision over the 8 used pairs by total angular distance.

    Equivalent to independent per-symbol decisions except when they land on
    the unused pair, in which case the symbol with the smaller second-choice
    margin is flipped to its second-nearest point.
    """
    m1 = _nearest_three_psk(sample1)
    m2 = _nearest_three_psk(sample2)
    if (m1, m2) != THREE_PSK_UNUSED_PAIR:
        return m1, m2
    offsets = []
    for sample in (sample1, sample2):
        theta = math.atan2(sample.imag, sample.real)
        offsets.append(_wrap_angle(theta - 2.0 * _THREE_PSK_SECTOR))
    # Larger |offset| from the sector center means a smaller margin.
    flip = 0 if abs(offsets[0]) > abs(offsets[1]) else 1
    second = 0 if offsets[flip] > 0 else 1
    return (second, 2) if flip == 0 else (2, second)


def hard_decide(
    fmt: FormatSpec,
    frames: SymbolFrame | Sequence[SymbolFrame],
    metric: Metric = Metric.ENVELOPE,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Invert :func:`modulate` for one decision block.

    All formats take a single frame except 3-PSK, whose block spans a pair
    of frames.  PPM slot ties are broken uniformly at random from ``rng``.
    """
    if isinstance(frames, SymbolFrame):
        frames = [frames]
    if len(frames) != fmt.symbols_per_block:
        raise ValueError(f"{fmt} decides blocks of {fmt.symbols_per_block} frame(s)")

    if fmt.kind is FormatKind.THREE_PSK:
        for frame in frames:
            if frame.slots.shape != (1,):
                raise ValueError("3-PSK frames carry exactly one slot")
        pair = three_psk_decide_pair(complex(frames[0].slots[0]), complex(frames[1].slots[0]))
        return _int_to_bits(THREE_PSK_PAIR_TO_WORD[pair], 3)

    frame = frames[0]
    if frame.slots.shape != (fmt.slots_per_symbol,):
        raise ValueError(f"expected {fmt.slots_per_symbol} slot(s), got {frame.slots.shape}")

    if fmt.kind is FormatKind.BPSK:
        return np.array([0 if frame.slots[0].real >= 0 else 1], dtype=np.int64)
    if fmt.kind is FormatKind.QPSK:
        return _decide_qpsk_bits(complex(frame.slots[0]))

    stat = np.abs(frame.slots) if metric is Metric.ENVELOPE else frame.slots.real
    slot = _argmax_with_ties(stat, rng)
    n_slot_bits = int(round(math.log2(fmt.order)))
    slot_bits = _int_to_bits(slot, n_slot_bits)
    if fmt.kind is FormatKind.PPM:
        return slot_bits
    return np.concatenate([slot_bits, _decide_qpsk_bits(complex(frame.slots[slot]))])
