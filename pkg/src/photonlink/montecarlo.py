"""Symbol-level Monte Carlo for the Gaussian-coherent and Poisson channels.

Determinism contract: work is cut into fixed batches of ``BATCH_FRAMES``
frames and batch ``b`` draws everything from the counter-based stream
``seed_stream(master_seed, stream_base + b)``.  The stopping decision scans
batches in index order, so estimates are bit-identical for any worker count;
workers only compute batches speculatively.  ``BATCH_FRAMES`` itself is part
of the sample path, like the seed.

Noise normalization (shared with the analytic module): every coherent slot
observation is r = s + n with E|n|^2 = 1, and a noiseless symbol carries
energy SNR_sym.  The QPSK normalization-lock test pins this convention.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .formats import (
    QPSK_POINTS,
    THREE_PSK_POINTS,
    THREE_PSK_WORD_TO_PAIR,
    FormatKind,
    FormatSpec,
    Metric,
)

BATCH_FRAMES = 4096
_SQRT_HALF = math.sqrt(0.5)
_Z95 = 1.959963984540054

_POPCOUNT = np.array([bin(v).count("1") for v in range(2048)], dtype=np.int64)
_PAIR_FIRST = np.array([p[0] for p in THREE_PSK_WORD_TO_PAIR], dtype=np.int64)
_PAIR_SECOND = np.array([p[1] for p in THREE_PSK_WORD_TO_PAIR], dtype=np.int64)
_THREE_PSK_SECTOR = 2.0 * math.pi / 3.0


class ChannelFamily(enum.Enum):
    GAUSSIAN_COHERENT = "coherent"
    POISSON_COUNTING = "poisson"


@dataclass(frozen=True)
class ChannelConfig:
    """One operating point of either channel family."""

    family: ChannelFamily
    snr_sym: float | None = None
    n_s: float | None = None
    background_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.family is ChannelFamily.GAUSSIAN_COHERENT:
            if self.snr_sym is None or self.snr_sym < 0:
                raise ValueError("coherent channel needs snr_sym >= 0")
        else:
            if self.n_s is None or self.n_s < 0:
                raise ValueError("photon-counting channel needs n_s >= 0")
            if self.background_rate < 0:
                raise ValueError("background rate must be >= 0")


class StopReason(enum.Enum):
    TARGET_ERRORS = "target_errors"
    MAX_SYMBOLS = "max_symbols"


@dataclass(frozen=True)
class StoppingRule:
    target_bit_errors: int = 100
    max_symbols: int = 100_000_000

    def __post_init__(self) -> None:
        if self.target_bit_errors <= 0 or self.max_symbols <= 0:
            raise ValueError("stopping thresholds must be positive")


@dataclass(frozen=True)
class BerEstimate:
    bit_errors: int
    bits_simulated: int
    symbol_errors: int
    symbols_simulated: int
    ber: float
    ci95_low: float
    ci95_high: float
    master_seed: int
    stopped_by: StopReason

    @property
    def ser(self) -> float:
        return self.symbol_errors / self.symbols_simulated

    @property
    def ser_ci95(self) -> tuple[float, float]:
        return wilson_interval(self.symbol_errors, self.symbols_simulated)


def wilson_interval(errors: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval; well behaved at low error counts."""
    if trials <= 0:
        return (0.0, 1.0)
    p_hat = errors / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p_hat + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / trials + z2 / (4.0 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def seed_stream(master_seed: int, stream_index: int) -> np.random.Generator:
    """Counter-based stream: a pure function of (master_seed, stream_index).

    Distinct indices give statistically independent Philox streams, so any
    partition of the index space across workers replays identical draws.
    """
    key = np.array([master_seed & (2**64 - 1), stream_index & (2**64 - 1)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class _BatchCounts:
    bit_errors: int
    symbol_errors: int
    bits: int
    symbols: int


def _argmax_with_ties(stat: np.ndarray, tie_u: np.ndarray) -> np.ndarray:
    """Row-wise argmax with uniform tie-breaking driven by tie_u in [0, 1)."""
    best = stat.max(axis=1, keepdims=True)
    is_max = stat == best
    n_ties = is_max.sum(axis=1)
    pick = np.minimum((tie_u * n_ties).astype(np.int64), n_ties - 1)
    rank = np.cumsum(is_max, axis=1)
    chosen = is_max & (rank == (pick + 1)[:, None])
    return chosen.argmax(axis=1)


def _bits_to_index(bits: np.ndarray) -> np.ndarray:
    weights = 1 << np.arange(bits.shape[1] - 1, -1, -1, dtype=np.int64)
    return bits.astype(np.int64) @ weights


def _coherent_batch(
    fmt: FormatSpec, snr_sym: float, metric: Metric, rng: np.random.Generator, n_frames: int
) -> _BatchCounts:
    amplitude = math.sqrt(snr_sym)
    kind = fmt.kind

    if kind in (FormatKind.BPSK, FormatKind.QPSK):
        n_bits = 1 if kind is FormatKind.BPSK else 2
        bits = rng.random((n_frames, n_bits)) < 0.5
        noise = rng.standard_normal((n_frames, 2)) * _SQRT_HALF
        if kind is FormatKind.BPSK:
            tx = amplitude * (1.0 - 2.0 * bits[:, 0])
            errs = ((tx + noise[:, 0]) < 0) != bits[:, 0]
            bit_err = int(errs.sum())
            return _BatchCounts(bit_err, bit_err, n_frames, n_frames)
        points = QPSK_POINTS[_bits_to_index(bits)]
        re = points.real * amplitude + noise[:, 0]
        im = points.imag * amplitude + noise[:, 1]
        err0 = (im < 0) != bits[:, 0]
        err1 = (re < 0) != bits[:, 1]
        bit_err = int(err0.sum()) + int(err1.sum())
        sym_err = int((err0 | err1).sum())
        return _BatchCounts(bit_err, sym_err, 2 * n_frames, n_frames)

    if kind is FormatKind.THREE_PSK:
        bits = rng.random((n_frames, 3)) < 0.5
        words = _bits_to_index(bits)
        sent1, sent2 = _PAIR_FIRST[words], _PAIR_SECOND[words]
        noise = rng.standard_normal((n_frames, 4)) * _SQRT_HALF
        r1 = amplitude * THREE_PSK_POINTS[sent1] + noise[:, 0] + 1j * noise[:, 1]
        r2 = amplitude * THREE_PSK_POINTS[sent2] + noise[:, 2] + 1j * noise[:, 3]
        ang1, ang2 = np.angle(r1), np.angle(r2)
        m1 = np.rint(ang1 / _THREE_PSK_SECTOR).astype(np.int64) % 3
        m2 = np.rint(ang2 / _THREE_PSK_SECTOR).astype(np.int64) % 3
        # Symbol errors are counted on the raw per-symbol decisions, the
        # statistic the closed-form 3-PSK SER describes; the block fix-up
        # below only affects the decoded bits.
        sym_err = int((m1 != sent1).sum()) + int((m2 != sent2).sum())
        invalid = (m1 == 2) & (m2 == 2)
        if invalid.any():
            # Re-decide to the nearest used pair by total angular distance:
            # flip the symbol with the larger offset from point 2's angle.
            off1 = np.mod(ang1[invalid] - 2.0 * _THREE_PSK_SECTOR + math.pi, 2.0 * math.pi) - math.pi
            off2 = np.mod(ang2[invalid] - 2.0 * _THREE_PSK_SECTOR + math.pi, 2.0 * math.pi) - math.pi
            flip_first = np.abs(off1) > np.abs(off2)
            second1 = np.where(off1 > 0, 0, 1)
            second2 = np.where(off2 > 0, 0, 1)
            m1_fix = np.where(flip_first, second1, 2)
            m2_fix = np.where(flip_first, 2, second2)
            m1[invalid], m2[invalid] = m1_fix, m2_fix
        decided_words = 3 * m1 + m2
        bit_err = int(_POPCOUNT[words ^ decided_words].sum())
        return _BatchCounts(bit_err, sym_err, 3 * n_frames, 2 * n_frames)

    order = fmt.order
    n_slot_bits = int(round(math.log2(order)))
    rows = np.arange(n_frames)

    if kind is FormatKind.PPM:
        bits = rng.random((n_frames, n_slot_bits)) < 0.5
        slots = _bits_to_index(bits)
        noise = rng.standard_normal((n_frames, 2 * order))
        re = noise[:, :order] * _SQRT_HALF
        im = noise[:, order:] * _SQRT_HALF
        re[rows, slots] += amplitude
        tie_u = rng.random(n_frames)
        stat = re * re + im * im if metric is Metric.ENVELOPE else re
        decided = _argmax_with_ties(stat, tie_u)
        bit_err = int(_POPCOUNT[slots ^ decided].sum())
        sym_err = int((decided != slots).sum())
        return _BatchCounts(bit_err, sym_err, n_slot_bits * n_frames, n_frames)

    bits = rng.random((n_frames, n_slot_bits + 2)) < 0.5
    slots = _bits_to_index(bits[:, :n_slot_bits])
    q_index = _bits_to_index(bits[:, n_slot_bits:])
    points = QPSK_POINTS[q_index]
    noise = rng.standard_normal((n_frames, 2 * order))
    re = noise[:, :order] * _SQRT_HALF
    im = noise[:, order:] * _SQRT_HALF
    re[rows, slots] += amplitude * points.real
    im[rows, slots] += amplitude * points.imag
    tie_u = rng.random(n_frames)
    stat = re * re + im * im if metric is Metric.ENVELOPE else re
    decided = _argmax_with_ties(stat, tie_u)
    z_re, z_im = re[rows, decided], im[rows, decided]
    err_q0 = (z_im < 0) != bits[:, n_slot_bits]
    err_q1 = (z_re < 0) != bits[:, n_slot_bits + 1]
    slot_wrong = decided != slots
    bit_err = int(_POPCOUNT[slots ^ decided].sum()) + int(err_q0.sum()) + int(err_q1.sum())
    sym_err = int((slot_wrong | err_q0 | err_q1).sum())
    return _BatchCounts(bit_err, sym_err, (n_slot_bits + 2) * n_frames, n_frames)


def _poisson_batch(
    order: int, n_s: float, background_rate: float, rng: np.random.Generator, n_frames: int
) -> _BatchCounts:
    n_slot_bits = int(round(math.log2(order)))
    bits = rng.random((n_frames, n_slot_bits)) < 0.5
    slots = _bits_to_index(bits)
    counts = rng.poisson(background_rate, (n_frames, order)).astype(np.int64)
    counts[np.arange(n_frames), slots] += rng.poisson(n_s, n_frames).astype(np.int64)
    tie_u = rng.random(n_frames)
    decided = _argmax_with_ties(counts, tie_u)
    bit_err = int(_POPCOUNT[slots ^ decided].sum())
    sym_err = int((decided != slots).sum())
    return _BatchCounts(bit_err, sym_err, n_slot_bits * n_frames, n_frames)


def _run_batches(
    batch_fn: Callable[[int], _BatchCounts],
    rule: StoppingRule,
    master_seed: int,
    workers: int,
) -> BerEstimate:
    if workers < 1:
        raise ValueError("workers must be >= 1")
    collected: list[_BatchCounts] = []
    stop_at: int | None = None
    reason = StopReason.MAX_SYMBOLS
    cum_bit_err = cum_sym_err = cum_bits = cum_syms = 0
    scanned = 0
    next_index = 0
    executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while stop_at is None:
            wave = range(next_index, next_index + workers)
            next_index += workers
            if executor is None:
                collected.extend(batch_fn(b) for b in wave)
            else:
                collected.extend(executor.map(batch_fn, wave))
            while scanned < len(collected):
                counts = collected[scanned]
                cum_bit_err += counts.bit_errors
                cum_sym_err += counts.symbol_errors
                cum_bits += counts.bits
                cum_syms += counts.symbols
                scanned += 1
                if cum_bit_err >= rule.target_bit_errors:
                    stop_at = scanned
                    reason = StopReason.TARGET_ERRORS
                    break
                if cum_syms >= rule.max_symbols:
                    stop_at = scanned
                    reason = StopReason.MAX_SYMBOLS
                    break
    finally:
        if executor is not None:
            executor.shutdown(wait=False, cancel_futures=True)

    ci_low, ci_high = wilson_interval(cum_bit_err, cum_bits)
    return BerEstimate(
        bit_errors=cum_bit_err,
        bits_simulated=cum_bits,
        symbol_errors=cum_sym_err,
        symbols_simulated=cum_syms,
        ber=cum_bit_err / cum_bits,
        ci95_low=ci_low,
        ci95_high=ci_high,
        master_seed=master_seed,
        stopped_by=reason,
    )


def simulate_coherent(
    fmt: FormatSpec,
    snr_sym: float,
    metric: Metric = Metric.ENVELOPE,
    rule: StoppingRule = StoppingRule(),
    master_seed: int = 0,
    workers: int = 1,
    stream_base: int = 0,
) -> BerEstimate:
    """Estimate BER/SER of a coherent format at a symbol SNR."""
    if snr_sym < 0 or not math.isfinite(snr_sym):
        raise ValueError("snr_sym must be finite and >= 0")

    def batch(index: int) -> _BatchCounts:
        rng = seed_stream(master_seed, stream_base + index)
        return _coherent_batch(fmt, snr_sym, metric, rng, BATCH_FRAMES)

    return _run_batches(batch, rule, master_seed, workers)


def simulate_photon_counting_ppm(
    order: int,
    n_s: float,
    background_rate: float = 0.0,
    rule: StoppingRule = StoppingRule(),
    master_seed: int = 0,
    workers: int = 1,
    stream_base: int = 0,
) -> BerEstimate:
    """Estimate BER/SER of photon-counting M-PPM at n_s photons per symbol.

    Slot counts are Poisson; the decision is the largest count with uniform
    random tie-breaks, which covers the all-zero erasure frame.
    """
    if order < 2 or order & (order - 1):
        raise ValueError("PPM order must be a power of two >= 2")
    if n_s < 0 or background_rate < 0:
        raise ValueError("rates must be >= 0")

    def batch(index: int) -> _BatchCounts:
        rng = seed_stream(master_seed, stream_base + index)
        return _poisson_batch(order, n_s, background_rate, rng, BATCH_FRAMES)

    return _run_batches(batch, rule, master_seed, workers)


def simulate(
    fmt: FormatSpec | None,
    config: ChannelConfig,
    metric: Metric = Metric.ENVELOPE,
    rule: StoppingRule = StoppingRule(),
    master_seed: int = 0,
    workers: int = 1,
    order: int | None = None,
) -> BerEstimate:
    """Dispatch a ChannelConfig to the matching simulator."""
    if config.family is ChannelFamily.GAUSSIAN_COHERENT:
        if fmt is None:
            raise ValueError("coherent simulation needs a format")
        return simulate_coherent(fmt, config.snr_sym, metric, rule, master_seed, workers)
    ppm_order = order if order is not None else (fmt.order if fmt is not None else None)
    if ppm_order is None:
        raise ValueError("photon-counting simulation needs a PPM order")
    return simulate_photon_counting_ppm(
        ppm_order, config.n_s, config.background_rate, rule, master_seed, workers
    )
