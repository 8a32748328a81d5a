"""Closed-form capacities and error rates for the supported formats.

Conventions, shared with the Monte Carlo engine:

* Coherent channel: each slot observation is r = s + n with circular complex
  Gaussian noise of total variance E|n|^2 = 1, so a noiseless symbol of
  energy SNR_sym has exactly that symbol SNR and Gray-coded QPSK obeys
  BER = Q(sqrt(2*SNR_bit)).
* PPM slot decisions use the envelope |r| by default; the envelope symbol
  error rate is the classical noncoherent M-ary orthogonal result, evaluated
  by adaptive quadrature with the exponentially scaled Bessel function
  because the textbook alternating binomial sum cancels catastrophically for
  large M.
* Photon-counting PPM capacity uses Poisson statistics with mean n_s photons
  per occupied symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import QuadratureError
from .formats import (
    THREE_PSK_PAIR_TO_WORD,
    THREE_PSK_UNUSED_PAIR,
    THREE_PSK_WORD_TO_PAIR,
    FormatKind,
    FormatSpec,
    Metric,
)
from .link import LinkBudget, NoiseFigure, photons_per_symbol_coherent, photons_per_symbol_ppm

_LN2 = math.log(2.0)
_QUAD_EPSABS = 0.0  # pure relative control; every integrand here is >= 0
_QUAD_EPSREL = 1e-11
_QUAD_LIMIT = 300


@dataclass(frozen=True)
class CapacityPoint:
    received_power_w: float
    capacity_bps: float
    model: str


def q_function(x: float) -> float:
    """Gaussian tail probability, stable for large arguments via erfc."""
    return 0.5 * special.erfc(x / math.sqrt(2.0))


def q_function_inv(p: float) -> float:
    if not 0 < p < 1:
        raise ValueError("tail probability must be in (0, 1)")
    return math.sqrt(2.0) * special.erfcinv(2.0 * p)


def _quad(fn: Callable[[float], float], lo: float, hi: float, points=None) -> float:
    res = integrate.quad(
        fn,
        lo,
        hi,
        epsabs=_QUAD_EPSABS,
        epsrel=_QUAD_EPSREL,
        limit=_QUAD_LIMIT,
        points=points,
        full_output=1,
    )
    if len(res) > 3:
        raise QuadratureError(f"quadrature failed on [{lo}, {hi}]: {res[3]}")
    value, abserr = res[0], res[1]
    if abserr > 1e-6 * max(abs(value), 1e-300) and abserr > 1e-12:
        raise QuadratureError(
            f"quadrature error estimate {abserr:g} too large for value {value:g}"
        )
    return value


# --------------------------------------------------------------------------
# Capacity models
# --------------------------------------------------------------------------

def capacity_coherent(link: LinkBudget, nf: NoiseFigure) -> float:
    """Shannon capacity of a pre-amplified coherent receiver, bits/s."""
    n_s = photons_per_symbol_coherent(link)
    return link.receiver_bandwidth_hz * math.log1p(2.0 * n_s / nf.value) / _LN2


def capacity_coherent_optical_bw(optical_bandwidth_hz: float, n_s: float) -> float:
    """Phase-sensitive capacity charged for the idler's optical bandwidth.

    Only meaningful when the optical channel, not the receiver, is the
    bottleneck; callers must opt in explicitly.
    """
    if optical_bandwidth_hz <= 0:
        raise ValueError("optical bandwidth must be positive")
    return 0.5 * optical_bandwidth_hz * math.log1p(4.0 * n_s) / _LN2


def capacity_ppm(link: LinkBudget, order: int) -> float:
    """Photon-counting M-PPM capacity under Poisson statistics, bits/s."""
    if order not in (2, 4, 8, 16, 32, 64, 128, 256, 512, 1024):
        raise ValueError(f"PPM order must be a power of two in 2..1024, got {order!r}")
    n_s = photons_per_symbol_ppm(link, order)
    log2_m = round(math.log2(order))
    return link.receiver_bandwidth_hz * (-math.expm1(-n_s)) * log2_m / order


# --------------------------------------------------------------------------
# PSK error rates
# --------------------------------------------------------------------------

def ber_qpsk(snr_bit: float) -> float:
    """Gray-coded QPSK bit error rate, Q(sqrt(2*SNR_bit))."""
    if snr_bit < 0:
        raise ValueError("SNR must be >= 0")
    return q_function(math.sqrt(2.0 * snr_bit))


def ber_bpsk(snr_bit: float) -> float:
    """BPSK has the same per-bit distance as Gray-coded QPSK."""
    return ber_qpsk(snr_bit)


def _psk_angle_pdf(theta, snr_sym: float):
    """Density of the received phase for a unit-noise symbol of energy snr_sym."""
    theta = np.asarray(theta, dtype=float)
    cos_t = np.cos(theta)
    base = math.exp(-snr_sym) / (2.0 * math.pi)
    if snr_sym == 0.0:
        return np.broadcast_to(base, theta.shape).copy()
    root = math.sqrt(snr_sym / math.pi)
    return base + root * cos_t * np.exp(-snr_sym * np.sin(theta) ** 2) * special.ndtr(
        math.sqrt(2.0 * snr_sym) * cos_t
    )


_THREE_PSK_SECTOR = 2.0 * math.pi / 3.0


def ser_3psk(snr_sym: float) -> float:
    """Symbol error rate of 3 equispaced phases under unit complex noise.

    Integrates the received-phase density over the complement of the
    transmitted symbol's decision sector; the tail form avoids the
    1 - (large integral) cancellation at high SNR.
    """
    if snr_sym < 0:
        raise ValueError("SNR must be >= 0")
    return 2.0 * _quad(
        lambda t: float(_psk_angle_pdf(t, snr_sym)),
        math.pi / 3.0,
        math.pi,
        points=[2.0 * math.pi / 3.0],
    )


@lru_cache(maxsize=8)
def _gauss_legendre(n: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _three_psk_flip_split(snr_sym: float, sent1: int, sent2: int) -> dict[tuple[int, int], float]:
    """Exact outcome probabilities of the unused-pair re-decision.

    Conditional (unnormalized) on both symbols hard-deciding to point 2: the
    symbol whose phase sits farther from the sector center flips to its
    second-nearest point.  Returns P(sent pair decides to each of the four
    single-flip neighbours of (2, 2)).
    """
    n_nodes = 96
    u, wu = _gauss_legendre(n_nodes, 0.0, math.pi / 3.0)
    t, wt = _gauss_legendre(n_nodes, 0.0, 1.0)
    center = 2.0 * _THREE_PSK_SECTOR  # angle of point 2 relative to point 0

    # Phase measured relative to the sent point; point 2's sector center
    # sits at (2 - sent) * 2pi/3.
    rel_center = {0: center - sent1 * _THREE_PSK_SECTOR, 1: center - sent2 * _THREE_PSK_SECTOR}

    def edge_density(i: int, side: int) -> np.ndarray:
        return _psk_angle_pdf(rel_center[i] + side * u, snr_sym)

    def inner_cumulative(i: int) -> np.ndarray:
        # P(|offset_i| < u1) for each outer node, via u2 = u1*t substitution.
        u2 = u[:, None] * t[None, :]
        dens = _psk_angle_pdf(rel_center[i] + u2, snr_sym) + _psk_angle_pdf(
            rel_center[i] - u2, snr_sym
        )
        return u * (dens @ wt)

    out: dict[tuple[int, int], float] = {}
    for flip in (0, 1):
        inner = inner_cumulative(1 - flip)
        for side in (+1, -1):
            second = 0 if side > 0 else 1
            prob = float(np.dot(wu, edge_density(flip, side) * inner))
            pair = (second, 2) if flip == 0 else (2, second)
            out[pair] = out.get(pair, 0.0) + prob
    return out


def _three_psk_sector_probs(snr_sym: float) -> tuple[float, float]:
    """(P(correct sector), P(each specific wrong sector)) for one symbol."""
    p_correct = 1.0 - ser_3psk(snr_sym)
    p_wrong = 0.5 * (1.0 - p_correct)
    return p_correct, p_wrong


def ber_3psk(snr_sym: float) -> float:
    """Bit error rate of the 3-bit/2-symbol 3-PSK block map.

    Exhaustively enumerates the decided pair distribution: per-symbol sector
    probabilities are exact quadratures of the phase density, and the
    unused-pair re-decision is integrated exactly over the joint phase
    margins.  Self-consistency with the Monte Carlo path is part of the test
    suite; the mapping is artifact-defined, not a published formula.
    """
    if snr_sym < 0:
        raise ValueError("SNR must be >= 0")
    p_correct, p_wrong = _three_psk_sector_probs(snr_sym)

    def p_decide(decided: int, sent: int) -> float:
        return p_correct if decided == sent else p_wrong

    popcount = [bin(v).count("1") for v in range(8)]
    total_bit_errors = 0.0
    for word, (s1, s2) in enumerate(THREE_PSK_WORD_TO_PAIR):
        for d1 in range(3):
            for d2 in range(3):
                if (d1, d2) == THREE_PSK_UNUSED_PAIR:
                    # Mass on the unused pair redistributes to its four
                    # single-flip neighbours via the margin integral.
                    for pair, p_pair in _three_psk_flip_split(snr_sym, s1, s2).items():
                        decided_word = THREE_PSK_PAIR_TO_WORD[pair]
                        total_bit_errors += p_pair * popcount[word ^ decided_word]
                else:
                    prob = p_decide(d1, s1) * p_decide(d2, s2)
                    decided_word = THREE_PSK_PAIR_TO_WORD[(d1, d2)]
                    total_bit_errors += prob * popcount[word ^ decided_word]
    return total_bit_errors / (8 * 3)


# --------------------------------------------------------------------------
# PPM symbol error rates
# --------------------------------------------------------------------------

def _excess_over_threshold(y: float, order: int) -> float:
    """P(max of M-1 unit-exponential envelope powers exceeds y)."""
    e = math.exp(-y)
    if e > 0.5:
        return 1.0 - (1.0 - e) ** (order - 1)
    return -math.expm1((order - 1) * math.log1p(-e))


def ser_ppm_envelope(snr_sym: float, order: int) -> float:
    """Envelope-detected M-PPM symbol error rate over unit complex noise.

    One slot carries energy snr_sym among M-1 empty slots; the decision is
    the largest envelope.  Evaluated as the probability that any noise slot
    beats the signal slot, integrating the noncentral signal-envelope density
    with the exponentially scaled I0 in amplitude coordinates (the integrand
    is then a unit-width Gaussian bump, stable for any SNR).
    """
    if snr_sym < 0:
        raise ValueError("SNR must be >= 0")
    if order < 2:
        raise ValueError("PPM order must be >= 2")
    a = math.sqrt(snr_sym)
    u_max = math.sqrt(snr_sym + 40.0 * a + 40.0)

    def integrand(u: float) -> float:
        if u <= 0.0:
            return 0.0
        gauss = math.exp(-((u - a) ** 2))
        if gauss == 0.0:
            return 0.0
        return 2.0 * u * gauss * special.i0e(2.0 * u * a) * _excess_over_threshold(u * u, order)

    pts = sorted({min(max(p, 1e-12), u_max) for p in (a, math.sqrt(math.log(max(order - 1, 2))))})
    return min(1.0, _quad(integrand, 0.0, u_max, points=pts))


def ser_ppm_envelope_series(snr_sym: float, order: int) -> float:
    """Alternating binomial-sum form of the envelope SER.

    Reference implementation only: compensated summation keeps it honest for
    small M, but the cancellation grows combinatorially and the quadrature
    form is the production path.
    """
    terms = [
        (-1.0) ** (n + 1)
        * math.comb(order - 1, n)
        / (n + 1.0)
        * math.exp(-n * snr_sym / (n + 1.0))
        for n in range(1, order)
    ]
    return math.fsum(terms)


def ser_ppm_coherent(snr_sym: float, order: int) -> float:
    """M-PPM symbol error rate for a maximum real-part decision (known phase)."""
    if snr_sym < 0:
        raise ValueError("SNR must be >= 0")
    if order < 2:
        raise ValueError("PPM order must be >= 2")
    a = math.sqrt(2.0 * snr_sym)
    scale = order - 1

    def integrand(x: float) -> float:
        gauss = math.exp(-0.5 * (x - a) ** 2) / math.sqrt(2.0 * math.pi)
        if gauss == 0.0:
            return 0.0
        return gauss * (-math.expm1(scale * special.log_ndtr(x)))

    lo, hi = a - 42.0, a + 42.0
    pts = sorted({min(max(p, lo + 1e-9), hi - 1e-9) for p in (a, math.sqrt(2.0 * math.log(max(scale, 2))))})
    return min(1.0, _quad(integrand, lo, hi, points=pts))


def ser_ppm(snr_sym: float, order: int, metric: Metric = Metric.ENVELOPE) -> float:
    if metric is Metric.ENVELOPE:
        return ser_ppm_envelope(snr_sym, order)
    return ser_ppm_coherent(snr_sym, order)


def ber_ppm(snr_sym: float, order: int, metric: Metric = Metric.ENVELOPE) -> float:
    """M-PPM bit error rate: wrong slots are uniform, so BER = SER*M/(2(M-1))."""
    return ser_ppm(snr_sym, order, metric) * order / (2.0 * (order - 1.0))


def ber_ppm_qpsk(snr_sym: float, order: int, metric: Metric = Metric.ENVELOPE) -> float:
    """Combined M-PPM+QPSK bit error rate.

    Slot errors contribute the PPM bit-error factor plus one expected bit
    error from the two phase bits read off a noise-only slot; a correct slot
    leaves the QPSK term, evaluated at the occupied pulse's per-bit SNR
    snr_sym/2 because the whole symbol energy sits in one slot.
    """
    log2_m = math.log2(order)
    ser = ser_ppm(snr_sym, order, metric)
    qpsk_term = ber_qpsk(snr_sym / 2.0)
    numer = ser * (1.0 + order / (2.0 * (order - 1.0)) * log2_m) + (1.0 - ser) * 2.0 * qpsk_term
    return numer / (log2_m + 2.0)


def guessing_ber(fmt: FormatSpec) -> float:
    """BER at zero SNR; 1/2 for every supported format."""
    return 0.5


def ber_at_snr_sym(fmt: FormatSpec, snr_sym: float, metric: Metric = Metric.ENVELOPE) -> float:
    """Dispatch a format to its closed-form BER at a symbol SNR."""
    if fmt.kind is FormatKind.QPSK:
        return ber_qpsk(snr_sym / 2.0)
    if fmt.kind is FormatKind.BPSK:
        return ber_bpsk(snr_sym)
    if fmt.kind is FormatKind.THREE_PSK:
        return ber_3psk(snr_sym)
    if fmt.kind is FormatKind.PPM:
        return ber_ppm(snr_sym, fmt.order, metric)
    return ber_ppm_qpsk(snr_sym, fmt.order, metric)


def ber_at_ppb(fmt: FormatSpec, ppb_raw: float, nf: NoiseFigure, metric: Metric = Metric.ENVELOPE) -> float:
    """BER at a photons-per-raw-bit operating point: PPB -> SNR_bit -> SNR_sym."""
    if ppb_raw <= 0:
        raise ValueError("photons per bit must be positive")
    snr_bit = 2.0 * ppb_raw / nf.value
    return ber_at_snr_sym(fmt, snr_bit * fmt.bits_per_symbol, metric)


def ber_curve(
    fmt: FormatSpec,
    nf: NoiseFigure,
    ppb_grid: Sequence[float],
    metric: Metric = Metric.ENVELOPE,
) -> list[tuple[float, float]]:
    """Evaluate the analytic BER along a grid of photons-per-raw-bit values."""
    return [(float(ppb), ber_at_ppb(fmt, float(ppb), nf, metric)) for ppb in ppb_grid]
