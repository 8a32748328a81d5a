"""Curve inversion: PPB sensitivities, table grids and crossover powers.

All solvers bisect in log domain (log-PPB or log-power) where every curve in
this problem is smooth and monotone; brackets auto-expand geometrically and a
missing sign change is always reported, never papered over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Sequence

from . import analytic
from .errors import NoCrossoverError, NumericalFailure, UnreachableTargetError
from .formats import FormatSpec, Metric, spectral_efficiency
from .link import (
    FecProfile,
    LinkBudget,
    NoiseFigure,
    ReceiverKind,
    dbm_to_watts,
    linear_to_db,
)
from .montecarlo import BerEstimate, StoppingRule, simulate_coherent

_LOG10_TOL = 1e-4            # |log10 BER - log10 target| convergence
_WIDTH_TOL = 1e-3            # bracket width in log10-PPB units (0.01 dB)
_EXPAND_STEP = math.log10(4.0)
_PPB_LOG_MIN, _PPB_LOG_MAX = -6.0, 6.0

ANALYTIC = "analytic"
MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class SensitivityResult:
    fmt: FormatSpec
    target_pre_fec_ber: float
    nf_db: float
    metric: Metric
    model: str
    ppb_raw: float
    ppb_raw_db: float
    achieved_ber: float
    code_rate: float | None = None
    ppb_post_fec: float | None = None
    ppb_post_fec_db: float | None = None
    penalty_db: float = 0.0
    estimate: BerEstimate | None = None

    def with_code_rate(self, code_rate: float) -> "SensitivityResult":
        post = self.ppb_raw / code_rate
        return replace(
            self,
            code_rate=code_rate,
            ppb_post_fec=post,
            ppb_post_fec_db=linear_to_db(post),
        )


@dataclass(frozen=True)
class CrossoverResult:
    model_a: str
    model_b: str
    power_w: float
    power_dbm: float
    capacity_a_bps: float
    capacity_b_bps: float
    bracket_dbm: tuple[float, float]

    @property
    def relative_gap(self) -> float:
        scale = max(abs(self.capacity_a_bps), abs(self.capacity_b_bps), 1e-300)
        return abs(self.capacity_a_bps - self.capacity_b_bps) / scale


@dataclass(frozen=True)
class BerCrossing:
    fmt_a: FormatSpec
    fmt_b: FormatSpec
    ppb_raw: float
    ppb_raw_db: float
    ber: float


@dataclass(frozen=True)
class CapacityModel:
    """A labeled capacity curve: received power in watts -> bits/s."""

    label: str
    fn: Callable[[float], float]

    def capacity_at(self, power_w: float) -> float:
        return self.fn(power_w)

    def sweep(self, powers_w: Sequence[float]) -> list[analytic.CapacityPoint]:
        return [
            analytic.CapacityPoint(float(p), self.fn(float(p)), self.label) for p in powers_w
        ]


def coherent_capacity_model(
    bandwidth_hz: float, frequency_hz: float, nf: NoiseFigure, label: str
) -> CapacityModel:
    def fn(power_w: float) -> float:
        return analytic.capacity_coherent(LinkBudget(power_w, frequency_hz, bandwidth_hz), nf)

    return CapacityModel(label, fn)


def ppm_capacity_model(order: int, bandwidth_hz: float, frequency_hz: float) -> CapacityModel:
    def fn(power_w: float) -> float:
        return analytic.capacity_ppm(LinkBudget(power_w, frequency_hz, bandwidth_hz), order)

    return CapacityModel(f"ppm:{order}", fn)


def best_ppm_capacity_model(
    orders: Sequence[int], bandwidth_hz: float, frequency_hz: float
) -> CapacityModel:
    models = [ppm_capacity_model(m, bandwidth_hz, frequency_hz) for m in orders]
    label = f"ppm:best{min(orders)}-{max(orders)}"
    return CapacityModel(label, lambda p: max(m.fn(p) for m in models))


# --------------------------------------------------------------------------
# PPB at target BER
# --------------------------------------------------------------------------

def _expand_and_bisect(
    g: Callable[[float], float],
    lo: float,
    hi: float,
    lo_min: float,
    hi_max: float,
    what: str,
) -> float:
    """Root of a decreasing g via bracket expansion + bisection in log units."""
    g_lo, g_hi = g(lo), g(hi)
    while g_lo <= 0.0 and lo > lo_min:
        lo = max(lo - _EXPAND_STEP, lo_min)
        g_lo = g(lo)
    while g_hi >= 0.0 and hi < hi_max:
        hi = min(hi + _EXPAND_STEP, hi_max)
        g_hi = g(hi)
    if g_lo <= 0.0 or g_hi >= 0.0:
        raise UnreachableTargetError(
            f"{what}: no sign change in [{lo:.3f}, {hi:.3f}] (log10 units)"
        )
    # The function tolerance drives convergence: steep waterfalls would
    # otherwise leave a > 1e-4 residual at a 0.01 dB bracket.  The width
    # floor only guards against a numerically flat g.
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if abs(g_mid) < _LOG10_TOL:
            return mid
        if g_mid > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            return 0.5 * (lo + hi)
    return mid


def _check_target(fmt: FormatSpec, target_ber: float) -> None:
    guess = analytic.guessing_ber(fmt)
    if not 0.0 < target_ber < guess:
        raise ValueError(
            f"target BER must lie in (0, {guess}) for {fmt}, got {target_ber!r}"
        )


def ppb_at_ber(
    fmt: FormatSpec,
    target_ber: float,
    nf: NoiseFigure,
    model: str = ANALYTIC,
    metric: Metric = Metric.ENVELOPE,
    master_seed: int = 0,
    penalty_db: float = 0.0,
) -> SensitivityResult:
    """Photons per raw bit at which the format's BER hits the target.

    ``penalty_db`` adds a constant implementation penalty to the reported
    sensitivity after solving on the theory curve.
    """
    _check_target(fmt, target_ber)
    if model == ANALYTIC:
        log_ppb, achieved, estimate = _solve_analytic(fmt, target_ber, nf, metric)
    elif model == MONTE_CARLO:
        log_ppb, achieved, estimate = _solve_monte_carlo(fmt, target_ber, nf, metric, master_seed)
    else:
        raise ValueError(f"unknown model {model!r}")

    ppb_db = 10.0 * log_ppb + penalty_db
    return SensitivityResult(
        fmt=fmt,
        target_pre_fec_ber=target_ber,
        nf_db=nf.db,
        metric=metric,
        model=model,
        ppb_raw=10.0 ** (ppb_db / 10.0),
        ppb_raw_db=ppb_db,
        achieved_ber=achieved,
        penalty_db=penalty_db,
        estimate=estimate,
    )


def _solve_analytic(
    fmt: FormatSpec, target_ber: float, nf: NoiseFigure, metric: Metric
) -> tuple[float, float, None]:
    log_target = math.log10(target_ber)

    def g(log_ppb: float) -> float:
        ber = analytic.ber_at_ppb(fmt, 10.0**log_ppb, nf, metric)
        return (math.log10(ber) if ber > 0.0 else -math.inf) - log_target

    root = _expand_and_bisect(g, -2.0, 2.0, _PPB_LOG_MIN, _PPB_LOG_MAX, f"ppb_at_ber({fmt})")
    achieved = analytic.ber_at_ppb(fmt, 10.0**root, nf, metric)
    return root, achieved, None


def _solve_monte_carlo(
    fmt: FormatSpec,
    target_ber: float,
    nf: NoiseFigure,
    metric: Metric,
    master_seed: int,
    max_symbols_per_eval: int = 50_000_000,
) -> tuple[float, float, BerEstimate]:
    """CI-aware bisection: a step is taken only when the 95% CI excludes the
    target; otherwise the estimate is refined until the point is resolved or
    statistically indistinguishable from the target."""
    eval_count = 0

    def measure(log_ppb: float, target_errors: int) -> BerEstimate:
        nonlocal eval_count
        eval_count += 1
        snr_bit = 2.0 * 10.0**log_ppb / nf.value
        snr_sym = snr_bit * fmt.bits_per_symbol
        rule = StoppingRule(target_bit_errors=target_errors, max_symbols=max_symbols_per_eval)
        return simulate_coherent(
            fmt, snr_sym, metric, rule, master_seed, stream_base=eval_count << 40
        )

    def classify(log_ppb: float, target_errors: int) -> tuple[int, BerEstimate]:
        errors = target_errors
        while True:
            est = measure(log_ppb, errors)
            if est.ci95_low > target_ber:
                return 1, est
            if est.ci95_high < target_ber:
                return -1, est
            if errors >= 1600:
                return 0, est
            errors *= 2

    lo, hi = -2.0, 2.0
    side_lo, est = classify(lo, 40)
    while side_lo <= 0 and lo > _PPB_LOG_MIN:
        lo = max(lo - _EXPAND_STEP, _PPB_LOG_MIN)
        side_lo, est = classify(lo, 40)
    side_hi, est = classify(hi, 40)
    while side_hi >= 0 and hi < _PPB_LOG_MAX:
        hi = min(hi + _EXPAND_STEP, _PPB_LOG_MAX)
        side_hi, est = classify(hi, 40)
    if side_lo <= 0 or side_hi >= 0:
        raise UnreachableTargetError(f"Monte Carlo bracket failed for {fmt} at {target_ber}")

    mid = 0.5 * (lo + hi)
    while hi - lo >= _WIDTH_TOL:
        mid = 0.5 * (lo + hi)
        width = hi - lo
        errors = 40 if width > 1.2 else (80 if width > 0.4 else 150)
        side, est = classify(mid, errors)
        if est.ber > 0 and abs(math.log10(est.ber) - math.log10(target_ber)) < _LOG10_TOL:
            return mid, est.ber, est
        if side == 0:
            return mid, est.ber, est
        if side > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), est.ber, est


# --------------------------------------------------------------------------
# Sensitivity table
# --------------------------------------------------------------------------

DEFAULT_CODE_RATES: Mapping[float, float] = {0.14: 0.5, 1e-3: 1.0 / 1.07}


@dataclass(frozen=True)
class SensitivityCell:
    fmt: FormatSpec
    target_pre_fec_ber: float
    result: SensitivityResult | None
    error: str | None = None


@dataclass(frozen=True)
class SensitivityTable:
    cells: tuple[SensitivityCell, ...]
    best_by_target: Mapping[float, str]

    def cell(self, fmt: FormatSpec, target: float) -> SensitivityCell:
        for c in self.cells:
            if c.fmt == fmt and c.target_pre_fec_ber == target:
                return c
        raise KeyError((fmt, target))


def sensitivity_table(
    formats_list: Sequence[FormatSpec],
    targets: Sequence[float],
    nf: NoiseFigure,
    code_rates: Mapping[float, float] | None = None,
    metric: Metric = Metric.ENVELOPE,
    model: str = ANALYTIC,
    penalty_db: float = 0.0,
    master_seed: int = 0,
) -> SensitivityTable:
    """Full (format x target) sensitivity grid with per-cell failure isolation.

    ``code_rates`` maps each target BER to the code rate used for the
    post-FEC column; unmapped targets default to k = 1.
    """
    rates = dict(DEFAULT_CODE_RATES if code_rates is None else code_rates)
    cells: list[SensitivityCell] = []
    for fmt in formats_list:
        for target in targets:
            try:
                res = ppb_at_ber(
                    fmt, target, nf, model=model, metric=metric,
                    master_seed=master_seed, penalty_db=penalty_db,
                )
                res = res.with_code_rate(rates.get(target, 1.0))
                cells.append(SensitivityCell(fmt, target, res))
            except (NumericalFailure, ValueError) as exc:
                cells.append(SensitivityCell(fmt, target, None, error=str(exc)))

    best: dict[float, str] = {}
    for target in targets:
        ok = [c for c in cells if c.target_pre_fec_ber == target and c.result is not None]
        if ok:
            best[target] = min(ok, key=lambda c: c.result.ppb_raw_db).fmt.cli_name
    return SensitivityTable(tuple(cells), best)


# --------------------------------------------------------------------------
# Crossovers
# --------------------------------------------------------------------------

def capacity_crossover(
    model_a: CapacityModel,
    model_b: CapacityModel,
    bracket_dbm: tuple[float, float] = (-110.0, -30.0),
) -> CrossoverResult:
    """Received power where two capacity curves intersect, to < 0.01 dB."""
    lo, hi = bracket_dbm
    if not lo < hi:
        raise ValueError("bracket must satisfy lo < hi")

    def g(dbm: float) -> float:
        p = dbm_to_watts(dbm)
        return model_a.capacity_at(p) - model_b.capacity_at(p)

    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0.0 and g_hi == 0.0:
        raise NoCrossoverError(
            f"{model_a.label} and {model_b.label} coincide on the whole bracket"
        )
    if g_lo * g_hi >= 0.0:
        raise NoCrossoverError(
            f"no capacity crossover between {model_a.label} and {model_b.label} "
            f"in [{lo}, {hi}] dBm"
        )
    while hi - lo > 0.01:
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if g_mid == 0.0:
            lo = hi = mid
            break
        if (g_mid > 0.0) == (g_lo > 0.0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    dbm = 0.5 * (lo + hi)
    p = dbm_to_watts(dbm)
    return CrossoverResult(
        model_a=model_a.label,
        model_b=model_b.label,
        power_w=p,
        power_dbm=dbm,
        capacity_a_bps=model_a.capacity_at(p),
        capacity_b_bps=model_b.capacity_at(p),
        bracket_dbm=bracket_dbm,
    )


def ber_crossover(
    fmt_a: FormatSpec,
    fmt_b: FormatSpec,
    nf: NoiseFigure,
    metric: Metric = Metric.ENVELOPE,
    bracket_db: tuple[float, float] = (-10.0, 15.0),
    scan_step_db: float = 0.1,
) -> BerCrossing:
    """Intersection of two analytic BER-vs-PPB curves.

    The coarse scan ignores the saturated region where both curves sit at
    their guessing rate, where the sign of the difference is meaningless.
    """
    guard = 0.49

    def curves(ppb_db: float) -> tuple[float, float]:
        ppb = 10.0 ** (ppb_db / 10.0)
        return (
            analytic.ber_at_ppb(fmt_a, ppb, nf, metric),
            analytic.ber_at_ppb(fmt_b, ppb, nf, metric),
        )

    def diff(ppb_db: float) -> float:
        a, b = curves(ppb_db)
        la = math.log10(a) if a > 0 else -400.0
        lb = math.log10(b) if b > 0 else -400.0
        return la - lb

    lo_db, hi_db = bracket_db
    n_steps = max(2, int(round((hi_db - lo_db) / scan_step_db)))
    xs = [lo_db + i * (hi_db - lo_db) / n_steps for i in range(n_steps + 1)]
    prev_x: float | None = None
    prev_d: float | None = None
    found: tuple[float, float] | None = None
    for x in xs:
        a, b = curves(x)
        if min(a, b) >= guard:
            prev_x = prev_d = None
            continue
        d = diff(x)
        if prev_d is not None and d != 0.0 and prev_d != 0.0 and (d > 0) != (prev_d > 0):
            found = (prev_x, x)
            break
        prev_x, prev_d = x, d
    if found is None:
        raise NoCrossoverError(
            f"BER curves of {fmt_a} and {fmt_b} do not cross in [{lo_db}, {hi_db}] dB"
        )
    lo, hi = found
    d_lo = diff(lo)
    while hi - lo > 1e-4:
        mid = 0.5 * (lo + hi)
        d_mid = diff(mid)
        if d_mid == 0.0:
            lo = hi = mid
            break
        if (d_mid > 0) == (d_lo > 0):
            lo, d_lo = mid, d_mid
        else:
            hi = mid
    ppb_db = 0.5 * (lo + hi)
    ber_a, ber_b = curves(ppb_db)
    return BerCrossing(
        fmt_a=fmt_a,
        fmt_b=fmt_b,
        ppb_raw=10.0 ** (ppb_db / 10.0),
        ppb_raw_db=ppb_db,
        ber=0.5 * (ber_a + ber_b),
    )


# --------------------------------------------------------------------------
# Format recommendation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Recommendation:
    fmt: FormatSpec
    receiver_kind: ReceiverKind
    info_rate_bps: float
    capacity_bps: float
    threshold_rate_bps: float
    spectral_efficiency: float

    @property
    def label(self) -> str:
        return f"{self.receiver_kind.value}:{self.fmt.cli_name}"


def _photon_counting_required_ns(target_ber: float) -> float:
    # Zero-background erasure-guess closed form: BER = exp(-n_s)/2.
    if target_ber >= 0.5:
        return 0.0
    return math.log(0.5 / target_ber)


def recommend_format(
    link: LinkBudget,
    nf: NoiseFigure,
    fec: FecProfile,
    candidates: Sequence[tuple[FormatSpec, ReceiverKind]],
    metric: Metric = Metric.ENVELOPE,
) -> list[Recommendation]:
    """Rank candidate (format, receiver) pairs at a received power.

    The figure of merit is min(receiver capacity at full bandwidth,
    information rate at the largest symbol rate whose photons-per-symbol
    still meet the pre-FEC BER threshold).  ``nf`` applies to the coherent
    candidates in the BER convention; photon counting ignores it.  Ties
    break toward higher spectral efficiency and then by name.
    """
    if not candidates:
        raise ValueError("candidate list must not be empty")
    flux = link.photon_flux_per_s
    out: list[Recommendation] = []
    for fmt, kind in candidates:
        if kind is ReceiverKind.PHOTON_COUNTING:
            if fmt.kind.value != "ppm":
                raise ValueError(f"photon counting supports plain PPM only, got {fmt}")
            capacity = analytic.capacity_ppm(link, fmt.order)
            required_ns = _photon_counting_required_ns(fec.target_pre_fec_ber)
        else:
            capacity = analytic.capacity_coherent(link, nf)
            res = ppb_at_ber(fmt, fec.target_pre_fec_ber, nf, metric=metric)
            required_ns = res.ppb_raw * fmt.bits_per_symbol
        symbol_rate_cap = link.receiver_bandwidth_hz / fmt.slots_per_symbol
        symbol_rate = symbol_rate_cap if required_ns == 0.0 else min(
            flux / required_ns, symbol_rate_cap
        )
        threshold_rate = fec.code_rate * fmt.bits_per_symbol * symbol_rate
        out.append(
            Recommendation(
                fmt=fmt,
                receiver_kind=kind,
                info_rate_bps=min(capacity, threshold_rate),
                capacity_bps=capacity,
                threshold_rate_bps=threshold_rate,
                spectral_efficiency=spectral_efficiency(fmt, fec.code_rate),
            )
        )
    out.sort(key=lambda r: (-r.info_rate_bps, -r.spectral_efficiency, r.label))
    return out
