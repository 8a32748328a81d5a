"""Photon accounting, SNR/noise-figure relations and FEC-rate bookkeeping.

Everything here is a pure unit conversion shared by the capacity, error-rate
and sensitivity layers.  Powers are carried in watts internally; dBm only
appears at the edges.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

PLANCK_J_S = 6.62607015e-34  # SI exact
SPEED_OF_LIGHT_M_S = 299792458.0  # SI exact


def db_to_linear(db: float) -> float:
    """Convert a dB power ratio to linear."""
    return 10.0 ** (db / 10.0)


def linear_to_db(value: float) -> float:
    """Convert a linear power ratio to dB; 0 maps to -inf."""
    if value < 0:
        raise ValueError(f"dB undefined for negative ratio {value!r}")
    if value == 0:
        return -math.inf
    return 10.0 * math.log10(value)


def dbm_to_watts(dbm: float) -> float:
    return 1e-3 * db_to_linear(dbm)


def watts_to_dbm(watts: float) -> float:
    return linear_to_db(watts / 1e-3)


def wavelength_nm_to_frequency_hz(wavelength_nm: float) -> float:
    """Optical carrier frequency for a vacuum wavelength in nm."""
    if wavelength_nm <= 0:
        raise ValueError("wavelength must be positive")
    return SPEED_OF_LIGHT_M_S / (wavelength_nm * 1e-9)


@dataclass(frozen=True)
class LinkBudget:
    """Received optical power, carrier frequency and receiver bandwidth.

    ``receiver_bandwidth_hz`` is the slot/symbol bandwidth of the receiver
    (the inverse slot duration for PPM formats).
    """

    received_power_w: float
    frequency_hz: float
    receiver_bandwidth_hz: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.received_power_w) and self.received_power_w >= 0):
            raise ValueError(f"received power must be finite and >= 0, got {self.received_power_w!r}")
        if not (math.isfinite(self.frequency_hz) and self.frequency_hz > 0):
            raise ValueError(f"optical frequency must be finite and > 0, got {self.frequency_hz!r}")
        if not (math.isfinite(self.receiver_bandwidth_hz) and self.receiver_bandwidth_hz > 0):
            raise ValueError(f"receiver bandwidth must be finite and > 0, got {self.receiver_bandwidth_hz!r}")

    @classmethod
    def from_dbm(
        cls,
        power_dbm: float,
        receiver_bandwidth_hz: float,
        frequency_hz: float | None = None,
        wavelength_nm: float | None = None,
    ) -> "LinkBudget":
        if (frequency_hz is None) == (wavelength_nm is None):
            raise ValueError("give exactly one of frequency_hz / wavelength_nm")
        if frequency_hz is None:
            frequency_hz = wavelength_nm_to_frequency_hz(wavelength_nm)
        return cls(dbm_to_watts(power_dbm), frequency_hz, receiver_bandwidth_hz)

    @property
    def received_power_dbm(self) -> float:
        return watts_to_dbm(self.received_power_w)

    @property
    def photon_flux_per_s(self) -> float:
        """Mean photon arrival rate at the receiver input."""
        return self.received_power_w / (PLANCK_J_S * self.frequency_hz)


def photons_per_symbol_coherent(link: LinkBudget) -> float:
    """Mean photons per symbol when one symbol occupies one slot."""
    return link.received_power_w / (PLANCK_J_S * link.frequency_hz * link.receiver_bandwidth_hz)


def photons_per_symbol_ppm(link: LinkBudget, order: int) -> float:
    """Mean photons per M-slot PPM symbol (M times the single-slot count)."""
    if not isinstance(order, int) or order < 2:
        raise ValueError(f"PPM order must be an integer >= 2, got {order!r}")
    return order * photons_per_symbol_coherent(link)


@dataclass(frozen=True)
class NoiseFigure:
    """Pre-amplifier noise figure as a linear power ratio."""

    value: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.value) and self.value > 0):
            raise ValueError(f"noise figure must be finite and > 0, got {self.value!r}")

    @property
    def db(self) -> float:
        return linear_to_db(self.value)

    @classmethod
    def from_db(cls, db: float) -> "NoiseFigure":
        return cls(db_to_linear(db))


# A phase-sensitive pre-amplifier contributes NF = 1/2 per wave in the
# capacity analysis but is conventionally quoted at 0 dB in BER/sensitivity
# work; both presets are provided so the caller always states which
# convention is in force.  An ideal phase-insensitive amplifier has NF = 2.
PSA_CAPACITY = NoiseFigure(0.5)
PSA_IDEAL_BER = NoiseFigure(1.0)
EDFA_IDEAL = NoiseFigure(2.0)


class ReceiverKind(enum.Enum):
    PHASE_SENSITIVE = "psa"
    PHASE_INSENSITIVE = "edfa"
    PHOTON_COUNTING = "pc"


@dataclass(frozen=True)
class ReceiverModel:
    """Receiver front end: amplifier family, noise figure and bandwidth."""

    kind: ReceiverKind
    noise_figure: NoiseFigure | None
    bandwidth_hz: float

    def __post_init__(self) -> None:
        if self.bandwidth_hz <= 0:
            raise ValueError("receiver bandwidth must be positive")
        if self.kind is not ReceiverKind.PHOTON_COUNTING and self.noise_figure is None:
            raise ValueError(f"{self.kind.value} receiver needs a noise figure")


@dataclass(frozen=True)
class FecProfile:
    """Code rate (information bits per transmitted bit) and decoding threshold."""

    code_rate: float
    target_pre_fec_ber: float

    def __post_init__(self) -> None:
        if not 0 < self.code_rate <= 1:
            raise ValueError(f"code rate must be in (0, 1], got {self.code_rate!r}")
        if not 0 < self.target_pre_fec_ber < 0.5:
            raise ValueError(f"pre-FEC BER target must be in (0, 0.5), got {self.target_pre_fec_ber!r}")


@dataclass(frozen=True)
class PhotonsPerBit:
    """Photons per raw transmitted (pre-FEC) bit."""

    raw: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.raw) and self.raw > 0):
            raise ValueError(f"photons per bit must be finite and > 0, got {self.raw!r}")

    @property
    def raw_db(self) -> float:
        return linear_to_db(self.raw)

    def post_fec(self, code_rate: float) -> float:
        """Photons per information bit at the given code rate."""
        return ppb_post_fec(self.raw, code_rate)


def snr_per_symbol(n_s: float, nf: NoiseFigure) -> float:
    """SNR per symbol of a pre-amplified coherent receiver, 2*n_s/NF."""
    if n_s < 0:
        raise ValueError("photon count must be >= 0")
    return 2.0 * n_s / nf.value


def snr_bit_from_symbol(snr_sym: float, bits_per_symbol: float) -> float:
    if bits_per_symbol <= 0:
        raise ValueError("bits per symbol must be positive")
    return snr_sym / bits_per_symbol


def ppb_from_snr_bit(snr_bit: float, nf: NoiseFigure) -> float:
    """Photons per raw bit needed for a per-bit SNR, NF*SNR_bit/2."""
    return nf.value * snr_bit / 2.0


def snr_bit_from_ppb(ppb: float, nf: NoiseFigure) -> float:
    """Inverse of :func:`ppb_from_snr_bit`."""
    return 2.0 * ppb / nf.value


def ppb_post_fec(ppb_raw: float, code_rate: float) -> float:
    """Photons per information bit from photons per raw bit."""
    if not 0 < code_rate <= 1:
        raise ValueError(f"code rate must be in (0, 1], got {code_rate!r}")
    return ppb_raw / code_rate
