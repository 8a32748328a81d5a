"""Receiver-sensitivity and capacity models for power-efficient optical formats."""

from .analytic import (
    ber_3psk,
    ber_at_ppb,
    ber_bpsk,
    ber_curve,
    ber_ppm,
    ber_ppm_qpsk,
    ber_qpsk,
    capacity_coherent,
    capacity_coherent_optical_bw,
    capacity_ppm,
    q_function,
    ser_3psk,
    ser_ppm_coherent,
    ser_ppm_envelope,
)
from .errors import NoCrossoverError, NumericalFailure, QuadratureError, UnreachableTargetError
from .formats import (
    FormatKind,
    FormatSpec,
    Metric,
    SymbolFrame,
    bpsk,
    hard_decide,
    modulate,
    parse_format,
    ppm,
    ppm_qpsk,
    qpsk,
    spectral_efficiency,
    three_psk,
)
from .link import (
    EDFA_IDEAL,
    PSA_CAPACITY,
    PSA_IDEAL_BER,
    FecProfile,
    LinkBudget,
    NoiseFigure,
    PhotonsPerBit,
    ReceiverKind,
    ReceiverModel,
    db_to_linear,
    dbm_to_watts,
    linear_to_db,
    photons_per_symbol_coherent,
    photons_per_symbol_ppm,
    ppb_from_snr_bit,
    ppb_post_fec,
    snr_bit_from_ppb,
    snr_bit_from_symbol,
    snr_per_symbol,
    watts_to_dbm,
    wavelength_nm_to_frequency_hz,
)
from .montecarlo import (
    BerEstimate,
    ChannelConfig,
    ChannelFamily,
    StoppingRule,
    StopReason,
    seed_stream,
    simulate_coherent,
    simulate_photon_counting_ppm,
)
from .sensitivity import (
    BerCrossing,
    CapacityModel,
    CrossoverResult,
    Recommendation,
    SensitivityResult,
    SensitivityTable,
    ber_crossover,
    best_ppm_capacity_model,
    capacity_crossover,
    coherent_capacity_model,
    ppb_at_ber,
    ppm_capacity_model,
    recommend_format,
    sensitivity_table,
)

__version__ = "0.1.0"
