import pytest

from photonlink import analytic, formats, link
from photonlink.errors import NoCrossoverError, UnreachableTargetError
from photonlink.link import FecProfile, LinkBudget, NoiseFigure, ReceiverKind
from photonlink.sensitivity import (
    MONTE_CARLO,
    ber_crossover,
    best_ppm_capacity_model,
    capacity_crossover,
    coherent_capacity_model,
    ppb_at_ber,
    ppm_capacity_model,
    recommend_format,
    sensitivity_table,
)

NF0 = NoiseFigure(1.0)
FREQ_1550 = link.wavelength_nm_to_frequency_hz(1550.0)

TABLE1_FORMATS = ["ppm:16", "ppm:64", "qpsk", "ppmqpsk:16", "ppmqpsk:64"]
TABLE1_THEORY = {
    ("ppm:16", 1e-3): 3.1,
    ("ppm:64", 1e-3): 1.9,
    ("qpsk", 1e-3): 3.8,
    ("ppmqpsk:16", 1e-3): 1.3,
    ("ppmqpsk:64", 1e-3): 0.7,
    ("ppm:16", 0.14): -2.4,
    ("ppm:64", 0.14): -2.8,
    ("qpsk", 0.14): -5.4,
    ("ppmqpsk:16", 0.14): -4.1,
    ("ppmqpsk:64", 0.14): -4.1,
}


def tol_for(name: str) -> float:
    return 0.2 if name.startswith("ppmqpsk") else 0.15


# --------------------------------------------------------------------------
# ppb_at_ber
# --------------------------------------------------------------------------

def test_solver_postcondition_hits_target():
    for name in TABLE1_FORMATS:
        fmt = formats.parse_format(name)
        for target in (1e-3, 0.14):
            res = ppb_at_ber(fmt, target, NF0)
            ratio = res.achieved_ber / target
            assert 10 ** (-1.1e-4) < ratio < 10 ** (1.1e-4)


@pytest.mark.parametrize("name,target", list(TABLE1_THEORY), ids=lambda v: str(v))
def test_published_sensitivities(name, target):
    res = ppb_at_ber(formats.parse_format(name), target, NF0)
    assert res.ppb_raw_db == pytest.approx(TABLE1_THEORY[(name, target)], abs=tol_for(name))


def test_ppb_decreases_with_looser_target():
    for name in TABLE1_FORMATS + ["3psk", "bpsk"]:
        fmt = formats.parse_format(name)
        tight = ppb_at_ber(fmt, 1e-3, NF0)
        loose = ppb_at_ber(fmt, 0.14, NF0)
        assert loose.ppb_raw_db < tight.ppb_raw_db


def test_target_at_guessing_rate_rejected():
    with pytest.raises(ValueError):
        ppb_at_ber(formats.qpsk(), 0.6, NF0)
    with pytest.raises(ValueError):
        ppb_at_ber(formats.qpsk(), 0.5, NF0)
    with pytest.raises(ValueError):
        ppb_at_ber(formats.qpsk(), 0.0, NF0)


def test_penalty_offsets_sensitivity():
    base = ppb_at_ber(formats.qpsk(), 0.14, NF0)
    shifted = ppb_at_ber(formats.qpsk(), 0.14, NF0, penalty_db=1.7)
    assert shifted.ppb_raw_db == pytest.approx(base.ppb_raw_db + 1.7, abs=1e-9)
    # The published experimental point: -5.4 + 1.7 = -3.7 dB.
    assert shifted.ppb_raw_db == pytest.approx(-3.7, abs=0.15)


def test_monte_carlo_inversion_agrees_with_analytic():
    res_mc = ppb_at_ber(formats.qpsk(), 0.01, NF0, model=MONTE_CARLO, master_seed=11)
    res_an = ppb_at_ber(formats.qpsk(), 0.01, NF0)
    assert res_mc.model == MONTE_CARLO
    assert res_mc.estimate is not None
    assert res_mc.ppb_raw_db == pytest.approx(res_an.ppb_raw_db, abs=0.25)


def test_nf_shifts_ppb_uniformly():
    nf3 = NoiseFigure.from_db(3.0)
    for name in ("qpsk", "ppm:16"):
        fmt = formats.parse_format(name)
        a = ppb_at_ber(fmt, 1e-3, NF0)
        b = ppb_at_ber(fmt, 1e-3, nf3)
        assert b.ppb_raw_db - a.ppb_raw_db == pytest.approx(3.0, abs=0.02)


# --------------------------------------------------------------------------
# sensitivity_table
# --------------------------------------------------------------------------

def test_table_reproduces_theory_and_bold_entries():
    table = sensitivity_table(
        [formats.parse_format(f) for f in TABLE1_FORMATS], [1e-3, 0.14], NF0
    )
    for (name, target), expected in TABLE1_THEORY.items():
        cell = table.cell(formats.parse_format(name), target)
        assert cell.error is None
        assert cell.result.ppb_raw_db == pytest.approx(expected, abs=tol_for(name))
    assert table.best_by_target[0.14] == "qpsk"
    assert table.best_by_target[1e-3] == "ppmqpsk:64"


def test_table_post_fec_defaults():
    table = sensitivity_table([formats.qpsk()], [1e-3, 0.14], NF0)
    cell14 = table.cell(formats.qpsk(), 0.14)
    assert cell14.result.code_rate == 0.5
    assert cell14.result.ppb_post_fec == pytest.approx(2 * cell14.result.ppb_raw)
    cell13 = table.cell(formats.qpsk(), 1e-3)
    assert cell13.result.code_rate == pytest.approx(1 / 1.07)


def test_table_unity_code_rate_is_identity():
    table = sensitivity_table([formats.qpsk()], [1e-3], NF0, code_rates={1e-3: 1.0})
    cell = table.cell(formats.qpsk(), 1e-3)
    assert cell.result.ppb_post_fec_db == pytest.approx(cell.result.ppb_raw_db)


def test_table_isolates_cell_failures():
    # 0.4999 sits above the curve everywhere inside the +-60 dB bracket.
    table = sensitivity_table([formats.qpsk()], [1e-3, 0.4999], NF0)
    bad = table.cell(formats.qpsk(), 0.4999)
    good = table.cell(formats.qpsk(), 1e-3)
    assert bad.result is None and bad.error
    assert good.result is not None


def test_unreachable_target_reported():
    with pytest.raises(UnreachableTargetError):
        ppb_at_ber(formats.qpsk(), 0.4999, NF0)


# --------------------------------------------------------------------------
# capacity crossovers
# --------------------------------------------------------------------------

def psa_model(bandwidth=1e10):
    return coherent_capacity_model(bandwidth, FREQ_1550, link.PSA_CAPACITY, "psa")


def test_psa_vs_256ppm_crossover():
    res = capacity_crossover(psa_model(), ppm_capacity_model(256, 1e10, FREQ_1550))
    assert res.power_dbm == pytest.approx(-85.0, abs=1.0)
    assert res.relative_gap < 1e-3


def test_edfa_vs_best_ppm_crossover():
    edfa = coherent_capacity_model(1e10, FREQ_1550, link.EDFA_IDEAL, "edfa")
    best = best_ppm_capacity_model((2, 4, 8, 16, 32, 64, 128, 256), 1e10, FREQ_1550)
    res = capacity_crossover(edfa, best)
    assert res.power_dbm == pytest.approx(-65.0, abs=2.0)


def test_crossover_symmetry():
    a = psa_model()
    b = ppm_capacity_model(256, 1e10, FREQ_1550)
    assert capacity_crossover(a, b).power_dbm == pytest.approx(
        capacity_crossover(b, a).power_dbm, abs=0.01
    )


def test_identical_models_report_no_crossover():
    with pytest.raises(NoCrossoverError):
        capacity_crossover(psa_model(), psa_model())


def test_capacity_model_sweep_points():
    import photonlink.link as link_mod

    model = psa_model()
    powers = [0.0, link_mod.dbm_to_watts(-85.0), link_mod.dbm_to_watts(-60.0)]
    points = model.sweep(powers)
    assert [p.model for p in points] == ["psa"] * 3
    # capacity >= 0 and zero exactly at zero received power
    assert points[0].capacity_bps == 0.0
    assert all(p.capacity_bps > 0 for p in points[1:])


def test_no_crossover_outside_bracket():
    edfa = coherent_capacity_model(1e10, FREQ_1550, link.EDFA_IDEAL, "edfa")
    psa = psa_model()
    # The phase-sensitive curve dominates the phase-insensitive one everywhere.
    with pytest.raises(NoCrossoverError):
        capacity_crossover(psa, edfa)


# --------------------------------------------------------------------------
# BER crossovers
# --------------------------------------------------------------------------

def test_qpsk_vs_ppm_qpsk16_crossing_band():
    res = ber_crossover(formats.qpsk(), formats.ppm_qpsk(16), NF0)
    assert 0.05 <= res.ber <= 0.12
    # The two curves really do meet at the reported point.
    a = analytic.ber_at_ppb(formats.qpsk(), res.ppb_raw, NF0)
    b = analytic.ber_at_ppb(formats.ppm_qpsk(16), res.ppb_raw, NF0)
    assert a == pytest.approx(b, rel=1e-3)


def test_qpsk_vs_ppm_qpsk64_crossing_band():
    res = ber_crossover(formats.qpsk(), formats.ppm_qpsk(64), NF0)
    assert 0.04 <= res.ber <= 0.12


def test_identical_formats_no_crossing():
    with pytest.raises(NoCrossoverError):
        ber_crossover(formats.qpsk(), formats.qpsk(), NF0)


# --------------------------------------------------------------------------
# recommend_format
# --------------------------------------------------------------------------

def test_recommend_high_power_prefers_qpsk():
    budget = LinkBudget.from_dbm(-40.0, 1e10, wavelength_nm=1550.0)
    fec = FecProfile(0.5, 0.14)
    candidates = [
        (formats.qpsk(), ReceiverKind.PHASE_SENSITIVE),
        (formats.ppm(16), ReceiverKind.PHASE_SENSITIVE),
        (formats.ppm(256), ReceiverKind.PHOTON_COUNTING),
        (formats.ppm_qpsk(16), ReceiverKind.PHASE_SENSITIVE),
    ]
    ranked = recommend_format(budget, NF0, fec, candidates)
    assert ranked[0].fmt == formats.qpsk()


def test_recommend_low_power_prefers_photon_counting_ppm():
    budget = LinkBudget.from_dbm(-90.0, 1e10, wavelength_nm=1550.0)
    fec = FecProfile(0.5, 0.14)
    candidates = [
        (formats.qpsk(), ReceiverKind.PHASE_SENSITIVE),
        (formats.ppm(256), ReceiverKind.PHOTON_COUNTING),
    ]
    ranked = recommend_format(budget, NF0, fec, candidates)
    assert ranked[0].fmt == formats.ppm(256)
    assert ranked[0].receiver_kind is ReceiverKind.PHOTON_COUNTING


def test_recommend_single_candidate():
    budget = LinkBudget.from_dbm(-60.0, 1e10, wavelength_nm=1550.0)
    ranked = recommend_format(
        budget, NF0, FecProfile(0.5, 0.14), [(formats.bpsk(), ReceiverKind.PHASE_INSENSITIVE)]
    )
    assert len(ranked) == 1 and ranked[0].fmt == formats.bpsk()


def test_recommend_rejects_empty():
    budget = LinkBudget.from_dbm(-60.0, 1e10, wavelength_nm=1550.0)
    with pytest.raises(ValueError):
        recommend_format(budget, NF0, FecProfile(0.5, 0.14), [])
