"""Command-line interface: sweeps, tables, crossovers and simulations.

Output contract: every data file starts with a schema-version field
(``# schema=...`` comment for CSV, ``"schema"`` key for JSON) followed by the
resolved parameters, and is bit-identical across reruns of the same command
with the same seed.  Timestamps live only in the ``<out>.manifest.json``
sidecar written next to ``--out`` targets, never in the data file itself.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 no crossover.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, analytic, formats, link, montecarlo, sensitivity
from .errors import NoCrossoverError, NumericalFailure

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_NO_CROSSOVER = 4

_CAPACITY_COLUMNS = ("power_dbm", "model", "bandwidth_hz", "capacity_bps")
_BER_COLUMNS = ("ppb_t_db", "format", "ber", "source", "ci95_low", "ci95_high")


def _fmt_float(value: float) -> str:
    return f"{value:.9g}"


def _parse_range(text: str) -> list[float]:
    """Parse an inclusive start:stop:step range in dB units."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"range must be start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if not start < stop:
        raise ValueError(f"range start must be below stop in {text!r}")
    if step <= 0:
        raise ValueError(f"range step must be positive in {text!r}")
    values = []
    i = 0
    while True:
        v = start + i * step
        if v > stop + 1e-9:
            break
        values.append(round(v, 12))
        i += 1
    return values


def _parse_bracket(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"bracket must be lo:hi, got {text!r}")
    lo, hi = float(parts[0]), float(parts[1])
    if not lo < hi:
        raise ValueError(f"bracket lo must be below hi in {text!r}")
    return lo, hi


def _csv_text(schema: str, params: dict, columns: tuple[str, ...], rows: list[tuple]) -> str:
    lines = [f"# schema={schema}", f"# params={json.dumps(params, sort_keys=True)}"]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join("" if v is None else (_fmt_float(v) if isinstance(v, float) else str(v)) for v in row))
    return "\n".join(lines) + "\n"


def _json_text(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_output(text: str, out: str | None, manifest: dict | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.write_text(text)
    if manifest is not None:
        Path(str(path) + ".manifest.json").write_text(_json_text(manifest))


def _manifest(args: argparse.Namespace, params: dict, started: str, seed: int | None = None) -> dict:
    return {
        "schema": "photonlink.manifest.v1",
        "tool": "photonlink",
        "version": __version__,
        "command": args.command,
        "argv": list(getattr(args, "raw_argv", [])),
        "resolved_params": params,
        "master_seed": seed,
        "started_utc": started,
        "finished_utc": datetime.now(timezone.utc).isoformat(),
    }


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _frequency_hz(args: argparse.Namespace) -> float:
    return link.wavelength_nm_to_frequency_hz(args.wavelength_nm)


def _capacity_model_from_name(
    name: str, bandwidth_hz: float, frequency_hz: float, nf_db: float | None
) -> sensitivity.CapacityModel:
    token = name.strip().lower()
    if token == "psa":
        nf = link.PSA_CAPACITY if nf_db is None else link.NoiseFigure.from_db(nf_db)
        return sensitivity.coherent_capacity_model(bandwidth_hz, frequency_hz, nf, "psa")
    if token == "edfa":
        nf = link.EDFA_IDEAL if nf_db is None else link.NoiseFigure.from_db(nf_db)
        return sensitivity.coherent_capacity_model(bandwidth_hz, frequency_hz, nf, "edfa")
    if token == "ppm:best":
        return sensitivity.best_ppm_capacity_model((2, 4, 8, 16, 32, 64, 128, 256), bandwidth_hz, frequency_hz)
    if token.startswith("ppm:"):
        fmt = formats.parse_format(token)
        return sensitivity.ppm_capacity_model(fmt.order, bandwidth_hz, frequency_hz)
    raise ValueError(f"unknown capacity model {name!r} (expected psa, edfa, ppm:<M> or ppm:best)")


# --------------------------------------------------------------------------
# capacity
# --------------------------------------------------------------------------

def _cmd_capacity(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    started = _now()
    try:
        model_names = [m for m in args.models.split(",") if m.strip()]
        if not model_names:
            raise ValueError("at least one model is required")
        powers = _parse_range(args.power_dbm)
        frequency_hz = _frequency_hz(args)
        models = [
            _capacity_model_from_name(name, args.bandwidth_hz, frequency_hz, args.nf_db)
            for name in model_names
        ]
    except ValueError as exc:
        parser.error(str(exc))

    rows = []
    for model in models:
        points = model.sweep([link.dbm_to_watts(dbm) for dbm in powers])
        for dbm, point in zip(powers, points):
            rows.append((float(dbm), point.model, float(args.bandwidth_hz), point.capacity_bps))

    params = {
        "bandwidth_hz": args.bandwidth_hz,
        "wavelength_nm": args.wavelength_nm,
        "nf_db_override": args.nf_db,
        "models": [m.label for m in models],
        "power_dbm": args.power_dbm,
    }
    if args.json:
        payload = {
            "schema": "photonlink.capacity.v1",
            "params": params,
            "rows": [dict(zip(_CAPACITY_COLUMNS, row)) for row in rows],
        }
        text = _json_text(payload)
    else:
        text = _csv_text("photonlink.capacity.v1", params, _CAPACITY_COLUMNS, rows)
    _write_output(text, args.out, _manifest(args, params, started))
    return EXIT_OK


# --------------------------------------------------------------------------
# ber
# --------------------------------------------------------------------------

def _cmd_ber(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    started = _now()
    try:
        fmt_list = [formats.parse_format(f) for f in args.formats.split(",") if f.strip()]
        if not fmt_list:
            raise ValueError("at least one format is required")
        ppb_grid_db = _parse_range(args.ppb_db)
        metric = formats.Metric(args.metric)
        nf = link.NoiseFigure.from_db(args.nf_db)
        if args.model not in ("analytic", "mc"):
            raise ValueError(f"unknown model {args.model!r}")
    except ValueError as exc:
        parser.error(str(exc))

    rows: list[tuple] = []
    try:
        point_index = 0
        for fmt in fmt_list:
            for ppb_db in ppb_grid_db:
                ppb = link.db_to_linear(ppb_db)
                if args.model == "analytic":
                    ber = analytic.ber_at_ppb(fmt, ppb, nf, metric)
                    rows.append((float(ppb_db), fmt.cli_name, float(ber), "analytic", None, None))
                else:
                    snr_sym = link.snr_bit_from_ppb(ppb, nf) * fmt.bits_per_symbol
                    est = montecarlo.simulate_coherent(
                        fmt,
                        snr_sym,
                        metric,
                        montecarlo.StoppingRule(args.target_errors, int(args.max_symbols)),
                        args.seed,
                        workers=args.workers,
                        stream_base=point_index << 40,
                    )
                    rows.append(
                        (float(ppb_db), fmt.cli_name, float(est.ber), "mc",
                         float(est.ci95_low), float(est.ci95_high))
                    )
                point_index += 1
    except NumericalFailure as exc:
        print(f"photonlink ber: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    params = {
        "formats": [f.cli_name for f in fmt_list],
        "ppb_db": args.ppb_db,
        "model": args.model,
        "metric": metric.value,
        "nf_db": args.nf_db,
        "seed": args.seed if args.model == "mc" else None,
        "target_errors": args.target_errors if args.model == "mc" else None,
        "max_symbols": args.max_symbols if args.model == "mc" else None,
    }
    if args.json:
        payload = {
            "schema": "photonlink.ber.v1",
            "params": params,
            "rows": [dict(zip(_BER_COLUMNS, row)) for row in rows],
        }
        text = _json_text(payload)
    else:
        text = _csv_text("photonlink.ber.v1", params, _BER_COLUMNS, rows)
    _write_output(text, args.out, _manifest(args, params, started, seed=args.seed))
    return EXIT_OK


# --------------------------------------------------------------------------
# sensitivity
# --------------------------------------------------------------------------

def _cmd_sensitivity(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    started = _now()
    try:
        fmt_list = [formats.parse_format(f) for f in args.formats.split(",") if f.strip()]
        targets = [float(t) for t in args.targets.split(",") if t.strip()]
        rates = [float(k) for k in args.code_rates.split(",") if k.strip()]
        if not fmt_list or not targets:
            raise ValueError("formats and targets must be non-empty")
        if len(rates) != len(targets):
            raise ValueError("--code-rates must pair one rate with each target")
        for t in targets:
            if not 0.0 < t < 0.5:
                raise ValueError(f"target BER {t} outside (0, 0.5): at or above the guessing-rate region")
        for k in rates:
            if not 0.0 < k <= 1.0:
                raise ValueError(f"code rate {k} outside (0, 1]")
        metric = formats.Metric(args.metric)
        nf = link.NoiseFigure.from_db(args.nf_db)
        model = {"analytic": sensitivity.ANALYTIC, "mc": sensitivity.MONTE_CARLO}[args.model]
    except (ValueError, KeyError) as exc:
        parser.error(str(exc))

    table = sensitivity.sensitivity_table(
        fmt_list,
        targets,
        nf,
        code_rates=dict(zip(targets, rates)),
        metric=metric,
        model=model,
        penalty_db=args.penalty_db,
        master_seed=args.seed,
    )

    cells = []
    any_failed = False
    for cell in table.cells:
        entry: dict = {
            "format": cell.fmt.cli_name,
            "target_pre_fec_ber": cell.target_pre_fec_ber,
        }
        if cell.result is None:
            entry["error"] = cell.error
            any_failed = True
        else:
            res = cell.result
            entry.update(
                {
                    "ppb_raw_db": res.ppb_raw_db,
                    "ppb_raw": res.ppb_raw,
                    "ppb_post_fec_db": res.ppb_post_fec_db,
                    "ppb_post_fec": res.ppb_post_fec,
                    "code_rate": res.code_rate,
                    "achieved_ber": res.achieved_ber,
                    "best": table.best_by_target.get(cell.target_pre_fec_ber) == cell.fmt.cli_name,
                    "error": None,
                }
            )
        cells.append(entry)

    params = {
        "formats": [f.cli_name for f in fmt_list],
        "targets": targets,
        "code_rates": rates,
        "nf_db": args.nf_db,
        "metric": metric.value,
        "model": args.model,
        "penalty_db": args.penalty_db,
        "seed": args.seed if args.model == "mc" else None,
    }
    payload = {
        "schema": "photonlink.sensitivity.v1",
        "params": params,
        "cells": cells,
        "best_by_target": {repr(t): name for t, name in table.best_by_target.items()},
    }
    _write_output(_json_text(payload), args.out, _manifest(args, params, started, seed=args.seed))
    return EXIT_NUMERICAL if any_failed else EXIT_OK


# --------------------------------------------------------------------------
# crossover
# --------------------------------------------------------------------------

def _cmd_crossover(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    started = _now()
    try:
        frequency_hz = _frequency_hz(args)
        metric = formats.Metric(args.metric)
        if args.kind == "capacity":
            model_a = _capacity_model_from_name(args.a, args.bandwidth_hz, frequency_hz, args.nf_db)
            model_b = _capacity_model_from_name(args.b, args.bandwidth_hz, frequency_hz, args.nf_db)
        else:
            fmt_a = formats.parse_format(args.a)
            fmt_b = formats.parse_format(args.b)
    except ValueError as exc:
        parser.error(str(exc))

    params = {
        "kind": args.kind,
        "a": args.a,
        "b": args.b,
        "bandwidth_hz": args.bandwidth_hz,
        "wavelength_nm": args.wavelength_nm,
        "nf_db": args.nf_db,
        "metric": metric.value,
        "power_bracket_dbm": args.power_bracket_dbm,
        "ppb_bracket_db": args.ppb_bracket_db,
    }
    try:
        if args.kind == "capacity":
            res = sensitivity.capacity_crossover(model_a, model_b, _parse_bracket(args.power_bracket_dbm))
            result = {
                "model_a": res.model_a,
                "model_b": res.model_b,
                "power_dbm": res.power_dbm,
                "power_w": res.power_w,
                "capacity_a_bps": res.capacity_a_bps,
                "capacity_b_bps": res.capacity_b_bps,
                "relative_gap": res.relative_gap,
            }
        else:
            nf = link.NoiseFigure.from_db(args.nf_db if args.nf_db is not None else 0.0)
            res = sensitivity.ber_crossover(fmt_a, fmt_b, nf, metric, _parse_bracket(args.ppb_bracket_db))
            result = {
                "format_a": res.fmt_a.cli_name,
                "format_b": res.fmt_b.cli_name,
                "ppb_t_db": res.ppb_raw_db,
                "ppb_t": res.ppb_raw,
                "ber": res.ber,
            }
    except NoCrossoverError as exc:
        payload = {
            "schema": "photonlink.crossover.v1",
            "params": params,
            "no_crossover": True,
            "message": str(exc),
            "result": None,
        }
        _write_output(_json_text(payload), args.out, _manifest(args, params, started))
        return EXIT_NO_CROSSOVER
    except NumericalFailure as exc:
        print(f"photonlink crossover: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    payload = {
        "schema": "photonlink.crossover.v1",
        "params": params,
        "no_crossover": False,
        "message": None,
        "result": result,
    }
    _write_output(_json_text(payload), args.out, _manifest(args, params, started))
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------

def _cmd_simulate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    started = _now()
    rule = montecarlo.StoppingRule(args.target_errors, int(args.max_symbols))
    try:
        if args.channel == "coherent":
            if args.format is None or args.snr_sym_db is None:
                raise ValueError("coherent simulation needs --format and --snr-sym-db")
            fmt = formats.parse_format(args.format)
            metric = formats.Metric(args.metric)
            est = montecarlo.simulate_coherent(
                fmt, link.db_to_linear(args.snr_sym_db), metric, rule, args.seed, workers=args.workers
            )
            point = {"format": fmt.cli_name, "snr_sym_db": args.snr_sym_db, "metric": metric.value}
        else:
            if args.order is None or args.ns is None:
                raise ValueError("poisson simulation needs --order and --ns")
            est = montecarlo.simulate_photon_counting_ppm(
                args.order, args.ns, args.background, rule, args.seed, workers=args.workers
            )
            point = {"order": args.order, "n_s": args.ns, "background_rate": args.background}
    except ValueError as exc:
        parser.error(str(exc))

    params = {
        "channel": args.channel,
        **point,
        "seed": args.seed,
        "target_errors": args.target_errors,
        "max_symbols": args.max_symbols,
    }
    payload = {
        "schema": "photonlink.estimate.v1",
        "params": params,
        "estimate": {
            "bit_errors": est.bit_errors,
            "bits_simulated": est.bits_simulated,
            "symbol_errors": est.symbol_errors,
            "symbols_simulated": est.symbols_simulated,
            "ber": est.ber,
            "ser": est.ser,
            "ci95_low": est.ci95_low,
            "ci95_high": est.ci95_high,
            "master_seed": est.master_seed,
            "stopped_by": est.stopped_by.value,
        },
    }
    _write_output(_json_text(payload), args.out, _manifest(args, params, started, seed=args.seed))
    return EXIT_OK


# --------------------------------------------------------------------------
# recommend
# --------------------------------------------------------------------------

def _parse_candidate(token: str) -> tuple[formats.FormatSpec, link.ReceiverKind]:
    head, _, tail = token.strip().lower().partition(":")
    kinds = {k.value: k for k in link.ReceiverKind}
    if head not in kinds or not tail:
        raise ValueError(f"candidate must look like psa:qpsk or pc:ppm:256, got {token!r}")
    return formats.parse_format(tail), kinds[head]


def _cmd_recommend(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    started = _now()
    try:
        candidates = [_parse_candidate(t) for t in args.candidates.split(",") if t.strip()]
        if not candidates:
            raise ValueError("at least one candidate is required")
        budget = link.LinkBudget.from_dbm(
            args.power_dbm, args.bandwidth_hz, wavelength_nm=args.wavelength_nm
        )
        fec = link.FecProfile(args.code_rate, args.target_ber)
        nf = link.NoiseFigure.from_db(args.nf_db)
    except ValueError as exc:
        parser.error(str(exc))

    try:
        ranking = sensitivity.recommend_format(budget, nf, fec, candidates)
    except NumericalFailure as exc:
        print(f"photonlink recommend: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    params = {
        "power_dbm": args.power_dbm,
        "bandwidth_hz": args.bandwidth_hz,
        "wavelength_nm": args.wavelength_nm,
        "nf_db": args.nf_db,
        "code_rate": args.code_rate,
        "target_ber": args.target_ber,
        "candidates": [f"{k.value}:{f.cli_name}" for f, k in candidates],
    }
    payload = {
        "schema": "photonlink.recommend.v1",
        "params": params,
        "ranking": [
            {
                "label": r.label,
                "format": r.fmt.cli_name,
                "receiver": r.receiver_kind.value,
                "info_rate_bps": r.info_rate_bps,
                "capacity_bps": r.capacity_bps,
                "threshold_rate_bps": r.threshold_rate_bps,
                "spectral_efficiency": r.spectral_efficiency,
            }
            for r in ranking
        ],
    }
    _write_output(_json_text(payload), args.out, _manifest(args, params, started))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photonlink",
        description="Capacity, BER and sensitivity models for power-efficient optical formats.",
    )
    parser.add_argument("--version", action="version", version=f"photonlink {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_output(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", default=None, help="output path (default stdout)")

    def add_link_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--bandwidth-hz", type=float, default=1e10)
        p.add_argument("--wavelength-nm", type=float, default=1550.0)

    p_cap = sub.add_parser("capacity", help="capacity vs received power sweep")
    p_cap.add_argument("--models", required=True, help="comma list: psa, edfa, ppm:<M>")
    p_cap.add_argument("--power-dbm", required=True, help="start:stop:step in dBm")
    p_cap.add_argument("--nf-db", type=float, default=None, help="override NF of coherent models")
    p_cap.add_argument("--json", action="store_true")
    add_link_args(p_cap)
    add_common_output(p_cap)

    p_ber = sub.add_parser("ber", help="BER vs photons-per-raw-bit sweep")
    p_ber.add_argument("--formats", required=True, help="comma list: qpsk, 3psk, ppm:<M>, ppmqpsk:<M>")
    p_ber.add_argument("--ppb-db", required=True, help="start:stop:step in dB")
    p_ber.add_argument("--model", default="analytic", help="analytic or mc")
    p_ber.add_argument("--metric", default="envelope", help="envelope or coherent")
    p_ber.add_argument("--nf-db", type=float, default=0.0)
    p_ber.add_argument("--seed", type=int, default=0)
    p_ber.add_argument("--target-errors", type=int, default=100)
    p_ber.add_argument("--max-symbols", type=float, default=1e8)
    p_ber.add_argument("--workers", type=int, default=1)
    p_ber.add_argument("--json", action="store_true")
    add_common_output(p_ber)

    p_sens = sub.add_parser("sensitivity", help="PPB sensitivity table at target BERs")
    p_sens.add_argument(
        "--formats", default="ppm:16,ppm:64,qpsk,ppmqpsk:16,ppmqpsk:64"
    )
    p_sens.add_argument("--targets", default="1e-3,0.14")
    p_sens.add_argument(
        "--code-rates",
        default="0.9345794392523364,0.5",
        help="one code rate per target, positionally paired",
    )
    p_sens.add_argument("--nf-db", type=float, default=0.0)
    p_sens.add_argument("--metric", default="envelope")
    p_sens.add_argument("--model", default="analytic", help="analytic or mc")
    p_sens.add_argument("--penalty-db", type=float, default=0.0)
    p_sens.add_argument("--seed", type=int, default=0)
    add_common_output(p_sens)

    p_cross = sub.add_parser("crossover", help="capacity or BER curve intersection")
    p_cross.add_argument("--a", required=True)
    p_cross.add_argument("--b", required=True)
    p_cross.add_argument("--kind", default="capacity", choices=("capacity", "ber"))
    p_cross.add_argument("--nf-db", type=float, default=None)
    p_cross.add_argument("--metric", default="envelope")
    p_cross.add_argument("--power-bracket-dbm", default="-110:-30")
    p_cross.add_argument("--ppb-bracket-db", default="-10:15")
    add_link_args(p_cross)
    add_common_output(p_cross)

    p_sim = sub.add_parser("simulate", help="Monte Carlo BER/SER estimate")
    p_sim.add_argument("--channel", default="coherent", choices=("coherent", "poisson"))
    p_sim.add_argument("--format", default=None)
    p_sim.add_argument("--snr-sym-db", type=float, default=None)
    p_sim.add_argument("--metric", default="envelope")
    p_sim.add_argument("--order", type=int, default=None, help="PPM order (poisson channel)")
    p_sim.add_argument("--ns", type=float, default=None, help="photons per symbol (poisson channel)")
    p_sim.add_argument("--background", type=float, default=0.0)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--target-errors", type=int, default=100)
    p_sim.add_argument("--max-symbols", type=float, default=1e8)
    p_sim.add_argument("--workers", type=int, default=1)
    add_common_output(p_sim)

    p_rec = sub.add_parser("recommend", help="rank formats at a received power")
    p_rec.add_argument("--power-dbm", type=float, required=True)
    p_rec.add_argument("--candidates", required=True, help="comma list like psa:qpsk,pc:ppm:256")
    p_rec.add_argument("--nf-db", type=float, default=0.0)
    p_rec.add_argument("--code-rate", type=float, default=0.5)
    p_rec.add_argument("--target-ber", type=float, default=0.14)
    add_link_args(p_rec)
    add_common_output(p_rec)

    # Let values like "-100:-40:0.5" pass as arguments rather than flags.
    negative_value = re.compile(r"^-\d")
    for p in (parser, *sub.choices.values()):
        p._negative_number_matcher = negative_value

    return parser


_HANDLERS = {
    "capacity": _cmd_capacity,
    "ber": _cmd_ber,
    "sensitivity": _cmd_sensitivity,
    "crossover": _cmd_crossover,
    "simulate": _cmd_simulate,
    "recommend": _cmd_recommend,
}


def main(argv: list[str] | None = None) -> int:
    raw_argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(raw_argv)
    args.raw_argv = raw_argv
    try:
        return _HANDLERS[args.command](args, parser)
    except NumericalFailure as exc:
        print(f"photonlink: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
