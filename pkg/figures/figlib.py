"""Read photonlink CSV sweeps and regenerate the capacity/BER figures.

This module never recomputes physics: it is a read-only consumer of the CSV
files produced by the ``photonlink capacity`` and ``photonlink ber`` commands
and refuses anything with an unknown schema version.  The curve-ordering
helpers work from the parsed rows alone so they can be asserted in tests
without rendering a single pixel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

SUPPORTED_SCHEMAS = {
    "capacity": "photonlink.capacity.v1",
    "ber": "photonlink.ber.v1",
}

BER_THRESHOLDS = (0.14, 1e-3)

# Deterministic styling: fixed palette assigned to labels in sorted order.
_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
)


class SchemaError(ValueError):
    """The input file is not a supported photonlink CSV."""


@dataclass
class Table:
    schema: str
    params: dict
    columns: list[str]
    rows: list[dict]


def _parse_value(text: str) -> float | str | None:
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        return text


def read_table(path: str | Path, expected_kind: str) -> Table:
    """Parse a photonlink CSV, enforcing its schema-version header."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# schema="):
        raise SchemaError(f"{path}: missing schema header")
    schema = lines[0].removeprefix("# schema=").strip()
    if schema != SUPPORTED_SCHEMAS[expected_kind]:
        raise SchemaError(f"{path}: unsupported schema {schema!r}")
    params: dict = {}
    body_start = 1
    for i, line in enumerate(lines[1:], start=1):
        if line.startswith("# params="):
            params = json.loads(line.removeprefix("# params="))
        elif not line.startswith("#"):
            body_start = i
            break
    else:
        raise SchemaError(f"{path}: no column header found")
    columns = lines[body_start].split(",")
    rows = []
    for line in lines[body_start + 1 :]:
        if not line.strip():
            continue
        values = [_parse_value(v) for v in line.split(",")]
        rows.append(dict(zip(columns, values)))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return Table(schema=schema, params=params, columns=columns, rows=rows)


# --------------------------------------------------------------------------
# CSV-level curve queries (renderer-free)
# --------------------------------------------------------------------------

def capacity_series(tables: list[Table]) -> dict[tuple[str, float], list[tuple[float, float]]]:
    """(model, bandwidth) -> capacity curve sorted by power."""
    series: dict[tuple[str, float], list[tuple[float, float]]] = {}
    for table in tables:
        for row in table.rows:
            key = (row["model"], row["bandwidth_hz"])
            series.setdefault(key, []).append((row["power_dbm"], row["capacity_bps"]))
    for curve in series.values():
        curve.sort()
    return series


def capacity_crossing_dbm(
    table: Table, model_a: str, model_b: str, bandwidth_hz: float | None = None
) -> float:
    """Power where two capacity curves cross, interpolated from CSV rows."""
    series = capacity_series([table])
    if bandwidth_hz is None:
        bandwidth_hz = next(bw for (_, bw) in series)
    a = series[(model_a, bandwidth_hz)]
    b = dict(series[(model_b, bandwidth_hz)])
    prev = None
    for power, cap_a in a:
        if power not in b:
            continue
        diff = cap_a - b[power]
        if prev is not None and diff * prev[1] < 0:
            p0, d0 = prev
            return p0 + (power - p0) * d0 / (d0 - diff)
        prev = (power, diff)
    raise ValueError(f"no crossing between {model_a} and {model_b} in the swept range")


def ber_series(table: Table) -> dict[str, list[tuple[float, float]]]:
    series: dict[str, list[tuple[float, float]]] = {}
    for row in table.rows:
        series.setdefault(row["format"], []).append((row["ppb_t_db"], row["ber"]))
    for curve in series.values():
        curve.sort()
    return series


def ppb_db_at_threshold(curve: list[tuple[float, float]], threshold: float) -> float:
    """Interpolated PPB (dB) where a monotone BER curve falls to a threshold."""
    prev = None
    for ppb_db, ber in curve:
        if prev is not None and (prev[1] - threshold) * (ber - threshold) <= 0 and prev[1] != ber:
            p0, b0 = prev
            frac = (b0 - threshold) / (b0 - ber)
            return p0 + frac * (ppb_db - p0)
        prev = (ppb_db, ber)
    raise ValueError(f"curve never reaches BER {threshold}")


def lowest_ppb_format_at(table: Table, threshold: float) -> str:
    """Format whose curve needs the fewest photons per bit at a threshold."""
    best_name, best_ppb = None, None
    for name, curve in ber_series(table).items():
        try:
            ppb = ppb_db_at_threshold(curve, threshold)
        except ValueError:
            continue
        if best_ppb is None or ppb < best_ppb:
            best_name, best_ppb = name, ppb
    if best_name is None:
        raise ValueError(f"no curve reaches BER {threshold}")
    return best_name


def _style_for(labels: list[str]) -> dict[str, str]:
    ordered = sorted(set(labels))
    return {label: _PALETTE[i % len(_PALETTE)] for i, label in enumerate(ordered)}


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------

def plot_capacity(csv_paths: list[str | Path], out_path: str | Path) -> None:
    """Log-y capacity vs received power; lower-bandwidth families dashed."""
    tables = [read_table(p, "capacity") for p in csv_paths]
    series = capacity_series(tables)
    bandwidths = sorted({bw for (_, bw) in series}, reverse=True)
    colors = _style_for([model for (model, _) in series])

    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for (model, bw), curve in sorted(series.items()):
        powers = [p for p, _ in curve]
        caps = [c for _, c in curve]
        dashed = bw != bandwidths[0]
        label = model if not dashed else f"{model} ({bw / 1e9:g} GHz)"
        ax.semilogy(
            powers, caps, color=colors[model],
            linestyle="--" if dashed else "-",
            label=label,
        )
    ax.set_xlabel("Received power (dBm)")
    ax.set_ylabel("Capacity (bits/s)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def plot_ber(csv_paths: list[str | Path], out_path: str | Path) -> None:
    """Log-y BER waterfalls vs PPB with the two FEC threshold lines."""
    tables = [read_table(p, "ber") for p in csv_paths]
    labels = [row["format"] for t in tables for row in t.rows]
    colors = _style_for(labels)

    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for table in tables:
        by_fmt: dict[str, list[dict]] = {}
        for row in table.rows:
            by_fmt.setdefault(row["format"], []).append(row)
        for name, rows in sorted(by_fmt.items()):
            rows.sort(key=lambda r: r["ppb_t_db"])
            x = [r["ppb_t_db"] for r in rows]
            y = [max(r["ber"], 1e-12) for r in rows]
            mc = all(r["source"] == "mc" for r in rows)
            ax.semilogy(
                x, y, color=colors[name], label=name,
                marker="o" if mc else None, markersize=3,
                linestyle="-" if not mc else "none",
            )
            if mc and all(r.get("ci95_low") is not None for r in rows):
                ax.fill_between(
                    x,
                    [max(r["ci95_low"], 1e-12) for r in rows],
                    [max(r["ci95_high"], 1e-12) for r in rows],
                    color=colors[name], alpha=0.2, linewidth=0,
                )
    for threshold in BER_THRESHOLDS:
        ax.axhline(threshold, color="black", linewidth=0.8, alpha=0.6)
    ax.set_xlabel("Photons per transmitted bit (dB)")
    ax.set_ylabel("BER")
    ax.set_ylim(1e-6, 1.0)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
