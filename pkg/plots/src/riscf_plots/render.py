"""Render riscf experiment CSVs as static figures.

The renderers only relabel and draw: closed-form series as lines, sampled
series as markers.  No quantity is recomputed here.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

RATE_FIGURES = (
    "rate_vs_rician", "rate_vs_power", "rate_vs_B", "rate_vs_R",
    "rate_vs_kappa", "rate_vs_bits", "scaling_B", "scaling_R",
)
FIGURES = ("terms_vs_R",) + RATE_FIGURES

_X_LABELS = {
    "terms_vs_R": "reflecting elements R",
    "rate_vs_rician": "surface-AP Rician factor",
    "rate_vs_power": "transmit power (dBm)",
    "rate_vs_B": "AP antennas B",
    "rate_vs_R": "reflecting elements R",
    "rate_vs_kappa": "transceiver EVM",
    "rate_vs_bits": "quantization bits",
    "scaling_B": "AP antennas B (power p/B)",
    "scaling_R": "reflecting elements R (scaled power)",
}

_RATE_COLUMNS = {"figure", "sweep_value", "variant", "source", "sum_rate",
                 "min_rate"}
_TERM_COLUMNS = {"figure", "sweep_value", "user", "term", "value", "source"}


class SchemaError(ValueError):
    """CSV does not match the experiments output contract."""


@dataclass
class PlotSpec:
    csv: str
    figure: str
    out: str
    y_metric: str = "sum_rate"    # sum_rate | min_rate (rate figures)
    log_y: bool | None = None

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise SchemaError(f"unknown figure kind {self.figure!r}")
        if self.y_metric not in ("sum_rate", "min_rate"):
            raise SchemaError("y_metric must be sum_rate or min_rate")


def _read_rows(path, required):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = set(reader.fieldnames or ())
        missing = required - header
        if missing:
            raise SchemaError(
                f"missing columns: {sorted(missing)}; found {sorted(header)}")
        rows = list(reader)
    if not rows:
        raise SchemaError("CSV has a header but no data rows")
    return rows


def _style(idx):
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    return colors[idx % len(colors)]


def render(spec: PlotSpec):
    """Draw one figure and write it to spec.out; returns the output path."""
    if spec.figure == "terms_vs_R":
        _render_terms(spec)
    else:
        _render_rates(spec)
    return spec.out


def _render_terms(spec):
    rows = _read_rows(spec.csv, _TERM_COLUMNS)
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    terms = sorted({r["term"] for r in rows})
    users = sorted({r["user"] for r in rows})
    u0 = users[0]
    for idx, term in enumerate(terms):
        color = _style(idx)
        cf = sorted(((float(r["sweep_value"]), float(r["value"]))
                     for r in rows
                     if r["term"] == term and r["user"] == u0
                     and r["source"] == "closed_form"))
        mc = sorted(((float(r["sweep_value"]), float(r["value"]))
                     for r in rows
                     if r["term"] == term and r["user"] == u0
                     and r["source"] == "monte_carlo"))
        if cf:
            ax.plot(*zip(*cf), "-", color=color, label=f"{term} (analysis)")
        if mc:
            ax.plot(*zip(*mc), "o", color=color, mfc="none",
                    label=f"{term} (simulation)")
    ax.set_yscale("log")
    ax.set_xlabel(_X_LABELS[spec.figure])
    ax.set_ylabel("power term")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=150)
    plt.close(fig)


def _render_rates(spec):
    rows = _read_rows(spec.csv, _RATE_COLUMNS)
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    variants = sorted({r["variant"] for r in rows})
    for idx, variant in enumerate(variants):
        color = _style(idx)
        cf = sorted(((float(r["sweep_value"]), float(r[spec.y_metric]))
                     for r in rows
                     if r["variant"] == variant and r["source"] == "closed_form"))
        mc = sorted(((float(r["sweep_value"]), float(r[spec.y_metric]))
                     for r in rows
                     if r["variant"] == variant and r["source"] == "monte_carlo"))
        if cf:
            ax.plot(*zip(*cf), "-", color=color, label=f"{variant} (analysis)")
        if mc:
            ax.plot(*zip(*mc), "o", color=color, mfc="none",
                    label=f"{variant} (simulation)")
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel(_X_LABELS[spec.figure])
    label = "sum rate" if spec.y_metric == "sum_rate" else "minimum rate"
    ax.set_ylabel(f"{label} (bits/s/Hz)")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=150)
    plt.close(fig)
