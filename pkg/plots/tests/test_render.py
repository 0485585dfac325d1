import hashlib
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from riscf_plots import PlotSpec, SchemaError, render
from riscf_plots.cli import main as cli_main

RATE_HEADER = ("figure,sweep_value,variant,source,sum_rate,min_rate,"
               "rate_u0,rate_u1,mc_half_width\n")
TERM_HEADER = "figure,sweep_value,user,term,value,source,mc_half_width\n"


def rate_csv(tmp_path, name="rates.csv"):
    path = tmp_path / name
    lines = [RATE_HEADER]
    for value in (4, 16):
        for variant in ("optimized-sum", "ris-free"):
            for source in ("closed_form", "monte_carlo"):
                s = 3.0 + value * 0.01 + (variant == "optimized-sum") * 0.4
                lines.append(
                    f"rate_vs_R,{value},{variant},{source},{s},{s / 3},"
                    f"{s / 2},{s / 2},\n")
    path.write_text("".join(lines))
    return path


def term_csv(tmp_path):
    path = tmp_path / "terms.csv"
    lines = [TERM_HEADER]
    for value in (4, 16):
        for term in ("signal", "interference", "hwi", "noise"):
            for source in ("closed_form", "monte_carlo"):
                lines.append(f"terms_vs_R,{value},0,{term},{1.0 + value},{source},\n")
    path.write_text("".join(lines))
    return path


def test_render_rate_figure(tmp_path):
    csv_path = rate_csv(tmp_path)
    out = tmp_path / "fig.png"
    render(PlotSpec(csv=str(csv_path), figure="rate_vs_R", out=str(out)))
    assert out.exists() and out.stat().st_size > 0


def test_render_terms_figure(tmp_path):
    out = tmp_path / "terms.png"
    render(PlotSpec(csv=str(term_csv(tmp_path)), figure="terms_vs_R",
                    out=str(out)))
    assert out.exists() and out.stat().st_size > 0


def test_missing_column_names_it(tmp_path):
    path = tmp_path / "broken.csv"
    path.write_text("figure,sweep_value,variant,sum_rate\nx,1,a,2\n")
    with pytest.raises(SchemaError) as err:
        render(PlotSpec(csv=str(path), figure="rate_vs_R",
                        out=str(tmp_path / "x.png")))
    assert "source" in str(err.value)
    assert not (tmp_path / "x.png").exists()


def test_empty_body_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text(RATE_HEADER)
    with pytest.raises(SchemaError):
        render(PlotSpec(csv=str(path), figure="rate_vs_R",
                        out=str(tmp_path / "y.png")))
    assert not (tmp_path / "y.png").exists()


def test_unknown_figure_kind(tmp_path):
    with pytest.raises(SchemaError):
        PlotSpec(csv="x.csv", figure="bogus", out="y.png")


def test_input_unmodified(tmp_path):
    csv_path = rate_csv(tmp_path)
    before = hashlib.sha256(csv_path.read_bytes()).hexdigest()
    render(PlotSpec(csv=str(csv_path), figure="rate_vs_R",
                    out=str(tmp_path / "fig.png")))
    assert hashlib.sha256(csv_path.read_bytes()).hexdigest() == before


def test_cli_roundtrip(tmp_path):
    csv_path = rate_csv(tmp_path)
    out = tmp_path / "cli.png"
    assert cli_main(["render", "--csv", str(csv_path), "--figure", "rate_vs_R",
                     "--out", str(out)]) == 0
    assert out.exists()
    assert cli_main(["render", "--csv", str(tmp_path / "nope.csv"),
                     "--figure", "rate_vs_R", "--out", str(out)]) == 1


@pytest.mark.skipif(shutil.which("riscf") is None,
                    reason="primary CLI not installed")
def test_end_to_end_from_primary_cli(tmp_path):
    """Drive the primary package through its CLI only, then render every
    figure kind it produced."""
    spec = {
        "figure": "rate_vs_R", "grid": [4, 16],
        "variants": ["random-phase", "ris-free"],
        "seed": 1, "mc_trials": 1000, "random_draws": 5,
        "scenario": {"L": 2, "S": 2, "K": 2, "B": 4, "R": 4},
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    run = subprocess.run(
        ["riscf", "simulate", "--spec", str(spec_path), "--out", str(tmp_path)],
        capture_output=True, text=True)
    assert run.returncode == 0, run.stderr
    out = tmp_path / "rate_vs_R.png"
    render(PlotSpec(csv=str(tmp_path / "rate_vs_R.csv"),
                    figure="rate_vs_R", out=str(out)))
    assert out.exists() and out.stat().st_size > 0
