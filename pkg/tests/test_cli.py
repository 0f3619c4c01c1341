"""End-to-end CLI tests: deterministic outputs, exit codes, and scenario
validation errors."""
import json

import pytest

from procure.cli import main, read_schedule_csv
from procure.scenario import load_scenario

TINY_YAML = """\
description: tiny two-type instance
weather: {{kind: weibull, shape: 3.0, mean: 5.0, n_points: 50}}
cost_model: {{kind: simple}}
types:
  - {{id: lo, params: {{c0: 2, theta_c: 1.0, gamma: 2}}}}
  - {{id: hi, params: {{c0: 3, theta_c: 1.4, gamma: 1}}}}
buyer:
  marginal_utility: {{kind: affine, intercept: 0.9, slope: 4.0e-3}}
grid: {{q_max: 120, n_cells: 6}}
{extra}
"""


def _read_all(out_dir):
    return {p.name: p.read_bytes() for p in sorted(out_dir.iterdir())}


def test_solve_writes_expected_files(scenario_dir, tmp_path):
    out = tmp_path / "out"
    rc = main(["solve", str(scenario_dir / "six_types.yaml"), "--out", str(out)])
    assert rc == 0
    names = {p.name for p in out.iterdir()}
    # six_types sets alpha, so the settlement table is included
    assert names == {"schedule.csv", "outcome.csv", "settlement.csv", "run_manifest.json"}
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["grid"]["n_cells"] == 2000
    assert manifest["admissible"] == ["a", "b", "c", "d", "e", "f"]
    assert manifest["buyer_utility"] > 0.0


def test_solve_is_byte_identical_across_runs(scenario_dir, tmp_path):
    outs = []
    for name in ("run1", "run2"):
        out = tmp_path / name
        assert main(["solve", str(scenario_dir / "six_types.yaml"), "--out", str(out)]) == 0
        outs.append(_read_all(out))
    assert outs[0] == outs[1]


def test_schedule_csv_roundtrip(scenario_dir, tmp_path):
    out = tmp_path / "out"
    path = scenario_dir / "simple_worst.yaml"
    assert main(["solve", str(path), "--out", str(out)]) == 0
    sc = load_scenario(path)
    schedule = read_schedule_csv(out / "schedule.csv", sc.grid)
    assert schedule.grid.n_cells == sc.grid.n_cells
    assert schedule.t0 == pytest.approx(4.0, abs=1e-9)
    assert schedule.n_open > 0


def test_verify_exit_codes(scenario_dir):
    assert main(["verify", str(scenario_dir / "six_types.yaml")]) == 0
    assert main(["verify", str(scenario_dir / "simple_worst.yaml")]) == 0
    assert main(["verify", str(scenario_dir / "tiny_oracle.yaml")]) == 0


def test_verify_fails_on_corrupted_scenario(scenario_dir, capsys):
    rc = main(["verify", str(scenario_dir / "six_types_corrupted.yaml")])
    assert rc == 1
    text = capsys.readouterr().out
    assert "FAIL" in text


def test_plotdata_outputs(scenario_dir, tmp_path):
    out = tmp_path / "plot"
    rc = main(["plotdata", str(scenario_dir / "six_types.yaml"), "--out", str(out)])
    assert rc == 0
    series = (out / "price_series.csv").read_text()
    header, first = series.splitlines()[:2]
    assert header == "q_MWh,p_k$_per_MWh,t_k$"
    assert len(series.splitlines()) > 50
    markers = (out / "type_markers.csv").read_text().splitlines()
    assert markers[0] == "type_id,q_MWh,t_k$"
    assert len(markers) == 7


def test_solve_grid_cells_override(scenario_dir, tmp_path):
    out = tmp_path / "out"
    rc = main(
        [
            "solve",
            str(scenario_dir / "six_types.yaml"),
            "--out",
            str(out),
            "--grid-cells",
            "500",
        ]
    )
    assert rc == 0
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["grid"]["n_cells"] == 500


def test_solve_admissible_subset(scenario_dir, tmp_path):
    out = tmp_path / "out"
    rc = main(
        [
            "solve",
            str(scenario_dir / "six_types.yaml"),
            "--out",
            str(out),
            "--admissible",
            "a,b,c",
        ]
    )
    assert rc == 0
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["admissible"] == ["a", "b", "c"]


def test_solve_alpha_override_adds_settlement(scenario_dir, tmp_path):
    out = tmp_path / "out"
    rc = main(
        [
            "solve",
            str(scenario_dir / "simple_worst.yaml"),
            "--out",
            str(out),
            "--alpha",
            "0.25",
        ]
    )
    assert rc == 0
    assert (out / "settlement.csv").exists()


def test_exclusion_search_command(scenario_dir, tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(
        ["exclusion-search", str(scenario_dir / "tiny_oracle.yaml"), "--out", str(out)]
    )
    assert rc == 0
    text = capsys.readouterr().out
    assert "best admissible set" in text
    assert (out / "outcome.csv").exists()


@pytest.mark.parametrize(
    "mutation, fragment",
    [
        ("prior: -0.5", "negative prior"),
        ("REMOVE_BUYER", "missing required field 'buyer'"),
        ("unknown_top: 1", "unknown fields"),
        ("options: {alpha: 1.5}", "outside [0, 1]"),
        ("options: {corruption: nonsense}", "unknown corruption"),
    ],
)
def test_bad_scenarios_exit_2_with_message(tmp_path, capsys, mutation, fragment):
    if mutation == "REMOVE_BUYER":
        text = TINY_YAML.format(extra="")
        text = "\n".join(
            line
            for line in text.splitlines()
            if "buyer" not in line and "marginal_utility" not in line
        )
    elif mutation.startswith("prior:"):
        text = TINY_YAML.format(extra="")
        text = text.replace(
            "{id: lo, params:", "{" + mutation + ", id: lo, params:"
        ).replace("{id: hi, params:", "{prior: 0.5, id: hi, params:")
    else:
        text = TINY_YAML.format(extra=mutation)
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    rc = main(["solve", str(path), "--out", str(tmp_path / "out")])
    assert rc == 2
    err = capsys.readouterr().err
    assert fragment in err


def test_missing_scenario_file_exits_2(tmp_path, capsys):
    rc = main(["solve", str(tmp_path / "nope.yaml"), "--out", str(tmp_path / "out")])
    assert rc == 2
