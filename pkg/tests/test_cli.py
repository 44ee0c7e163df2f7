import json
from pathlib import Path

import numpy as np
import pytest

from coulombkit.cli import main

from conftest import BENCH_CHARGES_UC

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def write_scenario(tmp_path, doc, name="scenario.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def two_craft_doc(force):
    return {
        "formation": {"dimension": 2, "positions": [[0.0, 0.0], [10.0, 0.0]]},
        "command": {"relative_force": force},
    }


def parse_csv(text):
    lines = [ln for ln in text.strip().splitlines() if ln]
    header = lines[0].split(",")
    rows = [[float(tok) for tok in ln.split(",")] for ln in lines[1:]]
    return header, rows


def test_allocate_four_craft(capsys):
    assert main(["allocate", str(SCENARIOS / "four_craft.json")]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert 79.0 <= payload["reduction_percent"] <= 85.0
    assert payload["chosen_epsilon"] == pytest.approx(0.05)
    charges = np.array(payload["charges_microcoulomb"])
    err = np.minimum(
        np.abs(charges - BENCH_CHARGES_UC), np.abs(charges + BENCH_CHARGES_UC)
    )
    assert np.all(err <= 0.02 * np.abs(BENCH_CHARGES_UC))
    assert not payload["all_epsilon_failed"]


def test_allocate_zero_command(tmp_path, capsys):
    path = write_scenario(tmp_path, two_craft_doc([0.0, 0.0]))
    assert main(["allocate", path]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["reduction_percent"] is None
    assert payload["percent_error"] is None
    assert np.allclose(payload["charges_microcoulomb"], 0.0)


def test_allocate_perpendicular_command_falls_back(tmp_path, capsys):
    path = write_scenario(tmp_path, two_craft_doc([0.0, 0.01]))
    assert main(["allocate", path]) == 3
    payload = json.loads(capsys.readouterr().out)
    assert payload["all_epsilon_failed"]
    assert np.allclose(payload["charges_microcoulomb"], 0.0, atol=1e-9)


def test_malformed_json_reports_line(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "formation": [,]\n}')
    assert main(["allocate", str(path)]) == 2
    err = capsys.readouterr().err
    assert "line 2" in err


def test_bad_dimension_rejected(tmp_path, capsys):
    doc = two_craft_doc([0.0, 0.01])
    doc["formation"]["dimension"] = 4
    path = write_scenario(tmp_path, doc)
    assert main(["allocate", path]) == 2
    assert "dimension" in capsys.readouterr().err


def test_mismatched_force_length_rejected(tmp_path, capsys):
    path = write_scenario(tmp_path, two_craft_doc([0.0, 0.01, 0.3]))
    assert main(["allocate", path]) == 2
    assert "relative_force" in capsys.readouterr().err


def test_sweep_columns_and_rank_profile(capsys):
    assert main(["sweep", str(SCENARIOS / "four_craft.json")]) == 0
    header, rows = parse_csv(capsys.readouterr().out)
    assert header == [
        "epsilon", "residual", "trace", "eig1", "eig2", "eig3", "eig4",
        "percent_error", "thrust_norm",
    ]
    assert len(rows) == 25
    by_eps = {row[0]: row for row in rows}
    row_010 = by_eps[0.1]
    eigs = np.array(row_010[3:7])
    assert np.sum(eigs > 1e-4 * eigs[-1]) == 1  # rank one at 0.10
    fits = [row[7] for row in rows]
    assert np.argmin(fits) == 0  # best fit at the 0.05 end of the grid


def test_sweep_near_boundary_trace(capsys):
    assert (
        main(["sweep", str(SCENARIOS / "four_craft.json"),
              "--epsilon-list", "0.05,0.2968"]) == 0
    )
    _, rows = parse_csv(capsys.readouterr().out)
    trace_mid, trace_edge = rows[0][2], rows[1][2]
    assert trace_edge < 0.1
    assert trace_edge < 5e-3 * trace_mid


def test_sweep_epsilon_count_flag(capsys):
    assert (
        main(["sweep", str(SCENARIOS / "four_craft.json"), "--epsilon-count", "7"]) == 0
    )
    _, rows = parse_csv(capsys.readouterr().out)
    assert len(rows) == 7


def test_sweep_deterministic(capsys):
    argv = ["sweep", str(SCENARIOS / "four_craft.json")]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_dump_normalized_round_trip(tmp_path, capsys):
    assert main(["allocate", str(SCENARIOS / "four_craft.json"),
                 "--dump-normalized"]) == 0
    dumped = capsys.readouterr().out
    path = tmp_path / "normalized.json"
    path.write_text(dumped)
    assert main(["allocate", str(path), "--dump-normalized"]) == 0
    assert capsys.readouterr().out == dumped


def test_simulate_single_step(tmp_path, capsys):
    doc = json.loads((SCENARIOS / "three_craft_reconfig.json").read_text())
    doc["maneuver"]["t_final"] = 0.1
    path = write_scenario(tmp_path, doc)
    out_dir = tmp_path / "out"
    assert main(["simulate", path, "--out", str(out_dir)]) == 0
    trajectory = (out_dir / "trajectory.csv").read_text()
    header, rows = parse_csv(trajectory)
    assert len(rows) == 1
    assert header[0] == "t"
    assert "q1_microC" in header and "percent_error" in header
    assert header[-1] == "propellant_cum"
    summary = json.loads((out_dir / "summary.json").read_text())
    assert set(summary) == {
        "avg_percent_error",
        "propellant_used",
        "propellant_thruster_only",
        "reduction_percent",
    }
    stdout_summary = json.loads(capsys.readouterr().out)
    assert stdout_summary == summary


def test_simulate_epsilon_flags(tmp_path, capsys):
    doc = json.loads((SCENARIOS / "three_craft_reconfig.json").read_text())
    doc["maneuver"]["t_final"] = 0.2
    path = write_scenario(tmp_path, doc)
    out_dir = tmp_path / "out"
    assert main(["simulate", path, "--out", str(out_dir),
                 "--epsilon-count", "5"]) == 0
    capsys.readouterr()
    assert main(["simulate", path, "--out", str(out_dir),
                 "--epsilon-list", "3.0,5.0"]) == 0
    _, rows = parse_csv((out_dir / "trajectory.csv").read_text())
    assert len(rows) == 2


def test_simulate_propellant_column_matches_summary(tmp_path, capsys):
    doc = json.loads((SCENARIOS / "three_craft_reconfig.json").read_text())
    doc["maneuver"]["t_final"] = 0.5
    path = write_scenario(tmp_path, doc)
    out_dir = tmp_path / "out"
    assert main(["simulate", path, "--out", str(out_dir)]) == 0
    capsys.readouterr()
    header, rows = parse_csv((out_dir / "trajectory.csv").read_text())
    summary = json.loads((out_dir / "summary.json").read_text())
    cum = rows[-1][header.index("propellant_cum")]
    assert cum == pytest.approx(summary["propellant_used"], rel=1e-8)


def test_simulate_deterministic(tmp_path, capsys):
    doc = json.loads((SCENARIOS / "three_craft_reconfig.json").read_text())
    doc["maneuver"]["t_final"] = 0.2
    path = write_scenario(tmp_path, doc)
    outputs = []
    for name in ("a", "b"):
        out_dir = tmp_path / name
        assert main(["simulate", path, "--out", str(out_dir)]) == 0
        capsys.readouterr()
        outputs.append(
            (out_dir / "trajectory.csv").read_text()
            + (out_dir / "summary.json").read_text()
        )
    assert outputs[0] == outputs[1]


def test_simulate_requires_maneuver(tmp_path, capsys):
    path = write_scenario(tmp_path, two_craft_doc([0.01, 0.0]))
    assert main(["simulate", path, "--out", str(tmp_path / "o")]) == 2
    assert "maneuver" in capsys.readouterr().err


def test_sweep_requires_command(tmp_path, capsys):
    doc = {"formation": {"dimension": 2, "positions": [[0.0, 0.0], [10.0, 0.0]]}}
    path = write_scenario(tmp_path, doc)
    assert main(["sweep", path]) == 2
    assert "command" in capsys.readouterr().err


def test_bad_epsilon_list_rejected(tmp_path, capsys):
    path = write_scenario(tmp_path, two_craft_doc([0.01, 0.0]))
    assert main(["allocate", path, "--epsilon-list", "0.1,zzz"]) == 2
    assert "--epsilon-list" in capsys.readouterr().err
