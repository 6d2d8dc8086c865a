import json
import subprocess
import sys
from pathlib import Path

import pytest

from qite_mpemba.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

MODE_CONFIGS = {
    "evolve": "evolve.json",
    "crossing": "fig2a_crossing.json",
    "check-mpemba": "si_check.json",
    "certificate": "fig2b_certificate.json",
    "general-f": "fig2a_crossing.json",
    "estimate": "si_check.json",
    "max-accel": "max_accel.json",
    "collinear": "collinear.json",
}


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _run_json(mode, config, capsys, *extra):
    code = main([mode, "--config", config, "--format", "json", *extra])
    out = capsys.readouterr()
    assert code == 0, out.err
    return json.loads(out.out)


@pytest.mark.parametrize("mode", sorted(MODE_CONFIGS))
def test_every_mode_runs_on_sample_config(mode, capsys):
    payload = _run_json(mode, str(CONFIGS / MODE_CONFIGS[mode]), capsys)
    assert payload["mode"] == mode
    assert "summary" in payload and "config" in payload


def test_spin_chain_mode(tmp_path, capsys):
    cfg = json.loads((CONFIGS / "spin_chain.json").read_text())
    cfg["spin_chain"]["sites"] = 4
    payload = _run_json("spin-chain", _write(tmp_path, cfg), capsys)
    summary = payload["summary"]
    assert summary["ratio_hot"] < summary["ratio_cold"]
    assert set(payload["tables"]) == {"populations", "relaxation", "crossings"}


def test_check_mpemba_on_five_level_vectors(capsys):
    summary = _run_json("check-mpemba", str(CONFIGS / "si_check.json"), capsys)["summary"]
    assert summary["occurs"] is True
    assert summary["deciding_level"] == 1


def test_crossing_csv_has_header_and_rows(capsys):
    assert main(["crossing", "--config", str(CONFIGS / "fig2a_crossing.json")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "# qite-mpemba crossing"
    header = next(k for k, line in enumerate(lines) if not line.startswith("#"))
    assert lines[header] == "tau,value,status"
    tau = float(lines[header + 1].split(",")[0])
    assert tau == pytest.approx(2.5635, abs=1e-3)


def test_outputs_are_byte_identical(tmp_path):
    for fmt in ("csv", "json"):
        paths = [tmp_path / f"run{k}.{fmt}" for k in range(2)]
        for p in paths:
            assert main(["collinear", "--config", str(CONFIGS / "collinear.json"),
                         "--format", fmt, "--out", str(p)]) == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()


def test_json_output_reingests_as_config(tmp_path, capsys):
    first = _run_json("crossing", str(CONFIGS / "fig2a_crossing.json"), capsys)
    again = _run_json("crossing", _write(tmp_path, first["config"]), capsys)
    assert again == first


def test_missing_epsilon_names_the_field(tmp_path, capsys):
    cfg = json.loads((CONFIGS / "fig2b_certificate.json").read_text())
    del cfg["epsilon"]
    assert main(["certificate", "--config", _write(tmp_path, cfg)]) == 1
    assert "epsilon" in capsys.readouterr().err


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"hot": [0.5, 0.5]}, "hot"),
        ({"hot": [0.5, 0.6, -0.1]}, "hot"),
        ({"cold": [0.3, 0.3, 0.3]}, "cold"),
        ({"distance": "entropy"}, "distance"),
        ({"distance": "custom"}, "weights"),
        ({"tau_max": "long"}, "tau_max"),
        ({"grid": {"points": 10, "shape": 1}}, "grid"),
    ],
)
def test_config_errors_exit_one(tmp_path, capsys, patch, field):
    cfg = json.loads((CONFIGS / "fig2a_crossing.json").read_text())
    cfg.update(patch)
    assert main(["crossing", "--config", _write(tmp_path, cfg)]) == 1
    assert field in capsys.readouterr().err


def test_unreadable_config_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["crossing", "--config", str(bad)]) == 1
    assert main(["crossing", "--config", str(tmp_path / "missing.json")]) == 1
    assert main(["crossing"]) == 1
    assert "--config" in capsys.readouterr().err


def test_inapplicable_certificate_exits_two(tmp_path, capsys):
    cfg = json.loads((CONFIGS / "fig2b_certificate.json").read_text())
    cfg["hot"], cfg["cold"] = cfg["cold"], cfg["hot"]
    assert main(["certificate", "--config", _write(tmp_path, cfg)]) == 2
    assert "not applicable" in capsys.readouterr().err


def test_empty_crossing_list_is_success(tmp_path, capsys):
    cfg = json.loads((CONFIGS / "fig2a_crossing.json").read_text())
    cfg["tau_max"] = 1.0
    payload = _run_json("crossing", _write(tmp_path, cfg), capsys)
    assert payload["summary"]["crossing_count"] == 0
    assert payload["tables"]["crossings"]["rows"] == []


def test_flags_override_config(capsys):
    payload = _run_json("crossing", str(CONFIGS / "fig2a_crossing.json"), capsys,
                        "--tau-max", "1.5", "--distance", "infidelity")
    assert payload["config"]["tau_max"] == 1.5
    assert payload["config"]["distance"] == "infidelity"


def test_seed_is_recorded_in_header(capsys):
    assert main(["crossing", "--config", str(CONFIGS / "fig2a_crossing.json"), "--seed", "42"]) == 0
    assert "# seed = 42" in capsys.readouterr().out.splitlines()


def test_estimate_reports_numerical_crossing(capsys):
    summary = _run_json("estimate", str(CONFIGS / "fig2a_crossing.json"), capsys)["summary"]
    assert summary["case"] == "I" and summary["level"] == 1
    assert summary["numerical_crossings"][0] == pytest.approx(2.5635, abs=1e-3)


def test_estimate_warning_goes_to_notes_and_stderr(tmp_path, capsys):
    cfg = {"energies": [0.0, 0.2, 0.3], "hot": [0.4, 0.1, 0.5], "cold": [0.3, 0.5, 0.2]}
    code = main(["estimate", "--config", _write(tmp_path, cfg), "--format", "json"])
    out = capsys.readouterr()
    assert code == 0
    assert "warning" in out.err
    assert any(n.startswith("warning:") for n in json.loads(out.out)["notes"])


def test_estimate_early_time_exits_two(tmp_path, capsys):
    cfg = {"energies": [0.0, 0.2, 0.3], "hot": [0.3, 0.05, 0.65], "cold": [0.1, 0.85, 0.05]}
    assert main(["estimate", "--config", _write(tmp_path, cfg)]) == 2
    assert "early-time" in capsys.readouterr().err


@pytest.mark.parametrize("name", ["fig2a", "fig2b", "fig2c"])
def test_presets_write_tables(tmp_path, name):
    out = tmp_path / name
    assert main(["preset", name, "--out", str(out)]) == 0
    files = sorted(p.name for p in out.iterdir())
    assert "distances.csv" in files
    head = (out / "distances.csv").read_text().splitlines()
    assert head[0] == f"# qite-mpemba preset {name}"
    assert any(line.startswith("# levels (0, 0.2, 0.3)") for line in head)


def test_preset_fig2a_crossings(capsys):
    assert main(["preset", "fig2a", "--format", "json"]) == 0
    summary = json.loads(capsys.readouterr().out)["summary"]
    assert summary["B'-A"][0] == pytest.approx(2.5635, abs=1e-3)
    assert summary["B''-A"][0] == pytest.approx(32.907, abs=1e-2)


def test_unknown_preset_exits_one(capsys):
    assert main(["preset", "fig9"]) == 1
    assert main(["preset"]) == 1
    assert "preset" in capsys.readouterr().err


def test_thread_cap_does_not_change_output(tmp_path, monkeypatch):
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("QITE_MPEMBA_THREADS", threads)
        path = tmp_path / f"t{threads}.json"
        assert main(["preset", "fig2c", "--format", "json", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    monkeypatch.setenv("QITE_MPEMBA_THREADS", "zero")
    assert main(["preset", "fig2c", "--format", "json", "--out", str(tmp_path / "x.json")]) == 1


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "qite_mpemba", "check-mpemba", "--config", str(CONFIGS / "si_check.json")],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["summary"]["occurs"] is True
