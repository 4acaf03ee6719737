import csv
import json

import pytest

from esbgk.cli import csv_columns, main


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


EQUILIBRIUM = {
    "params": {"d": 1, "delta": 2, "nu": 0.3, "theta": 0.5},
    "initial": {"family": "maxwellian01", "T": 1.0},
    "solver": {"dt": 0.01, "t_end": 0.1, "report_every": 5},
    "outputs": {"snapshots": "final"},
}


def test_csv_column_order():
    assert csv_columns(2) == ["t", "rho", "U_1", "U_2", "T_tr", "T_int", "T_delta", "H_f",
                              "D", "A", "rel_H_target", "theorem_gap", "l1_to_target",
                              "kullback_bound", "mass_drift", "mom_drift", "energy_drift"]


def test_run_equilibrium(tmp_path, monkeypatch):
    out = tmp_path / "out"
    monkeypatch.setenv("ESBGK_OUTPUT_DIR", str(out))
    assert main(["run", str(write(tmp_path, "eq.json", EQUILIBRIUM))]) == 0
    rows = list(csv.DictReader((out / "trajectory.csv").open()))
    assert len(rows) == 3
    assert all(abs(float(r["D"])) < 1e-8 for r in rows)
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] and report["decay"]["regime"] == "theta_pos"
    assert (out / "snapshots" / "final.snap").exists()


def test_same_seed_gives_identical_csv(tmp_path, monkeypatch):
    sc = dict(EQUILIBRIUM, initial={"family": "random_mixture", "k": 3}, seed=4)
    path = write(tmp_path, "mix.json", sc)
    outs = []
    for i in range(2):
        out = tmp_path / f"out{i}"
        monkeypatch.setenv("ESBGK_OUTPUT_DIR", str(out))
        assert main(["run", str(path)]) == 0
        outs.append((out / "trajectory.csv").read_bytes())
    assert outs[0] == outs[1]
    main(["snapshot-diff", str(tmp_path / "out0/snapshots/final.snap"),
          str(tmp_path / "out1/snapshots/final.snap")])


def test_validation_error_exit_code(tmp_path, capsys):
    bad = dict(EQUILIBRIUM, params={"d": 3, "delta": 2, "nu": 1.2, "theta": 0.5})
    assert main(["run", str(write(tmp_path, "bad.json", bad))]) == 2
    assert "params.nu" in capsys.readouterr().err


def test_certify_command(capsys):
    assert main(["certify", "--regime", "theta_zero", "--samples", "20", "--seed", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["failures"] == 0 and out["n_samples"] == 20


def test_refine_command(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ESBGK_OUTPUT_DIR", str(tmp_path / "out"))
    assert main(["refine", str(write(tmp_path, "eq.json", EQUILIBRIUM))]) == 0
    res = json.loads((tmp_path / "out" / "refine.json").read_text())
    assert all(3.2 <= r <= 4.8 for r in res["ratios"].values())


def test_transport_run(tmp_path, monkeypatch):
    sc = {
        "params": {"d": 1, "delta": 2, "nu": 0.3, "theta": 0.5},
        "grid": {"n_v": 32, "L_v": 6.0, "n_I": 32, "I_max": 28.0},
        "initial": {"family": "maxwellian01", "T": 1.0, "x_amplitude": 0.3},
        "solver": {"dt": 0.005, "t_end": 0.05, "report_every": 5,
                   "transport": {"n_x": 8, "dx": 0.1}},
    }
    monkeypatch.setenv("ESBGK_OUTPUT_DIR", str(tmp_path / "out"))
    assert main(["run", str(write(tmp_path, "tr.json", sc))]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["max_mass_drift"] < 1e-10


def test_snapshot_diff_detects_difference(tmp_path, monkeypatch):
    paths = []
    for i, T in enumerate((1.0, 1.1)):
        sc = dict(EQUILIBRIUM, initial={"family": "maxwellian01", "T": T},
                  grid={"n_v": 32, "L_v": 6.0, "n_I": 32, "I_max": 28.0})
        monkeypatch.setenv("ESBGK_OUTPUT_DIR", str(tmp_path / f"o{i}"))
        main(["run", str(write(tmp_path, f"s{i}.json", sc))])
        paths.append(str(tmp_path / f"o{i}" / "snapshots" / "final.snap"))
    assert main(["snapshot-diff", *paths]) == 1
    assert main(["snapshot-diff", paths[0], paths[0]]) == 0
