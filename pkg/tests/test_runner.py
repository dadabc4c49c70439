import json

import pytest

from conftest import preset_config

from zenofrag.cli import main
from zenofrag.runner import run_experiment, sweep_tau
from zenofrag.units import FS_TO_AU


def quick_config(tmp_path, name="run", t_end_ps=0.4, plots=False, **extra):
    overrides = {
        "propagation": {"t_end_ps": t_end_ps},
        "output": {"directory": str(tmp_path / name), "stride": 40, "plots": plots},
    }
    overrides.update(extra)
    return preset_config("vp2_default", **overrides)


def test_run_experiment_writes_bundle(tmp_path):
    config = quick_config(tmp_path, plots=True)
    bundle = run_experiment(config)
    for name in ("survival", "populations", "rates", "spectral"):
        assert bundle.csv_paths[name].exists()
    assert bundle.manifest_path.exists()
    for name in ("survival", "populations", "spectral"):
        assert bundle.figure_paths[name].exists()
    assert (bundle.out_dir / "survival.gp").exists()
    manifest = json.loads(bundle.manifest_path.read_text())
    assert manifest["tool"] == "zenofrag"
    assert manifest["units"]["cm1_to_hartree"] == 4.5563352529e-6
    assert manifest["results"]["final_accounted_probability"] == pytest.approx(1.0, abs=1e-6)


def test_csv_schemas(tmp_path):
    bundle = run_experiment(quick_config(tmp_path))
    survival = bundle.csv_paths["survival"].read_text().splitlines()
    assert survival[0] == "t_fs,P"
    populations = bundle.csv_paths["populations"].read_text().splitlines()
    assert populations[0] == ("t_fs,live_v20,live_v19,absorbed_v20,absorbed_v19,"
                              "depleted_v20,depleted_v19")
    rates = bundle.csv_paths["rates"].read_text().splitlines()
    assert rates[0] == "tau_fs,gamma_cm1,lifetime_ps,rmse,model,seed,status"
    assert rates[1].split(",")[4] == "free"


def test_manifest_rerun_reproduces_csvs_bitwise(tmp_path):
    config = quick_config(tmp_path, "first")
    first = run_experiment(config)
    manifest_text = first.manifest_path.read_text()
    from zenofrag.config import parse_config

    again = parse_config(manifest_text).with_overrides(out_dir=str(tmp_path / "second"))
    second = run_experiment(again)
    for name in ("survival", "populations", "rates", "spectral"):
        assert first.csv_paths[name].read_bytes() == second.csv_paths[name].read_bytes()


def test_measured_run_records_seed(tmp_path):
    config = quick_config(tmp_path, "meas",
                          measurement={"kind": "depletion", "tau_fs": 5.0,
                                       "targets": ["v19"], "seed": 77})
    bundle = run_experiment(config)
    row = bundle.csv_paths["rates"].read_text().splitlines()[1].split(",")
    assert row[0] == "5.0"
    assert row[4] == "depletion"
    assert row[5] == "77"
    manifest = json.loads(bundle.manifest_path.read_text())
    assert manifest["seeds"]["measurement"] == 77


def test_sweep_empty_tau_list_gives_free_row_only(tmp_path):
    config = quick_config(tmp_path, "empty")
    result = sweep_tau(config, tau_list=[])
    lines = result.rates_path.read_text().splitlines()
    assert len(lines) == 2
    assert lines[1].split(",")[4] == "free"


def test_sweep_deduplicates_with_warning(tmp_path):
    config = quick_config(tmp_path, "dup")
    taus = [5 * FS_TO_AU, 5 * FS_TO_AU, 10 * FS_TO_AU]
    with pytest.warns(UserWarning, match="deduplicated"):
        result = sweep_tau(config, tau_list=taus)
    lines = result.rates_path.read_text().splitlines()
    assert len(lines) == 4  # header + free + two unique taus
    assert result.warnings


def test_sweep_serial_matches_parallel_bitwise(tmp_path):
    taus = [5 * FS_TO_AU, 10 * FS_TO_AU, 20 * FS_TO_AU]
    serial = sweep_tau(quick_config(tmp_path, "serial"), tau_list=taus, threads=1)
    parallel = sweep_tau(quick_config(tmp_path, "parallel"), tau_list=taus, threads=3)
    assert serial.rates_path.read_bytes() == parallel.rates_path.read_bytes()
    for sub in ("free", "tau_5fs", "tau_10fs", "tau_20fs"):
        a = (tmp_path / "serial" / sub / "survival.csv").read_bytes()
        b = (tmp_path / "parallel" / sub / "survival.csv").read_bytes()
        assert a == b


def test_sweep_rows_sorted_and_failures_marked(tmp_path):
    config = quick_config(tmp_path, "sorted")
    taus = [20 * FS_TO_AU, 5 * FS_TO_AU]
    result = sweep_tau(config, tau_list=taus)
    lines = result.rates_path.read_text().splitlines()[1:]
    tau_column = [line.split(",")[0] for line in lines]
    assert tau_column == ["", "5.0", "20.0"]
    assert all(line.split(",")[-1] == "ok" for line in lines)


def test_cli_run_and_validate(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "system": {"preset": "vp2_default"},
        "propagation": {"t_end_ps": 0.3},
        "output": {"directory": str(tmp_path / "out"), "stride": 40,
                   "plots": False},
    }))
    assert main(["validate", str(path)]) == 0
    assert "OK" in capsys.readouterr().out
    code = main(["run", str(path)])
    captured = capsys.readouterr()
    assert code in (0, 3)
    assert "outputs in" in captured.out
    assert (tmp_path / "out" / "manifest.json").exists()


def test_cli_scan(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "system": {"preset": "vp2_default"},
        "propagation": {"t_end_ps": 0.3},
        "output": {"directory": str(tmp_path / "scan"), "stride": 40,
                   "plots": False},
    }))
    code = main(["scan", str(path), "--tau", "5,10"])
    assert code in (0, 3)
    lines = (tmp_path / "scan" / "rates.csv").read_text().splitlines()
    assert len(lines) == 4


def test_cli_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"system": {"preset": "vp2_default"},
                                "grid": {"oops": 1}}))
    assert main(["validate", str(path)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_cli_presets(capsys):
    assert main(["presets"]) == 0
    out = capsys.readouterr().out
    for name in ("vp2_default", "vp2_paper_scale", "ep3_default"):
        assert name in out
    assert main(["presets", "--show", "vp2_default"]) == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown["system"]["kind"] == "vp_ladder"


def test_cli_seed_override(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "system": {"preset": "vp2_default"},
        "propagation": {"t_end_ps": 0.2},
        "measurement": {"kind": "randomization", "tau_fs": 5.0,
                        "targets": ["v19"], "seed": 1},
        "output": {"directory": str(tmp_path / "seeded"), "stride": 40,
                   "plots": False},
    }))
    assert main(["run", str(path), "--seed", "42"]) in (0, 3)
    manifest = json.loads((tmp_path / "seeded" / "manifest.json").read_text())
    assert manifest["seeds"]["measurement"] == 42
