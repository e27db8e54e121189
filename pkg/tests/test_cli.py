import json
import subprocess
import sys

import numpy as np
import pytest

from parafrf import FrfDataset, default_boom_plant, default_load_levels, write_dataset
from parafrf.cli import run

SMALL = {
    "format_version": 1,
    "loads": [0.001, 0.003, 0.006, 0.009],
    "acquisition": {"sample_rate_hz": 64, "block_duration_s": 16, "n_blocks": 3,
                    "chirp_f1_hz": 30, "max_freq_hz": 30},
    "smoothing": {"sigma_bins": None},
    "decimate": {"factor": 1},
    "vf": {"order": 10},
    "test": {"shape": "sine", "freq_hz": 10},
}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(SMALL))
    return path


def pipeline(cfg, out):
    out = str(out)
    c = ["--config", str(cfg), "--out", out]
    steps = [
        ["synth", *c],
        ["frf", *c, "--manifest", f"{out}/synth_manifest.json"],
        ["fit-vf", *c, "--dataset", f"{out}/frf_dataset.csv"],
        ["fit-paaa", *c, "--dataset", f"{out}/frf_dataset.csv"],
        ["xval", *c, "--manifest", f"{out}/synth_manifest.json", "--vf", f"{out}/vf_models.json",
         "--paaa", f"{out}/paaa_model.json"],
        ["report", *c, "--xval", f"{out}/xval.json"],
        ["invert", *c, "--paaa", f"{out}/paaa_model.json", "--param", "0.003",
         "--velocity", f"{out}/records/test_01_velocity.csv"],
    ]
    for argv in steps:
        assert run(argv) == 0, argv


def snapshot(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_full_pipeline_outputs(config, tmp_path):
    out = tmp_path / "run"
    pipeline(config, out)
    files = snapshot(out)
    for name in ("plant.json", "exact_dataset.csv", "synth_manifest.json", "frf_dataset.csv",
                 "vf_models.json", "paaa_model.json", "xval.csv", "xval.json", "report.md",
                 "report.csv", "force_estimate.csv"):
        assert name in files
    digest = json.loads(files["paaa_model.json"])["provenance"]["config_digest"]
    for name in ("frf_dataset.csv", "xval.csv", "force_estimate.csv"):
        assert files[name].decode().startswith("# config_digest=" + digest)
    assert digest in files["report.md"].decode()
    manifest = json.loads(files["synth_manifest.json"])
    assert manifest["config"]["loads"] == SMALL["loads"]
    assert not list(out.rglob("*.tmp*"))


def test_byte_identical_reruns(config, tmp_path):
    pipeline(config, tmp_path / "a")
    pipeline(config, tmp_path / "b")
    assert snapshot(tmp_path / "a") == snapshot(tmp_path / "b")


def test_inputs_not_mutated(config, tmp_path):
    out = tmp_path / "run"
    pipeline(config, out)
    before = snapshot(out)
    c = ["--config", str(config), "--out", str(out)]
    assert run(["fit-vf", *c, "--dataset", str(out / "frf_dataset.csv")]) == 0
    after = snapshot(out)
    assert after["frf_dataset.csv"] == before["frf_dataset.csv"]
    assert after["vf_models.json"] == before["vf_models.json"]


def test_fit_paaa_on_exact_plant_data(tmp_path):
    plant, loads = default_boom_plant(), default_load_levels()
    f = np.arange(1, 1601) * 0.0625
    ds = FrfDataset(f, loads, np.column_stack([plant.response(f, p) for p in loads]))
    write_dataset(tmp_path / "exact.csv", ds)
    assert run(["fit-paaa", "--dataset", str(tmp_path / "exact.csv"), "--tol", "1e-8",
                "--out", str(tmp_path)]) == 0
    model = json.loads((tmp_path / "paaa_model.json").read_text())
    l, q = model["orders"]
    assert l <= 12 and q <= 6
    assert model["tolerance_achieved"] <= 1e-8
    assert model["training_digest"] == ds.digest()


def test_xval_single_matching_pair(tmp_path):
    cfg = dict(SMALL, loads=[0.004])
    path = tmp_path / "one.json"
    path.write_text(json.dumps(cfg))
    c = ["--config", str(path), "--out", str(tmp_path)]
    assert run(["synth", *c]) == 0
    assert run(["xval", *c, "--manifest", str(tmp_path / "synth_manifest.json"), "--plant-models"]) == 0
    rows = [r for r in (tmp_path / "xval.csv").read_text().splitlines() if not r.startswith("#")]
    assert len(rows) == 2
    assert float(rows[1].split(",")[2]) < 1e-9


def test_env_output_dir(config, tmp_path, monkeypatch):
    monkeypatch.setenv("PARAFRF_OUT", str(tmp_path / "env"))
    assert run(["synth", "--config", str(config)]) == 0
    assert (tmp_path / "env" / "plant.json").is_file()


def test_unknown_subcommand(tmp_path, capsys):
    assert run(["bogus", "--out", str(tmp_path / "x")]) == 2
    assert not (tmp_path / "x").exists()
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("parafrf: error: usage:")


def test_missing_input_file(tmp_path, capsys):
    assert run(["fit-vf", "--dataset", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2
    assert "input file not found" in capsys.readouterr().err
    assert list(tmp_path.iterdir()) == []


def test_config_violation(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"format_version": 1, "decimate": {"factor": 0}}))
    assert run(["synth", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "decimate.factor" in err[0]
    assert not (tmp_path / "o").exists()


def test_module_error_exit_code(tmp_path, capsys):
    # an all-zero FRF column cannot be fitted: rank deficiency inside Vector Fitting
    ds = FrfDataset(np.arange(1.0, 41.0), [0.001, 0.002], np.zeros((40, 2)))
    write_dataset(tmp_path / "zero.csv", ds)
    code = run(["fit-vf", "--dataset", str(tmp_path / "zero.csv"), "--out", str(tmp_path)])
    assert code == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "RankDeficiencyError" in err[0]


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "parafrf.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("parafrf ")
