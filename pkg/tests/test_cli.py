"""Command-line interface tests: subcommands, outputs, exit codes."""

from __future__ import annotations

import json

import numpy as np
import pytest
from PIL import Image

import synth
from copymove.cli import main
from copymove.raster import Raster, save_png


@pytest.fixture(scope="module")
def forged_png(tmp_path_factory):
    rng = np.random.default_rng(900)
    img = synth.pristine_image(rng, 320, 320).copy()
    img[192:288, 192:288] = img[32:128, 32:128]
    path = tmp_path_factory.mktemp("images") / "forged.png"
    save_png(Raster(img), path)
    return path


@pytest.fixture()
def flat_png(tmp_path):
    path = tmp_path / "flat.png"
    save_png(Raster(np.full((64, 64, 1), 0.5)), path)
    return path


# --------------------------------------------------------------- threshold


def test_threshold_defaults_reproduce_published_setup(capsys):
    assert main(["threshold"]) == 0
    out = capsys.readouterr().out
    tau = float(out.split("tau = ")[1].splitlines()[0])
    assert 2.7 <= tau <= 3.2
    assert "n_tests = 122500" in out
    assert "per-cell" in out


def test_threshold_json_output(capsys):
    assert main(["threshold", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert 2.7 <= doc["tau"] <= 3.2
    assert doc["exponent"] == 48
    assert doc["effective_exponent"] == 48
    assert doc["n_tests"] == 122500
    assert doc["false_match_probability"] == pytest.approx(1 / 122500, rel=1e-9)


def test_threshold_sigma_scaling_exact(capsys):
    main(["threshold", "--json"])
    tau1 = json.loads(capsys.readouterr().out)["tau"]
    main(["threshold", "--sigma", "2", "--json"])
    tau2 = json.loads(capsys.readouterr().out)["tau"]
    assert tau2 == 4.0 * tau1


def test_threshold_scalar_mode(capsys):
    main(["threshold", "--mode", "scalar", "--json"])
    doc = json.loads(capsys.readouterr().out)
    assert doc["mode"] == "per-scalar"
    assert doc["effective_exponent"] == 96


def test_threshold_rejects_zero_epsilon(capsys):
    assert main(["threshold", "--epsilon", "0"]) == 2
    assert "epsilon must be positive" in capsys.readouterr().err


# ------------------------------------------------------------------ detect


def test_detect_forged_image(forged_png, tmp_path, capsys):
    json_out = tmp_path / "report.json"
    overlay = tmp_path / "overlay.png"
    code = main(
        ["detect", str(forged_png), "--sigma", "1.0",
         "--json", str(json_out), "--overlay", str(overlay)]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "verdict: forged" in out
    doc = json.loads(json_out.read_text())
    assert doc["schema"] == 1
    assert doc["verdict"] == "forged"
    assert doc["matches"]
    assert doc["image"] == str(forged_png)
    with Image.open(overlay) as img:
        assert img.size == (320, 320)
    overlay_px = np.asarray(Image.open(overlay))
    source_px = np.asarray(Image.open(forged_png))
    assert (overlay_px != source_px).any()


def test_detect_flat_image_is_pristine_and_exit_zero(flat_png, capsys):
    assert main(["detect", str(flat_png)]) == 0
    assert "verdict: pristine" in capsys.readouterr().out


def test_detect_json_deterministic_modulo_timing(forged_png, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["detect", str(forged_png), "--json", str(a)])
    main(["detect", str(forged_png), "--json", str(b)])
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    da.pop("elapsed_ms"), db.pop("elapsed_ms")
    assert da == db


def test_detect_missing_file_exits_3(tmp_path, capsys):
    assert main(["detect", str(tmp_path / "absent.png")]) == 3
    assert "i/o error" in capsys.readouterr().err


def test_detect_bad_cli_value_exits_2(flat_png, capsys):
    assert main(["detect", str(flat_png), "--sigma", "-4"]) == 2
    assert "sigma" in capsys.readouterr().err


def test_detect_config_file_applies(flat_png, tmp_path, capsys):
    cfg = tmp_path / "d.cfg"
    cfg.write_text("acontrario.epsilon = 0.5\ndescriptor.n = 8\n", encoding="utf-8")
    json_out = tmp_path / "r.json"
    assert main(["detect", str(flat_png), "--config", str(cfg), "--json", str(json_out)]) == 0
    doc = json.loads(json_out.read_text())
    assert doc["descriptor"]["n"] == 8

    bad = tmp_path / "bad.cfg"
    bad.write_text("acontrario.nope = 1\n", encoding="utf-8")
    assert main(["detect", str(flat_png), "--config", str(bad)]) == 2
    assert "unknown configuration key" in capsys.readouterr().err


def test_cli_usage_error_exits_2(capsys):
    assert main([]) == 2
    assert main(["frobnicate"]) == 2


# ---------------------------------------------------------------- evaluate


def test_evaluate_dataset_cli(tmp_path, capsys):
    root = tmp_path / "data"
    (root / "forged").mkdir(parents=True)
    (root / "pristine").mkdir(parents=True)
    rng = np.random.default_rng(901)
    img = synth.pristine_image(rng, 320, 320).copy()
    img[192:288, 192:288] = img[32:128, 32:128]
    save_png(Raster(img), root / "forged" / "f.png")
    save_png(Raster(np.full((64, 64, 1), 0.5)), root / "pristine" / "p.png")

    summary_path = tmp_path / "summary.json"
    reports_dir = tmp_path / "reports"
    code = main(
        ["evaluate", str(root), "--summary", str(summary_path),
         "--reports-dir", str(reports_dir)]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "true detection rate 100.0%" in out
    assert "false detection rate 0.0%" in out
    doc = json.loads(summary_path.read_text())
    assert doc["forged_flagged"] == 1 and doc["pristine_flagged"] == 0
    assert len(list(reports_dir.glob("*.json"))) == 3  # 2 images + summary


def test_evaluate_empty_dataset_exits_2(tmp_path, capsys):
    empty = tmp_path / "void"
    empty.mkdir()
    assert main(["evaluate", str(empty)]) == 2
    assert "empty dataset" in capsys.readouterr().err
