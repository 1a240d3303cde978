import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import data_path
from finer import checkpoint
from finer.cli import main
from finer.config import parse_config
from finer.errors import ConfigError
from finer.images import load_image, save_image


@pytest.fixture
def small_png(tmp_path):
    path = tmp_path / "small.png"
    save_image(load_image(data_path("astronaut.png")).data[::2, ::2], path)
    return str(path)


def test_fit_image_defaults():
    cfg = parse_config({}, task="fit-image", overrides={"image.path": "x.png"})
    assert cfg["network.hidden"] == [256, 256, 256]
    assert cfg["activation.omega0"] == 30.0
    assert cfg["init.k"] == pytest.approx(1 / math.sqrt(2))
    assert cfg["activation.family"] == "finer" and cfg["optim.lr"] == 1e-4


def test_sdf_defaults():
    cfg = parse_config(task="fit-sdf")
    assert cfg["init.k"] == 1.0 and cfg["optim.iters"] == 20000 and cfg["sdf.eval_res"] == 128


def test_negative_k_names_key():
    with pytest.raises(ConfigError) as info:
        parse_config({"init": {"k": -1}}, task="ntk")
    assert info.value.key == "init.k" and "init.k" in str(info.value)


def test_flag_beats_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"task": "ntk", "init": {"k": 1.0}}))
    assert parse_config(str(path))["init.k"] == 1.0
    assert parse_config(str(path), {"init.k": 2.0})["init.k"] == 2.0


@pytest.mark.parametrize("data,key", [
    ({"init": {"kk": 1}}, "init.kk"),
    ({"bogus": 1}, "bogus"),
    ({"activation": {"omega0": 0}}, "activation.omega0"),
    ({"activation": {"family": "wire"}}, "activation.family"),
    ({"network": {"hidden": [64, 0]}}, "network.hidden.1"),
    ({"optim": {"iters": 0}}, "optim.iters"),
    ({"optim": "fast"}, "optim"),
    ({"ntk": {"k_sweep": [1, -5]}}, "ntk.k_sweep.1"),
])
def test_validation_errors(data, key):
    with pytest.raises(ConfigError) as info:
        parse_config(data, task="ntk")
    assert info.value.key == key


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"task": "ntk",')
    with pytest.raises(ConfigError, match="malformed JSON"):
        parse_config(str(path))


def test_task_requirements():
    with pytest.raises(ConfigError) as info:
        parse_config(task="fit-image")
    assert info.value.key == "image.path"
    with pytest.raises(ConfigError):
        parse_config(task="eval")
    with pytest.raises(ConfigError):
        parse_config({"activation": {"family": "sine"}}, task="ntk")


def run_cli(*args):
    return main([str(a) for a in args])


def test_fit_image_artifacts(tmp_path, small_png, capsys):
    out = tmp_path / "runs"
    code = run_cli("fit-image", "--image", small_png, "--out", out, "--iters", 5, "--hidden", "16,16",
                   "--seed", 3)
    assert code == 0
    run = out / "fit-image-3"
    assert sorted(os.listdir(run)) == ["log.csv", "model.ckpt", "recon.png", "summary.json"]
    summary = json.loads((run / "summary.json").read_text())
    assert summary["config"]["optim"]["iters"] == 5 and summary["config"]["seed"] == 3
    assert set(summary["metrics"]) >= {"psnr", "ssim"}
    assert (run / "log.csv").read_text().splitlines()[0] == "iter,loss,ms,psnr"
    assert json.loads(capsys.readouterr().out)["out"] == str(run)
    # collision policy
    assert run_cli("fit-image", "--image", small_png, "--out", out, "--iters", 5, "--hidden", "16,16",
                   "--seed", 3) == 3
    assert run_cli("fit-image", "--image", small_png, "--out", out, "--iters", 5, "--hidden", "16,16",
                   "--seed", 3, "--force") == 0
    # eval recomputes the metrics from the checkpoint
    assert run_cli("eval", "--checkpoint", run / "model.ckpt", "--image", small_png, "--out", out) == 0
    ev = json.loads((out / "eval-0" / "summary.json").read_text())
    assert ev["metrics"]["psnr"] == pytest.approx(summary["metrics"]["psnr"], abs=1e-12)


def test_identical_configs_give_identical_bytes(tmp_path, small_png):
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}"
        assert run_cli("fit-image", "--image", small_png, "--out", out, "--iters", 10,
                       "--hidden", "16,16", "--activation", "sine") == 0
        outs.append(out / "fit-image-0")
    for name in ("log.csv", "model.ckpt", "recon.png"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_wallclock_flag(tmp_path, small_png):
    assert run_cli("fit-image", "--image", small_png, "--out", tmp_path, "--iters", 3,
                   "--hidden", "8", "--log-wallclock") == 0
    rows = (tmp_path / "fit-image-0" / "log.csv").read_text().splitlines()[1:]
    assert all(r.split(",")[2] != "" for r in rows)
    assert "runtime_s" in json.loads((tmp_path / "fit-image-0" / "summary.json").read_text())


def test_ntk_sweep(tmp_path):
    cfg = tmp_path / "ntk.json"
    cfg.write_text(json.dumps({"ntk": {"coords": 16, "ensemble": 4}}))
    assert run_cli("ntk", "--config", cfg, "--out", tmp_path) == 0
    files = sorted(os.listdir(tmp_path / "ntk-0"))
    assert files == ["kernel_k1.png", "kernel_k20.png", "kernel_k5.png", "spectrum.csv", "summary.json"]
    lines = (tmp_path / "ntk-0" / "spectrum.csv").read_text().splitlines()
    assert len(lines) == 1 + 3 * 16


def test_freq_map(tmp_path):
    assert run_cli("freq-map", "--out", tmp_path, "--hidden", "32", "--k", 1.0) == 0
    lines = (tmp_path / "freq-map-0" / "freq.csv").read_text().splitlines()
    assert lines[0] == "neuron,frequency" and len(lines) == 33


def test_render_ray(tmp_path):
    cfg = tmp_path / "ray.json"
    cfg.write_text(json.dumps({"render": {"colors": [[1, 0, 0], [0, 0, 1]],
                                          "sigmas": [math.log(2)] * 2, "deltas": [1, 1]}}))
    assert run_cli("render-ray", "--config", cfg, "--out", tmp_path) == 0
    color = json.loads((tmp_path / "render-ray-0" / "summary.json").read_text())["metrics"]["color"]
    np.testing.assert_allclose(color, [0.5, 0, 0.25], atol=1e-12)


def test_fit_sdf_and_eval(tmp_path):
    assert run_cli("fit-sdf", "--out", tmp_path, "--iters", 20, "--hidden", "32,32", "--batch", 512,
                   "--eval-res", 16, "--omega0", 10) == 0
    run = tmp_path / "fit-sdf-0"
    assert {"mesh.obj", "lattice.raw", "lattice.raw.json", "log.csv", "model.ckpt",
            "summary.json"} <= set(os.listdir(run))
    metrics = json.loads((run / "summary.json").read_text())["metrics"]
    assert 0.0 <= metrics["iou"] <= 1.0
    mlp = checkpoint.load(run / "model.ckpt")
    assert mlp.in_features == 3
    assert run_cli("eval", "--checkpoint", run / "model.ckpt", "--eval-res", 16, "--out", tmp_path) == 0
    ev = json.loads((tmp_path / "eval-0" / "summary.json").read_text())["metrics"]
    assert ev["iou"] == metrics["iou"]


def test_exit_codes(tmp_path, capsys):
    assert run_cli("fit-image", "--out", tmp_path) == 2
    assert "image.path" in capsys.readouterr().err
    assert run_cli("fit-image", "--image", tmp_path / "missing.png", "--out", tmp_path) == 4
    assert run_cli("ntk", "--k", -1, "--out", tmp_path) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert run_cli("ntk", "--config", bad, "--out", tmp_path) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "finer", "ntk", "--out", str(tmp_path), "--hidden", "8"],
                          capture_output=True, text=True, env={**os.environ, "FINER_DISABLE_NUMBA": "1"},
                          input="")
    # default ensemble 256 at 64 coords runs in a few seconds on the numpy path
    assert proc.returncode == 0, proc.stderr
    assert "diagonal_energy" in proc.stdout
